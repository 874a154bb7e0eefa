use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::args::{AdbenchArgs, BenchmarkArgs, FitArgs, SimulateArgs};
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "mixgrad";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The full invocation behind an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "lowercase")]
pub enum Invocation {
    Fit(FitArgs),
    Simulate(SimulateArgs),
    Benchmark(BenchmarkArgs),
    Adbench(AdbenchArgs),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub invocation: Invocation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_sha256: Option<String>,
}

impl Manifest {
    pub fn new(invocation: Invocation, data_sha256: Option<String>) -> Manifest {
        Manifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            invocation,
            data_sha256,
        }
    }

    /// Reads the `manifest` field of any document this tool writes.
    pub fn from_document(path: &Path) -> CliResult<Manifest> {
        #[derive(Deserialize)]
        struct Doc {
            manifest: Manifest,
        }
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let doc: Doc = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.into(),
            line: e.line(),
            column: e.column(),
            message: format!("not a mixgrad document: {e}"),
        })?;
        if doc.manifest.tool != TOOL {
            return Err(CliError::Usage(format!(
                "document was written by {:?}",
                doc.manifest.tool
            )));
        }
        if doc.manifest.version != VERSION {
            log::warn!(
                "document was written by version {}, replaying with {}",
                doc.manifest.version,
                VERSION
            );
        }
        Ok(doc.manifest)
    }
}
