use std::path::{Path, PathBuf};

use mixgrad::simulate::{sample_mixture, SimSpec};
use mixgrad::MixtureParams;
use serde::{Deserialize, Serialize};

use crate::args::SimulateArgs;
use crate::error::CliResult;
use crate::io;
use crate::manifest::{Invocation, Manifest};

/// Written to `STEM.json`; the points go to `STEM.csv`, features first and the
/// label last.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimDocument {
    pub spec: SimSpec,
    pub truth: MixtureParams,
    pub manifest: Manifest,
}

fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

pub fn run(args: &SimulateArgs, stem: &Path) -> CliResult<()> {
    let spec = SimSpec {
        n: args.n,
        p: args.p,
        k: args.k,
        scale: args.scale,
        seed: args.seed,
        covariance_mode: args.cov.parse()?,
        imbalance: args.imbalance,
        noise_features: args.noise_features,
    };
    let sim = sample_mixture(&spec)?;
    let csv_path = with_suffix(stem, ".csv");
    let csv = io::format_rows(&sim.data, sim.data.labels());
    let doc = SimDocument {
        spec,
        truth: sim.truth,
        manifest: Manifest::new(
            Invocation::Simulate(args.clone()),
            Some(io::sha256_hex(csv.as_bytes())),
        ),
    };
    io::write(&csv_path, &csv)?;
    io::write(&with_suffix(stem, ".json"), io::to_json(&doc))?;
    log::info!("wrote {} rows to {}", spec.n, csv_path.display());
    Ok(())
}
