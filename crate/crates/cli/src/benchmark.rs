use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mixgrad::simulate::{
    benchmark_sweep, summarize, BenchMethod, BenchRecord, SummaryRow, SweepConfig,
};
use serde::{Deserialize, Serialize};

use crate::args::BenchmarkArgs;
use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::{Invocation, Manifest};

pub const HEADER: &str = "n,p,K,seed,method,loglik,ari,iters,wall_ms,converged,status";
pub const SUMMARY_HEADER: &str =
    "p,K,n,method,count,loglik_min,loglik_q1,loglik_median,loglik_q3,loglik_max,ari_median,iters_median";

/// Sidecar written next to the results CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchDocument {
    pub config: SweepConfig,
    pub manifest: Manifest,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.csv")
}

pub fn sweep_config(args: &BenchmarkArgs) -> CliResult<SweepConfig> {
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<BenchMethod>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut cfg = SweepConfig::new(
        args.n.clone(),
        args.p.clone(),
        args.k.clone(),
        (0..args.seeds).collect(),
        methods,
    );
    cfg.scale = args.scale;
    cfg.gd.lr = args.lr;
    cfg.adam.lr = args.lr;
    for opt in [&mut cfg.gd, &mut cfg.adam, &mut cfg.newton_cg] {
        opt.max_iter = args.max_iter;
        opt.tol = args.tol;
    }
    cfg.em.max_iter = args.max_iter;
    cfg.em.tol = args.tol;
    cfg.validate()?;
    Ok(cfg)
}

pub fn format_records(records: &[BenchRecord]) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in records {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:.3},{},{}",
            r.n,
            r.p,
            r.k,
            r.seed,
            r.method,
            io::num(r.loglik),
            io::num(r.ari),
            r.iters,
            r.wall_ms,
            r.converged,
            r.status.replace([',', '\n'], ";")
        )
        .expect("write to string");
    }
    s
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.p,
            r.k,
            r.n,
            r.method,
            r.count,
            r.loglik_min,
            r.loglik_q1,
            r.loglik_median,
            r.loglik_q3,
            r.loglik_max,
            r.ari_median,
            r.iters_median
        )
        .expect("write to string");
    }
    s
}

pub fn run(args: &BenchmarkArgs, out: &Path, summary: Option<&Path>) -> CliResult<()> {
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let cfg = sweep_config(args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", args.jobs)))?;
    log::info!(
        "running {} fits on {} threads",
        cfg.ns.len() * cfg.ps.len() * cfg.ks.len() * cfg.seeds.len() * cfg.methods.len(),
        args.jobs
    );
    let records = pool.install(|| benchmark_sweep(&cfg))?;
    let failures = records.iter().filter(|r| r.status != "ok").count();
    if failures > 0 {
        log::warn!(
            "{failures} of {} fits did not finish cleanly",
            records.len()
        );
    }

    io::write(out, format_records(&records))?;
    if let Some(path) = summary {
        io::write(path, format_summary(&summarize(&records)))?;
    }
    let doc = BenchDocument {
        config: cfg,
        manifest: Manifest::new(Invocation::Benchmark(args.clone()), None),
    };
    io::write(&manifest_path(out), io::to_json(&doc))
}
