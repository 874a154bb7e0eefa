mod adbench;
mod args;
mod benchmark;
mod error;
mod fit;
mod io;
mod manifest;
mod simulate;

use std::process::ExitCode;

use clap::Parser;
use log::LevelFilter;

use args::{Cli, Command, ReplayArgs};
use error::{CliError, CliResult};
use manifest::{Invocation, Manifest};

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => LevelFilter::Error,
        (false, 0) => LevelFilter::Warn,
        (false, 1) => LevelFilter::Info,
        (false, 2) => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
}

fn replay(args: &ReplayArgs) -> CliResult<()> {
    let manifest = Manifest::from_document(&args.document)?;
    log::info!("replaying {:?}", manifest.invocation);
    let out = args.out.as_deref();
    match &manifest.invocation {
        Invocation::Fit(a) => {
            let current = io::sha256_hex(&std::fs::read(&a.data).map_err(CliError::io(&a.data))?);
            if manifest.data_sha256.as_deref() != Some(current.as_str()) {
                return Err(CliError::Usage(format!(
                    "{} has changed since the recorded run",
                    a.data.display()
                )));
            }
            fit::run(a, out.unwrap_or(&a.out))
        }
        Invocation::Simulate(a) => simulate::run(a, out.unwrap_or(&a.out)),
        Invocation::Benchmark(a) => {
            let summary = match out {
                Some(o) => a.summary.as_ref().map(|_| benchmark::summary_path(o)),
                None => a.summary.clone(),
            };
            benchmark::run(a, out.unwrap_or(&a.out), summary.as_deref())
        }
        Invocation::Adbench(a) => {
            let mut a = a.clone();
            if out.is_some() {
                a.out = out.map(Into::into);
            }
            adbench::run(&a)
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Fit(a) => fit::run(a, &a.out),
        Command::Simulate(a) => simulate::run(a, &a.out),
        Command::Benchmark(a) => benchmark::run(a, &a.out, a.summary.as_deref()),
        Command::Adbench(a) => adbench::run(a),
        Command::Replay(a) => replay(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        super::Cli::command().debug_assert();
    }
}
