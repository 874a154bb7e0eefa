use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use mixgrad::autodiff::demos::{logistic_closed_form, logistic_map_grad, nested_sigmoid_grad};
use mixgrad::autodiff::gradcheck::check_random_expressions;
use serde::{Deserialize, Serialize};

use crate::args::{AdbenchArgs, Demo};
use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::{Invocation, Manifest};

/// Sidecar next to `--out`. The sigmoid-chain timings will differ on replay.
#[derive(Debug, Serialize, Deserialize)]
pub struct AdbenchDocument {
    pub manifest: Manifest,
}

pub const SIGMOID_DEPTHS: [usize; 6] = [1, 5, 10, 50, 100, 200];
pub const GRADCHECK_TOL: f64 = 1e-5;
const LOGISTIC_X: f64 = 0.3;

/// `n = 1, 2, 3, 4`, then powers of ten up to `n_max`.
fn logistic_sizes(n_max: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (1..=4).filter(|&n| n <= n_max).collect();
    let mut n = 10;
    while n <= n_max {
        sizes.push(n);
        n *= 10;
    }
    if n_max > 4 && sizes.last() != Some(&n_max) {
        sizes.push(n_max);
    }
    sizes
}

fn logistic(args: &AdbenchArgs) -> CliResult<String> {
    let mut s = String::from("n,value,derivative,tape_len,closed_value,closed_derivative\n");
    for n in logistic_sizes(args.n_max) {
        let (v, d, len) = logistic_map_grad(LOGISTIC_X, n).map_err(mixgrad::Error::from)?;
        let (cv, cd) = logistic_closed_form(LOGISTIC_X, n).unwrap_or((f64::NAN, f64::NAN));
        writeln!(
            s,
            "{n},{},{},{len},{},{}",
            io::num(v),
            io::num(d),
            io::num(cv),
            io::num(cd)
        )
        .expect("write to string");
    }
    Ok(s)
}

fn sigmoid_chain(args: &AdbenchArgs) -> CliResult<String> {
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let mut s = String::from("n,reps,total_ms,per_eval_us,value,derivative\n");
    for n in SIGMOID_DEPTHS {
        let (v, d) = nested_sigmoid_grad(0.5, n).map_err(mixgrad::Error::from)?;
        let start = Instant::now();
        for _ in 0..args.reps {
            black_box(nested_sigmoid_grad(black_box(0.5), n).map_err(mixgrad::Error::from)?);
        }
        let ms = start.elapsed().as_secs_f64() * 1e3;
        writeln!(
            s,
            "{n},{},{ms:.3},{:.4},{},{}",
            args.reps,
            ms * 1e3 / args.reps as f64,
            io::num(v),
            io::num(d)
        )
        .expect("write to string");
    }
    Ok(s)
}

pub fn run(args: &AdbenchArgs) -> CliResult<()> {
    let (text, failure) = match args.demo {
        Demo::Logistic => (logistic(args)?, None),
        Demo::SigmoidChain => (sigmoid_chain(args)?, None),
        Demo::Gradcheck => {
            let r = check_random_expressions(args.cases, 8, 3, args.seed)
                .map_err(mixgrad::Error::from)?;
            let pass = r.max_rel_err < GRADCHECK_TOL;
            let text = format!(
                "cases,max_rel_err,pass\n{},{:e},{}\n",
                r.cases, r.max_rel_err, pass
            );
            let failure = (!pass).then(|| {
                format!(
                    "max relative error {:e} exceeds {GRADCHECK_TOL:e}",
                    r.max_rel_err
                )
            });
            (text, failure)
        }
    };
    match &args.out {
        Some(path) => {
            io::write(path, &text)?;
            let doc = AdbenchDocument {
                manifest: Manifest::new(Invocation::Adbench(args.clone()), None),
            };
            io::write(&path.with_extension("manifest.json"), io::to_json(&doc))?;
        }
        None => print!("{text}"),
    }
    match failure {
        Some(msg) => Err(CliError::Numeric(msg)),
        None => Ok(()),
    }
}
