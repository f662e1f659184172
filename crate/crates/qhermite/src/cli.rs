//! Thin command-line shell over the library.
//!
//! Every numeric output here is obtainable through the public API; the
//! subcommands only parse flags, call the owning module, serialize, and
//! write. Output files are written atomically (temp file + rename).
//! Randomness flows exclusively from `--seed`, which defaults to the fixed
//! constant [`DEFAULT_SEED`] so repeated invocations are byte-identical.
//!
//! Exit codes: 0 on success (and all checks passing), 1 when a
//! verification check fails, 2 on usage or validation errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::chain::{counterexample_ensemble, simulate_chain};
use crate::kernel::{EvaluationMode, TransitionKernel};
use crate::measure::{moments, Measure};
use crate::params::{derive_params, ModelParams};
use crate::qpoly::{Normalization, PolyFamily};
use crate::verify;
use crate::Result;

/// Default seed for every randomized subcommand; fixed, never time-based.
pub const DEFAULT_SEED: u64 = 42;

/// Environment variable that prefixes relative `--out` paths.
pub const OUT_DIR_ENV: &str = "QHERMITE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "qhermite", version, about = "q-Hermite Markov field toolkit")]
pub struct CliConfig {
    /// Output file (stdout when omitted). Relative paths resolve against
    /// $QHERMITE_OUT_DIR when set.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizationArg {
    Monic,
    Orthonormal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Series,
    Product,
    Crosscheck,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive all model coefficients from (rho, R); emits flat JSON.
    Params {
        #[arg(long)]
        rho: f64,
        #[arg(long = "R")]
        scale: f64,
    },
    /// Evaluate the polynomial family on a grid; emits CSV `n,x,Qn`.
    Poly {
        #[arg(long)]
        q: f64,
        #[arg(long, value_enum, default_value_t = NormalizationArg::Monic)]
        normalization: NormalizationArg,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        /// Grid start; defaults to the left support endpoint.
        #[arg(long)]
        x_min: Option<f64>,
        /// Grid end; defaults to the right support endpoint.
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Density and CDF over a grid; emits CSV `x,f,F`.
    Density {
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 512)]
        grid: usize,
    },
    /// Moments m_0..m_n; emits a JSON array.
    Moments {
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 12)]
        n_max: usize,
    },
    /// Pointwise kernel value; emits JSON {value, method, truncation, residual}.
    Kernel {
        #[arg(long)]
        rho: f64,
        /// Scale parameter; exactly one of --R / --q is required.
        #[arg(long = "R", conflicts_with = "q")]
        scale: Option<f64>,
        /// Shape parameter; exactly one of --R / --q is required.
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Crosscheck)]
        method: MethodArg,
    },
    /// Simulate the stationary chain; emits CSV `step,value`.
    Simulate {
        #[arg(long)]
        rho: f64,
        #[arg(long = "R")]
        scale: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Simulate the mixture counterexample field; emits CSV `rep,step,value`.
    Counterexample {
        #[arg(long)]
        rho: f64,
        /// Mixing weight on the periodic two-valued component.
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 4)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Simulate and verify every conditional-moment identity; emits a JSON
    /// report and exits 0 iff all checks pass.
    Verify {
        #[arg(long)]
        rho: f64,
        #[arg(long = "R")]
        scale: f64,
        #[arg(long, default_value_t = 1_000_000)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

struct Output {
    text: String,
    check_failed: bool,
}

/// Run a parsed configuration to completion and return the process exit
/// code.
pub fn run(config: CliConfig) -> i32 {
    match execute(&config.command) {
        Ok(output) => {
            if let Err(e) = write_output(config.out.as_deref(), &output.text) {
                eprintln!("qhermite: {e}");
                return 2;
            }
            if output.check_failed {
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("qhermite: {e}");
            2
        }
    }
}

fn execute(command: &Command) -> Result<Output> {
    let text = match command {
        Command::Params { rho, scale } => {
            let params = derive_params(*rho, *scale)?;
            to_json(&params)?
        }
        Command::Poly {
            q,
            normalization,
            n_max,
            x_min,
            x_max,
            grid,
        } => {
            let norm = match normalization {
                NormalizationArg::Monic => Normalization::Monic,
                NormalizationArg::Orthonormal => Normalization::Orthonormal,
            };
            let fam = PolyFamily::with_max_degree(*q, norm, *n_max)?;
            let half = if *q >= 1.0 { 4.0 } else { 2.0 / (1.0 - q).sqrt() };
            let lo = x_min.unwrap_or(-half);
            let hi = x_max.unwrap_or(half);
            let mut text = String::from("n,x,Qn\n");
            for n in 0..=*n_max {
                for i in 0..*grid {
                    let x = if *grid == 1 {
                        lo
                    } else {
                        lo + (hi - lo) * i as f64 / (*grid - 1) as f64
                    };
                    writeln!(text, "{n},{x},{}", fam.eval(n, x)?).expect("string write");
                }
            }
            text
        }
        Command::Density { q, grid } => {
            let measure = Measure::new(*q)?;
            let half = if measure.support_halfwidth().is_finite() {
                measure.support_halfwidth()
            } else {
                5.0
            };
            let mut text = String::from("x,f,F\n");
            for i in 0..*grid {
                let x = if *grid == 1 {
                    -half
                } else {
                    -half + 2.0 * half * i as f64 / (*grid - 1) as f64
                };
                writeln!(text, "{x},{},{}", measure.density(x), measure.cdf(x))
                    .expect("string write");
            }
            text
        }
        Command::Moments { q, n_max } => to_json(&moments(*q, *n_max)?)?,
        Command::Kernel {
            rho,
            scale,
            q,
            x,
            y,
            method,
        } => {
            let params = match (scale, q) {
                (Some(scale), None) => derive_params(*rho, *scale)?,
                (None, Some(q)) => ModelParams::from_rho_q(*rho, *q)?,
                _ => {
                    return Err(crate::Error::InvalidR(f64::NAN));
                }
            };
            let mode = match method {
                MethodArg::Series => EvaluationMode::Series,
                MethodArg::Product => EvaluationMode::Product,
                MethodArg::Crosscheck => EvaluationMode::CrossCheck,
            };
            let kernel = TransitionKernel::new(&params, mode)?;
            to_json(&kernel.evaluate(*x, *y)?)?
        }
        Command::Simulate {
            rho,
            scale,
            steps,
            seed,
        } => {
            let params = derive_params(*rho, *scale)?;
            let run = simulate_chain(&params, *steps, *seed)?;
            let mut text = String::from("step,value\n");
            for (step, v) in run.values.iter().enumerate() {
                writeln!(text, "{step},{v}").expect("string write");
            }
            text
        }
        Command::Counterexample {
            rho,
            a,
            steps,
            reps,
            seed,
        } => {
            let runs = counterexample_ensemble(*rho, *a, *steps, *reps, *seed)?;
            let mut text = String::from("rep,step,value\n");
            for (rep, run) in runs.iter().enumerate() {
                for (step, v) in run.values.iter().enumerate() {
                    writeln!(text, "{rep},{step},{v}").expect("string write");
                }
            }
            text
        }
        Command::Verify {
            rho,
            scale,
            steps,
            seed,
        } => {
            let params = derive_params(*rho, *scale)?;
            let report = verify::run_full(&params, *steps, *seed)?;
            let failed = !report.all_pass;
            return Ok(Output {
                text: to_json(&report)?,
                check_failed: failed,
            });
        }
    };
    Ok(Output {
        text,
        check_failed: false,
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(format!("{}\n", serde_json::to_string_pretty(value)?))
}

fn resolve_out_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir).join(path);
            }
        }
    }
    path.to_path_buf()
}

fn write_output(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let resolved = resolve_out_path(path);
            if let Some(dir) = resolved.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            let mut tmp = resolved.clone().into_os_string();
            tmp.push(".tmp");
            let tmp = PathBuf::from(tmp);
            std::fs::write(&tmp, text)?;
            std::fs::rename(&tmp, &resolved)?;
            Ok(())
        }
    }
}
