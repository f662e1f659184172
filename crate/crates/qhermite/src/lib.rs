//! Stationary Markov random fields with linear conditional means and
//! quadratic conditional variances.
//!
//! The model family is indexed by two parameters: the one-step correlation
//! `rho` in (-1,1)\{0} and a scale parameter `R` in [0,2]. Together they
//! determine a shape parameter `q` in [-1,1], and with it
//!
//! * a family of orthogonal polynomials (continuous q-Hermite, [`qpoly`]),
//! * their orthogonality measure (two-point at q=-1, semicircle at q=0,
//!   Gaussian at q=1, compactly supported in between; [`measure`]),
//! * a Mehler-type Markov transition kernel with the polynomials as
//!   eigenfunctions ([`kernel`]),
//! * samplers for the stationary chain and for a mixture field that
//!   satisfies the same nearest-neighbour moment identities while breaking
//!   the global conclusions ([`chain`]),
//! * and a statistical verification engine that turns simulated
//!   trajectories into residual reports for every identity ([`verify`]).
//!
//! The crate is library-first: each major capability has a runnable
//! example under `examples/`, and a single thin binary (`qhermite`) exposes
//! the same operations as subcommands for scripting.

pub mod chain;
pub mod cli;
pub mod kernel;
pub mod measure;
pub mod params;
pub mod qpoly;
pub mod verify;

pub use chain::{simulate_chain, simulate_counterexample, ChainRun, CounterexampleRun};
pub use kernel::{kernel_product, kernel_series, EvaluationMode, TransitionKernel};
pub use measure::{build_quadrature, Measure, QuadratureRule};
pub use params::{derive_params, solve_correlations, Boundedness, ModelParams};
pub use qpoly::{Normalization, PolyFamily};
pub use verify::VerifyReport;

/// q at or above this threshold is treated as the Gaussian endpoint.
pub const Q_GAUSSIAN_THRESHOLD: f64 = 1.0 - 1e-6;

/// q at or below this threshold is treated as the two-point endpoint.
pub const Q_TWO_POINT_THRESHOLD: f64 = -1.0 + 1e-6;

/// Errors shared by all modules of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid rho = {0}: requires 0 < |rho| < 1 (rho != 0 excludes i.i.d. sequences)")]
    InvalidRho(f64),
    #[error("invalid R = {0}: requires 0 <= R <= 2 (q stays in [-1,1])")]
    InvalidR(f64),
    #[error("invalid (rho, r2) = ({rho}, {r2}): requires r_2+1-2|rho|>0")]
    CorrelationAssumption { rho: f64, r2: f64 },
    #[error("invalid A = {a} for rho = {rho}: requires A < 1/(1+rho^2)")]
    RegressionCoefficient { a: f64, rho: f64 },
    #[error("degree {requested} exceeds max_degree {max}")]
    DegreeOverflow { requested: usize, max: usize },
    #[error("q = {q} unsupported here: requires {requirement}")]
    UnsupportedQ { q: f64, requirement: &'static str },
    #[error("quadrature order {order} too small: requires order >= {needed}")]
    QuadratureOrder { order: usize, needed: usize },
    #[error("kernel series diverged (partial sum {0:e}); (q, rho) outside validity")]
    KernelDiverged(f64),
    #[error("rejection sampler stalled after {0} consecutive rejections; envelope bound broken")]
    RejectionStalled(u64),
    #[error("run of length {len} too short: requires at least {required} steps")]
    InsufficientLength { len: usize, required: usize },
    #[error("invalid mixing weight a = {0}: requires 0 <= a <= 1")]
    InvalidMixingWeight(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
