//! Samplers for the stationary Markov chain and for the periodic/Gaussian
//! mixture field that satisfies the same nearest-neighbour moment
//! identities while its correlations refuse to decay.
//!
//! The chain dispatches on the branch of the family: the q = -1 member is
//! the exact two-state chain with stay probability `(1+rho)/2`, the q = 1
//! member the Gaussian AR(1), and the interior members draw each transition
//! by rejection against the stationary law with a grid-precomputed kernel
//! supremum as the envelope bound. All randomness flows from the explicit
//! seed; identical seeds give bit-identical runs.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::ProductCache;
use crate::measure::Measure;
use crate::params::ModelParams;
use crate::{Error, Result};

/// Safety factor applied on top of the grid-estimated kernel supremum.
const ENVELOPE_SAFETY: f64 = 1.1;
/// Initial resolution of the envelope grid (both axes).
const ENVELOPE_GRID: usize = 1024;
/// Abort after this many consecutive rejections.
const REJECTION_GUARD: u64 = 1_000_000;

/// Which sampler produced a [`ChainRun`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    TwoState,
    Gaussian,
    RejectionKernel,
}

/// A simulated stationary trajectory with its seed metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainRun {
    pub params: ModelParams,
    pub length: usize,
    pub seed: u64,
    pub sampler_kind: SamplerKind,
    pub values: Vec<f64>,
}

/// The mixture field `Z_k = a xi_k + b gamma_k`: a frozen 2-periodic
/// two-valued pair plus an independent Gaussian AR(1) with coefficient
/// `r = (1 - sqrt(1-rho^2))/rho` and unit marginal variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterexampleRun {
    pub rho: f64,
    /// Weight `a` on the periodic two-valued component.
    pub mixing_weight: f64,
    /// Weight `b = sqrt(1-a^2)` on the Gaussian component.
    pub gaussian_weight: f64,
    /// AR(1) coefficient of the Gaussian component.
    pub ar_coeff: f64,
    /// The frozen two-valued pair (xi_0, xi_1); extended 2-periodically.
    pub xi_pair: (f64, f64),
    pub length: usize,
    pub seed: u64,
    pub values: Vec<f64>,
}

/// Rejection machinery for one interior-branch kernel.
struct RejectionSampler {
    cache: ProductCache,
    measure: Measure,
    half: f64,
    grid: usize,
    /// Grid supremum of K(x, .) per x node (raw, before the safety factor).
    sup: Vec<f64>,
}

impl RejectionSampler {
    fn new(params: &ModelParams, measure: Measure) -> Self {
        let cache = ProductCache::new(params.q, params.rho);
        let half = measure.support_halfwidth();
        let mut sampler = Self {
            cache,
            measure,
            half,
            grid: ENVELOPE_GRID,
            sup: Vec::new(),
        };
        sampler.build_bound();
        sampler
    }

    fn build_bound(&mut self) {
        let n = self.grid;
        let mut sup = vec![0.0f64; n];
        for (i, s) in sup.iter_mut().enumerate() {
            let x = -self.half + 2.0 * self.half * i as f64 / (n - 1) as f64;
            let mut m: f64 = 0.0;
            for j in 0..n {
                let y = -self.half + 2.0 * self.half * j as f64 / (n - 1) as f64;
                m = m.max(self.cache.value(x, y));
            }
            *s = m;
        }
        self.sup = sup;
    }

    fn bound(&self, x: f64) -> f64 {
        let t = (x + self.half) / (2.0 * self.half) * (self.grid - 1) as f64;
        let i = (t.floor() as usize).min(self.grid - 2);
        self.sup[i].max(self.sup[i + 1]) * ENVELOPE_SAFETY
    }

    fn step(&mut self, x: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let mut rejections: u64 = 0;
        loop {
            let bound = self.bound(x);
            let y = self.measure.inverse_cdf(rng.random());
            let k = self.cache.value(x, y);
            if k > bound {
                // Observed ratio exceeded the envelope: the grid was too
                // coarse. Rebuild finer and redo the step.
                self.grid *= 2;
                self.build_bound();
                continue;
            }
            if rng.random::<f64>() * bound <= k {
                return Ok(y);
            }
            rejections += 1;
            if rejections >= REJECTION_GUARD {
                return Err(Error::RejectionStalled(rejections));
            }
        }
    }
}

/// Simulate `length` steps of the stationary chain: `X_0 ~ mu`,
/// `X_{n+1} ~ K(X_n, .) mu`.
pub fn simulate_chain(params: &ModelParams, length: usize, seed: u64) -> Result<ChainRun> {
    if length < 1 {
        return Err(Error::InsufficientLength {
            len: length,
            required: 1,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(length);
    let sampler_kind;
    if params.is_two_point() {
        sampler_kind = SamplerKind::TwoState;
        let stay = (1.0 + params.rho) / 2.0;
        let mut x: f64 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        values.push(x);
        for _ in 1..length {
            if rng.random::<f64>() >= stay {
                x = -x;
            }
            values.push(x);
        }
    } else if params.is_gaussian() {
        sampler_kind = SamplerKind::Gaussian;
        let innovation = (1.0 - params.rho * params.rho).sqrt();
        let mut x: f64 = rng.sample(rand_distr::StandardNormal);
        values.push(x);
        for _ in 1..length {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            x = params.rho * x + innovation * z;
            values.push(x);
        }
    } else {
        sampler_kind = SamplerKind::RejectionKernel;
        let measure = Measure::new(params.q)?;
        let mut sampler = RejectionSampler::new(params, measure);
        let mut x = sampler.measure.inverse_cdf(rng.random());
        values.push(x);
        for _ in 1..length {
            x = sampler.step(x, &mut rng)?;
            values.push(x);
        }
    }
    Ok(ChainRun {
        params: params.clone(),
        length,
        seed,
        sampler_kind,
        values,
    })
}

/// Simulate the mixture field `Z_k = a xi_k + b gamma_k`.
///
/// The two-valued pair is drawn once from the joint law
/// `P(equal signs) = (1+rho)/2`, split evenly between (+,+) and (-,-), and
/// then frozen; it is 2-periodic and not ergodic, so ensemble statistics
/// need replications ([`counterexample_ensemble`]).
pub fn simulate_counterexample(
    rho: f64,
    mixing_weight: f64,
    length: usize,
    seed: u64,
) -> Result<CounterexampleRun> {
    if !(rho.abs() < 1.0) || rho == 0.0 {
        return Err(Error::InvalidRho(rho));
    }
    if !(0.0..=1.0).contains(&mixing_weight) {
        return Err(Error::InvalidMixingWeight(mixing_weight));
    }
    if length < 1 {
        return Err(Error::InsufficientLength {
            len: length,
            required: 1,
        });
    }
    let a = mixing_weight;
    let b = (1.0 - a * a).sqrt();
    let r = (1.0 - (1.0 - rho * rho).sqrt()) / rho;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.random();
    let xi_pair = if u < (1.0 + rho) / 4.0 {
        (1.0, 1.0)
    } else if u < (1.0 + rho) / 2.0 {
        (-1.0, -1.0)
    } else if u < (1.0 + rho) / 2.0 + (1.0 - rho) / 4.0 {
        (1.0, -1.0)
    } else {
        (-1.0, 1.0)
    };

    let innovation = (1.0 - r * r).sqrt();
    let mut gamma: f64 = rng.sample(rand_distr::StandardNormal);
    let mut values = Vec::with_capacity(length);
    for k in 0..length {
        let xi = if k % 2 == 0 { xi_pair.0 } else { xi_pair.1 };
        values.push(a * xi + b * gamma);
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        gamma = r * gamma + innovation * z;
    }
    Ok(CounterexampleRun {
        rho,
        mixing_weight: a,
        gaussian_weight: b,
        ar_coeff: r,
        xi_pair,
        length,
        seed,
        values,
    })
}

/// Independent replications of the mixture field with derived seeds.
pub fn counterexample_ensemble(
    rho: f64,
    mixing_weight: f64,
    length: usize,
    replications: usize,
    seed: u64,
) -> Result<Vec<CounterexampleRun>> {
    (0..replications)
        .map(|i| {
            let rep_seed = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            simulate_counterexample(rho, mixing_weight, length, rep_seed)
        })
        .collect()
}
