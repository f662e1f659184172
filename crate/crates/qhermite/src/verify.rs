//! Statistical verification: turns simulated trajectories into residual
//! reports for the model's conditional-moment identities.
//!
//! Each identity is checked through its orthogonality characterization: the
//! conditional-moment residual, multiplied by a dictionary of test
//! functions of the conditioning variables, must average to zero. Every
//! residual is paired with a Monte Carlo standard error (batch means, so
//! serial dependence is priced in) and passes when
//! `|residual| <= 4 * stderr + 1e-3`; the absolute floor absorbs the
//! interpolation bias of the inverse-CDF sampler. Distribution checks use
//! the Kolmogorov-Smirnov statistic with both a raw i.i.d. threshold and a
//! dependence-adjusted one based on `n_eff = n (1-|rho|)/(1+|rho|)`.
//!
//! The mixture counterexample is not ergodic (its two-valued component is
//! frozen), so its estimators pool across independent replications instead
//! of along time; only the two-sided nearest-neighbour forms of the
//! identities are checkable there.

use serde::{Deserialize, Serialize};

use crate::chain::{ChainRun, CounterexampleRun};
use crate::measure::Measure;
use crate::params::ModelParams;
use crate::qpoly::{Normalization, PolyFamily};
use crate::{Error, Result};

/// Absolute verdict floor on dictionary residuals.
const BIAS_FLOOR: f64 = 1e-3;
/// KS critical value at the 1% level: KS_n * sqrt(n) <= 1.63.
const KS_CRITICAL_1PCT: f64 = 1.63;
/// Steps discarded before distribution checks.
const KS_BURN_IN: usize = 5000;

/// One autocorrelation check at a single lag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LagCheck {
    pub lag: usize,
    pub empirical: f64,
    pub target: f64,
    pub stderr: f64,
    /// `|empirical - target| <= 4 stderr`.
    pub pass: bool,
}

/// One test-function residual with its Monte Carlo error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualCheck {
    pub label: String,
    pub residual: f64,
    pub stderr: f64,
    /// `|residual| <= 4 stderr + 1e-3`.
    pub pass: bool,
}

/// Kolmogorov-Smirnov distance with raw and dependence-adjusted verdicts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsCheck {
    pub statistic: f64,
    pub n: usize,
    pub n_eff: f64,
    pub raw_threshold: f64,
    pub adjusted_threshold: f64,
    pub raw_pass: bool,
    pub adjusted_pass: bool,
}

/// Full residual report for one simulated chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub params: ModelParams,
    pub n_samples: usize,
    pub seed: u64,
    pub correlations: Vec<LagCheck>,
    pub conditional_mean: Vec<ResidualCheck>,
    pub conditional_variance: Vec<ResidualCheck>,
    pub single_conditioning: Vec<ResidualCheck>,
    pub distribution: KsCheck,
    pub all_pass: bool,
}

/// One cell of the coarse binned diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinnedCell {
    pub u_center: f64,
    pub v_center: f64,
    pub count: usize,
    pub mean_mid: f64,
    pub predicted: f64,
}

fn verdict(residual: f64, stderr: f64) -> bool {
    residual.abs() <= 4.0 * stderr + BIAS_FLOOR
}

/// Batch length `50/(1-|rho|)`, capped at n/100.
fn batch_len(n: usize, rho: f64) -> usize {
    let raw = (50.0 / (1.0 - rho.abs())).round() as usize;
    raw.clamp(1, (n / 100).max(1))
}

/// Mean and batch-means standard error of a dependent series.
fn batch_mean_stderr(series: &[f64], batch: usize) -> (f64, f64) {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let nb = n / batch;
    if nb < 2 {
        let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        return (mean, (var / n as f64).sqrt());
    }
    let mut batch_means = Vec::with_capacity(nb);
    for b in 0..nb {
        let chunk = &series[b * batch..(b + 1) * batch];
        batch_means.push(chunk.iter().sum::<f64>() / batch as f64);
    }
    let bm = batch_means.iter().sum::<f64>() / nb as f64;
    let var = batch_means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>() / (nb - 1) as f64;
    (mean, (var / nb as f64).sqrt())
}

/// The test-function dictionary over the two conditioning neighbours:
/// `{1, u, v, u^2, uv, v^2}` plus monic `Q_i(u) Q_j(v)` with `i+j <= 4`
/// (skipping products that duplicate a monomial already present).
pub struct Dictionary {
    entries: Vec<(String, Box<dyn Fn(f64, f64) -> f64>)>,
}

impl Dictionary {
    pub fn for_q(q: f64) -> Result<Self> {
        let fam = PolyFamily::with_max_degree(q, Normalization::Monic, 4)?;
        let mut entries: Vec<(String, Box<dyn Fn(f64, f64) -> f64>)> = vec![
            ("1".into(), Box::new(|_, _| 1.0)),
            ("u".into(), Box::new(|u, _| u)),
            ("v".into(), Box::new(|_, v| v)),
            ("u^2".into(), Box::new(|u, _| u * u)),
            ("uv".into(), Box::new(|u, v| u * v)),
            ("v^2".into(), Box::new(|_, v| v * v)),
        ];
        for i in 0..=4usize {
            for j in 0..=(4 - i) {
                // Q_0 = 1 and Q_1 = x duplicate monomial entries.
                if i <= 1 && j <= 1 {
                    continue;
                }
                let fi = fam.clone();
                let fj = fam.clone();
                entries.push((
                    format!("Q{i}(u)Q{j}(v)"),
                    Box::new(move |u, v| {
                        fi.eval(i, u).unwrap_or(f64::NAN) * fj.eval(j, v).unwrap_or(f64::NAN)
                    }),
                ));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Empirical autocorrelations against `rho^k`, with delta-method batch
/// standard errors (the influence series of the ratio estimator).
pub fn check_correlations(run: &ChainRun, k_max: usize) -> Result<Vec<LagCheck>> {
    let values = &run.values;
    let n = values.len();
    if n < 100 * k_max.max(1) {
        return Err(Error::InsufficientLength {
            len: n,
            required: 100 * k_max.max(1),
        });
    }
    let rho = run.params.rho;
    let mean = values.iter().sum::<f64>() / n as f64;
    let c0 = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let batch = batch_len(n, rho);
    let mut out = Vec::with_capacity(k_max + 1);
    for lag in 0..=k_max {
        let m = n - lag;
        let ck = (0..m)
            .map(|i| (values[i] - mean) * (values[i + lag] - mean))
            .sum::<f64>()
            / m as f64;
        let empirical = ck / c0;
        let (stderr, pass);
        if lag == 0 {
            stderr = 0.0;
            pass = true;
        } else {
            let influence: Vec<f64> = (0..m)
                .map(|i| {
                    let du = values[i] - mean;
                    let dv = values[i + lag] - mean;
                    (du * dv - empirical * du * du) / c0
                })
                .collect();
            let (_, se) = batch_mean_stderr(&influence, batch);
            stderr = se;
            pass = (empirical - rho.powi(lag as i32)).abs() <= 4.0 * stderr;
        }
        out.push(LagCheck {
            lag,
            empirical,
            target: rho.powi(lag as i32),
            stderr,
            pass,
        });
    }
    Ok(out)
}

/// Residuals of `E[(X_k - slope (X_{k-1}+X_{k+1})) g(X_{k-1}, X_{k+1})] = 0`
/// for every dictionary entry.
pub fn check_conditional_mean_with(
    values: &[f64],
    slope: f64,
    dict: &Dictionary,
    batch: usize,
) -> Vec<ResidualCheck> {
    dict.entries
        .iter()
        .map(|(label, g)| {
            let series: Vec<f64> = (1..values.len() - 1)
                .map(|k| {
                    let (u, x, v) = (values[k - 1], values[k], values[k + 1]);
                    (x - slope * (u + v)) * g(u, v)
                })
                .collect();
            let (residual, stderr) = batch_mean_stderr(&series, batch);
            ResidualCheck {
                label: label.clone(),
                residual,
                stderr,
                pass: verdict(residual, stderr),
            }
        })
        .collect()
}

/// Conditional-mean residuals for a chain run, using its own slope
/// `a = rho/(1+rho^2)` and its polynomial dictionary.
pub fn check_conditional_mean(run: &ChainRun) -> Result<Vec<ResidualCheck>> {
    require_length(run, 100_000)?;
    let dict = Dictionary::for_q(run.params.q.max(-1.0))?;
    Ok(check_conditional_mean_with(
        &run.values,
        run.params.slope,
        &dict,
        batch_len(run.values.len(), run.params.rho),
    ))
}

/// Residuals of the quadratic conditional-variance identity
/// `E[(X_k^2 - A(u^2+v^2) - B uv - C) g(u,v)] = 0`.
pub fn check_conditional_variance_with(
    values: &[f64],
    quad_diag: f64,
    quad_cross: f64,
    quad_const: f64,
    dict: &Dictionary,
    batch: usize,
) -> Vec<ResidualCheck> {
    dict.entries
        .iter()
        .map(|(label, g)| {
            let series: Vec<f64> = (1..values.len() - 1)
                .map(|k| {
                    let (u, x, v) = (values[k - 1], values[k], values[k + 1]);
                    (x * x - quad_diag * (u * u + v * v) - quad_cross * u * v - quad_const)
                        * g(u, v)
                })
                .collect();
            let (residual, stderr) = batch_mean_stderr(&series, batch);
            ResidualCheck {
                label: label.clone(),
                residual,
                stderr,
                pass: verdict(residual, stderr),
            }
        })
        .collect()
}

/// Conditional-variance residuals for a chain run with its own
/// coefficients.
pub fn check_conditional_variance(run: &ChainRun) -> Result<Vec<ResidualCheck>> {
    require_length(run, 100_000)?;
    let dict = Dictionary::for_q(run.params.q.max(-1.0))?;
    Ok(check_conditional_variance_with(
        &run.values,
        run.params.quad_diag,
        run.params.quad_cross,
        run.params.quad_const,
        &dict,
        batch_len(run.values.len(), run.params.rho),
    ))
}

/// Residuals of the one-sided identities
/// `E[(X_{k+1} - rho X_k) h(X_k)] = 0` and
/// `E[(X_{k+1}^2 - rho^2 X_k^2 - (1-rho^2)) h(X_k)] = 0`
/// for `h` in `{1, x, x^2, Q_3}`.
pub fn check_single_conditioning(run: &ChainRun) -> Result<Vec<ResidualCheck>> {
    require_length(run, 100_000)?;
    let values = &run.values;
    let rho = run.params.rho;
    let fam = PolyFamily::with_max_degree(run.params.q.max(-1.0), Normalization::Monic, 3)?;
    let hs: Vec<(String, Box<dyn Fn(f64) -> f64>)> = vec![
        ("1".into(), Box::new(|_| 1.0)),
        ("x".into(), Box::new(|x| x)),
        ("x^2".into(), Box::new(|x| x * x)),
        (
            "Q3".into(),
            Box::new(move |x| fam.eval(3, x).unwrap_or(f64::NAN)),
        ),
    ];
    let batch = batch_len(values.len(), rho);
    let mut out = Vec::new();
    for (name, h) in &hs {
        let series: Vec<f64> = (0..values.len() - 1)
            .map(|k| (values[k + 1] - rho * values[k]) * h(values[k]))
            .collect();
        let (residual, stderr) = batch_mean_stderr(&series, batch);
        out.push(ResidualCheck {
            label: format!("mean*{name}"),
            residual,
            stderr,
            pass: verdict(residual, stderr),
        });
    }
    let var_target = 1.0 - rho * rho;
    for (name, h) in &hs {
        let series: Vec<f64> = (0..values.len() - 1)
            .map(|k| {
                (values[k + 1] * values[k + 1] - rho * rho * values[k] * values[k] - var_target)
                    * h(values[k])
            })
            .collect();
        let (residual, stderr) = batch_mean_stderr(&series, batch);
        out.push(ResidualCheck {
            label: format!("var*{name}"),
            residual,
            stderr,
            pass: verdict(residual, stderr),
        });
    }
    Ok(out)
}

/// KS distance between the post-burn-in empirical CDF and a reference
/// measure, with raw and dependence-adjusted thresholds.
pub fn check_distribution(run: &ChainRun, measure: &Measure) -> KsCheck {
    ks_check(&run.values, measure, run.params.rho)
}

fn ks_check(values: &[f64], measure: &Measure, rho: f64) -> KsCheck {
    let burn = if values.len() > 2 * KS_BURN_IN {
        KS_BURN_IN
    } else {
        0
    };
    let mut xs: Vec<f64> = values[burn..].to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    // Tie-aware two-sided statistic: for each distinct value v compare the
    // post-jump empirical CDF (count <= v) against F(v) and F(v) against
    // the pre-jump empirical (count < v). Handles the atoms of the
    // two-point branch; reduces to the classic formula for continuous F.
    let mut d: f64 = 0.0;
    let mut i = 0usize;
    while i < n {
        let x = xs[i];
        let mut j = i + 1;
        while j < n && xs[j] == x {
            j += 1;
        }
        let f = measure.cdf(x);
        d = d.max(j as f64 / n as f64 - f);
        d = d.max(f - i as f64 / n as f64);
        i = j;
    }
    let n_eff = n as f64 * (1.0 - rho.abs()) / (1.0 + rho.abs());
    let raw_threshold = KS_CRITICAL_1PCT / (n as f64).sqrt();
    let adjusted_threshold = KS_CRITICAL_1PCT / n_eff.sqrt();
    KsCheck {
        statistic: d,
        n,
        n_eff,
        raw_threshold,
        adjusted_threshold,
        raw_pass: d < raw_threshold,
        adjusted_pass: d < adjusted_threshold,
    }
}

/// Coarse binned conditional-mean diagnostic: mean of the middle value per
/// (u,v) bin against the linear prediction `slope*(u+v)`. Human-readable
/// companion to the residual checks, not a verdict.
pub fn binned_conditional_mean(run: &ChainRun, bins: usize) -> Vec<BinnedCell> {
    let half = if run.params.support_halfwidth.is_finite() {
        run.params.support_halfwidth
    } else {
        4.0
    };
    let values = &run.values;
    let edge = |x: f64| (((x + half) / (2.0 * half) * bins as f64).floor() as usize).min(bins - 1);
    let center = |i: usize| -half + (i as f64 + 0.5) * 2.0 * half / bins as f64;
    let mut sums = vec![0.0f64; bins * bins];
    let mut counts = vec![0usize; bins * bins];
    for k in 1..values.len() - 1 {
        let cell = edge(values[k - 1]) * bins + edge(values[k + 1]);
        sums[cell] += values[k];
        counts[cell] += 1;
    }
    let mut out = Vec::new();
    for i in 0..bins {
        for j in 0..bins {
            let cell = i * bins + j;
            if counts[cell] == 0 {
                continue;
            }
            out.push(BinnedCell {
                u_center: center(i),
                v_center: center(j),
                count: counts[cell],
                mean_mid: sums[cell] / counts[cell] as f64,
                predicted: run.params.slope * (center(i) + center(j)),
            });
        }
    }
    out
}

fn require_length(run: &ChainRun, required: usize) -> Result<()> {
    if run.values.len() < required {
        return Err(Error::InsufficientLength {
            len: run.values.len(),
            required,
        });
    }
    Ok(())
}

/// Simulate one chain and run every check family on it.
pub fn run_full(params: &ModelParams, steps: usize, seed: u64) -> Result<VerifyReport> {
    let run = crate::chain::simulate_chain(params, steps, seed)?;
    report_for(&run)
}

/// All check families for an existing run.
pub fn report_for(run: &ChainRun) -> Result<VerifyReport> {
    let measure = Measure::new(run.params.q)?;
    let correlations = check_correlations(run, 6)?;
    let conditional_mean = check_conditional_mean(run)?;
    let conditional_variance = check_conditional_variance(run)?;
    let single_conditioning = check_single_conditioning(run)?;
    let distribution = check_distribution(run, &measure);
    let all_pass = correlations.iter().all(|c| c.pass)
        && conditional_mean.iter().all(|c| c.pass)
        && conditional_variance.iter().all(|c| c.pass)
        && single_conditioning.iter().all(|c| c.pass)
        && distribution.adjusted_pass;
    Ok(VerifyReport {
        schema_version: 1,
        params: run.params.clone(),
        n_samples: run.length,
        seed: run.seed,
        correlations,
        conditional_mean,
        conditional_variance,
        single_conditioning,
        distribution,
        all_pass,
    })
}

/// Replication-pooled correlation checks for the mixture field, against
/// the mixture target `a^2 corr(xi_0, xi_k) + b^2 r^k` (the periodic factor
/// is 1 at even lags and rho at odd lags). Uncentered estimators: the
/// process mean is 0 by construction, while per-replication time averages
/// are contaminated by the frozen component.
pub fn counterexample_correlations(runs: &[CounterexampleRun], k_max: usize) -> Vec<LagCheck> {
    let a2 = runs[0].mixing_weight * runs[0].mixing_weight;
    let b2 = runs[0].gaussian_weight * runs[0].gaussian_weight;
    let r = runs[0].ar_coeff;
    let rho = runs[0].rho;
    let mut out = Vec::with_capacity(k_max + 1);
    for lag in 0..=k_max {
        let per_rep: Vec<f64> = runs
            .iter()
            .map(|run| {
                let v = &run.values;
                let n = v.len();
                let c = (0..n - lag).map(|i| v[i] * v[i + lag]).sum::<f64>() / (n - lag) as f64;
                let v0 = v.iter().map(|x| x * x).sum::<f64>() / n as f64;
                c / v0
            })
            .collect();
        let (empirical, stderr) = batch_mean_stderr(&per_rep, 1);
        let xi_corr = if lag % 2 == 0 { 1.0 } else { rho };
        let target = a2 * xi_corr + b2 * r.powi(lag as i32);
        out.push(LagCheck {
            lag,
            empirical,
            target,
            stderr,
            pass: (empirical - target).abs() <= 4.0 * stderr + BIAS_FLOOR,
        });
    }
    out
}

/// The mixture field's conditional-variance constant.
///
/// Both components share the regression slope `alpha = rho/2`, but their
/// conditional-variance constants differ: the periodic two-valued part
/// contributes `1 - rho^2`, while the AR(1) part with coefficient
/// `r = (1 - sqrt(1-rho^2))/rho` has two-sided conditional variance
/// `(1-r^2)/(1+r^2) = sqrt(1-rho^2)`. Independence mixes them with weights
/// `a^2` and `b^2`. (Only at a = 1 does this collapse to `1 - rho^2`.)
pub fn counterexample_variance_constant(rho: f64, mixing_weight: f64) -> f64 {
    let a2 = mixing_weight * mixing_weight;
    a2 * (1.0 - rho * rho) + (1.0 - a2) * (1.0 - rho * rho).sqrt()
}

/// Nearest-neighbour residual checks for the mixture field with
/// `alpha = rho/2` and its own variance constant
/// ([`counterexample_variance_constant`]): means and variances pooled
/// across replications (the per-replication averages carry the frozen
/// component, so the standard error is taken across replications).
pub fn counterexample_conditional_checks(
    runs: &[CounterexampleRun],
) -> Result<(Vec<ResidualCheck>, Vec<ResidualCheck>)> {
    let c = counterexample_variance_constant(runs[0].rho, runs[0].mixing_weight);
    counterexample_conditional_checks_with_constant(runs, c)
}

/// Same as [`counterexample_conditional_checks`] but with an explicit
/// variance constant, so alternative constants can be tested.
pub fn counterexample_conditional_checks_with_constant(
    runs: &[CounterexampleRun],
    var_constant: f64,
) -> Result<(Vec<ResidualCheck>, Vec<ResidualCheck>)> {
    let rho = runs[0].rho;
    let alpha = rho / 2.0;
    let dict = Dictionary::for_q(1.0)?;

    let pool = |per_gfn: &dyn Fn(&CounterexampleRun, &dyn Fn(f64, f64) -> f64) -> f64| {
        dict.entries
            .iter()
            .map(|(label, g)| {
                let per_rep: Vec<f64> = runs.iter().map(|run| per_gfn(run, g)).collect();
                let (residual, stderr) = batch_mean_stderr(&per_rep, 1);
                ResidualCheck {
                    label: label.clone(),
                    residual,
                    stderr,
                    pass: verdict(residual, stderr),
                }
            })
            .collect::<Vec<_>>()
    };

    let mean_checks = pool(&|run, g| {
        let v = &run.values;
        let m = v.len() - 2;
        (1..v.len() - 1)
            .map(|k| (v[k] - alpha * (v[k - 1] + v[k + 1])) * g(v[k - 1], v[k + 1]))
            .sum::<f64>()
            / m as f64
    });
    let var_checks = pool(&|run, g| {
        let v = &run.values;
        let m = v.len() - 2;
        (1..v.len() - 1)
            .map(|k| {
                let s = v[k - 1] + v[k + 1];
                (v[k] * v[k] - alpha * alpha * s * s - var_constant) * g(v[k - 1], v[k + 1])
            })
            .sum::<f64>()
            / m as f64
    });
    Ok((mean_checks, var_checks))
}

/// KS of the pooled mixture-field marginal against a reference measure.
///
/// With the Gaussian member (q = 1) as reference this is the distribution
/// check that the mixture is built to fail.
pub fn counterexample_distribution(runs: &[CounterexampleRun], measure: &Measure) -> KsCheck {
    let pooled: Vec<f64> = runs.iter().flat_map(|r| r.values.iter().copied()).collect();
    ks_check(&pooled, measure, runs[0].ar_coeff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{counterexample_ensemble, simulate_chain};
    use crate::params::derive_params;

    #[test]
    fn two_state_checks_against_enumeration() {
        // Exact oracle: enumerate the 8 sign triples with stationary
        // weights P(u) P(x|u) P(v|x) and confirm the identities hold
        // exactly; then the empirical residuals must pass.
        let rho = 0.5f64;
        let params = derive_params(rho, 0.0).unwrap();
        let a = params.slope;
        let (qa, qb, qc) = (params.quad_diag, params.quad_cross, params.quad_const);
        let signs = [-1.0, 1.0];
        let mut mean_resid = 0.0;
        let mut var_resid = 0.0;
        for &u in &signs {
            for &x in &signs {
                for &v in &signs {
                    let w = 0.5 * ((1.0 + rho * u * x) / 2.0) * ((1.0 + rho * x * v) / 2.0);
                    mean_resid += w * (x - a * (u + v)) * u * v;
                    var_resid += w * (x * x - qa * (u * u + v * v) - qb * u * v - qc);
                }
            }
        }
        assert!(mean_resid.abs() < 1e-15);
        assert!(var_resid.abs() < 1e-15);

        let run = simulate_chain(&params, 200_000, 31).unwrap();
        let dict = Dictionary::for_q(-1.0).unwrap();
        let batch = batch_len(run.values.len(), rho);
        for c in check_conditional_mean_with(&run.values, a, &dict, batch) {
            assert!(c.pass, "mean residual {c:?}");
        }
        for c in check_conditional_variance_with(&run.values, qa, qb, qc, &dict, batch) {
            assert!(c.pass, "variance residual {c:?}");
        }
    }

    #[test]
    fn gaussian_chain_full_report_passes() {
        let params = derive_params(0.7, 2.0).unwrap();
        let report = run_full(&params, 200_000, 4242).unwrap();
        assert!(report.all_pass, "{report:#?}");
        assert_eq!(report.correlations[0].empirical, 1.0);
        assert_eq!(report.correlations[0].stderr, 0.0);
        // JSON serialization round-trips.
        let text = serde_json::to_string(&report).unwrap();
        let back: VerifyReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.n_samples, report.n_samples);
    }

    #[test]
    fn negative_control_fails_with_swapped_coefficients() {
        let params = ModelParams::from_rho_q(0.5, 0.5).unwrap();
        let run = simulate_chain(&params, 200_000, 8).unwrap();
        let dict = Dictionary::for_q(params.q).unwrap();
        let batch = batch_len(run.values.len(), params.rho);
        let honest = check_conditional_variance_with(
            &run.values,
            params.quad_diag,
            params.quad_cross,
            params.quad_const,
            &dict,
            batch,
        );
        assert!(honest.iter().all(|c| c.pass));
        let corrupted = check_conditional_variance_with(
            &run.values,
            params.quad_cross,
            params.quad_diag,
            params.quad_const,
            &dict,
            batch,
        );
        assert!(
            corrupted.iter().any(|c| !c.pass),
            "swapped coefficients must be detected"
        );
    }

    #[test]
    fn single_conditioning_gaussian() {
        let params = derive_params(0.7, 2.0).unwrap();
        let run = simulate_chain(&params, 150_000, 17).unwrap();
        for c in check_single_conditioning(&run).unwrap() {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn insufficient_length_is_reported() {
        let params = derive_params(0.5, 2.0).unwrap();
        let run = simulate_chain(&params, 500, 1).unwrap();
        assert!(matches!(
            check_correlations(&run, 6),
            Err(Error::InsufficientLength { .. })
        ));
        assert!(matches!(
            check_conditional_mean(&run),
            Err(Error::InsufficientLength { .. })
        ));
    }

    #[test]
    fn counterexample_checks_pass_while_global_conclusions_fail() {
        let runs = counterexample_ensemble(0.6, 0.8, 30_000, 32, 2024).unwrap();
        let corr = counterexample_correlations(&runs, 6);
        // Even lags stay near a^2 rather than vanishing like rho^k.
        let lag4 = &corr[4];
        assert!(lag4.pass, "{lag4:?}");
        assert!(lag4.empirical > 0.6, "even-lag correlation {lag4:?}");
        assert!((lag4.target - (0.64 + 0.36 / 81.0)).abs() < 1e-12);

        let (mean_checks, var_checks) = counterexample_conditional_checks(&runs).unwrap();
        assert!(mean_checks.iter().all(|c| c.pass), "{mean_checks:#?}");
        assert!(var_checks.iter().all(|c| c.pass), "{var_checks:#?}");

        // The marginal is a Gaussian mixture, not the q=1 member.
        let gauss = Measure::new(1.0).unwrap();
        let ks = counterexample_distribution(&runs, &gauss);
        assert!(!ks.adjusted_pass, "{ks:?}");
    }

    #[test]
    fn binned_diagnostic_tracks_the_regression_surface() {
        let params = ModelParams::from_rho_q(0.5, 0.5).unwrap();
        let run = simulate_chain(&params, 200_000, 5).unwrap();
        let cells = binned_conditional_mean(&run, 6);
        assert!(!cells.is_empty());
        let mut err_acc = 0.0;
        let mut n = 0usize;
        for cell in &cells {
            if cell.count > 2000 {
                err_acc += (cell.mean_mid - cell.predicted).abs();
                n += 1;
            }
        }
        assert!(n > 0);
        // Bin-center discretization dominates; this is a coarse check.
        assert!(err_acc / (n as f64) < 0.2);
    }
}
