//! Mehler-type transition kernel `K(x,y) = sum_n rho^n Q_n(x) Q_n(y)`
//! (orthonormal polynomials), evaluated two independent ways:
//!
//! * **series**: truncated bilinear sum, truncation chosen adaptively from
//!   the empirical tail bound `|rho|^N * M_N^2 < 1e-10`, where `M_N` is the
//!   running sup of `|Q_N|` on a support grid;
//! * **product**: the closed infinite product over `k >= 0` of
//!   `(1 - rho^2 q^k) / [(1 + rho^2 q^{2k} - 2 rho q^k cos(t_x+t_y))
//!   (1 + rho^2 q^{2k} - 2 rho q^k cos(t_x-t_y))]` with
//!   `t_x = arccos(x sqrt(1-q)/2)`, manifestly positive and symmetric.
//!
//! The q = 1 endpoint uses the Gaussian closed form
//! `exp(-rho (rho (x^2+y^2) - 2xy) / (2(1-rho^2))) / sqrt(1-rho^2)` and the
//! q = -1 endpoint the terminating sum `1 + rho x y`; neither enters the
//! product path. `K(x,y) mu(dy)` is the one-step transition law of the
//! stationary chain, with the polynomials as eigenfunctions:
//! `E[Q_n(X_1) | X_0] = rho^n Q_n(X_0)`.

use serde::{Deserialize, Serialize};

use crate::measure::{Measure, MeasureKind, QuadratureRule};
use crate::params::ModelParams;
use crate::qpoly::{Normalization, PolyFamily};
use crate::{Error, Result, Q_GAUSSIAN_THRESHOLD, Q_TWO_POINT_THRESHOLD};

/// Target for the adaptive series tail bound.
const SERIES_TAIL_TOL: f64 = 1e-10;
/// Divergence guard on series partial sums. Legitimate values reach
/// ~1e15 at the support corners for (q, rho) near (0.9, 0.9), so the guard
/// sits well above them.
const SERIES_GUARD: f64 = 1e18;
/// Cap on the adaptive series truncation degree.
const TRUNCATION_CAP: usize = 1024;
/// Grid resolution used to estimate polynomial sup norms.
const SUP_GRID: usize = 512;
/// Cap on retained product factors.
const PRODUCT_CAP: usize = 2048;

/// How a [`TransitionKernel`] evaluates pointwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluationMode {
    /// Truncated eigenfunction series.
    Series,
    /// Infinite-product closed form (production default).
    Product,
    /// Evaluate both and report the relative difference.
    CrossCheck,
}

/// One pointwise kernel evaluation, as emitted by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelEval {
    pub value: f64,
    pub method: EvaluationMode,
    pub truncation: usize,
    /// Series/product difference relative to the series' absolute-term sum
    /// (its attainable f64 resolution), floored at the row-sum unit 1;
    /// present in cross-check mode on the interior branch. Coincides with
    /// the plain relative difference wherever the series has no
    /// cancellation.
    pub residual: Option<f64>,
}

/// Precomputed factor table for the product form at fixed (q, rho).
#[derive(Debug, Clone)]
pub(crate) struct ProductCache {
    /// sqrt(1-q)/2, mapping x to cos(t).
    cos_scale: f64,
    /// (1 - rho^2 q^k, rho q^k, 1 + (rho q^k)^2) for retained k.
    terms: Vec<(f64, f64, f64)>,
}

impl ProductCache {
    pub(crate) fn new(q: f64, rho: f64) -> Self {
        let mut terms = Vec::new();
        let mut qk = 1.0;
        for _ in 0..PRODUCT_CAP {
            let s = rho * qk;
            terms.push((1.0 - rho * rho * qk, s, 1.0 + s * s));
            qk *= q;
            if qk.abs() < 1e-16 {
                break;
            }
        }
        Self {
            cos_scale: (1.0 - q).sqrt() / 2.0,
            terms,
        }
    }

    /// Kernel value on the interior branch (-1 < q < 1).
    pub(crate) fn value(&self, x: f64, y: f64) -> f64 {
        // Clamp absorbs rounding slack at the support endpoints.
        let tx = (x * self.cos_scale).clamp(-1.0, 1.0).acos();
        let ty = (y * self.cos_scale).clamp(-1.0, 1.0).acos();
        let cos_sum = (tx + ty).cos();
        let cos_diff = (tx - ty).cos();
        let mut prod = 1.0;
        for &(num, s, one_plus_s2) in &self.terms {
            let d1 = one_plus_s2 - 2.0 * s * cos_sum;
            let d2 = one_plus_s2 - 2.0 * s * cos_diff;
            prod *= num / (d1 * d2);
        }
        prod
    }
}

/// Gaussian (q = 1) kernel closed form.
fn mehler_gaussian(rho: f64, x: f64, y: f64) -> f64 {
    let r2 = rho * rho;
    (-(rho * (rho * (x * x + y * y) - 2.0 * x * y)) / (2.0 * (1.0 - r2))).exp()
        / (1.0 - r2).sqrt()
}

fn validate_rho_open(rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidRho(rho));
    }
    Ok(())
}

/// Product-form kernel for raw `(q, rho)`; accepts rho = 0 (where it is
/// identically 1). Endpoint q values route to their closed forms.
pub fn kernel_product_at(q: f64, rho: f64, x: f64, y: f64) -> Result<f64> {
    validate_rho_open(rho)?;
    if !(-1.0..=1.0).contains(&q) {
        return Err(Error::UnsupportedQ {
            q,
            requirement: "-1 <= q <= 1",
        });
    }
    if q >= Q_GAUSSIAN_THRESHOLD {
        Ok(mehler_gaussian(rho, x, y))
    } else if q <= Q_TWO_POINT_THRESHOLD {
        Ok(1.0 + rho * x * y)
    } else {
        Ok(ProductCache::new(q, rho).value(x, y))
    }
}

/// Truncated series for raw `(q, rho)` with an explicit term count.
///
/// The q = -1 endpoint terminates exactly at `1 + rho x y`; q = 1 has no
/// series path (use the closed form via [`kernel_product_at`]).
pub fn kernel_series_at(q: f64, rho: f64, x: f64, y: f64, n_max: usize) -> Result<f64> {
    validate_rho_open(rho)?;
    if q <= Q_TWO_POINT_THRESHOLD {
        return Ok(1.0 + rho * x * y);
    }
    if q >= Q_GAUSSIAN_THRESHOLD {
        return Err(Error::UnsupportedQ {
            q,
            requirement: "q < 1 for the series path (Gaussian endpoint has a closed form)",
        });
    }
    Ok(series_with_abs_sum(q, rho, x, y, n_max)?.0)
}

/// Truncated series together with its absolute-term sum
/// `sum |rho|^n |Q_n(x) Q_n(y)|`, the scale against which f64 summation
/// error must be judged.
fn series_with_abs_sum(q: f64, rho: f64, x: f64, y: f64, n_max: usize) -> Result<(f64, f64)> {
    let fam = PolyFamily::with_max_degree(q, Normalization::Orthonormal, n_max)?;
    let vx = fam.eval_all(n_max, x)?;
    let vy = fam.eval_all(n_max, y)?;
    let mut acc = 0.0;
    let mut abs_acc = 0.0;
    let mut pow = 1.0;
    for n in 0..=n_max {
        let term = pow * vx[n] * vy[n];
        acc += term;
        abs_acc += term.abs();
        if abs_acc > SERIES_GUARD {
            return Err(Error::KernelDiverged(abs_acc));
        }
        pow *= rho;
    }
    Ok((acc, abs_acc))
}

/// Series kernel for a model member (see [`kernel_series_at`]).
pub fn kernel_series(params: &ModelParams, x: f64, y: f64, n_max: usize) -> Result<f64> {
    kernel_series_at(params.q, params.rho, x, y, n_max)
}

/// Product kernel for a model member (see [`kernel_product_at`]).
pub fn kernel_product(params: &ModelParams, x: f64, y: f64) -> Result<f64> {
    kernel_product_at(params.q, params.rho, x, y)
}

/// The transition kernel of one model member, with its measure, truncation
/// and quadrature prebuilt. Immutable after construction; all checks are
/// pure.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    params: ModelParams,
    measure: Measure,
    cache: ProductCache,
    mode: EvaluationMode,
    truncation_degree: usize,
    /// Achieved tail bound `|rho|^N M_N^2` at the chosen truncation.
    tail_bound: f64,
    quadrature: QuadratureRule,
}

impl TransitionKernel {
    pub fn new(params: &ModelParams, mode: EvaluationMode) -> Result<Self> {
        let measure = Measure::new(params.q)?;
        let cache = ProductCache::new(params.q, params.rho);
        let (truncation_degree, tail_bound) = match measure.kind() {
            MeasureKind::TwoPoint => (1, 0.0),
            MeasureKind::Gaussian => (0, 0.0),
            MeasureKind::QNormal => select_truncation(params.q, params.rho)?,
        };
        let quadrature = match measure.kind() {
            MeasureKind::TwoPoint => measure.quadrature(2)?,
            _ => measure.quadrature(quadrature_order(params.rho))?,
        };
        Ok(Self {
            params: params.clone(),
            measure,
            cache,
            mode,
            truncation_degree,
            tail_bound,
            quadrature,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn mode(&self) -> EvaluationMode {
        self.mode
    }

    pub fn truncation_degree(&self) -> usize {
        self.truncation_degree
    }

    /// Achieved series tail bound at the chosen truncation degree.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Kernel value in product form (closed forms at the endpoints).
    pub fn product_value(&self, x: f64, y: f64) -> f64 {
        match self.measure.kind() {
            MeasureKind::Gaussian => mehler_gaussian(self.params.rho, x, y),
            MeasureKind::TwoPoint => 1.0 + self.params.rho * x * y,
            MeasureKind::QNormal => self.cache.value(x, y),
        }
    }

    /// Kernel value in series form at the adaptive truncation.
    pub fn series_value(&self, x: f64, y: f64) -> Result<f64> {
        kernel_series_at(self.params.q, self.params.rho, x, y, self.truncation_degree)
    }

    /// Evaluate according to the kernel's mode.
    pub fn evaluate(&self, x: f64, y: f64) -> Result<KernelEval> {
        let eval = match self.mode {
            EvaluationMode::Product => KernelEval {
                value: self.product_value(x, y),
                method: EvaluationMode::Product,
                truncation: self.truncation_degree,
                residual: None,
            },
            EvaluationMode::Series => KernelEval {
                value: self.series_value(x, y)?,
                method: EvaluationMode::Series,
                truncation: self.truncation_degree,
                residual: None,
            },
            EvaluationMode::CrossCheck => {
                let product = self.product_value(x, y);
                let residual = if self.measure.kind() == MeasureKind::QNormal {
                    let (series, abs_sum) = series_with_abs_sum(
                        self.params.q,
                        self.params.rho,
                        x,
                        y,
                        self.truncation_degree,
                    )?;
                    // The series cannot resolve the kernel below the f64
                    // cancellation floor of its own term magnitudes (near
                    // the anti-correlated support corner the true value is
                    // orders of magnitude below the individual terms), so
                    // differences are measured against the absolute-term
                    // sum, floored at the row-sum unit 1. At
                    // well-conditioned points this coincides with the
                    // plain relative difference.
                    let scale = abs_sum.max(1.0);
                    Some((series - product).abs() / scale)
                } else {
                    None
                };
                KernelEval {
                    value: product,
                    method: EvaluationMode::CrossCheck,
                    truncation: self.truncation_degree,
                    residual,
                }
            }
        };
        Ok(eval)
    }

    /// Convenience: the scalar value under the kernel's mode.
    pub fn value(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.evaluate(x, y)?.value)
    }

    /// Transition density `K(x,y) f(y)` (w.r.t. counting measure on the
    /// two-point branch); nonnegative, integrates to 1 in y.
    pub fn transition_density(&self, x: f64, y: f64) -> f64 {
        self.product_value(x, y) * self.measure.density(y)
    }

    /// `| integral K(x,y) dmu(y) - 1 |` at one x.
    pub fn check_row_sum(&self, x: f64) -> f64 {
        let s = self
            .quadrature
            .integrate(|y| self.product_value(x, y));
        (s - 1.0).abs()
    }

    /// Max residual of `E[Q_n(X_1) | X_0 = x] = rho^n Q_n(x)` over a grid
    /// of conditioning points, by quadrature against the product kernel.
    pub fn check_eigenfunction(&self, n: usize, grid: &[f64]) -> Result<f64> {
        let rho_n = self.params.rho.powi(n as i32);
        if self.measure.kind() == MeasureKind::TwoPoint {
            let fam = PolyFamily::with_max_degree(self.params.q, Normalization::Monic, n.max(1))?;
            let mut worst: f64 = 0.0;
            for &x in &[-1.0, 1.0] {
                let mut acc = 0.0;
                for &y in &[-1.0, 1.0] {
                    acc += fam.eval(n, y)? * self.product_value(x, y) * 0.5;
                }
                worst = worst.max((acc - rho_n * fam.eval(n, x)?).abs());
            }
            return Ok(worst);
        }
        let fam =
            PolyFamily::with_max_degree(self.params.q, Normalization::Orthonormal, n.max(1))?;
        let qn_at_nodes: Vec<f64> = self
            .quadrature
            .nodes
            .iter()
            .map(|&y| fam.eval(n, y))
            .collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        for &x in grid {
            let mut acc = 0.0;
            for (j, &w) in self.quadrature.weights.iter().enumerate() {
                acc += w * qn_at_nodes[j] * self.product_value(x, self.quadrature.nodes[j]);
            }
            worst = worst.max((acc - rho_n * fam.eval(n, x)?).abs());
        }
        Ok(worst)
    }
}

/// Max residual of the composition law: `K_rho • K_rho = K_{rho^2}` (same
/// q), checked by quadrature over the middle variable on `grid x grid`.
pub fn check_chapman_kolmogorov(params: &ModelParams, grid: &[f64]) -> Result<f64> {
    let one_step = TransitionKernel::new(params, EvaluationMode::Product)?;
    let two_step_params = ModelParams::from_rho_q(params.rho * params.rho, params.q)?;
    let two_step = TransitionKernel::new(&two_step_params, EvaluationMode::Product)?;

    if one_step.measure.kind() == MeasureKind::TwoPoint {
        let mut worst: f64 = 0.0;
        for &x in &[-1.0, 1.0] {
            for &y in &[-1.0, 1.0] {
                let mut acc = 0.0;
                for &z in &[-1.0, 1.0] {
                    acc += one_step.product_value(x, z) * 0.5 * one_step.product_value(z, y);
                }
                worst = worst.max((acc - two_step.product_value(x, y)).abs());
            }
        }
        return Ok(worst);
    }

    let quad = &one_step.quadrature;
    let mut worst: f64 = 0.0;
    for &x in grid {
        // One pass of K(x, z_j) shared across all y.
        let row: Vec<f64> = quad
            .nodes
            .iter()
            .map(|&z| one_step.product_value(x, z))
            .collect();
        for &y in grid {
            let mut acc = 0.0;
            for (j, &w) in quad.weights.iter().enumerate() {
                acc += w * row[j] * one_step.product_value(quad.nodes[j], y);
            }
            worst = worst.max((acc - two_step.product_value(x, y)).abs());
        }
    }
    Ok(worst)
}

/// Pick the smallest series truncation whose empirical tail bound
/// `|rho|^N M_N^2` drops below the target, estimating sup norms on a
/// support grid.
fn select_truncation(q: f64, rho: f64) -> Result<(usize, f64)> {
    let half = 2.0 / (1.0 - q).sqrt();
    let fam = PolyFamily::with_max_degree(q, Normalization::Orthonormal, TRUNCATION_CAP)?;
    let mut sup = vec![0.0f64; TRUNCATION_CAP + 1];
    for i in 0..SUP_GRID {
        let x = -half + 2.0 * half * i as f64 / (SUP_GRID - 1) as f64;
        let vals = fam.eval_all(TRUNCATION_CAP, x)?;
        for (n, v) in vals.iter().enumerate() {
            sup[n] = sup[n].max(v.abs());
        }
    }
    let mut running: f64 = 0.0;
    let abs_rho = rho.abs();
    let mut bound = f64::INFINITY;
    for (n, &m) in sup.iter().enumerate() {
        running = running.max(m);
        bound = abs_rho.powi(n as i32) * running * running;
        if bound < SERIES_TAIL_TOL && n >= 1 {
            return Ok((n, bound));
        }
    }
    Ok((TRUNCATION_CAP, bound))
}

/// Quadrature order so that the geometric convergence factor `|rho|^(2m)`
/// clears 1e-22 (the kernel's analytic continuation reaches ~1e15 near its
/// poles, which multiplies the convergence factor); at least 64 nodes, at
/// most 320.
fn quadrature_order(rho: f64) -> usize {
    let abs = rho.abs().clamp(1e-12, 1.0 - 1e-12);
    let needed = (-50.7 / (2.0 * abs.ln())).ceil();
    (needed as usize).clamp(64, 320)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_params;
    use approx::assert_abs_diff_eq;

    #[test]
    fn independence_at_rho_zero() {
        for &q in &[-0.7, 0.0, 0.4] {
            assert_abs_diff_eq!(kernel_product_at(q, 0.0, 0.3, -1.1).unwrap(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(
                kernel_series_at(q, 0.0, 0.3, -1.1, 32).unwrap(),
                1.0,
                epsilon = 1e-15
            );
        }
        // Composition of the trivial kernel stays trivial: row sums are 1.
        let m = Measure::new(0.4).unwrap();
        let quad = m.quadrature(32).unwrap();
        let composed = quad.integrate(|z| {
            kernel_product_at(0.4, 0.0, 0.2, z).unwrap() * kernel_product_at(0.4, 0.0, z, -0.9).unwrap()
        });
        assert_abs_diff_eq!(composed, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_point_series_terminates() {
        for &rho in &[-0.8, 0.3, 0.5] {
            for &x in &[-1.0, 1.0] {
                for &y in &[-1.0, 1.0] {
                    let expect = 1.0 + rho * x * y;
                    assert_abs_diff_eq!(
                        kernel_series_at(-1.0, rho, x, y, 16).unwrap(),
                        expect,
                        epsilon = 1e-15
                    );
                    assert_abs_diff_eq!(
                        kernel_product_at(-1.0, rho, x, y).unwrap(),
                        expect,
                        epsilon = 1e-15
                    );
                }
            }
        }
    }

    #[test]
    fn semicircle_point_against_chebyshev_poisson_oracle() {
        // 200-term Poisson kernel for Chebyshev-U at the origin.
        let rho = 0.5f64;
        let mut oracle = 0.0;
        let (mut u_prev, mut u_cur) = (0.0f64, 1.0f64); // U_{-1}, U_0 at 0
        let mut pow = 1.0;
        for _ in 0..=200 {
            oracle += pow * u_cur * u_cur;
            let u_next = 2.0 * 0.0 * u_cur - u_prev;
            u_prev = u_cur;
            u_cur = u_next;
            pow *= rho;
        }
        let p = kernel_product_at(0.0, rho, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(p, oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(p, 1.0 / (1.0 - rho * rho), epsilon = 1e-12);
        let s = kernel_series_at(0.0, rho, 0.0, 0.0, 80).unwrap();
        assert_abs_diff_eq!(s, p, epsilon = 1e-10);
    }

    #[test]
    fn gaussian_endpoint_closed_form() {
        let params = derive_params(0.6, 2.0).unwrap();
        let k = kernel_product(&params, 0.7, -0.2).unwrap();
        let rho = 0.6f64;
        let expect = (-(rho * (rho * (0.49f64 + 0.04) - 2.0 * 0.7 * (-0.2))) / (2.0 * (1.0 - 0.36)))
            .exp()
            / (1.0 - 0.36f64).sqrt();
        assert_abs_diff_eq!(k, expect, epsilon = 1e-14);

        // K(x,y) f(y) is the Gaussian transition density N(rho x, 1 - rho^2).
        let kernel = TransitionKernel::new(&params, EvaluationMode::Product).unwrap();
        for &(x, y) in &[(0.0, 0.5), (1.2, -0.4), (-2.0, 1.0)] {
            let var = 1.0 - 0.36;
            let expect = (-(y - rho * x) * (y - rho * x) / (2.0 * var)).exp()
                / (2.0 * std::f64::consts::PI * var).sqrt();
            assert_abs_diff_eq!(kernel.transition_density(x, y), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn series_product_cross_check() {
        let params = ModelParams::from_rho_q(0.6, 0.5).unwrap();
        let kernel = TransitionKernel::new(&params, EvaluationMode::CrossCheck).unwrap();
        let eval = kernel.evaluate(0.3, -0.7).unwrap();
        assert!(eval.residual.unwrap() < 1e-8, "residual {:?}", eval.residual);
        assert!(kernel.tail_bound() < 1e-10);

        // Symmetry of the series route.
        let s1 = kernel.series_value(0.9, -1.4).unwrap();
        let s2 = kernel.series_value(-1.4, 0.9).unwrap();
        assert_abs_diff_eq!(s1, s2, epsilon = 1e-12);
    }

    #[test]
    fn positivity_and_row_sums() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for &q in &[-0.9, -0.5, 0.0, 0.5, 0.9] {
            for &rho in &[-0.9, -0.3, 0.6] {
                let params = ModelParams::from_rho_q(rho, q).unwrap();
                let kernel = TransitionKernel::new(&params, EvaluationMode::Product).unwrap();
                let half = 2.0 / (1.0 - q).sqrt();
                for _ in 0..200 {
                    let x = rng.random_range(-half..half);
                    let y = rng.random_range(-half..half);
                    assert!(kernel.product_value(x, y) > 0.0, "q={q} rho={rho} x={x} y={y}");
                }
                for &x in &[-0.9 * half, -0.3 * half, 0.0, 0.5 * half, 0.99 * half] {
                    let resid = kernel.check_row_sum(x);
                    assert!(resid < 1e-8, "q={q} rho={rho} x={x}: row sum {resid}");
                }
            }
        }
    }

    #[test]
    fn transition_density_two_point() {
        let params = derive_params(0.5, 0.0).unwrap();
        let kernel = TransitionKernel::new(&params, EvaluationMode::Product).unwrap();
        assert_abs_diff_eq!(kernel.transition_density(1.0, 1.0), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(kernel.transition_density(1.0, -1.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(kernel.transition_density(-1.0, -1.0), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn eigenfunction_residuals() {
        let grid: Vec<f64> = (-8..=8).map(|i| i as f64 / 4.0).collect();

        let params = ModelParams::from_rho_q(0.5, 0.5).unwrap();
        let kernel = TransitionKernel::new(&params, EvaluationMode::Product).unwrap();
        assert!(kernel.check_eigenfunction(0, &grid).unwrap() < 1e-12);
        assert!(kernel.check_eigenfunction(1, &grid).unwrap() < 1e-8);

        let params = ModelParams::from_rho_q(0.7, 0.3).unwrap();
        let kernel = TransitionKernel::new(&params, EvaluationMode::Product).unwrap();
        let grid: Vec<f64> = (-10..=10)
            .map(|i| i as f64 / 10.0 * 0.99 * params.support_halfwidth)
            .collect();
        assert!(kernel.check_eigenfunction(5, &grid).unwrap() < 1e-6);

        // Two-point branch: exact by termination.
        let params = derive_params(0.5, 0.0).unwrap();
        let kernel = TransitionKernel::new(&params, EvaluationMode::Product).unwrap();
        for n in 0..=4 {
            assert!(kernel.check_eigenfunction(n, &[-1.0, 1.0]).unwrap() < 1e-12);
        }
    }

    #[test]
    fn chapman_kolmogorov() {
        // Two-point: squared 2x2 transition matrix, exact.
        let params = derive_params(0.5, 0.0).unwrap();
        assert!(check_chapman_kolmogorov(&params, &[]).unwrap() < 1e-12);

        let params = ModelParams::from_rho_q(0.6, 0.5).unwrap();
        let grid: Vec<f64> = (-4..=4).map(|i| i as f64 / 4.0 * 0.95 * params.support_halfwidth).collect();
        assert!(check_chapman_kolmogorov(&params, &grid).unwrap() < 1e-6);
    }

    #[test]
    fn divergence_guard_fires_off_support() {
        // Far outside the support the polynomials explode and the partial
        // sums trip the guard.
        let err = kernel_series_at(0.5, 0.9, 80.0, 80.0, 600);
        assert!(matches!(err, Err(Error::KernelDiverged(_))));
    }

    #[test]
    fn truncation_grows_with_rho() {
        let low = TransitionKernel::new(&ModelParams::from_rho_q(0.3, 0.5).unwrap(), EvaluationMode::Product)
            .unwrap();
        let high = TransitionKernel::new(&ModelParams::from_rho_q(0.9, 0.5).unwrap(), EvaluationMode::Product)
            .unwrap();
        assert!(low.truncation_degree() < high.truncation_degree());
        assert!(high.truncation_degree() <= TRUNCATION_CAP);
    }
}
