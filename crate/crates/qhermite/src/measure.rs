//! The orthogonality measure of the polynomial family.
//!
//! For -1 < q < 1 this is the compactly supported symmetric law with
//! density
//!
//! ```text
//! f(x|q) = sqrt(1-q)/(2 pi) * sqrt(4 - (1-q) x^2)
//!          * prod_{k>=1} (1 - q^k) [ (1+q^k)^2 - (1-q) q^k x^2 ]
//! ```
//!
//! on `|x| <= 2/sqrt(1-q)`; at q = 0 it reduces to the semicircle
//! `sqrt(4-x^2)/(2 pi)`, at q = 1 to the standard Gaussian and at q = -1 to
//! the symmetric two-point law on {-1,+1}. The endpoints get exact closed
//! forms; the interior branch evaluates the truncated product (factors are
//! retained while `|q|^k >= 1e-16`, capped at 2048) and is calibrated
//! against its own quadrature: when the analytic constant misses total mass
//! 1 by more than 1e-6 the density is renormalized numerically.
//!
//! The CDF is tabulated on 4096 equal-probability-targeted nodes obtained
//! by integrating in the angle variable `x = 2 cos(theta)/sqrt(1-q)`
//! (the integrand is smooth there) and inverted for sampling by bisection
//! against a monotone piecewise-cubic interpolant.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::qpoly::q_integer;
use crate::{Error, Result, Q_GAUSSIAN_THRESHOLD, Q_TWO_POINT_THRESHOLD};

/// Hard cap on retained infinite-product factors.
const PRODUCT_FACTOR_CAP: usize = 2048;
/// Retain factors while |q|^k is at least this.
const PRODUCT_FACTOR_TOL: f64 = 1e-16;
/// Number of CDF table nodes.
const CDF_TABLE_SIZE: usize = 4096;
/// Number of backbone quadrature panels in the angle variable.
const BACKBONE_PANELS: usize = 4096;
/// Mass mismatch beyond which the density is renormalized numerically.
const MASS_RENORM_TOL: f64 = 1e-6;

/// 8-point Gauss-Legendre rule on [-1, 1].
const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Which branch of the family a [`Measure`] lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    /// q = -1: symmetric two-point law on {-1, +1}.
    TwoPoint,
    /// -1 < q < 1: compactly supported q-normal law.
    QNormal,
    /// q = 1: standard Gaussian.
    Gaussian,
}

/// Classify q into a branch using the crate-wide endpoint thresholds.
pub fn measure_kind(q: f64) -> MeasureKind {
    if q >= Q_GAUSSIAN_THRESHOLD {
        MeasureKind::Gaussian
    } else if q <= Q_TWO_POINT_THRESHOLD {
        MeasureKind::TwoPoint
    } else {
        MeasureKind::QNormal
    }
}

/// Whether the orthogonality measure for this q is determined by its
/// moments. True on the whole supported range q <= 1 (bounded support or
/// Gaussian); q > 1 would be indeterminate and is not constructed here.
pub fn moment_determinate(q: f64) -> bool {
    q <= 1.0
}

/// One retained factor of the density product.
#[derive(Debug, Clone)]
struct ProductFactor {
    /// (1 - q^k), the Euler-function factor folded in to keep the running
    /// product in floating-point range.
    euler: f64,
    /// (1 + q^k)^2.
    plus_sq: f64,
    /// (1 - q) q^k, multiplying x^2.
    x_coeff: f64,
    /// 4 q^k, multiplying cos^2(theta).
    cos_coeff: f64,
}

fn build_factors(q: f64) -> Vec<ProductFactor> {
    let mut factors = Vec::new();
    let mut qk = q;
    for _ in 1..=PRODUCT_FACTOR_CAP {
        if qk.abs() < PRODUCT_FACTOR_TOL {
            break;
        }
        factors.push(ProductFactor {
            euler: 1.0 - qk,
            plus_sq: (1.0 + qk) * (1.0 + qk),
            x_coeff: (1.0 - q) * qk,
            cos_coeff: 4.0 * qk,
        });
        qk *= q;
    }
    factors
}

/// The analytic (uncalibrated) density for -1 < q < 1.
pub fn density(q: f64, x: f64) -> Result<f64> {
    if !(-1.0 < q && q < 1.0) {
        return Err(Error::UnsupportedQ {
            q,
            requirement: "-1 < q < 1 for the density product",
        });
    }
    Ok(density_with_factors(q, &build_factors(q), x))
}

fn density_with_factors(q: f64, factors: &[ProductFactor], x: f64) -> f64 {
    let disc = 4.0 - (1.0 - q) * x * x;
    if disc <= 0.0 {
        return 0.0;
    }
    let x2 = x * x;
    let mut prod = 1.0;
    for f in factors {
        prod *= f.euler * (f.plus_sq - f.x_coeff * x2);
    }
    (1.0 - q).sqrt() / (2.0 * std::f64::consts::PI) * disc.sqrt() * prod
}

/// Monotone piecewise-cubic interpolant (Fritsch-Butland slopes).
#[derive(Debug, Clone, Default)]
struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut d = vec![0.0; n];
        if n >= 2 {
            let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
            let s: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
            d[0] = s[0];
            d[n - 1] = s[n - 2];
            for i in 1..n - 1 {
                if s[i - 1] * s[i] <= 0.0 {
                    d[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
                }
            }
        }
        Self { x, y, d }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.y[0];
        }
        if x >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = match self.x.partition_point(|&v| v <= x) {
            0 => 0,
            p => p - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

/// The orthogonality measure at one q, with density, CDF table and
/// inverse-CDF sampling. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Measure {
    q: f64,
    kind: MeasureKind,
    support_halfwidth: f64,
    factors: Vec<ProductFactor>,
    /// Multiplies the analytic density; 1 unless mass calibration failed
    /// the 1e-6 check.
    renorm: f64,
    /// Total mass of the analytic density, from construction quadrature.
    mass: f64,
    table: MonotoneCubic,
}

impl Measure {
    pub fn new(q: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&q) {
            return Err(Error::UnsupportedQ {
                q,
                requirement: "-1 <= q <= 1",
            });
        }
        let kind = measure_kind(q);
        match kind {
            MeasureKind::TwoPoint => Ok(Self {
                q,
                kind,
                support_halfwidth: 1.0,
                factors: Vec::new(),
                renorm: 1.0,
                mass: 1.0,
                table: MonotoneCubic::default(),
            }),
            MeasureKind::Gaussian => Ok(Self {
                q,
                kind,
                support_halfwidth: f64::INFINITY,
                factors: Vec::new(),
                renorm: 1.0,
                mass: 1.0,
                table: MonotoneCubic::default(),
            }),
            MeasureKind::QNormal => Ok(Self::build_q_normal(q)),
        }
    }

    fn build_q_normal(q: f64) -> Self {
        let factors = build_factors(q);
        let half = 2.0 / (1.0 - q).sqrt();

        // Backbone: cumulative integral of the angle-variable integrand
        // g(t) = (2/pi) sin^2(t) prod_k (1-q^k)[(1+q^k)^2 - 4 q^k cos^2 t]
        // over [0, pi]; t = 0 is x = +half, t = pi is x = -half.
        let g = |t: f64| -> f64 {
            let s = t.sin();
            let c2 = t.cos() * t.cos();
            let mut prod = 1.0;
            for f in &factors {
                prod *= f.euler * (f.plus_sq - f.cos_coeff * c2);
            }
            2.0 / std::f64::consts::PI * s * s * prod
        };
        let panel = std::f64::consts::PI / BACKBONE_PANELS as f64;
        let gl = |a: f64, b: f64| -> f64 {
            let mid = 0.5 * (a + b);
            let rad = 0.5 * (b - a);
            let mut acc = 0.0;
            for (n, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
                acc += w * g(mid + rad * n);
            }
            acc * rad
        };
        let mut cum = Vec::with_capacity(BACKBONE_PANELS + 1);
        cum.push(0.0);
        for i in 0..BACKBONE_PANELS {
            let a = i as f64 * panel;
            let last = *cum.last().unwrap();
            cum.push(last + gl(a, a + panel));
        }
        let mass = cum[BACKBONE_PANELS];
        let renorm = if (mass - 1.0).abs() > MASS_RENORM_TOL {
            1.0 / mass
        } else {
            1.0
        };

        // Equal-probability-targeted table nodes: solve
        // cum(t_j) = mass * (1 - p_j) inside the bracketing panel.
        let m = CDF_TABLE_SIZE;
        let mut xs = Vec::with_capacity(m);
        let mut ps = Vec::with_capacity(m);
        xs.push(-half);
        ps.push(0.0);
        for j in 1..m - 1 {
            let p = j as f64 / (m - 1) as f64;
            let target = mass * (1.0 - p);
            let i = cum.partition_point(|&v| v < target).clamp(1, BACKBONE_PANELS) - 1;
            let (mut lo, mut hi) = (i as f64 * panel, (i + 1) as f64 * panel);
            let (mut g_lo, g_hi) = (cum[i], cum[i + 1]);
            // Bisection on the panel-local cumulative; ~50 steps pins the
            // angle to machine precision.
            if g_hi > g_lo {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let val = g_lo + gl(lo, mid);
                    if val < target {
                        lo = mid;
                        g_lo = val;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-14 {
                        break;
                    }
                }
            }
            let t = 0.5 * (lo + hi);
            let x = half * t.cos();
            if x > *xs.last().unwrap() {
                xs.push(x);
                ps.push(p);
            }
        }
        xs.push(half);
        ps.push(1.0);

        Self {
            q,
            kind: MeasureKind::QNormal,
            support_halfwidth: half,
            factors,
            renorm,
            mass,
            table: MonotoneCubic::new(xs, ps),
        }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    /// Half-width of the support (1 for the two-point law, infinite for the
    /// Gaussian).
    pub fn support_halfwidth(&self) -> f64 {
        self.support_halfwidth
    }

    /// Number of retained product factors.
    pub fn product_truncation(&self) -> usize {
        self.factors.len()
    }

    /// Total mass of the analytic density as measured at construction.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Calibrated density. For the two-point branch this is the probability
    /// mass at x (0.5 on {-1,+1}), for the Gaussian the standard normal
    /// density.
    pub fn density(&self, x: f64) -> f64 {
        match self.kind {
            MeasureKind::TwoPoint => {
                if x == 1.0 || x == -1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            MeasureKind::Gaussian => {
                (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
            }
            MeasureKind::QNormal => self.renorm * density_with_factors(self.q, &self.factors, x),
        }
    }

    /// Distribution function; clamps to {0,1} outside the support.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            MeasureKind::TwoPoint => {
                if x < -1.0 {
                    0.0
                } else if x < 1.0 {
                    0.5
                } else {
                    1.0
                }
            }
            MeasureKind::Gaussian => {
                0.5 * (1.0 + statrs::function::erf::erf(x / std::f64::consts::SQRT_2))
            }
            MeasureKind::QNormal => self.table.eval(x),
        }
    }

    /// Inverse CDF by table bracket plus bisection refinement.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self.kind {
            MeasureKind::TwoPoint => {
                if u < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            MeasureKind::Gaussian => {
                let (mut lo, mut hi) = (-12.0f64, 12.0f64);
                while hi - lo > 1e-12 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
            MeasureKind::QNormal => {
                let xs = &self.table.x;
                let i = match self.table.y.partition_point(|&p| p < u) {
                    0 => 0,
                    p => (p - 1).min(xs.len() - 2),
                };
                let (mut lo, mut hi) = (xs[i], xs[i + 1]);
                let tol = 1e-12 * self.support_halfwidth.max(1.0);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if self.table.eval(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// `n` i.i.d. draws with an explicit seed; callers own the stream, so
    /// concurrent sampling with distinct seeds is safe.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        match self.kind {
            MeasureKind::TwoPoint => {
                for _ in 0..n {
                    out.push(if rng.random_bool(0.5) { 1.0 } else { -1.0 });
                }
            }
            MeasureKind::Gaussian => {
                for _ in 0..n {
                    out.push(rng.sample(rand_distr::StandardNormal));
                }
            }
            MeasureKind::QNormal => {
                for _ in 0..n {
                    out.push(self.inverse_cdf(rng.random()));
                }
            }
        }
        out
    }

    /// Moments `m_0..m_{n_max}` (recurrence route; exact odd-moment zeros).
    pub fn moments(&self, n_max: usize) -> Vec<f64> {
        moments(self.q, n_max).expect("q validated at construction")
    }

    /// Gaussian-type quadrature for this measure. The two-point branch
    /// returns its exact two-node rule.
    pub fn quadrature(&self, order: usize) -> Result<QuadratureRule> {
        match self.kind {
            MeasureKind::TwoPoint => Ok(QuadratureRule {
                nodes: vec![-1.0, 1.0],
                weights: vec![0.5, 0.5],
                order: 2,
            }),
            _ => build_quadrature(self.q, order),
        }
    }
}

/// Moments `m_0..m_{n_max}` computed by expanding `x^n` in the polynomial
/// basis; `m_n` is the degree-0 coefficient. Odd moments are exactly zero.
pub fn moments(q: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(-1.0..=1.0).contains(&q) {
        return Err(Error::UnsupportedQ {
            q,
            requirement: "-1 <= q <= 1",
        });
    }
    let beta: Vec<f64> = (0..=n_max).map(|k| q_integer(k, q)).collect();
    let mut coeffs = vec![0.0; n_max + 1];
    coeffs[0] = 1.0;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    let mut scratch = vec![0.0; n_max + 2];
    for n in 1..=n_max {
        scratch.iter_mut().for_each(|v| *v = 0.0);
        for (k, &c) in coeffs.iter().enumerate().take(n) {
            if c != 0.0 {
                scratch[k + 1] += c;
                if k >= 1 {
                    scratch[k - 1] += beta[k] * c;
                }
            }
        }
        coeffs.copy_from_slice(&scratch[..=n_max]);
        out.push(coeffs[0]);
    }
    Ok(out)
}

/// Gaussian-type quadrature rule generated from the orthonormal recurrence
/// coefficients (eigen-decomposition of the Jacobi matrix).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Build the order-point Gaussian rule for the measure at q.
///
/// The symmetric tridiagonal Jacobi matrix has zero diagonal and
/// off-diagonals `b_1..b_{order-1}`; its eigenvalues seed the nodes, which
/// are then Newton-polished to the roots of the orthonormal `Q_order`, with
/// weights recomputed from the Christoffel function
/// `w_j = 1 / sum_k Q_k(x_j)^2`. The polish matters: downstream identity
/// checks integrate kernels whose high-degree coefficients grow into the
/// 1e5 range near the support edge, which amplifies the ~1e-10 error of the
/// raw eigen-decomposition above the check tolerances. Exact for
/// polynomials of degree <= 2*order-1. Needs q > -1 (the two-point endpoint
/// has its own two-node rule) and accepts q = 1, where it reproduces the
/// Hermite rule.
pub fn build_quadrature(q: f64, order: usize) -> Result<QuadratureRule> {
    if order < 2 {
        return Err(Error::QuadratureOrder { order, needed: 2 });
    }
    if !(q > -1.0 && q <= 1.0) {
        return Err(Error::UnsupportedQ {
            q,
            requirement: "-1 < q <= 1 for the Jacobi-matrix rule",
        });
    }
    let b: Vec<f64> = (0..=order).map(|i| q_integer(i, q).sqrt()).collect();
    let mut jacobi = nalgebra::DMatrix::<f64>::zeros(order, order);
    for i in 1..order {
        jacobi[(i, i - 1)] = b[i];
        jacobi[(i - 1, i)] = b[i];
    }
    let eigen = nalgebra::SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Orthonormal values Q_0..Q_order and the derivative of Q_order.
    let eval_with_derivative = |x: f64| -> (Vec<f64>, f64) {
        let mut vals = Vec::with_capacity(order + 1);
        let (mut prev, mut cur) = (0.0f64, 1.0f64);
        let (mut dprev, mut dcur) = (0.0f64, 0.0f64);
        vals.push(cur);
        for k in 0..order {
            let next = (x * cur - b[k] * prev) / b[k + 1];
            let dnext = (cur + x * dcur - b[k] * dprev) / b[k + 1];
            prev = cur;
            cur = next;
            dprev = dcur;
            dcur = dnext;
            vals.push(cur);
        }
        (vals, dcur)
    };

    let mut weights = Vec::with_capacity(order);
    for node in nodes.iter_mut() {
        for _ in 0..4 {
            let (vals, deriv) = eval_with_derivative(*node);
            if deriv == 0.0 {
                break;
            }
            let step = vals[order] / deriv;
            *node -= step;
            if step.abs() < 1e-15 * node.abs().max(1.0) {
                break;
            }
        }
        let (vals, _) = eval_with_derivative(*node);
        let christoffel: f64 = vals[..order].iter().map(|v| v * v).sum();
        weights.push(1.0 / christoffel);
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        order,
    })
}
