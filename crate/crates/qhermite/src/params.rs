//! Parameter algebra for the model family.
//!
//! A model is specified by the one-step correlation `rho` (nonzero, inside
//! the open unit interval) and a scale parameter `R` in [0,2]. Everything
//! else is derived:
//!
//! * the shape parameter `q = (rho^4 + R - 1) / (1 + rho^4 (R - 1))`,
//!   which runs over [-1,1] exactly when R runs over [0,2];
//! * the two-sided regression slope `a = rho / (1 + rho^2)`;
//! * the quadratic-form coefficients of the conditional second moment
//!   `Q(x,y) = A(x^2+y^2) + Bxy + C + D(x+y)`, with `D = 0` throughout:
//!   `B` from `R = B (rho + 1/rho)^2`, then `A` from
//!   `A (rho^2 + 1/rho^2) + B = 1`, then `C = 1 - 2A - B rho^2`.
//!
//! The constant term is always computed from `C = 1 - 2A - B rho^2`; at
//! q = 0 this works out to `(1 - rho^2)^2`. [`ModelParams`] is the single
//! source of parameter truth: `q` is stored once here and never re-derived
//! downstream.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance for deciding that the boundedness classifier sits exactly on
/// the critical surface `A(rho^2 + 1/rho^2) + B = 1`.
const CRITICAL_EQ_TOL: f64 = 1e-9;

/// All derived coefficients for one member of the model family.
///
/// Serializes to a flat JSON object with keys
/// `{rho, R, q, a, A, B, C, D, support_halfwidth}` (the single-letter keys
/// are the conventional names of the quadratic-form coefficients; the Rust
/// fields are named by role). An infinite support halfwidth (Gaussian
/// endpoint, q = 1) serializes as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// One-step correlation, in (-1,1), nonzero.
    pub rho: f64,
    /// Scale parameter in [0,2]; 0 is the two-valued endpoint, 2 the Gaussian.
    #[serde(rename = "R")]
    pub scale: f64,
    /// Shape parameter in [-1,1] derived from (rho, R).
    pub q: f64,
    /// Two-sided regression slope: `E(X_k | rest) = a (X_{k-1} + X_{k+1})`.
    #[serde(rename = "a")]
    pub slope: f64,
    /// Coefficient of `x^2 + y^2` in the conditional second moment.
    #[serde(rename = "A")]
    pub quad_diag: f64,
    /// Coefficient of `xy` in the conditional second moment.
    #[serde(rename = "B")]
    pub quad_cross: f64,
    /// Constant term of the conditional second moment.
    #[serde(rename = "C")]
    pub quad_const: f64,
    /// Coefficient of `x + y`; fixed to 0 in this family.
    #[serde(rename = "D")]
    pub quad_linear: f64,
    /// Half-width `2/sqrt(1-q)` of the marginal support; infinite at q = 1.
    #[serde(with = "serde_halfwidth")]
    pub support_halfwidth: f64,
    /// One-sided conditional-variance drift `D / (1 - (1+rho^2)A)`; 0 since D = 0.
    #[serde(default, skip_serializing)]
    pub gamma: f64,
}

/// Boundedness classification of the marginal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundedness {
    /// Compact support on both sides.
    Bounded,
    /// Critical surface with positive linear drift.
    BoundedBelow,
    /// Critical surface with negative linear drift.
    BoundedAbove,
    /// Reserved: no sufficient condition for unboundedness is available,
    /// so this variant is never produced.
    Unbounded,
    /// The classifier has nothing to say (critical surface with D = 0, or
    /// above it).
    Inconclusive,
}

/// Correlation sequence solving `(1+r2) r_k = rho (r_{k-1} + r_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSequence {
    pub rho: f64,
    pub r2: f64,
    /// `r_0 .. r_K`.
    pub values: Vec<f64>,
}

fn validate_rho(rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) || rho == 0.0 {
        return Err(Error::InvalidRho(rho));
    }
    Ok(())
}

/// Derive every model coefficient from `(rho, R)`.
///
/// Rejects `rho = 0`, `|rho| >= 1` and `R` outside [0,2]. The closed-form
/// solution (`B` first, then `A`, then `C`) stays well conditioned as
/// `rho -> 0`.
pub fn derive_params(rho: f64, scale: f64) -> Result<ModelParams> {
    validate_rho(rho)?;
    if !(0.0..=2.0).contains(&scale) {
        return Err(Error::InvalidR(scale));
    }
    let rho2 = rho * rho;
    let rho4 = rho2 * rho2;
    // Exactly 1 at R=2 and -1 at R=0; the clamp only absorbs rounding for
    // interior R.
    let q = ((rho4 + scale - 1.0) / (1.0 + rho4 * (scale - 1.0))).clamp(-1.0, 1.0);
    let quad_cross = scale * rho2 / ((1.0 + rho2) * (1.0 + rho2));
    let quad_diag = (1.0 - quad_cross) * rho2 / (1.0 + rho4);
    let quad_const = 1.0 - 2.0 * quad_diag - quad_cross * rho2;
    let support_halfwidth = if q >= 1.0 {
        f64::INFINITY
    } else {
        2.0 / (1.0 - q).sqrt()
    };
    Ok(ModelParams {
        rho,
        scale,
        q,
        slope: rho / (1.0 + rho2),
        quad_diag,
        quad_cross,
        quad_const,
        quad_linear: 0.0,
        support_halfwidth,
        gamma: 0.0,
    })
}

impl ModelParams {
    /// Same as [`derive_params`].
    pub fn new(rho: f64, scale: f64) -> Result<Self> {
        derive_params(rho, scale)
    }

    /// Build from `(rho, q)` by inverting the q formula:
    /// `R = (1+q)(1-rho^4) / (1-q rho^4)`.
    pub fn from_rho_q(rho: f64, q: f64) -> Result<Self> {
        validate_rho(rho)?;
        if !(-1.0..=1.0).contains(&q) {
            return Err(Error::UnsupportedQ {
                q,
                requirement: "-1 <= q <= 1",
            });
        }
        let rho4 = rho.powi(4);
        let scale = ((1.0 + q) * (1.0 - rho4) / (1.0 - q * rho4)).clamp(0.0, 2.0);
        let mut p = derive_params(rho, scale)?;
        // Store the requested q verbatim so endpoints stay exact.
        p.q = q;
        p.support_halfwidth = if q >= 1.0 {
            f64::INFINITY
        } else {
            2.0 / (1.0 - q).sqrt()
        };
        Ok(p)
    }

    /// True when this member is the Gaussian endpoint (q = 1 up to the
    /// crate-wide threshold).
    pub fn is_gaussian(&self) -> bool {
        self.q >= crate::Q_GAUSSIAN_THRESHOLD
    }

    /// True when this member is the two-valued endpoint (q = -1 up to the
    /// crate-wide threshold).
    pub fn is_two_point(&self) -> bool {
        self.q <= crate::Q_TWO_POINT_THRESHOLD
    }

    /// Boundedness classification of this member.
    pub fn boundedness(&self) -> Result<Boundedness> {
        classify_boundedness(self.quad_diag, self.quad_cross, self.quad_linear, self.rho)
    }
}

/// Solve the correlation recurrence `(1+r2) r_k = rho (r_{k-1} + r_{k+1})`.
///
/// Returns `r_0 = 1`, `r_1 = rho`, and the decaying tail
/// `r_k = r2 * c^(k-2)` for `k >= 2`, where `c` is the unique root of the
/// characteristic equation `rho x^2 - (1+r2) x + rho = 0` inside (-1,1)
/// (the two roots are real, distinct, and have product 1 under the
/// separation condition `r2 + 1 - 2|rho| > 0`). The tail is the only
/// bounded solution branch; its recurrence residual at the splice index
/// k = 2 vanishes exactly when `r2 = rho^2`.
pub fn solve_correlations(rho: f64, r2: f64, k_max: usize) -> Result<CorrelationSequence> {
    validate_rho(rho)?;
    if !(r2 + 1.0 - 2.0 * rho.abs() > 0.0) || r2.abs() > 1.0 {
        return Err(Error::CorrelationAssumption { rho, r2 });
    }
    let disc = (1.0 + r2) * (1.0 + r2) - 4.0 * rho * rho;
    // Additive form: no cancellation. |big| > 1, and c = 1/big since the
    // root product is exactly 1.
    let big = (1.0 + r2 + disc.sqrt()) / (2.0 * rho);
    let c = 1.0 / big;
    let mut values = Vec::with_capacity(k_max + 1);
    values.push(1.0);
    if k_max >= 1 {
        values.push(rho);
    }
    let mut tail = r2;
    for _ in 2..=k_max {
        values.push(tail);
        tail *= c;
    }
    values.truncate(k_max + 1);
    Ok(CorrelationSequence { rho, r2, values })
}

/// Classify boundedness of the marginal from the quadratic-form
/// coefficients.
///
/// Requires `A < 1/(1+rho^2)`. Below the critical surface
/// `A(rho^2 + 1/rho^2) + B = 1` the marginal is bounded; on the surface the
/// sign of `D` decides one-sided boundedness, and `D = 0` (as well as the
/// region above the surface, where no converse is available) is
/// inconclusive.
pub fn classify_boundedness(
    quad_diag: f64,
    quad_cross: f64,
    quad_linear: f64,
    rho: f64,
) -> Result<Boundedness> {
    validate_rho(rho)?;
    let rho2 = rho * rho;
    if !(quad_diag < 1.0 / (1.0 + rho2)) {
        return Err(Error::RegressionCoefficient {
            a: quad_diag,
            rho,
        });
    }
    let s = quad_diag * (rho2 + 1.0 / rho2) + quad_cross;
    if s < 1.0 - CRITICAL_EQ_TOL {
        return Ok(Boundedness::Bounded);
    }
    if s <= 1.0 + CRITICAL_EQ_TOL {
        return Ok(if quad_linear > 0.0 {
            Boundedness::BoundedBelow
        } else if quad_linear < 0.0 {
            Boundedness::BoundedAbove
        } else {
            Boundedness::Inconclusive
        });
    }
    Ok(Boundedness::Inconclusive)
}

mod serde_halfwidth {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_unit()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
