//! Continuous q-Hermite polynomials via three-term recurrences.
//!
//! The monic family satisfies `x Q_n = Q_{n+1} + beta_n Q_{n-1}` with
//! `beta_n = [n]_q = 1 + q + ... + q^(n-1)`; the orthonormal family
//! satisfies `x Q_n = b_{n+1} Q_{n+1} + b_n Q_{n-1}` with `b_n = sqrt(beta_n)`.
//! At q = 1 these are the (probabilists') Hermite polynomials, at q = 0 the
//! Chebyshev polynomials of the second kind in `x/2`.

use crate::{Error, Result};

/// Which normalization a [`PolyFamily`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Leading coefficient 1.
    Monic,
    /// Unit norm against the orthogonality measure.
    Orthonormal,
}

/// Evaluator for one polynomial family at fixed `q`.
///
/// Recurrence coefficients are precomputed up to `max_degree` at
/// construction; evaluation is a forward O(n) sweep per point and is pure,
/// so a family can be shared freely across threads.
#[derive(Debug, Clone)]
pub struct PolyFamily {
    q: f64,
    normalization: Normalization,
    max_degree: usize,
    /// beta_0..beta_max_degree (beta_0 = 0 by convention).
    beta: Vec<f64>,
    /// b_n = sqrt(beta_n); only populated for the orthonormal branch.
    b: Vec<f64>,
}

/// Default degree budget; enough for every kernel truncation used by the
/// default tolerances at moderate |rho|. Callers needing deeper series ask
/// for it explicitly via [`PolyFamily::with_max_degree`].
pub const DEFAULT_MAX_DEGREE: usize = 64;

/// The q-integer `[n]_q = 1 + q + ... + q^(n-1)`.
///
/// Uses the closed form `(1-q^n)/(1-q)` away from q = 1 and falls back to
/// the literal sum when `|1-q| < 1e-8` to avoid cancellation.
pub fn q_integer(n: usize, q: f64) -> f64 {
    if (1.0 - q).abs() < 1e-8 {
        (0..n).map(|k| q.powi(k as i32)).sum()
    } else {
        (1.0 - q.powi(n as i32)) / (1.0 - q)
    }
}

impl PolyFamily {
    /// Family with the default degree budget.
    pub fn new(q: f64, normalization: Normalization) -> Result<Self> {
        Self::with_max_degree(q, normalization, DEFAULT_MAX_DEGREE)
    }

    /// Family able to evaluate degrees up to `max_degree`.
    ///
    /// Monic families accept q in [-1,1]; orthonormal families need q > -1
    /// (at q = -1 the norm of every degree >= 2 vanishes).
    pub fn with_max_degree(q: f64, normalization: Normalization, max_degree: usize) -> Result<Self> {
        if !(-1.0..=1.0).contains(&q) {
            return Err(Error::UnsupportedQ {
                q,
                requirement: "-1 <= q <= 1",
            });
        }
        if normalization == Normalization::Orthonormal && q <= -1.0 {
            return Err(Error::UnsupportedQ {
                q,
                requirement: "q > -1 for the orthonormal branch",
            });
        }
        // beta_{n+1} = q beta_n + 1 is exact and matches [n]_q.
        let mut beta = Vec::with_capacity(max_degree + 2);
        beta.push(0.0);
        for n in 0..=max_degree {
            beta.push(q * beta[n] + 1.0);
        }
        let b = if normalization == Normalization::Orthonormal {
            beta.iter().map(|&v| v.max(0.0).sqrt()).collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            q,
            normalization,
            max_degree,
            beta,
            b,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Recurrence coefficient `beta_n = [n]_q`.
    pub fn beta(&self, n: usize) -> f64 {
        self.beta[n]
    }

    /// `Q_n(x)` by forward recurrence.
    pub fn eval(&self, n: usize, x: f64) -> Result<f64> {
        if n > self.max_degree {
            return Err(Error::DegreeOverflow {
                requested: n,
                max: self.max_degree,
            });
        }
        let mut prev = 0.0;
        let mut cur = 1.0;
        for k in 0..n {
            let next = match self.normalization {
                Normalization::Monic => x * cur - self.beta[k] * prev,
                Normalization::Orthonormal => (x * cur - self.b[k] * prev) / self.b[k + 1],
            };
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// `[Q_0(x), ..., Q_{n_max}(x)]` in one sweep.
    pub fn eval_all(&self, n_max: usize, x: f64) -> Result<Vec<f64>> {
        if n_max > self.max_degree {
            return Err(Error::DegreeOverflow {
                requested: n_max,
                max: self.max_degree,
            });
        }
        let mut out = Vec::with_capacity(n_max + 1);
        let mut prev = 0.0;
        let mut cur = 1.0;
        out.push(cur);
        for k in 0..n_max {
            let next = match self.normalization {
                Normalization::Monic => x * cur - self.beta[k] * prev,
                Normalization::Orthonormal => (x * cur - self.b[k] * prev) / self.b[k + 1],
            };
            prev = cur;
            cur = next;
            out.push(cur);
        }
        Ok(out)
    }
}

/// Squared norm of the monic polynomial: `prod_{k=1..n} [k]_q`.
pub fn monic_norm_sq(q: f64, n: usize) -> f64 {
    (1..=n).map(|k| q_integer(k, q)).product()
}

/// Partial sums `S_N = sum_{n=1..N} 1/b_n` of the reciprocal orthonormal
/// recurrence coefficients.
///
/// Their divergence is the moment-determinacy witness: for q < 1,
/// `b_n <= 1/sqrt(1-q)` gives `S_N >= N sqrt(1-q)`; for q = 1,
/// `S_N >= 2(sqrt(N+1)-1)`.
pub fn carleman_partial_sums(q: f64, n_terms: usize) -> Vec<f64> {
    let mut sums = Vec::with_capacity(n_terms);
    let mut acc = 0.0;
    for n in 1..=n_terms {
        acc += 1.0 / q_integer(n, q).sqrt();
        sums.push(acc);
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn q_integer_values() {
        assert_eq!(q_integer(3, 1.0), 3.0);
        assert_eq!(q_integer(3, 0.0), 1.0);
        assert_abs_diff_eq!(q_integer(4, 0.5), 1.875, epsilon = 1e-15);
        assert_eq!(q_integer(0, 0.7), 0.0);
        // Closed form matches the literal sum.
        for &q in &[-1.0f64, -0.4, 0.3, 0.99, 1.0 - 1e-9] {
            for n in 0..30 {
                let literal: f64 = (0..n).map(|k| q.powi(k as i32)).sum();
                approx::assert_relative_eq!(
                    q_integer(n, q),
                    literal,
                    max_relative = 1e-14,
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn low_degree_closed_forms() {
        for &q in &[-1.0, -0.3, 0.0, 0.5, 1.0] {
            let fam = PolyFamily::new(q, Normalization::Monic).unwrap();
            for &x in &[-1.7, 0.0, 0.4, 2.2] {
                assert_eq!(fam.eval(0, x).unwrap(), 1.0);
                assert_eq!(fam.eval(1, x).unwrap(), x);
                assert_abs_diff_eq!(fam.eval(2, x).unwrap(), x * x - 1.0, epsilon = 1e-14);
            }
        }
        // Odd Hermite polynomial vanishes at the origin.
        let hermite = PolyFamily::new(1.0, Normalization::Monic).unwrap();
        assert_eq!(hermite.eval(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn chebyshev_oracle_at_q_zero() {
        // At q=0 the monic polynomials are sin((n+1)t)/sin(t) at x = 2cos(t).
        let fam = PolyFamily::with_max_degree(0.0, Normalization::Monic, 20).unwrap();
        let theta = std::f64::consts::PI / 3.0;
        assert_abs_diff_eq!(
            fam.eval(4, 2.0 * theta.cos()).unwrap(),
            (5.0 * theta).sin() / theta.sin(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(fam.eval(4, 1.0).unwrap(), -1.0, epsilon = 1e-12);
        for n in 0..=15 {
            for i in 1..40 {
                let t = std::f64::consts::PI * i as f64 / 40.0;
                let expected = ((n as f64 + 1.0) * t).sin() / t.sin();
                assert_abs_diff_eq!(fam.eval(n, 2.0 * t.cos()).unwrap(), expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn hermite_oracle_at_q_one() {
        // Independently coded probabilists' Hermite recurrence.
        fn hermite(n: usize, x: f64) -> f64 {
            let (mut prev, mut cur) = (0.0, 1.0);
            for k in 0..n {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
        let fam = PolyFamily::new(1.0, Normalization::Monic).unwrap();
        for n in 0..=15 {
            for &x in &[-2.5, -0.7, 0.0, 0.3, 1.9] {
                assert_abs_diff_eq!(fam.eval(n, x).unwrap(), hermite(n, x), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eval_all_matches_eval_and_hand_iteration() {
        let fam = PolyFamily::new(0.3, Normalization::Monic).unwrap();
        assert_eq!(fam.eval_all(0, 7.0).unwrap(), vec![1.0]);

        let ortho = PolyFamily::new(0.6, Normalization::Orthonormal).unwrap();
        let vals = ortho.eval_all(1, 1.3).unwrap();
        assert_eq!(vals, vec![1.0, 1.3]);

        // Hand-iterated: Q_2(1) = 0, Q_3(1) = 1*0 - beta_2*1 = -1.5 at q=0.5.
        let fam = PolyFamily::new(0.5, Normalization::Monic).unwrap();
        let vals = fam.eval_all(3, 1.0).unwrap();
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vals[2], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vals[3], -1.5, epsilon = 1e-15);

        for (n, v) in vals.iter().enumerate() {
            assert_eq!(*v, fam.eval(n, 1.0).unwrap());
        }
    }

    #[test]
    fn degree_overflow_is_an_error() {
        let fam = PolyFamily::with_max_degree(0.5, Normalization::Monic, 8).unwrap();
        assert!(matches!(
            fam.eval(9, 0.0),
            Err(Error::DegreeOverflow { requested: 9, max: 8 })
        ));
        assert!(fam.eval_all(9, 0.0).is_err());
    }

    #[test]
    fn norms() {
        assert_abs_diff_eq!(monic_norm_sq(1.0, 4), 24.0, epsilon = 1e-12);
        assert_abs_diff_eq!(monic_norm_sq(0.0, 5), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(monic_norm_sq(0.5, 3), 2.625, epsilon = 1e-15);
        assert_eq!(monic_norm_sq(0.5, 0), 1.0);
    }

    #[test]
    fn carleman_sums() {
        let s = carleman_partial_sums(0.0, 10);
        assert_abs_diff_eq!(s[9], 10.0, epsilon = 1e-12);
        let s = carleman_partial_sums(1.0, 4);
        assert_abs_diff_eq!(
            s[3],
            1.0 + 1.0 / 2f64.sqrt() + 1.0 / 3f64.sqrt() + 0.5,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(carleman_partial_sums(0.5, 1)[0], 1.0, epsilon = 0.0);
        // Divergence witnesses.
        for &q in &[-0.9, 0.0, 0.7, 0.99] {
            let n = 200;
            let s = carleman_partial_sums(q, n);
            assert!(s[n - 1] >= n as f64 * (1.0 - q).sqrt() - 1e-9);
        }
        let s = carleman_partial_sums(1.0, 200);
        assert!(s[199] >= 2.0 * (201f64.sqrt() - 1.0));
    }

    #[test]
    fn beta_recursion_is_exact() {
        for &q in &[-1.0, -0.6, 0.0, 0.5, 1.0] {
            let fam = PolyFamily::with_max_degree(q, Normalization::Monic, 60).unwrap();
            for n in 0..60 {
                assert_abs_diff_eq!(fam.beta(n + 1), q * fam.beta(n) + 1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(fam.beta(n), q_integer(n, q), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn two_point_degeneracy_at_q_minus_one() {
        let fam = PolyFamily::new(-1.0, Normalization::Monic).unwrap();
        for n in 2..=10 {
            assert_abs_diff_eq!(fam.eval(n, 1.0).unwrap(), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(fam.eval(n, -1.0).unwrap(), 0.0, epsilon = 1e-14);
        }
        assert!(PolyFamily::new(-1.0, Normalization::Orthonormal).is_err());
    }

    proptest! {
        #[test]
        fn recurrence_consistency(
            q in -1.0f64..=1.0,
            n in 1usize..30,
            u in -1.0f64..1.0,
        ) {
            let fam = PolyFamily::with_max_degree(q, Normalization::Monic, 32).unwrap();
            let half = if q >= 1.0 { 3.0 } else { 2.0 / (1.0 - q).sqrt() };
            let x = u * half;
            let vals = fam.eval_all(n + 1, x).unwrap();
            let resid = x * vals[n] - vals[n + 1] - fam.beta(n) * vals[n - 1];
            let scale = vals[n].abs().max(vals[n + 1].abs()).max(1.0);
            prop_assert!((resid / scale).abs() < 1e-10);
        }

        #[test]
        fn monic_orthonormal_consistency(
            q in -0.99f64..=1.0,
            n in 0usize..=20,
            u in -1.0f64..1.0,
        ) {
            let monic = PolyFamily::with_max_degree(q, Normalization::Monic, 20).unwrap();
            let ortho = PolyFamily::with_max_degree(q, Normalization::Orthonormal, 20).unwrap();
            let half = if q >= 1.0 { 3.0 } else { 2.0 / (1.0 - q).sqrt() };
            let x = u * half;
            let m = monic.eval(n, x).unwrap();
            let o = ortho.eval(n, x).unwrap() * monic_norm_sq(q, n).sqrt();
            let scale = m.abs().max(o.abs()).max(1.0);
            prop_assert!(((m - o) / scale).abs() < 1e-10);
        }
    }
}
