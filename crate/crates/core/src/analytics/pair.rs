//! Joint retention of two reference grains.

use crate::geometry::lens;
use crate::radius::Span;

use super::{random_q, ModelSpec};

impl ModelSpec {
    /// `∫_span |B_{s+r₁}(o) ∩ B_{s+r₂}(u e₁)| F(ds)`: how much obstructing mass
    /// the two reference grains share.
    pub fn shared_obstruction(&self, u: f64, r1: f64, r2: f64, span: Span) -> f64 {
        let d = self.d();
        let s0 = r1 + r2;
        let rmin = r1.min(r2);
        if d == 1 {
            // lens = (2s + c)⁺ with c = min(s0 − u, 2 r_min).
            let c = (s0 - u).min(2.0 * rmin);
            let sub = span.above_open(-0.5 * c);
            if sub.is_empty() {
                return 0.0;
            }
            return 2.0 * self.moment(1, sub) + c * self.moment(0, sub);
        }
        if u <= (r1 - r2).abs() {
            // Nested for every s: κ (s + r_min)^d.
            let mut sum = 0.0;
            let mut binom = 1.0;
            for j in 0..=d {
                sum += binom * rmin.powi((d - j) as i32) * self.moment(j, span);
                binom = binom * f64::from(d - j) / f64::from(j + 1);
            }
            return self.kappa() * sum;
        }
        let sub = span.above_open(0.5 * (u - s0));
        if sub.is_empty() {
            return 0.0;
        }
        self.law
            .integrate(
                |s| lens(d, s + r1, s + r2, u),
                sub,
                &self.law_breaks(),
                self.single_tol().scaled(0.1),
            )
            .value
    }

    /// Probability that grains of radii `r₁`, `r₂` and weights `w₁`, `w₂` at
    /// distance `u` are both retained.
    pub fn pair_retention(&self, u: f64, r1: f64, w1: f64, r2: f64, w2: f64) -> f64 {
        if u <= r1 + r2 {
            return 0.0;
        }
        let h1 = self.retention_probability(r1, w1);
        let h2 = self.retention_probability(r2, w2);
        h1 * h2 * self.shared_exponent(u, r1, r2, w1.max(w2)).exp()
    }

    /// `τ`: λ times the shared obstruction, restricted to grains heavier than
    /// `w`.
    fn shared_exponent(&self, u: f64, r1: f64, r2: f64, w: f64) -> f64 {
        let ob = self.obstructors(w);
        if ob.factor == 0.0 || ob.span.is_empty() {
            return 0.0;
        }
        self.lambda * ob.factor * self.shared_obstruction(u, r1, r2, ob.span)
    }

    /// `q(u, r₁, r₂) = h₂(u, r₁, r₂) − h(r₁)h(r₂)`, weights averaged out.
    pub fn retention_covariance(&self, u: f64, r1: f64, r2: f64) -> f64 {
        self.pair(r1, r2).covariance(u)
    }

    /// Per-pair quantities that do not depend on the separation.
    pub(crate) fn pair(&self, r1: f64, r2: f64) -> Pair<'_> {
        match (self.kernel.atom_weight(r1), self.kernel.atom_weight(r2)) {
            (Some(w1), Some(w2)) => Pair {
                spec: self,
                r1,
                r2,
                h1: self.retention_probability(r1, w1),
                h2: self.retention_probability(r2, w2),
                weights: Some(w1.max(w2)),
            },
            _ => {
                let b1 = self.lambda * self.grown_ball_integral(r1, Span::ALL);
                let b2 = self.lambda * self.grown_ball_integral(r2, Span::ALL);
                Pair {
                    spec: self,
                    r1,
                    r2,
                    h1: b1,
                    h2: b2,
                    weights: None,
                }
            }
        }
    }

    /// Separations beyond contact at which `q(·, r₁, r₂)` may have kinks: where
    /// the shared obstruction switches on or where its radius window ends.
    pub(crate) fn pair_kinks(&self, r1: f64, r2: f64) -> Vec<f64> {
        let s0 = r1 + r2;
        let w = match (self.kernel.atom_weight(r1), self.kernel.atom_weight(r2)) {
            (Some(a), Some(b)) => a.max(b),
            _ => 0.0,
        };
        let ob = self.obstructors(w);
        let lo = ob.span.lo.max(self.law.support_min());
        let mut k = vec![s0, s0 + 2.0 * lo];
        if ob.span.hi.is_finite() {
            k.push(s0 + 2.0 * ob.span.hi);
        }
        let top = self.law.support_max();
        if top.is_finite() {
            k.push(s0 + 2.0 * top);
        }
        k
    }
}

/// Retention data for two reference radii. For deterministic weights `h1`,
/// `h2` are the retention probabilities and `weights` the heavier weight; for
/// random weights they hold `B = λ b(r)` instead.
pub(crate) struct Pair<'a> {
    spec: &'a ModelSpec,
    r1: f64,
    r2: f64,
    h1: f64,
    h2: f64,
    weights: Option<f64>,
}

impl Pair<'_> {
    /// `max |q|`, attained on contact.
    pub fn overlap_value(&self) -> f64 {
        match self.weights {
            Some(_) => self.h1 * self.h2,
            None => super::psi(self.h1) * super::psi(self.h2),
        }
    }

    pub fn covariance(&self, u: f64) -> f64 {
        if u <= self.r1 + self.r2 {
            return -self.overlap_value();
        }
        match self.weights {
            Some(w) => {
                self.h1 * self.h2 * self.spec.shared_exponent(u, self.r1, self.r2, w).exp_m1()
            }
            None => {
                let a =
                    self.spec.lambda * self.spec.shared_obstruction(u, self.r1, self.r2, Span::ALL);
                random_q::covariance(a, self.h1, self.h2)
            }
        }
    }
}
