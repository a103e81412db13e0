//! Covariance of the thinned cover and two-point correlation of the retained
//! germs.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::lens;
use crate::quad::{self, Tolerance};
use crate::radius::Span;

use super::ModelSpec;

impl ModelSpec {
    /// `k_th(z)`, the covariance of the thinned cover at lag `z`.
    ///
    /// The second-order term is `λ² ∬ J(r₁, r₂) F(dr₁)F(dr₂)` with
    /// `J = ∫ |B_{r₁}(o) ∩ B_{r₂}(x)| q(|x − z e₁|, r₁, r₂) dx`, reduced to an
    /// integral over `u = |x − z e₁|`. Only `d ≤ 2` is offered.
    pub fn thinned_covariance(&self, z: f64) -> Result<f64> {
        let d = self.d();
        if d > 2 {
            return Err(Error::Unsupported(format!(
                "thinned covariance quadrature in dimension {d}; use simulation"
            )));
        }
        let span = if z > 0.0 {
            Span::above(0.5 * z)
        } else {
            Span::ALL
        };
        let first = self
            .law
            .integrate(
                |r| lens(d, r, r, z) * self.mean_retention(r),
                span,
                &self.law_breaks(),
                self.single_tol(),
            )
            .value;
        let rel = self.accuracy.nested;
        let mut outer_breaks = self.law_breaks();
        outer_breaks.extend([0.25 * z, 0.5 * z, z]);
        let second = self
            .law
            .integrate(
                |r1| {
                    let mut breaks = self.law_breaks();
                    breaks.extend([z - r1, 0.5 * z - r1, r1, 0.5 * z, z, z + r1, (z - r1) / 3.0]);
                    self.law
                        .integrate(
                            |r2| self.lens_weighted_covariance(r1, r2, z),
                            Span::ALL,
                            &breaks,
                            Tolerance::new(1e-300, 0.3 * rel),
                        )
                        .value
                },
                Span::ALL,
                &outer_breaks,
                Tolerance::new(1e-300, rel),
            )
            .value;
        Ok(self.lambda * first + self.lambda * self.lambda * second)
    }

    /// `J(r₁, r₂; z) = ∫_0^∞ q(u) K(u) du`, where `K(u)` integrates the lens
    /// volume over the sphere of radius `u` about `z e₁`.
    fn lens_weighted_covariance(&self, r1: f64, r2: f64, z: f64) -> f64 {
        let d = self.d();
        let s0 = r1 + r2;
        let gap = (r1 - r2).abs();
        let pair = self.pair(r1, r2);
        let lo = (z - s0).max(0.0);
        let hi = z + s0;
        let mut breaks = self.pair_kinks(r1, r2);
        breaks.extend([(z - s0).abs(), z - gap, z + gap, gap - z]);

        let rel = 0.1 * self.accuracy.nested;
        let kappa = self.kappa();
        let j_max = kappa * kappa * r1.powi(d as i32) * r2.powi(d as i32) * pair.overlap_value();
        // Beyond contact q is one-signed, so a relative target is reachable.
        let abs = if s0 >= z { rel * j_max } else { 1e-300 };
        let tol = Tolerance::new(abs, rel);

        let shell = |u: f64| -> f64 {
            if d == 1 {
                lens(1, r1, r2, (z - u).abs()) + lens(1, r1, r2, z + u)
            } else {
                self.circle_lens(r1, r2, z, u)
            }
        };
        quad::integrate(
            |u| {
                let k = shell(u);
                if k == 0.0 {
                    0.0
                } else {
                    k * pair.covariance(u)
                }
            },
            lo,
            hi,
            &breaks,
            tol,
        )
        .value
    }

    /// `∫_{|y| = u} |B_{r₁}(o) ∩ B_{r₂}(y + z e₁)| dσ(y)` in the plane.
    fn circle_lens(&self, r1: f64, r2: f64, z: f64, u: f64) -> f64 {
        let s0 = r1 + r2;
        if u == 0.0 {
            return 0.0;
        }
        if z == 0.0 {
            return 2.0 * PI * u * lens(2, r1, r2, u);
        }
        // ρ(θ)² = u² + z² + 2uz cos θ decreases on [0, π]; the lens vanishes for ρ ≥ s0.
        let cos_at = |rho: f64| (rho * rho - u * u - z * z) / (2.0 * u * z);
        let c0 = cos_at(s0);
        if c0 <= -1.0 {
            return 0.0;
        }
        let theta0 = if c0 >= 1.0 { 0.0 } else { c0.acos() };
        let c1 = cos_at((r1 - r2).abs());
        let mut breaks = Vec::new();
        if c1 > -1.0 && c1 < 1.0 {
            breaks.push(c1.acos());
        }
        let rel = 0.03 * self.accuracy.nested;
        let v = quad::integrate(
            |t: f64| {
                let rho2 = (u * u + z * z + 2.0 * u * z * t.cos()).max(0.0);
                lens(2, r1, r2, rho2.sqrt())
            },
            theta0,
            PI,
            &breaks,
            Tolerance::new(1e-300, rel),
        )
        .value;
        2.0 * u * v
    }

    /// `ξ_th(z) = g_th(z) − 1` for the retained germs.
    pub fn thinned_two_point_correlation(&self, z: f64) -> f64 {
        let rel = self.accuracy.nested;
        let r0 = self.law.support_min();
        let mut outer_breaks = self.law_breaks();
        outer_breaks.extend([0.25 * z, z / 3.0, 0.5 * z, z]);
        let double = self
            .law
            .integrate(
                |r1| {
                    let mut breaks = self.law_breaks();
                    breaks.extend([z - r1, r1, z - r1 - 2.0 * r0, (z - r1) / 3.0, z - 3.0 * r1]);
                    self.law
                        .integrate(
                            |r2| self.pair(r1, r2).covariance(z),
                            Span::ALL,
                            &breaks,
                            Tolerance::new(1e-300, 0.3 * rel),
                        )
                        .value
                },
                Span::ALL,
                &outer_breaks,
                Tolerance::new(1e-300, rel),
            )
            .value;
        let ratio = self.lambda / self.thinned_intensity();
        ratio * ratio * double
    }
}
