//! Long-range behavior: the intersection constant `c_{α,d}` and the tail
//! laws of each statistic under each kernel.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{lens, unit_ball_volume, Dim};
use crate::kernel::WeightKernel;
use crate::quad::Tolerance;
use crate::radius::{RadiusLaw, Span};

use super::{random_q, ModelSpec};

/// A statistic with a long-range prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    CoverCovariance,
    TwoPoint,
    RadiusTail,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Self::CoverCovariance, Self::TwoPoint, Self::RadiusTail];

    pub fn name(self) -> &'static str {
        match self {
            Self::CoverCovariance => "cover_covariance",
            Self::TwoPoint => "two_point",
            Self::RadiusTail => "radius_tail",
        }
    }
}

/// `amplitude · x^{−exponent}`, or the bound `amplitude · exp(−rate · x^power)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AsymptoticLaw {
    PowerLaw {
        amplitude: f64,
        exponent: f64,
    },
    ExponentialBound {
        amplitude: f64,
        rate: f64,
        power: f64,
    },
}

impl AsymptoticLaw {
    pub fn evaluate(&self, x: f64) -> f64 {
        match *self {
            Self::PowerLaw {
                amplitude,
                exponent,
            } => amplitude * x.powf(-exponent),
            Self::ExponentialBound {
                amplitude,
                rate,
                power,
            } => amplitude * (-rate * x.powf(power)).exp(),
        }
    }

    pub fn is_bound(&self) -> bool {
        matches!(self, Self::ExponentialBound { .. })
    }
}

/// `c_{α,d} = ∫ |B_r(o) ∩ B_r(e₁)| α r^{−α−1} dr`.
pub fn c_alpha_d(alpha: f64, d: Dim) -> Result<f64> {
    if !(alpha > d.as_f64()) || !alpha.is_finite() {
        return Err(invalid(
            "tail exponent",
            format!("c_alpha_d needs alpha > d, got alpha = {alpha}, d = {d}"),
        ));
    }
    // The integrand vanishes below r = 1/2; as a Pareto(α, 1/2) expectation
    // the density is α 2^{-α} r^{−α−1}.
    let law = RadiusLaw::Pareto { alpha, scale: 0.5 };
    let dd = d.get();
    let e = law.integrate(
        |r| lens(dd, r, r, 1.0),
        Span::ALL,
        &[1.0],
        Tolerance::new(1e-300, 1e-13).with_max_panels(4000),
    );
    Ok(e.value * 2f64.powf(alpha))
}

impl ModelSpec {
    fn pareto(&self) -> Option<(f64, f64)> {
        match self.law {
            RadiusLaw::Pareto { alpha, scale } => Some((alpha, scale.powf(alpha))),
            _ => None,
        }
    }

    fn no_prediction(&self, statistic: Statistic) -> Error {
        Error::NoPrediction {
            statistic: statistic.name(),
            kernel: self.kernel.name(),
        }
    }

    /// Long-range law of the unthinned cover covariance,
    /// `λ(1−p)² c_{α,d} ℓ z^{−(α−d)}`.
    pub fn boolean_covariance_asymptote(&self) -> Result<AsymptoticLaw> {
        let (alpha, ell) = self
            .pareto()
            .ok_or_else(|| self.no_prediction(Statistic::CoverCovariance))?;
        let p = self.boolean_volume_fraction();
        Ok(AsymptoticLaw::PowerLaw {
            amplitude: self.lambda * (1.0 - p) * (1.0 - p) * c_alpha_d(alpha, self.dim)? * ell,
            exponent: alpha - self.dim.as_f64(),
        })
    }

    /// The asymptote or bound predicted for `statistic` under this kernel.
    pub fn asymptotic_law(&self, statistic: Statistic) -> Result<AsymptoticLaw> {
        let lambda = self.lambda;
        let d = self.dim.as_f64();
        let kappa = unit_ball_volume(self.dim);
        let pareto = self.pareto();
        let power = |amplitude: f64, exponent: f64| AsymptoticLaw::PowerLaw {
            amplitude,
            exponent,
        };
        let need_pareto = || pareto.ok_or_else(|| self.no_prediction(statistic));
        match (self.kernel, statistic) {
            (WeightKernel::IsolatedRetained, Statistic::RadiusTail) => {
                Ok(AsymptoticLaw::ExponentialBound {
                    amplitude: lambda / self.thinned_intensity(),
                    rate: lambda * kappa,
                    power: d,
                })
            }
            (WeightKernel::IsolatedRetained, Statistic::CoverCovariance) => {
                let (alpha, ell) = need_pareto()?;
                let p_th = self.thinned_volume_fraction();
                Ok(power(
                    lambda * c_alpha_d(alpha, self.dim)? * p_th * p_th * ell,
                    alpha - d,
                ))
            }
            (WeightKernel::IsolatedRetained | WeightKernel::LargeRetained, Statistic::TwoPoint) => {
                let (alpha, ell) = need_pareto()?;
                Ok(power(lambda * c_alpha_d(alpha, self.dim)? * ell, alpha - d))
            }
            (WeightKernel::LargeRetained, Statistic::CoverCovariance) => {
                let (alpha, ell) = need_pareto()?;
                let p_th = self.thinned_volume_fraction();
                Ok(power(
                    lambda * c_alpha_d(alpha, self.dim)? * (1.0 - p_th) * (1.0 - p_th) * ell,
                    alpha - d,
                ))
            }
            (WeightKernel::LargeRetained, Statistic::RadiusTail) => {
                let (alpha, ell) = need_pareto()?;
                Ok(power(lambda / self.thinned_intensity() * ell, alpha))
            }
            (WeightKernel::RandomRetained, Statistic::RadiusTail) => {
                let (alpha, ell) = need_pareto()?;
                Ok(power(
                    alpha / (alpha + d) * ell / (self.thinned_intensity() * kappa),
                    alpha + d,
                ))
            }
            (WeightKernel::RandomRetained, Statistic::CoverCovariance) => {
                let (alpha, ell) = need_pareto()?;
                let c = c_alpha_d(alpha, self.dim)?;
                let di = self.dim.get() as i32;
                let n = self.random_slope_integral(|r1, r2| r1.powi(di) * r2.powi(di));
                Ok(power(
                    lambda.powi(3) * kappa * kappa * c * n * ell,
                    alpha - d,
                ))
            }
            (WeightKernel::RandomRetained, Statistic::TwoPoint) => {
                let (alpha, ell) = need_pareto()?;
                let c = c_alpha_d(alpha, self.dim)?;
                let n = self.random_slope_integral(|_, _| 1.0);
                let ratio = lambda / self.thinned_intensity();
                Ok(power(ratio * ratio * lambda * c * n * ell, alpha - d))
            }
            (WeightKernel::SmallRetained, Statistic::RadiusTail) => {
                Ok(AsymptoticLaw::ExponentialBound {
                    amplitude: lambda / self.thinned_intensity(),
                    rate: 0.5 * lambda * kappa,
                    power: d,
                })
            }
            (WeightKernel::SmallRetained, Statistic::CoverCovariance) => {
                let m1 = kappa * self.moment(self.dim.get(), Span::ALL);
                Ok(AsymptoticLaw::ExponentialBound {
                    amplitude: lambda * m1 + 2.0 * lambda * lambda * m1 * m1,
                    rate: 0.5 * lambda * kappa * 6f64.powf(-d),
                    power: d,
                })
            }
            (WeightKernel::SmallRetained, Statistic::TwoPoint) => {
                let ratio = lambda / self.thinned_intensity();
                Ok(AsymptoticLaw::ExponentialBound {
                    amplitude: 2.0 * ratio * ratio,
                    rate: 0.5 * lambda * kappa * 4f64.powf(-d),
                    power: d,
                })
            }
        }
    }

    /// Evaluates [`ModelSpec::asymptotic_law`] at `x`.
    pub fn asymptotic_prediction(&self, statistic: Statistic, x: f64) -> Result<f64> {
        Ok(self.asymptotic_law(statistic)?.evaluate(x))
    }

    /// `∬ g(r₁, r₂) N(λb(r₁), λb(r₂)) F(dr₁)F(dr₂)`, with `N` the slope of
    /// the random-weight retention covariance in the shared obstruction.
    fn random_slope_integral<G: Fn(f64, f64) -> f64>(&self, g: G) -> f64 {
        let tol = Tolerance::new(1e-300, self.accuracy.nested);
        let breaks = self.law_breaks();
        self.law
            .integrate(
                |r1| {
                    let b1 = self.lambda * self.grown_ball_integral(r1, Span::ALL);
                    self.law
                        .integrate(
                            |r2| {
                                let b2 = self.lambda * self.grown_ball_integral(r2, Span::ALL);
                                g(r1, r2) * random_q::shared_slope(b1, b2)
                            },
                            Span::ALL,
                            &breaks,
                            tol.scaled(0.3),
                        )
                        .value
                },
                Span::ALL,
                &breaks,
                tol,
            )
            .value
    }
}
