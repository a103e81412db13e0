//! Exact first- and second-order characteristics of the thinned model,
//! evaluated by quadrature, and the power-law or exponential asymptotes they
//! approach.

mod asymptotics;
mod cover;
mod pair;
mod random_q;

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::{lens, unit_ball_volume, Dim};
use crate::kernel::WeightKernel;
use crate::quad::Tolerance;
use crate::radius::{RadiusLaw, Span};

pub use asymptotics::{c_alpha_d, AsymptoticLaw, Statistic};

/// Relative accuracy targets for one-dimensional integrals and for nested
/// (two- and three-fold) integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub single: f64,
    pub nested: f64,
}

impl Default for Accuracy {
    fn default() -> Self {
        Self {
            single: 1e-8,
            nested: 1e-6,
        }
    }
}

/// Intensity, radius law, weight kernel and dimension of the proposed model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub lambda: f64,
    pub law: RadiusLaw,
    pub kernel: WeightKernel,
    pub dim: Dim,
    pub accuracy: Accuracy,
}

/// Obstructing radii for a given reference weight, and the probability that a
/// grain in that range outweighs it.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Obstructors {
    pub span: Span,
    pub factor: f64,
}

impl ModelSpec {
    pub fn new(lambda: f64, law: RadiusLaw, kernel: WeightKernel, dim: Dim) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid("intensity", format!("{lambda} must be positive")));
        }
        law.check_dimension(dim.get())?;
        Ok(Self {
            lambda,
            law,
            kernel,
            dim,
            accuracy: Accuracy::default(),
        })
    }

    pub fn with_accuracy(mut self, accuracy: Accuracy) -> Self {
        self.accuracy = accuracy;
        self
    }

    pub fn with_kernel(&self, kernel: WeightKernel) -> Self {
        Self {
            kernel,
            ..self.clone()
        }
    }

    pub(crate) fn d(&self) -> u32 {
        self.dim.get()
    }

    pub(crate) fn kappa(&self) -> f64 {
        unit_ball_volume(self.dim)
    }

    pub(crate) fn single_tol(&self) -> Tolerance {
        Tolerance::new(1e-300, self.accuracy.single)
    }

    pub(crate) fn moment(&self, p: u32, span: Span) -> f64 {
        self.law
            .partial_moment(f64::from(p), span)
            .expect("moments up to the dimension are finite")
    }

    /// Radii that may carry kinks of integrands over `F`.
    pub(crate) fn law_breaks(&self) -> Vec<f64> {
        let mut b = vec![self.law.support_min(), 1.0];
        if let RadiusLaw::Tabulated(t) = &self.law {
            b.extend_from_slice(t.radii());
        }
        b
    }

    pub(crate) fn obstructors(&self, w: f64) -> Obstructors {
        let win = self.kernel.obstruction_window(w);
        let span = Span {
            lo: win.lo,
            hi: win.hi,
            closed_lo: true,
        };
        Obstructors {
            span,
            factor: win.factor,
        }
    }

    /// `∫_span |B_{r+s}| F(ds)`, exactly.
    pub fn grown_ball_integral(&self, r: f64, span: Span) -> f64 {
        let d = self.d();
        let mut sum = 0.0;
        let mut binom = 1.0;
        for j in 0..=d {
            sum += binom * r.powi((d - j) as i32) * self.moment(j, span);
            binom = binom * f64::from(d - j) / f64::from(j + 1);
        }
        self.kappa() * sum
    }

    /// `p = 1 − exp(−λ ∫ |B_r| F(dr))`.
    pub fn boolean_volume_fraction(&self) -> f64 {
        -(-self.lambda * self.kappa() * self.moment(self.d(), Span::ALL)).exp_m1()
    }

    /// Covariance of the Boolean cover at lag `z`.
    pub fn boolean_covariance(&self, z: f64) -> f64 {
        let p = self.boolean_volume_fraction();
        let d = self.d();
        let span = Span::above(0.5 * z);
        let overlap = if z == 0.0 {
            self.kappa() * self.moment(d, Span::ALL)
        } else if d == 1 {
            // (2r − z)⁺
            2.0 * self.moment(1, span) - z * self.moment(0, span)
        } else {
            self.law
                .integrate(
                    |r| lens(d, r, r, z),
                    span,
                    &self.law_breaks(),
                    self.single_tol(),
                )
                .value
        };
        (1.0 - p) * (1.0 - p) * (self.lambda * overlap).exp_m1()
    }

    /// `h(r, w)`: probability that a grain of radius `r` and weight `w` is
    /// retained.
    pub fn retention_probability(&self, r: f64, w: f64) -> f64 {
        let ob = self.obstructors(w);
        if ob.factor == 0.0 || ob.span.is_empty() {
            return 1.0;
        }
        (-self.lambda * ob.factor * self.grown_ball_integral(r, ob.span)).exp()
    }

    /// `h(r)`, averaged over the weight of a grain of radius `r`.
    pub fn mean_retention(&self, r: f64) -> f64 {
        match self.kernel.atom_weight(r) {
            Some(w) => self.retention_probability(r, w),
            None => psi(self.lambda * self.grown_ball_integral(r, Span::ALL)),
        }
    }

    /// `λ_th = λ ∫ h(r) F(dr)`.
    pub fn thinned_intensity(&self) -> f64 {
        self.lambda * self.retained_integral(|_| 1.0, Span::ALL)
    }

    /// Tail of the radius distribution of retained grains.
    pub fn thinned_radius_tail(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        let num = self.retained_integral(|_| 1.0, Span::above(r));
        let den = self.retained_integral(|_| 1.0, Span::ALL);
        num / den
    }

    /// `p_th = λ ∫ |B_r| h(r) F(dr)`.
    pub fn thinned_volume_fraction(&self) -> f64 {
        let d = self.d() as i32;
        self.lambda * self.kappa() * self.retained_integral(|r| r.powi(d), Span::ALL)
    }

    fn retained_integral<F: Fn(f64) -> f64>(&self, f: F, span: Span) -> f64 {
        self.law
            .integrate(
                |r| f(r) * self.mean_retention(r),
                span,
                &self.law_breaks(),
                self.single_tol(),
            )
            .value
    }

    /// Evaluates a statistic over a grid, in parallel.
    pub fn curve(&self, statistic: CurveKind, grid: &[f64]) -> Result<Curve> {
        use rayon::prelude::*;
        let values: Result<Vec<f64>> = grid
            .par_iter()
            .map(|&x| self.evaluate(statistic, x))
            .collect();
        Ok(Curve {
            kind: statistic,
            grid: grid.to_vec(),
            values: values?,
        })
    }

    pub fn evaluate(&self, statistic: CurveKind, x: f64) -> Result<f64> {
        Ok(match statistic {
            CurveKind::BooleanCovariance => self.boolean_covariance(x),
            CurveKind::ThinnedCovariance => self.thinned_covariance(x)?,
            CurveKind::TwoPointCorrelation => self.thinned_two_point_correlation(x),
            CurveKind::RadiusTail => self.thinned_radius_tail(x),
            CurveKind::Retention => self.mean_retention(x),
        })
    }
}

/// `(1 − e^{−x})/x`, continuous at 0.
pub(crate) fn psi(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// Which function a [`Curve`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    BooleanCovariance,
    ThinnedCovariance,
    TwoPointCorrelation,
    RadiusTail,
    Retention,
}

impl CurveKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BooleanCovariance => "boolean_covariance",
            Self::ThinnedCovariance => "thinned_covariance",
            Self::TwoPointCorrelation => "two_point_correlation",
            Self::RadiusTail => "radius_tail",
            Self::Retention => "retention",
        }
    }
}

/// Values of a statistic on a grid of lags or radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub kind: CurveKind,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    /// Writes `lag,value` rows after `#`-prefixed header lines.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "lag,value")?;
        for (x, v) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{x:.10e},{v:.10e}")?;
        }
        Ok(())
    }
}
