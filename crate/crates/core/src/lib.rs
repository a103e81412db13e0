//! Simulation and quadrature analytics for hard-core thinnings of spherical
//! Boolean models with heavy-tailed radii.

pub mod analytics;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod kernel;
pub mod quad;
pub mod radius;
pub mod rng;
pub mod simulate;

pub use analytics::{c_alpha_d, Accuracy, AsymptoticLaw, Curve, CurveKind, ModelSpec, Statistic};
pub use error::{Error, Result};
pub use estimators::{CovarianceEstimate, Measurement, TailFit};
pub use geometry::{ball_intersection_volume, unit_ball_volume, Dim, LensSpec};
pub use kernel::{obstructs, Grain, WeightKernel};
pub use quad::{Estimate, Tolerance};
pub use radius::{RadiusLaw, Span, TabulatedLaw, TailAsymptote};
pub use simulate::{
    sample_boolean, thin, thin_bruteforce, BooleanSample, GrainSet, ThinnedSample, Window,
};
