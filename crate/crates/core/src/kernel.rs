//! Weight kernels `G_r` and the obstruction relation between grains.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// The four thinning mechanisms, distinguished by how weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightKernel {
    /// Every weight is 1: a grain survives only if it has no neighbor.
    #[serde(rename = "isolated")]
    IsolatedRetained,
    /// Independent uniform weights on `(0, 1)`.
    #[serde(rename = "random")]
    RandomRetained,
    /// Weight equals radius.
    #[serde(rename = "large")]
    LargeRetained,
    /// Weight equals inverse radius.
    #[serde(rename = "small")]
    SmallRetained,
}

/// Range of obstructing radii `[lo, hi]` together with the probability that
/// such a grain outweighs the reference weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstructionWindow {
    pub lo: f64,
    pub hi: f64,
    pub factor: f64,
}

impl WeightKernel {
    pub const ALL: [WeightKernel; 4] = [
        Self::IsolatedRetained,
        Self::RandomRetained,
        Self::LargeRetained,
        Self::SmallRetained,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::IsolatedRetained => "isolated",
            Self::RandomRetained => "random",
            Self::LargeRetained => "large",
            Self::SmallRetained => "small",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| {
                invalid(
                    "kernel",
                    format!("unknown kernel {name:?}; expected isolated, random, large or small"),
                )
            })
    }

    /// `G_r[w, ∞)`.
    pub fn weight_survival(self, r: f64, w: f64) -> f64 {
        match self {
            Self::IsolatedRetained => indicator(w <= 1.0),
            Self::RandomRetained => (1.0 - w).clamp(0.0, 1.0),
            Self::LargeRetained => indicator(w <= r),
            Self::SmallRetained => {
                if r == 0.0 {
                    1.0
                } else {
                    indicator(w <= 1.0 / r)
                }
            }
        }
    }

    /// The deterministic weight of a grain of radius `r`, if the kernel has one.
    pub fn atom_weight(self, r: f64) -> Option<f64> {
        match self {
            Self::IsolatedRetained => Some(1.0),
            Self::RandomRetained => None,
            Self::LargeRetained => Some(r),
            Self::SmallRetained => Some(1.0 / r),
        }
    }

    pub fn sample_weight<R: Rng + ?Sized>(self, r: f64, rng: &mut R) -> Result<f64> {
        match self {
            Self::RandomRetained => Ok(rng.sample(Open01)),
            Self::SmallRetained if r == 0.0 => Err(invalid(
                "radius",
                "small-retained weights 1/r are undefined at r = 0",
            )),
            _ => Ok(self.atom_weight(r).expect("deterministic kernel")),
        }
    }

    /// Radii `s` whose grains obstruct a reference grain of weight `w`, and the
    /// chance `G_s[w, ∞)` they do so. The chance is constant on the window for
    /// every kernel.
    pub fn obstruction_window(self, w: f64) -> ObstructionWindow {
        let all = |factor: f64| ObstructionWindow {
            lo: 0.0,
            hi: f64::INFINITY,
            factor,
        };
        match self {
            Self::IsolatedRetained => all(indicator(w <= 1.0)),
            Self::RandomRetained => all((1.0 - w).clamp(0.0, 1.0)),
            Self::LargeRetained => ObstructionWindow {
                lo: w,
                hi: f64::INFINITY,
                factor: 1.0,
            },
            Self::SmallRetained => ObstructionWindow {
                lo: 0.0,
                hi: if w == 0.0 { f64::INFINITY } else { 1.0 / w },
                factor: 1.0,
            },
        }
    }
}

impl fmt::Display for WeightKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s)
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// A ball with a thinning weight. Unused center coordinates are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grain {
    pub center: [f64; 3],
    pub radius: f64,
    pub weight: f64,
}

impl Grain {
    pub fn new(center: &[f64], radius: f64, weight: f64) -> Self {
        let mut c = [0.0; 3];
        c[..center.len()].copy_from_slice(center);
        Self {
            center: c,
            radius,
            weight,
        }
    }

    pub fn distance_sq(&self, other: &Grain) -> f64 {
        self.center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Closed balls intersect; touching grains are neighbors.
    pub fn touches(&self, other: &Grain) -> bool {
        let reach = self.radius + other.radius;
        self.distance_sq(other) <= reach * reach
    }
}

/// `a` obstructs `b`: the balls intersect and `a` weighs at least as much.
pub fn obstructs(a: &Grain, b: &Grain) -> bool {
    a.weight >= b.weight && a.touches(b)
}
