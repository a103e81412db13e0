//! Volumes of balls and of pairwise ball intersections in `R^d`.
//!
//! Lens volumes are the sum of two hyperspherical caps cut by the radical
//! hyperplane. Dimensions 1–3 use elementary closed forms; every other
//! dimension goes through the regularized incomplete beta function, which is
//! also exposed so the closed forms can be cross-checked against it.

use std::f64::consts::PI;

use statrs::function::beta::beta_reg;

use crate::error::{invalid, Result};

/// Ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dim(u32);

impl Dim {
    /// Largest dimension accepted for volume formulas.
    pub const MAX_VOLUME: u32 = 8;
    /// Largest dimension the simulator supports.
    pub const MAX_SIMULATION: u32 = 3;

    pub fn new(d: u32) -> Result<Self> {
        if d == 0 || d > Self::MAX_VOLUME {
            return Err(invalid(
                "dimension",
                format!("{d} outside 1..={}", Self::MAX_VOLUME),
            ));
        }
        Ok(Self(d))
    }

    pub const fn get(self) -> u32 {
        self.0
    }

    pub const fn as_usize(self) -> usize {
        self.0 as usize
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }
}

impl std::fmt::Display for Dim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Two radii and the distance between their centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensSpec {
    pub r1: f64,
    pub r2: f64,
    pub u: f64,
}

impl LensSpec {
    pub fn new(r1: f64, r2: f64, u: f64) -> Result<Self> {
        for (name, v) in [("radius r1", r1), ("radius r2", r2), ("center distance", u)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("{v} is not finite and nonnegative")));
            }
        }
        Ok(Self { r1, r2, u })
    }
}

/// Volume `κ_d` of the unit ball, via `κ_d = κ_{d-2}·2π/d`.
pub fn unit_ball_volume(d: Dim) -> f64 {
    unit_ball_volume_raw(d.get())
}

pub(crate) fn unit_ball_volume_raw(d: u32) -> f64 {
    let (mut k, mut n) = if d % 2 == 0 { (1.0, 0) } else { (2.0, 1) };
    while n < d {
        n += 2;
        k *= 2.0 * PI / f64::from(n);
    }
    k
}

/// Volume of a ball of radius `r`.
pub fn ball_volume(d: Dim, r: f64) -> f64 {
    unit_ball_volume(d) * r.powi(d.get() as i32)
}

/// Volume of `B_{r1}(o) ∩ B_{r2}(u e₁)`.
pub fn ball_intersection_volume(d: Dim, spec: LensSpec) -> f64 {
    lens(d.get(), spec.r1, spec.r2, spec.u)
}

/// Unchecked lens volume used on hot paths. Arguments must be finite and
/// nonnegative.
#[inline]
pub(crate) fn lens(d: u32, r1: f64, r2: f64, u: f64) -> f64 {
    match d {
        1 => (r1 + r2 - u).min(2.0 * r1).min(2.0 * r2).max(0.0),
        2 => lens_disk(r1, r2, u),
        3 => lens_ball3(r1, r2, u),
        _ => lens_via_beta(d, r1, r2, u),
    }
}

/// Where the radical hyperplane sits: distance from the first center, and the
/// two cap heights clamped to `[0, 2r]`. `None` when the balls are disjoint or
/// nested.
#[inline]
fn cap_heights(r1: f64, r2: f64, u: f64) -> Option<(f64, f64)> {
    if r1 <= 0.0 || r2 <= 0.0 || u >= r1 + r2 {
        return None;
    }
    if u <= (r1 - r2).abs() {
        return None;
    }
    let c1 = (u * u + r1 * r1 - r2 * r2) / (2.0 * u);
    let h1 = (r1 - c1).clamp(0.0, 2.0 * r1);
    let h2 = (r2 - (u - c1)).clamp(0.0, 2.0 * r2);
    Some((h1, h2))
}

#[inline]
fn nested_or_disjoint(d: u32, r1: f64, r2: f64, u: f64) -> f64 {
    if r1 <= 0.0 || r2 <= 0.0 || u >= r1 + r2 {
        0.0
    } else {
        unit_ball_volume_raw(d) * r1.min(r2).powi(d as i32)
    }
}

fn lens_disk(r1: f64, r2: f64, u: f64) -> f64 {
    match cap_heights(r1, r2, u) {
        None => nested_or_disjoint(2, r1, r2, u),
        Some((h1, h2)) => disk_segment(r1, h1) + disk_segment(r2, h2),
    }
}

/// Area of a circular segment of height `h`. Large segments go through the
/// complement so the arc term never sits near `acos(-1)`.
#[inline]
fn disk_segment(r: f64, h: f64) -> f64 {
    if h > r {
        return PI * r * r - disk_segment(r, 2.0 * r - h);
    }
    let h = h.max(0.0);
    2.0 * r * r * (h / (2.0 * r)).sqrt().min(1.0).asin() - (r - h) * (h * (2.0 * r - h)).sqrt()
}

fn lens_ball3(r1: f64, r2: f64, u: f64) -> f64 {
    match cap_heights(r1, r2, u) {
        None => nested_or_disjoint(3, r1, r2, u),
        Some((h1, h2)) => PI / 3.0 * (h1 * h1 * (3.0 * r1 - h1) + h2 * h2 * (3.0 * r2 - h2)),
    }
}

/// Volume of a cap of height `h` cut from a `d`-ball of radius `r`, through
/// the regularized incomplete beta function.
pub fn cap_volume(d: Dim, r: f64, h: f64) -> f64 {
    cap_volume_raw(d.get(), r, h)
}

fn cap_volume_raw(d: u32, r: f64, h: f64) -> f64 {
    if r <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let h = h.min(2.0 * r);
    let full = unit_ball_volume_raw(d) * r.powi(d as i32);
    let half_cap = |h: f64| {
        let x = ((2.0 * r * h - h * h) / (r * r)).clamp(0.0, 1.0);
        0.5 * full * beta_reg(0.5 * (f64::from(d) + 1.0), 0.5, x)
    };
    if h <= r {
        half_cap(h)
    } else {
        full - half_cap(2.0 * r - h)
    }
}

/// Lens volume through the general cap formula, valid in every dimension.
pub fn lens_via_beta(d: u32, r1: f64, r2: f64, u: f64) -> f64 {
    match cap_heights(r1, r2, u) {
        None => nested_or_disjoint(d, r1, r2, u),
        Some((h1, h2)) => cap_volume_raw(d, r1, h1) + cap_volume_raw(d, r2, h2),
    }
}

/// Volume of the dilation `box ⊕ B_r` of an axis-parallel box with the given
/// side lengths (Steiner formula: `Σ_k κ_k r^k e_{d-k}(sides)`).
pub fn box_dilation_volume(sides: &[f64], r: f64) -> f64 {
    steiner_coefficients(sides)
        .iter()
        .enumerate()
        .map(|(k, c)| c * r.powi(k as i32))
        .sum()
}

/// Coefficients `κ_k e_{d-k}(sides)` of the Steiner polynomial in `r`.
pub fn steiner_coefficients(sides: &[f64]) -> Vec<f64> {
    let d = sides.len();
    // Elementary symmetric polynomials e_0..e_d of the side lengths.
    let mut e = vec![0.0; d + 1];
    e[0] = 1.0;
    for &s in sides {
        for j in (1..=d).rev() {
            e[j] += e[j - 1] * s;
        }
    }
    (0..=d)
        .map(|k| unit_ball_volume_raw(k as u32) * e[d - k])
        .collect()
}
