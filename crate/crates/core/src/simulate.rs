//! Sampling the weighted Boolean model on a bounded window, and thinning.
//!
//! The sample holds every grain whose ball hits the simulated box, the core
//! box expanded by the margin on every side. Radii are unbounded, so grains
//! are drawn from the hitting measure `λ |W_M ⊕ B_r| F(dr)` rather than from
//! a truncated law.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::{steiner_coefficients, Dim};
use crate::kernel::{obstructs, Grain, WeightKernel};
use crate::radius::{RadiusLaw, Span};
use crate::rng::{stream, Substream};

/// Default per-replication target for [`Window::bias_bound`].
pub const DEFAULT_BIAS_TARGET: f64 = 1e-3;

/// Grains wider than this many hash cells are checked against every grain.
const OVERFLOW_CELLS: f64 = 4.0;

/// An axis-parallel core box observed through a margin.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    dim: Dim,
    low: Vec<f64>,
    high: Vec<f64>,
    margin: f64,
}

impl Window {
    pub fn new(dim: Dim, low: &[f64], high: &[f64], margin: f64) -> Result<Self> {
        let d = dim.as_usize();
        if dim.get() > Dim::MAX_SIMULATION {
            return Err(invalid(
                "dimension",
                format!("simulation supports d <= {}, got {d}", Dim::MAX_SIMULATION),
            ));
        }
        if low.len() != d || high.len() != d {
            return Err(invalid(
                "window",
                format!("expected {d} coordinates per corner"),
            ));
        }
        for (a, b) in low.iter().zip(high) {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(invalid(
                    "window",
                    format!("empty or infinite extent [{a}, {b}]"),
                ));
            }
        }
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(invalid(
                "margin",
                format!("must be finite and >= 0, got {margin}"),
            ));
        }
        Ok(Self {
            dim,
            low: low.to_vec(),
            high: high.to_vec(),
            margin,
        })
    }

    /// The core `[0, side]^d`.
    pub fn cube(dim: Dim, side: f64, margin: f64) -> Result<Self> {
        let d = dim.as_usize();
        Self::new(dim, &vec![0.0; d], &vec![side; d], margin)
    }

    pub fn with_margin(&self, margin: f64) -> Result<Self> {
        Self::new(self.dim, &self.low, &self.high, margin)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn sides(&self) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(a, b)| b - a)
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.sides().iter().product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.low
            .iter()
            .zip(&self.high)
            .zip(x)
            .all(|((a, b), v)| v >= a && v <= b)
    }

    /// Lower and upper corners of the simulated box.
    pub fn simulated_box(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.margin;
        (
            self.low.iter().map(|a| a - m).collect(),
            self.high.iter().map(|b| b + m).collect(),
        )
    }

    /// Expected number of core-hitting grains with radius above `M/2`.
    ///
    /// A grain of radius at most `M/2` hitting the core only touches grains
    /// that hit the simulated box, so the core's thinning is exact unless
    /// such a large grain is present. The bound caps the probability of that.
    pub fn bias_bound(&self, lambda: f64, law: &RadiusLaw) -> Result<f64> {
        let span = Span::ALL.above_open(0.5 * self.margin);
        let mut total = 0.0;
        for (k, c) in steiner_coefficients(&self.sides()).iter().enumerate() {
            total += c * law.partial_moment(k as f64, span)?;
        }
        Ok(lambda * total)
    }

    /// Smallest margin whose bias bound is below `target`, capped at the
    /// longest core side. At the cap the bound may still exceed `target`;
    /// it is reported, not hidden.
    pub fn default_margin(&self, lambda: f64, law: &RadiusLaw, target: f64) -> Result<f64> {
        let bound = |m: f64| -> Result<f64> { self.with_margin(m)?.bias_bound(lambda, law) };
        if bound(0.0)? < target {
            return Ok(0.0);
        }
        let mut hi = self.sides().into_iter().fold(0.0, f64::max);
        let top = law.support_max();
        if top.is_finite() {
            hi = hi.min(2.0 * top * (1.0 + 1e-12));
        }
        if bound(hi)? >= target {
            return Ok(hi);
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if bound(mid)? < target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// All grains of the weighted Boolean model hitting the simulated box.
#[derive(Debug, Clone)]
pub struct BooleanSample {
    pub grains: Vec<Grain>,
    pub window: Window,
    pub lambda: f64,
    pub kernel: WeightKernel,
    pub seed: u64,
    pub replication: u64,
    pub bias_bound: f64,
}

/// Grain set that survived a thinning, with its link to the parent sample.
#[derive(Debug, Clone)]
pub struct ThinnedSample {
    pub retained: Vec<Grain>,
    pub window: Window,
    pub kernel: WeightKernel,
    /// One flag per parent grain, in parent order.
    pub mask: Vec<bool>,
}

impl ThinnedSample {
    pub fn parent_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
    }
}

/// Grains and the window they are read on; implemented by both sample kinds.
pub trait GrainSet: Sync {
    fn grains(&self) -> &[Grain];
    fn window(&self) -> &Window;
}

impl GrainSet for BooleanSample {
    fn grains(&self) -> &[Grain] {
        &self.grains
    }

    fn window(&self) -> &Window {
        &self.window
    }
}

impl GrainSet for ThinnedSample {
    fn grains(&self) -> &[Grain] {
        &self.retained
    }

    fn window(&self) -> &Window {
        &self.window
    }
}

/// Draws replication `replication` of the model under `seed`.
pub fn sample_boolean(
    lambda: f64,
    law: &RadiusLaw,
    kernel: WeightKernel,
    window: &Window,
    seed: u64,
    replication: u64,
) -> Result<BooleanSample> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(
            "lambda",
            format!("must be positive and finite, got {lambda}"),
        ));
    }
    let d = window.dim().as_usize();
    law.check_dimension(d as u32)?;
    let (lo, hi) = window.simulated_box();
    let sides: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
    // Mixture weights of the size-biased laws r^k F(dr) in the hitting law.
    let mut masses = Vec::with_capacity(d + 1);
    for (k, c) in steiner_coefficients(&sides).iter().enumerate() {
        masses.push(c * law.partial_moment(k as f64, Span::ALL)?);
    }
    let total: f64 = masses.iter().sum();
    let mean = lambda * total;
    if !mean.is_finite() {
        return Err(invalid("lambda", "expected grain count is not finite"));
    }

    let mut counts = stream(seed, replication, Substream::Counts);
    let n = Poisson::new(mean)
        .map_err(|e| invalid("lambda", e.to_string()))?
        .sample(&mut counts) as usize;

    let mut radii = stream(seed, replication, Substream::Radii);
    let mut centers = stream(seed, replication, Substream::Centers);
    let mut weights = stream(seed, replication, Substream::Weights(kernel));
    let mut grains = Vec::with_capacity(n);
    let mut c = [0.0; 3];
    for _ in 0..n {
        let mut pick = radii.random::<f64>() * total;
        let mut k = masses.len() - 1;
        for (j, m) in masses.iter().enumerate() {
            if pick < *m {
                k = j;
                break;
            }
            pick -= m;
        }
        let r = law.sample_size_biased(k as u32, &mut radii);
        loop {
            let mut dist2 = 0.0;
            for i in 0..d {
                let x = lo[i] - r + centers.random::<f64>() * (sides[i] + 2.0 * r);
                let gap = (lo[i] - x).max(x - hi[i]).max(0.0);
                dist2 += gap * gap;
                c[i] = x;
            }
            if dist2 <= r * r {
                break;
            }
        }
        let w = kernel.sample_weight(r, &mut weights)?;
        grains.push(Grain::new(&c[..d], r, w));
    }
    Ok(BooleanSample {
        grains,
        window: window.clone(),
        lambda,
        kernel,
        seed,
        replication,
        bias_bound: window.bias_bound(lambda, law)?,
    })
}

/// Runs `f` for replications `0..n` in parallel, results in replication order.
pub fn replicate<T, F>(n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

impl BooleanSample {
    /// The same configuration with weights redrawn for `kernel`.
    pub fn with_kernel(&self, kernel: WeightKernel) -> Result<Self> {
        let mut rng = stream(self.seed, self.replication, Substream::Weights(kernel));
        let mut grains = self.grains.clone();
        for g in &mut grains {
            g.weight = kernel.sample_weight(g.radius, &mut rng)?;
        }
        Ok(Self {
            grains,
            kernel,
            ..self.clone()
        })
    }

    /// Grain table with columns `x1..xd,radius,weight,retained`, preceded by
    /// `#` comment lines. Without a mask every grain is marked retained.
    pub fn write_csv<W: Write>(
        &self,
        mut out: W,
        mask: Option<&[bool]>,
        header: &[String],
    ) -> io::Result<()> {
        let d = self.window.dim().as_usize();
        for line in header {
            writeln!(out, "# {line}")?;
        }
        writeln!(
            out,
            "# seed={} replication={} lambda={} kernel={} margin={} bias_bound={}",
            self.seed,
            self.replication,
            self.lambda,
            self.kernel,
            self.window.margin(),
            self.bias_bound
        )?;
        let cols: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        writeln!(out, "{},radius,weight,retained", cols.join(","))?;
        for (i, g) in self.grains.iter().enumerate() {
            for x in &g.center[..d] {
                write!(out, "{x},")?;
            }
            let kept = mask.map_or(true, |m| m[i]);
            writeln!(out, "{},{},{}", g.radius, g.weight, u8::from(kept))?;
        }
        Ok(())
    }
}

fn build(sample: &BooleanSample, mask: Vec<bool>) -> ThinnedSample {
    let retained = sample
        .grains
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(g, _)| *g)
        .collect();
    ThinnedSample {
        retained,
        window: sample.window.clone(),
        kernel: sample.kernel,
        mask,
    }
}

/// Removes every grain obstructed by another grain of the sample.
pub fn thin(sample: &BooleanSample) -> ThinnedSample {
    let d = sample.window.dim().as_usize();
    build(sample, retained_mask(&sample.grains, d))
}

/// [`thin`] by checking all pairs.
pub fn thin_bruteforce(sample: &BooleanSample) -> ThinnedSample {
    let g = &sample.grains;
    let mask = (0..g.len())
        .map(|i| !(0..g.len()).any(|j| j != i && obstructs(&g[j], &g[i])))
        .collect();
    build(sample, mask)
}

struct HashGrid {
    cell: f64,
    d: usize,
}

impl HashGrid {
    fn keys(&self, g: &Grain) -> Vec<[i64; 3]> {
        let pad = 1e-9 * self.cell;
        let mut ranges = [(0i64, 0i64); 3];
        for (i, range) in ranges.iter_mut().enumerate().take(self.d) {
            let c = g.center[i];
            *range = (
                ((c - g.radius - pad) / self.cell).floor() as i64,
                ((c + g.radius + pad) / self.cell).floor() as i64,
            );
        }
        let mut out = Vec::new();
        for a in ranges[0].0..=ranges[0].1 {
            for b in ranges[1].0..=ranges[1].1 {
                for c in ranges[2].0..=ranges[2].1 {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }
}

/// Two closed balls that meet share a point, and that point's cell lies in
/// both bounding boxes; grains are registered in every cell their box covers.
fn retained_mask(grains: &[Grain], d: usize) -> Vec<bool> {
    if grains.is_empty() {
        return Vec::new();
    }
    let mut radii: Vec<f64> = grains.iter().map(|g| g.radius).collect();
    let mid = radii.len() / 2;
    radii.select_nth_unstable_by(mid, f64::total_cmp);
    let mut cell = radii[mid];
    if !(cell > 0.0) {
        cell = grains.iter().map(|g| g.radius).fold(0.0, f64::max).max(1.0);
    }
    let grid = HashGrid { cell, d };
    let limit = OVERFLOW_CELLS * cell;
    let mut table: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let mut overflow = Vec::new();
    for (i, g) in grains.iter().enumerate() {
        if g.radius > limit {
            overflow.push(i);
        } else {
            for key in grid.keys(g) {
                table.entry(key).or_default().push(i as u32);
            }
        }
    }
    (0..grains.len())
        .into_par_iter()
        .map(|i| {
            let g = &grains[i];
            let blocked = |j: usize| j != i && obstructs(&grains[j], g);
            if g.radius > limit {
                return !(0..grains.len()).any(blocked);
            }
            let near = grid.keys(g).into_iter().any(|key| {
                table
                    .get(&key)
                    .is_some_and(|list| list.iter().any(|&j| blocked(j as usize)))
            });
            !(near || overflow.iter().any(|&j| blocked(j)))
        })
        .collect()
}
