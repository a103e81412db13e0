//! Monte Carlo estimators read on the core window of simulated samples.
//!
//! Every estimator computes one value per replication and reports the mean
//! and its standard error across replications.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::unit_ball_volume;
use crate::kernel::Grain;
use crate::rng::{stream, Substream};
use crate::simulate::{GrainSet, Window};

/// Largest number of cells in a [`CoverIndex`].
const MAX_INDEX_CELLS: f64 = 4e6;

/// Mean over replications with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measurement {
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
}

impl Measurement {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n >= 2 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            replications: n,
        }
    }

    /// `(value − mean)/stderr`, or 0 when both agree exactly.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = self.mean - value;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

/// A curve estimated over replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceEstimate {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replications: usize,
}

impl CovarianceEstimate {
    /// Aggregates `per_replication[i][j]`, the value of replication `i` at
    /// lag `j`.
    pub fn from_replications(lags: &[f64], per_replication: &[Vec<f64>]) -> Self {
        let mut values = Vec::with_capacity(lags.len());
        let mut stderr = Vec::with_capacity(lags.len());
        for j in 0..lags.len() {
            let column: Vec<f64> = per_replication.iter().map(|row| row[j]).collect();
            let m = Measurement::from_values(&column);
            values.push(m.mean);
            stderr.push(m.stderr);
        }
        Self {
            lags: lags.to_vec(),
            values,
            stderr,
            replications: per_replication.len(),
        }
    }

    pub fn at(&self, j: usize) -> Measurement {
        Measurement {
            mean: self.values[j],
            stderr: self.stderr[j],
            replications: self.replications,
        }
    }

    /// Columns `lag,value,stderr,n` after `#` comment lines.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> io::Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "lag,value,stderr,n")?;
        for j in 0..self.lags.len() {
            writeln!(
                out,
                "{:.10e},{:.10e},{:.10e},{}",
                self.lags[j], self.values[j], self.stderr[j], self.replications
            )?;
        }
        Ok(())
    }
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub lo: f64,
    pub hi: f64,
}

fn check_lags(lags: &[f64]) -> Result<()> {
    if lags.is_empty() || lags.windows(2).any(|w| w[1] <= w[0]) || lags[0] < 0.0 {
        return Err(Error::Degenerate(
            "lags must be non-negative and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn check_samples<S>(samples: &[S]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Degenerate("no samples".into()));
    }
    Ok(())
}

/// Fast point-in-union queries on the core: a grid whose cells are either
/// known to be covered by one grain or hold the grains meeting them.
pub struct CoverIndex {
    low: Vec<f64>,
    cell: f64,
    shape: Vec<usize>,
    full: Vec<bool>,
    candidates: Vec<Vec<u32>>,
    grains: Vec<Grain>,
}

impl CoverIndex {
    pub fn new(grains: &[Grain], window: &Window) -> Self {
        let d = window.dim().as_usize();
        let low = window.low().to_vec();
        let sides = window.sides();
        let hitting: Vec<Grain> = grains
            .iter()
            .filter(|g| {
                box_distance_sq(&g.center[..d], window.low(), window.high()) <= g.radius * g.radius
            })
            .copied()
            .collect();
        let mut radii: Vec<f64> = hitting.iter().map(|g| g.radius).collect();
        let longest = sides.iter().copied().fold(0.0, f64::max);
        let mut cell = if radii.is_empty() {
            longest
        } else {
            let mid = radii.len() / 2;
            *radii.select_nth_unstable_by(mid, f64::total_cmp).1
        };
        let volume: f64 = sides.iter().product();
        cell = cell
            .max((volume / MAX_INDEX_CELLS).powf(1.0 / d as f64))
            .min(longest);
        let shape: Vec<usize> = sides
            .iter()
            .map(|s| ((s / cell).ceil() as usize).max(1))
            .collect();
        let total: usize = shape.iter().product();
        let mut index = Self {
            low,
            cell,
            shape,
            full: vec![false; total],
            candidates: vec![Vec::new(); total],
            grains: hitting,
        };
        for i in 0..index.grains.len() {
            index.register(i);
        }
        index
    }

    fn register(&mut self, i: usize) {
        let g = self.grains[i];
        let d = self.shape.len();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..d {
            let from = ((g.center[a] - g.radius - self.low[a]) / self.cell).floor();
            let to = ((g.center[a] + g.radius - self.low[a]) / self.cell).floor();
            let top = (self.shape[a] - 1) as f64;
            lo[a] = from.clamp(0.0, top) as usize;
            hi[a] = to.clamp(0.0, top) as usize;
        }
        let r2 = g.radius * g.radius;
        let mut idx = lo;
        loop {
            let flat = self.flat(&idx[..d]);
            if !self.full[flat] {
                // Squared distances from the center to the nearest and farthest
                // points of the cell.
                let (mut near, mut far) = (0.0, 0.0);
                for a in 0..d {
                    let c0 = self.low[a] + idx[a] as f64 * self.cell;
                    let c1 = c0 + self.cell;
                    let x = g.center[a];
                    let n = (c0 - x).max(x - c1).max(0.0);
                    let f = (x - c0).abs().max((x - c1).abs());
                    near += n * n;
                    far += f * f;
                }
                if far <= r2 {
                    self.full[flat] = true;
                    self.candidates[flat] = Vec::new();
                } else if near <= r2 {
                    self.candidates[flat].push(i as u32);
                }
            }
            // Odometer step over the cell box.
            let mut a = 0;
            loop {
                if a == d {
                    return;
                }
                if idx[a] < hi[a] {
                    idx[a] += 1;
                    break;
                }
                idx[a] = lo[a];
                a += 1;
            }
        }
    }

    fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (a, &i) in idx.iter().enumerate().rev() {
            f = f * self.shape[a] + i;
        }
        f
    }

    /// Whether `x` (a point of the core) lies in some grain.
    pub fn covered(&self, x: &[f64]) -> bool {
        let mut idx = [0usize; 3];
        for (a, slot) in idx.iter_mut().enumerate().take(self.shape.len()) {
            let i = ((x[a] - self.low[a]) / self.cell).floor();
            *slot = i.clamp(0.0, (self.shape[a] - 1) as f64) as usize;
        }
        let flat = self.flat(&idx[..self.shape.len()]);
        self.full[flat]
            || self.candidates[flat].iter().any(|&j| {
                let g = &self.grains[j as usize];
                let d2: f64 = x
                    .iter()
                    .zip(&g.center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d2 <= g.radius * g.radius
            })
    }
}

fn box_distance_sq(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (a, b))| {
            let g = (a - v).max(v - b).max(0.0);
            g * g
        })
        .sum()
}

/// Covered fraction of the core from a jittered grid of `per_axis^d` probes.
pub fn estimate_volume_fraction<S: GrainSet>(
    samples: &[S],
    per_axis: usize,
    seed: u64,
) -> Result<Measurement> {
    check_samples(samples)?;
    let values: Vec<f64> = samples
        .par_iter()
        .enumerate()
        .map(|(rep, s)| {
            let w = s.window();
            let d = w.dim().as_usize();
            let index = CoverIndex::new(s.grains(), w);
            let mut rng = stream(seed, rep as u64, Substream::Probes);
            let sides = w.sides();
            let total = per_axis.pow(d as u32);
            let mut hits = 0usize;
            let mut x = vec![0.0; d];
            for k in 0..total {
                let mut rest = k;
                for a in 0..d {
                    let cell = (rest % per_axis) as f64;
                    rest /= per_axis;
                    x[a] = w.low()[a] + (cell + rng.random::<f64>()) * sides[a] / per_axis as f64;
                }
                hits += usize::from(index.covered(&x));
            }
            hits as f64 / total as f64
        })
        .collect();
    Ok(Measurement::from_values(&values))
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Unit vectors over which covariance lags are averaged.
fn directions(d: usize) -> Vec<[f64; 3]> {
    match d {
        1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        2 => (0..8)
            .map(|k| {
                let t = k as f64 * PI / 8.0;
                [t.cos(), t.sin(), 0.0]
            })
            .collect(),
        _ => {
            let s = 1.0 / 3f64.sqrt();
            vec![
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [s, s, s],
                [s, s, -s],
                [s, -s, s],
                [-s, s, s],
            ]
        }
    }
}

/// Cover covariance `k(z)` from `probes` shifted Halton points per
/// replication. Probes and their lag partners stay inside the core.
pub fn estimate_cover_covariance<S: GrainSet>(
    samples: &[S],
    lags: &[f64],
    probes: usize,
    seed: u64,
) -> Result<CovarianceEstimate> {
    check_samples(samples)?;
    check_lags(lags)?;
    let reach = *lags.last().unwrap();
    for s in samples {
        if s.window().sides().iter().any(|side| *side <= 2.0 * reach) {
            return Err(Error::Degenerate(format!(
                "lag {reach} does not fit twice in the core"
            )));
        }
    }
    let rows: Vec<Vec<f64>> = samples
        .par_iter()
        .enumerate()
        .map(|(rep, s)| {
            let w = s.window();
            let d = w.dim().as_usize();
            let index = CoverIndex::new(s.grains(), w);
            let mut rng = stream(seed, rep as u64, Substream::Probes);
            let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let bases = [2u64, 3, 5];
            let points: Vec<[f64; 3]> = (1..=probes as u64)
                .map(|i| {
                    let mut p = [0.0; 3];
                    for a in 0..d {
                        let u = (radical_inverse(i, bases[a]) + shift[a]).fract();
                        let span = w.sides()[a] - 2.0 * reach;
                        p[a] = w.low()[a] + reach + u * span;
                    }
                    p
                })
                .collect();
            let here: Vec<bool> = points.iter().map(|p| index.covered(&p[..d])).collect();
            let m0 = here.iter().filter(|&&c| c).count() as f64 / probes as f64;
            let dirs = directions(d);
            lags.iter()
                .map(|&z| {
                    let mut acc = 0.0;
                    for e in &dirs {
                        let (mut both, mut there) = (0usize, 0usize);
                        for (p, &c) in points.iter().zip(&here) {
                            let mut q = [0.0; 3];
                            for a in 0..d {
                                q[a] = p[a] + z * e[a];
                            }
                            let cq = index.covered(&q[..d]);
                            there += usize::from(cq);
                            both += usize::from(c && cq);
                        }
                        let n = probes as f64;
                        acc += both as f64 / n - m0 * (there as f64 / n);
                    }
                    acc / dirs.len() as f64
                })
                .collect()
        })
        .collect();
    Ok(CovarianceEstimate::from_replications(lags, &rows))
}

fn germs_in_core<S: GrainSet>(s: &S) -> Vec<[f64; 3]> {
    let w = s.window();
    let d = w.dim().as_usize();
    s.grains()
        .iter()
        .filter(|g| w.contains(&g.center[..d]))
        .map(|g| g.center)
        .collect()
}

/// `ξ(z) = g(z) − 1` for the germs in the core, from a translation-corrected
/// count of pairs whose distance is within `half_width` of each lag.
pub fn estimate_pair_correlation<S: GrainSet>(
    samples: &[S],
    lags: &[f64],
    half_width: f64,
) -> Result<CovarianceEstimate> {
    check_samples(samples)?;
    check_lags(lags)?;
    if !(half_width > 0.0) {
        return Err(Error::Degenerate(
            "annulus half-width must be positive".into(),
        ));
    }
    let rows: Result<Vec<Vec<f64>>> = samples
        .par_iter()
        .map(|s| {
            let w = s.window();
            let d = w.dim().as_usize();
            let sides = w.sides();
            let volume = w.volume();
            let mut pts = germs_in_core(s);
            let n = pts.len();
            if n < 2 {
                return Err(Error::Degenerate(format!("{n} germs in the core")));
            }
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
            let reach = lags.last().unwrap() + half_width;
            let mut sums = vec![0.0; lags.len()];
            for i in 0..n {
                for j in i + 1..n {
                    if pts[j][0] - pts[i][0] > reach {
                        break;
                    }
                    let mut r2 = 0.0;
                    let mut overlap = 1.0;
                    for a in 0..d {
                        let v = pts[j][a] - pts[i][a];
                        r2 += v * v;
                        overlap *= sides[a] - v.abs();
                    }
                    if overlap <= 0.0 {
                        continue;
                    }
                    let r = r2.sqrt();
                    for (k, &z) in lags.iter().enumerate() {
                        if (r - z).abs() <= half_width {
                            // Ordered pairs (i, j) and (j, i).
                            sums[k] += 2.0 / overlap;
                        }
                    }
                }
            }
            let kappa = unit_ball_volume(w.dim());
            let lambda2 = n as f64 * (n - 1) as f64 / (volume * volume);
            Ok(lags
                .iter()
                .zip(&sums)
                .map(|(&z, &sum)| {
                    let shell = kappa
                        * ((z + half_width).powi(d as i32)
                            - (z - half_width).max(0.0).powi(d as i32));
                    sum / (lambda2 * shell) - 1.0
                })
                .collect())
        })
        .collect();
    Ok(CovarianceEstimate::from_replications(lags, &rows?))
}

/// Fraction of core germs with radius strictly above each grid point.
pub fn empirical_radius_tail<S: GrainSet>(
    samples: &[S],
    grid: &[f64],
) -> Result<CovarianceEstimate> {
    check_samples(samples)?;
    check_lags(grid)?;
    let rows: Result<Vec<Vec<f64>>> = samples
        .iter()
        .map(|s| {
            let w = s.window();
            let d = w.dim().as_usize();
            let radii: Vec<f64> = s
                .grains()
                .iter()
                .filter(|g| w.contains(&g.center[..d]))
                .map(|g| g.radius)
                .collect();
            if radii.is_empty() {
                return Err(Error::Degenerate("no retained germs in the core".into()));
            }
            let n = radii.len() as f64;
            Ok(grid
                .iter()
                .map(|&r| radii.iter().filter(|&&x| x > r).count() as f64 / n)
                .collect())
        })
        .collect();
    Ok(CovarianceEstimate::from_replications(grid, &rows?))
}

/// Germs per unit volume in the core.
pub fn estimate_intensity<S: GrainSet>(samples: &[S]) -> Result<Measurement> {
    check_samples(samples)?;
    let values: Vec<f64> = samples
        .iter()
        .map(|s| germs_in_core(s).len() as f64 / s.window().volume())
        .collect();
    Ok(Measurement::from_values(&values))
}

/// Ordinary least squares of `ln y` on `ln x` over `lo <= x <= hi`.
pub fn fit_tail_exponent(x: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<TailFit> {
    let mut pts = Vec::new();
    for (&a, &b) in x.iter().zip(y) {
        if a >= lo && a <= hi {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::Degenerate(format!(
                    "non-positive point ({a}, {b}) in fit range"
                )));
            }
            pts.push((a.ln(), b.ln()));
        }
    }
    if pts.len() < 2 {
        return Err(Error::Degenerate(format!(
            "{} points in fit range [{lo}, {hi}]",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate(
            "fit range holds a single abscissa".into(),
        ));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(TailFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        lo,
        hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Dim;
    use crate::simulate::BooleanSample;
    use crate::WeightKernel;

    fn with_grains(grains: Vec<Grain>, side: f64) -> BooleanSample {
        BooleanSample {
            grains,
            window: Window::cube(Dim::new(2).unwrap(), side, 0.0).unwrap(),
            lambda: 1.0,
            kernel: WeightKernel::IsolatedRetained,
            seed: 0,
            replication: 0,
            bias_bound: 0.0,
        }
    }

    #[test]
    fn volume_fraction_extremes() {
        let empty = vec![with_grains(vec![], 10.0); 3];
        assert_eq!(estimate_volume_fraction(&empty, 16, 1).unwrap().mean, 0.0);
        let full = vec![with_grains(vec![Grain::new(&[5.0, 5.0], 8.0, 1.0)], 10.0); 3];
        let m = estimate_volume_fraction(&full, 16, 1).unwrap();
        assert_eq!((m.mean, m.stderr), (1.0, 0.0));
    }

    #[test]
    fn cover_index_agrees_with_direct_test() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let grains: Vec<Grain> = (0..300)
            .map(|_| {
                let c = [
                    rng.random::<f64>() * 60.0 - 5.0,
                    rng.random::<f64>() * 60.0 - 5.0,
                ];
                Grain::new(&c, 0.2 + 6.0 * rng.random::<f64>().powi(4), 1.0)
            })
            .collect();
        let s = with_grains(grains.clone(), 50.0);
        let index = CoverIndex::new(&grains, &s.window);
        for _ in 0..20_000 {
            let x = [rng.random::<f64>() * 50.0, rng.random::<f64>() * 50.0];
            let direct = grains.iter().any(|g| {
                (g.center[0] - x[0]).powi(2) + (g.center[1] - x[1]).powi(2) <= g.radius * g.radius
            });
            assert_eq!(index.covered(&x), direct, "{x:?}");
        }
    }

    #[test]
    fn radius_tail_steps_at_deterministic_radius() {
        let g = |x: f64| Grain::new(&[x, 1.0], 1.5, 1.0);
        let s = vec![with_grains(vec![g(1.0), g(4.0), g(7.0)], 10.0); 2];
        let t = empirical_radius_tail(&s, &[0.0, 1.0, 1.5, 2.0]).unwrap();
        assert_eq!(t.values, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn fit_recovers_planted_power_law() {
        let x: Vec<f64> = (0..30).map(|i| 10f64.powf(1.0 + i as f64 / 10.0)).collect();
        let y: Vec<f64> = x.iter().map(|z| 7.0 * z.powf(-1.5)).collect();
        let fit = fit_tail_exponent(&x, &y, 1.0, 1e9).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-12);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-11);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_tail_exponent(&x, &vec![-1.0; 30], 1.0, 1e9).is_err());
    }

    #[test]
    fn pair_correlation_of_hard_core_pattern_is_minus_one_below_spacing() {
        let grains: Vec<Grain> = (0..10)
            .flat_map(|i| {
                (0..10).map(move |j| {
                    Grain::new(&[i as f64 * 5.0 + 2.5, j as f64 * 5.0 + 2.5], 1.0, 1.0)
                })
            })
            .collect();
        let s = vec![with_grains(grains, 50.0); 2];
        let xi = estimate_pair_correlation(&s, &[1.0, 2.0, 3.0], 0.5).unwrap();
        assert!(xi.values.iter().all(|&v| v == -1.0));
    }

    #[test]
    fn csv_columns() {
        let e =
            CovarianceEstimate::from_replications(&[1.0, 2.0], &[vec![1.0, 2.0], vec![3.0, 2.0]]);
        assert_eq!(e.values, vec![2.0, 2.0]);
        assert_eq!(e.stderr, vec![1.0, 0.0]);
        let mut buf = Vec::new();
        e.write_csv(&mut buf, &["hash=abc".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# hash=abc\nlag,value,stderr,n\n"));
    }
}
