//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature.
//!
//! Integrals are split at caller-supplied breakpoints before adaptation starts,
//! so kinks and jumps of the integrand never sit inside a panel. Semi-infinite
//! ranges are handled by [`integrate_to_infinity`], which maps `[a, ∞)` onto
//! `[0, 1)` with `x = a + s·y/(1-y)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Nonnegative Kronrod abscissae on `[-1, 1]`; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_525_911,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Absolute and relative error targets plus a panel budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_panels: 2000,
        }
    }

    /// Same tolerance with both targets scaled by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            abs: self.abs * factor,
            rel: self.rel * factor,
            max_panels: self.max_panels,
        }
    }

    pub fn with_max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-8)
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    /// False when the panel budget ran out before the error target was met.
    pub converged: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv = [0.0f64; 20];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    Panel { a, b, value, error }
}

/// Integrates `f` over `[a, b]`, splitting first at every breakpoint strictly
/// inside the interval.
pub fn integrate<F>(mut f: F, a: f64, b: f64, breaks: &[f64], tol: Tolerance) -> Estimate
where
    F: FnMut(f64) -> f64,
{
    if !(b > a) {
        return Estimate {
            value: 0.0,
            error: 0.0,
            converged: true,
            evaluations: 0,
        };
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a && *x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * y.abs().max(1.0));

    let mut heap = BinaryHeap::new();
    let mut lo = a;
    let mut evaluations = 0;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        if hi > lo {
            heap.push(kronrod21(&mut f, lo, hi));
            evaluations += 21;
        }
        lo = hi;
    }

    let mut panels = heap.len();
    let mut total: f64 = heap.iter().map(|p| p.value).sum();
    let mut err: f64 = heap.iter().map(|p| p.error).sum();
    loop {
        let target = tol.abs.max(tol.rel * total.abs());
        if err <= target || panels >= tol.max_panels {
            // Re-sum to shed accumulated rounding from the incremental updates.
            let total: f64 = heap.iter().map(|p| p.value).sum();
            let err: f64 = heap.iter().map(|p| p.error).sum();
            return Estimate {
                value: total,
                error: err,
                converged: err <= tol.abs.max(tol.rel * total.abs()),
                evaluations,
            };
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || !worst.error.is_finite() && panels > 64 {
            // Panel cannot be split further in floating point.
            let total: f64 = heap.iter().map(|p| p.value).sum::<f64>() + worst.value;
            let err: f64 = heap.iter().map(|p| p.error).sum::<f64>() + worst.error;
            return Estimate {
                value: total,
                error: err,
                converged: false,
                evaluations,
            };
        }
        let left = kronrod21(&mut f, worst.a, mid);
        let right = kronrod21(&mut f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        if !err.is_finite() {
            err = heap.iter().map(|p| p.error).sum::<f64>() + left.error + right.error;
        }
        heap.push(left);
        heap.push(right);
        evaluations += 42;
        panels += 1;
    }
}

/// Integrates `f` over `[a, ∞)`.
///
/// Breakpoints below the last one are honoured directly; the tail beyond the
/// last breakpoint `c` (or `a`) is mapped by `x = c + scale·y/(1-y)`.
pub fn integrate_to_infinity<F>(
    mut f: F,
    a: f64,
    breaks: &[f64],
    scale: f64,
    tol: Tolerance,
) -> Estimate
where
    F: FnMut(f64) -> f64,
{
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let c = cuts.last().copied().unwrap_or(a);
    let head = integrate(&mut f, a, c, &cuts, tol);
    let tail = integrate(
        |y: f64| {
            let one_minus = 1.0 - y;
            let x = c + scale * y / one_minus;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v * scale / (one_minus * one_minus)
            }
        },
        0.0,
        1.0,
        &[],
        Tolerance {
            abs: tol.abs,
            rel: tol.rel,
            max_panels: tol.max_panels,
        },
    );
    Estimate {
        value: head.value + tail.value,
        error: head.error + tail.error,
        converged: head.converged && tail.converged,
        evaluations: head.evaluations + tail.evaluations,
    }
}
