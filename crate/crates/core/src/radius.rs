//! Grain radius distributions.
//!
//! Every law exposes its tail `F̄(r) = P(R > r)`, inverse-tail sampling,
//! exact partial moments `∫ r^p F(dr)` over an interval, and a generic
//! `∫ f(r) F(dr)` used by the analytics. Pareto integrals run in `t = ln r`,
//! where power-law integrands become exponentially decaying.

use std::io::BufRead;
use std::path::Path;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::quad::{self, Estimate, Tolerance};

/// Integration range for law integrals: `(lo, hi]`, or `[lo, hi]` when
/// `closed_lo` is set. The distinction only matters for atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
    pub closed_lo: bool,
}

impl Span {
    /// `[0, ∞)`.
    pub const ALL: Span = Span {
        lo: 0.0,
        hi: f64::INFINITY,
        closed_lo: true,
    };

    /// `(lo, ∞)`.
    pub fn above(lo: f64) -> Self {
        Self {
            lo,
            hi: f64::INFINITY,
            closed_lo: false,
        }
    }

    /// `[lo, hi]`.
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            closed_lo: true,
        }
    }

    pub fn contains(&self, r: f64) -> bool {
        (r > self.lo || (self.closed_lo && r == self.lo)) && r <= self.hi
    }

    /// Intersection with `(lo, ∞)`.
    pub fn above_open(self, lo: f64) -> Self {
        if lo >= self.lo {
            Self {
                lo,
                hi: self.hi,
                closed_lo: false,
            }
        } else {
            self
        }
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo || (self.hi == self.lo && !self.closed_lo)
    }
}

/// Tail asymptote `amplitude · r^{-exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailAsymptote {
    pub amplitude: f64,
    pub exponent: f64,
}

impl TailAsymptote {
    pub fn eval(&self, r: f64) -> f64 {
        self.amplitude * r.powf(-self.exponent)
    }
}

/// A distribution given by a piecewise-linear CDF on a radius grid.
///
/// Between grid points the density is constant. A positive CDF value at the
/// first grid point is an atom there.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedLaw {
    radii: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedLaw {
    pub fn new(radii: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if radii.len() != cdf.len() || radii.len() < 2 {
            return Err(invalid(
                "tabulated law",
                "need at least two (radius, cdf) rows of equal length",
            ));
        }
        if radii[0] < 0.0 || !radii.iter().all(|r| r.is_finite()) {
            return Err(invalid(
                "tabulated law",
                "radii must be finite and nonnegative",
            ));
        }
        if cdf[0] < 0.0 {
            return Err(invalid("tabulated law", "cdf must be nonnegative"));
        }
        for w in radii.windows(2) {
            if w[1] <= w[0] {
                return Err(invalid(
                    "tabulated law",
                    "radii must be strictly increasing",
                ));
            }
        }
        for w in cdf.windows(2) {
            if w[1] <= w[0] {
                return Err(invalid("tabulated law", "cdf must be strictly increasing"));
            }
        }
        let last = *cdf.last().unwrap();
        if (last - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "tabulated law",
                format!("cdf must end at 1, got {last}"),
            ));
        }
        let mut cdf = cdf;
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self { radii, cdf })
    }

    /// Reads whitespace- or comma-separated `radius cdf` rows. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut radii = Vec::new();
        let mut cdf = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("expected two columns, found {}", fields.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    reason: format!("{s}: {e}"),
                })
            };
            radii.push(parse(fields[0])?);
            cdf.push(parse(fields[1])?);
        }
        Self::new(radii, cdf)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    fn atom(&self) -> f64 {
        self.cdf[0]
    }

    fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.radii
            .windows(2)
            .zip(self.cdf.windows(2))
            .map(|(r, c)| (r[0], r[1], (c[1] - c[0]) / (r[1] - r[0])))
    }

    fn cdf_at(&self, r: f64) -> f64 {
        if r < self.radii[0] {
            return 0.0;
        }
        if r >= *self.radii.last().unwrap() {
            return 1.0;
        }
        let i = self.radii.partition_point(|&x| x <= r) - 1;
        let t = (r - self.radii[i]) / (self.radii[i + 1] - self.radii[i]);
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }

    fn quantile(&self, p: f64) -> f64 {
        if p <= self.cdf[0] {
            return self.radii[0];
        }
        let i = (self.cdf.partition_point(|&c| c < p)).clamp(1, self.cdf.len() - 1);
        let t = (p - self.cdf[i - 1]) / (self.cdf[i] - self.cdf[i - 1]);
        self.radii[i - 1] + t * (self.radii[i] - self.radii[i - 1])
    }
}

/// The grain radius distribution `F`.
#[derive(Debug, Clone, PartialEq)]
pub enum RadiusLaw {
    /// `F̄(r) = (scale/r)^alpha` for `r ≥ scale`.
    Pareto {
        alpha: f64,
        scale: f64,
    },
    /// All grains have the same radius.
    Deterministic {
        radius: f64,
    },
    Tabulated(TabulatedLaw),
}

fn power_antiderivative(p: f64, a: f64, b: f64) -> f64 {
    // ∫_a^b r^p dr
    if (p + 1.0).abs() < 1e-14 {
        (b / a).ln()
    } else {
        (b.powf(p + 1.0) - a.powf(p + 1.0)) / (p + 1.0)
    }
}

impl RadiusLaw {
    pub fn pareto(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid(
                "tail exponent",
                format!("{alpha} must be positive"),
            ));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid("pareto scale", format!("{scale} must be positive")));
        }
        Ok(Self::Pareto { alpha, scale })
    }

    pub fn deterministic(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid("radius", format!("{radius} must be positive")));
        }
        Ok(Self::Deterministic { radius })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Pareto { .. } => "pareto",
            Self::Deterministic { .. } => "deterministic",
            Self::Tabulated(_) => "tabulated",
        }
    }

    /// Checks that `∫ r^d F(dr) < ∞`.
    pub fn check_dimension(&self, d: u32) -> Result<()> {
        self.moment_integral(f64::from(d), 0.0).map(|_| ())
    }

    /// Smallest point of the support.
    pub fn support_min(&self) -> f64 {
        match self {
            Self::Pareto { scale, .. } => *scale,
            Self::Deterministic { radius } => *radius,
            Self::Tabulated(t) => t.radii[0],
        }
    }

    /// Largest point of the support (infinite for Pareto).
    pub fn support_max(&self) -> f64 {
        match self {
            Self::Pareto { .. } => f64::INFINITY,
            Self::Deterministic { radius } => *radius,
            Self::Tabulated(t) => *t.radii.last().unwrap(),
        }
    }

    /// `F̄(r) = P(R > r)`.
    pub fn tail(&self, r: f64) -> f64 {
        match self {
            Self::Pareto { alpha, scale } => {
                if r <= *scale {
                    1.0
                } else {
                    (scale / r).powf(*alpha)
                }
            }
            Self::Deterministic { radius } => {
                if r < *radius {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tabulated(t) => 1.0 - t.cdf_at(r),
        }
    }

    pub fn cdf(&self, r: f64) -> f64 {
        1.0 - self.tail(r)
    }

    /// Radius whose tail probability is `u ∈ (0, 1]`; the inverse-CDF map
    /// used for sampling.
    pub fn radius_from_tail(&self, u: f64) -> f64 {
        match self {
            Self::Pareto { alpha, scale } => scale * u.powf(-1.0 / alpha),
            Self::Deterministic { radius } => *radius,
            Self::Tabulated(t) => t.quantile(1.0 - u),
        }
    }

    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = 1.0 - rng.random::<f64>();
        self.radius_from_tail(u)
    }

    /// Draws from the size-biased law `r^k F(dr) / ∫ r^k F(dr)`.
    pub fn sample_size_biased<R: Rng + ?Sized>(&self, k: u32, rng: &mut R) -> f64 {
        if k == 0 {
            return self.sample_radius(rng);
        }
        let kf = f64::from(k);
        match self {
            // r^k α s^α r^{-α-1} is again Pareto, with exponent α − k.
            Self::Pareto { alpha, scale } => {
                let u = 1.0 - rng.random::<f64>();
                scale * u.powf(-1.0 / (alpha - kf))
            }
            Self::Deterministic { radius } => *radius,
            Self::Tabulated(t) => {
                let atom = t.atom() * t.radii[0].powf(kf);
                let masses: Vec<f64> = t
                    .pieces()
                    .map(|(a, b, dens)| dens * power_antiderivative(kf, a, b))
                    .collect();
                let total = atom + masses.iter().sum::<f64>();
                let mut target = rng.random::<f64>() * total;
                if target < atom {
                    return t.radii[0];
                }
                target -= atom;
                let u = rng.random::<f64>();
                for ((a, b, _), m) in t.pieces().zip(&masses) {
                    if target < *m {
                        let lo = a.powf(kf + 1.0);
                        let hi = b.powf(kf + 1.0);
                        return (lo + u * (hi - lo)).powf(1.0 / (kf + 1.0));
                    }
                    target -= m;
                }
                *t.radii.last().unwrap()
            }
        }
    }

    /// `∫_span r^p F(dr)`, exact. Diverging Pareto moments are an error.
    pub fn partial_moment(&self, p: f64, span: Span) -> Result<f64> {
        if span.is_empty() {
            return Ok(0.0);
        }
        match self {
            Self::Pareto { alpha, scale } => {
                let a = span.lo.max(*scale);
                let b = span.hi;
                if b <= a {
                    return Ok(0.0);
                }
                let coef = alpha * scale.powf(*alpha);
                if b.is_infinite() {
                    if p >= *alpha {
                        return Err(Error::DivergentMoment {
                            order: p,
                            alpha: *alpha,
                        });
                    }
                    return Ok(coef * a.powf(p - alpha) / (alpha - p));
                }
                Ok(coef * power_antiderivative(p - alpha - 1.0, a, b))
            }
            Self::Deterministic { radius } => Ok(if span.contains(*radius) {
                radius.powf(p)
            } else {
                0.0
            }),
            Self::Tabulated(t) => {
                let mut sum = 0.0;
                if span.contains(t.radii[0]) {
                    sum += t.atom() * t.radii[0].powf(p);
                }
                for (a, b, dens) in t.pieces() {
                    let lo = a.max(span.lo);
                    let hi = b.min(span.hi);
                    if hi > lo {
                        sum += dens * power_antiderivative(p, lo, hi);
                    }
                }
                Ok(sum)
            }
        }
    }

    /// `∫_{(a,∞)} r^p F(dr)`.
    pub fn moment_integral(&self, p: f64, a: f64) -> Result<f64> {
        if !(a >= 0.0) {
            return Err(invalid("lower limit", format!("{a} must be nonnegative")));
        }
        let span = if a == 0.0 { Span::ALL } else { Span::above(a) };
        self.partial_moment(p, span)
    }

    /// Regular-variation data `F̄(r) ~ ℓ r^{-α}`, when the tail is a power law.
    pub fn tail_asymptote(&self) -> Option<TailAsymptote> {
        match self {
            Self::Pareto { alpha, scale } => Some(TailAsymptote {
                amplitude: scale.powf(*alpha),
                exponent: *alpha,
            }),
            _ => None,
        }
    }

    /// Karamata prediction `(α/(α−p)) a^{-(α−p)} F̄(x) x^p` for
    /// `∫_{(ax,∞)} r^p F(dr)`.
    pub fn karamata_asymptote(&self, p: f64, a: f64, x: f64) -> Result<f64> {
        let Self::Pareto { alpha, .. } = self else {
            return Err(Error::Unsupported(format!(
                "{} law has no regularly varying tail",
                self.name()
            )));
        };
        if p >= *alpha {
            return Err(Error::DivergentMoment {
                order: p,
                alpha: *alpha,
            });
        }
        if !(a > 0.0 && x > 0.0) {
            return Err(invalid("karamata arguments", "a and x must be positive"));
        }
        Ok(alpha / (alpha - p) * a.powf(-(alpha - p)) * self.tail(x) * x.powf(p))
    }

    /// `∫_span f(r) F(dr)` by adaptive quadrature, splitting at `breaks`.
    pub fn integrate<F>(&self, mut f: F, span: Span, breaks: &[f64], tol: Tolerance) -> Estimate
    where
        F: FnMut(f64) -> f64,
    {
        let exact = |value: f64| Estimate {
            value,
            error: 0.0,
            converged: true,
            evaluations: 1,
        };
        if span.is_empty() {
            return exact(0.0);
        }
        match self {
            Self::Deterministic { radius } => exact(if span.contains(*radius) {
                f(*radius)
            } else {
                0.0
            }),
            Self::Pareto { alpha, scale } => {
                let lo = span.lo.max(*scale);
                if span.hi <= lo {
                    return exact(0.0);
                }
                let coef = alpha * scale.powf(*alpha);
                let t_lo = lo.ln();
                let cuts: Vec<f64> = breaks
                    .iter()
                    .filter(|b| **b > lo && **b < span.hi)
                    .map(|b| b.ln())
                    .collect();
                let g = |t: f64| {
                    let weight = coef * (-alpha * t).exp();
                    if weight == 0.0 {
                        return 0.0;
                    }
                    let v = f(t.exp());
                    if v == 0.0 {
                        0.0
                    } else {
                        v * weight
                    }
                };
                if span.hi.is_finite() {
                    quad::integrate(g, t_lo, span.hi.ln(), &cuts, tol)
                } else {
                    quad::integrate_to_infinity(g, t_lo, &cuts, 1.0, tol)
                }
            }
            Self::Tabulated(t) => {
                let mut total = Estimate {
                    value: 0.0,
                    error: 0.0,
                    converged: true,
                    evaluations: 0,
                };
                if span.contains(t.radii[0]) && t.atom() > 0.0 {
                    total.value += t.atom() * f(t.radii[0]);
                }
                for (a, b, dens) in t.pieces() {
                    let lo = a.max(span.lo);
                    let hi = b.min(span.hi);
                    if hi > lo {
                        let e = quad::integrate(&mut f, lo, hi, breaks, tol);
                        total.value += dens * e.value;
                        total.error += dens * e.error;
                        total.converged &= e.converged;
                        total.evaluations += e.evaluations;
                    }
                }
                total
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig1() -> RadiusLaw {
        RadiusLaw::pareto(2.5, 1.0).unwrap()
    }

    #[test]
    fn tail_examples() {
        assert_eq!(fig1().tail(1.0), 1.0);
        assert!((fig1().tail(4.0) - 0.03125).abs() < 1e-15);
        assert_eq!(RadiusLaw::deterministic(1.0).unwrap().tail(2.0), 0.0);
    }

    #[test]
    fn inverse_tail_examples() {
        assert_eq!(
            RadiusLaw::deterministic(3.0)
                .unwrap()
                .radius_from_tail(0.37),
            3.0
        );
        assert!((fig1().radius_from_tail(0.5) - 1.319_507_910_772_894).abs() < 1e-12);
        let mut last = 0.0;
        for k in 0..40 {
            let r = fig1().radius_from_tail(0.5f64.powi(k));
            assert!(r > last);
            last = r;
        }
        assert!(last > 1e4);
    }

    #[test]
    fn moment_examples() {
        let law = fig1();
        assert!((law.moment_integral(2.0, 0.0).unwrap() - 5.0).abs() < 1e-13);
        assert!((law.moment_integral(2.0, 2.0).unwrap() - 5.0 / 2f64.sqrt()).abs() < 1e-13);
        let det = RadiusLaw::deterministic(2.0).unwrap();
        assert_eq!(det.moment_integral(3.0, 1.0).unwrap(), 8.0);
        assert!(matches!(
            law.moment_integral(2.5, 0.0),
            Err(Error::DivergentMoment { .. })
        ));
    }

    #[test]
    fn moments_match_quadrature_oracle() {
        let law = fig1();
        let tol = Tolerance::new(0.0, 1e-12);
        for (p, a) in [(2.0f64, 0.0f64), (2.0, 2.0), (0.5, 7.0), (1.0, 1.0)] {
            // With r = 1/u the moment becomes α ∫_0^{1/max(a,1)} u^{α-p-1} du.
            let hi = 1.0 / a.max(1.0);
            let direct = quad::integrate(|u: f64| 2.5 * u.powf(1.5 - p), 0.0, hi, &[], tol).value;
            let exact = law.moment_integral(p, a).unwrap();
            assert!(
                (direct - exact).abs() < 1e-8 * exact,
                "p={p} a={a}: {direct} {exact}"
            );
        }
    }

    #[test]
    fn karamata_is_exact_for_pareto() {
        let law = fig1();
        let v = law.karamata_asymptote(2.0, 1.0, 100.0).unwrap();
        assert!((v - 0.5).abs() < 1e-13);
        assert!((v / law.moment_integral(2.0, 100.0).unwrap() - 1.0).abs() < 1e-12);
        let v0 = law.karamata_asymptote(0.0, 1.0, 10.0).unwrap();
        assert!((v0 - 0.003_162_277_660_168_379).abs() < 1e-15);
        let v4 = law.karamata_asymptote(2.0, 4.0, 25.0).unwrap();
        assert!((v4 / law.moment_integral(2.0, 100.0).unwrap() - 1.0).abs() < 1e-12);
        for &(p, a, x) in &[(1.0, 0.5, 3.0), (2.4, 2.0, 50.0), (0.0, 1.0, 1.0)] {
            let ratio =
                law.karamata_asymptote(p, a, x).unwrap() / law.moment_integral(p, a * x).unwrap();
            assert!((ratio - 1.0).abs() < 1e-12);
        }
        assert!(RadiusLaw::deterministic(1.0)
            .unwrap()
            .karamata_asymptote(1.0, 1.0, 2.0)
            .is_err());
    }

    #[test]
    fn generic_integral_matches_moments() {
        let tol = Tolerance::new(0.0, 1e-11);
        let law = fig1();
        let e = law.integrate(|r| r * r, Span::ALL, &[], tol);
        assert!((e.value - 5.0).abs() < 1e-9, "{}", e.value);
        let e = law.integrate(|r| r, Span::closed(2.0, 10.0), &[3.0], tol);
        let exact = law.partial_moment(1.0, Span::closed(2.0, 10.0)).unwrap();
        assert!((e.value - exact).abs() < 1e-11);
    }

    #[test]
    fn span_semantics_on_atoms() {
        let det = RadiusLaw::deterministic(2.0).unwrap();
        assert_eq!(det.partial_moment(0.0, Span::above(2.0)).unwrap(), 0.0);
        assert_eq!(
            det.partial_moment(0.0, Span::closed(2.0, 5.0)).unwrap(),
            1.0
        );
        assert_eq!(
            det.partial_moment(0.0, Span::closed(0.0, 2.0)).unwrap(),
            1.0
        );
    }

    #[test]
    fn tabulated_law_roundtrip() {
        let text = "# radius cdf\n1.0 0.2\n2.0 0.6\n4.0 1.0\n";
        let law = RadiusLaw::Tabulated(TabulatedLaw::from_reader(text.as_bytes()).unwrap());
        assert!((law.tail(1.5) - 0.6).abs() < 1e-15);
        assert_eq!(law.tail(0.5), 1.0);
        assert_eq!(law.tail(4.0), 0.0);
        assert!((law.radius_from_tail(0.6) - 1.5).abs() < 1e-12);
        // mean = 0.2·1 + 0.4·1.5 + 0.4·3
        let mean = law.partial_moment(1.0, Span::ALL).unwrap();
        assert!((mean - 2.0).abs() < 1e-14);
        let q = law.integrate(|r| r, Span::ALL, &[], Tolerance::default());
        assert!((q.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_rejects_bad_input() {
        assert!(TabulatedLaw::from_reader("1 0.5\n1 1.0\n".as_bytes()).is_err());
        assert!(TabulatedLaw::from_reader("1 0.5\n2 0.4\n".as_bytes()).is_err());
        assert!(TabulatedLaw::from_reader("1 0.5\n2 0.9\n".as_bytes()).is_err());
        assert!(TabulatedLaw::from_reader("1 0.5 3\n2 1.0\n".as_bytes()).is_err());
    }

    #[test]
    fn dimension_guard() {
        assert!(fig1().check_dimension(2).is_ok());
        assert!(fig1().check_dimension(3).is_err());
    }

    /// Kolmogorov–Smirnov distance of 10⁵ samples stays inside the 99% band.
    #[test]
    fn empirical_cdf_within_ks_band() {
        let n = 100_000;
        let band = 1.628 / (n as f64).sqrt();
        let tab = RadiusLaw::Tabulated(
            TabulatedLaw::new(vec![0.5, 1.0, 3.0], vec![0.1, 0.5, 1.0]).unwrap(),
        );
        for law in [fig1(), tab] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut xs: Vec<f64> = (0..n).map(|_| law.sample_radius(&mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            let mut ks: f64 = 0.0;
            for (i, x) in xs.iter().enumerate() {
                let f = law.cdf(*x);
                ks = ks
                    .max((f - i as f64 / n as f64).abs())
                    .max(((i + 1) as f64 / n as f64 - f).abs());
            }
            // The atom of the tabulated law makes the ECDF jump at 0.5.
            if law.name() == "pareto" {
                assert!(ks < band, "KS {ks} exceeds {band}");
            } else {
                let below: usize = xs.iter().filter(|x| **x <= 0.5).count();
                assert!((below as f64 / n as f64 - 0.1).abs() < 0.005);
            }
        }
    }

    #[test]
    fn size_biased_pareto_mean() {
        // r² F(dr)/E r² for Pareto(2.5) is Pareto(0.5): median 1·0.5^{-2} = 4.
        let law = fig1();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut xs: Vec<f64> = (0..20_001)
            .map(|_| law.sample_size_biased(2, &mut rng))
            .collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[10_000] - 4.0).abs() < 0.2, "{}", xs[10_000]);
    }
}
