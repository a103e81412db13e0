//! Weight-averaged retention covariance under uniform random weights.
//!
//! With `v = 1 − w`, the pair of reference grains survives with probability
//! `exp(−B₁v₁ − B₂v₂ + A·min(v₁, v₂))`, where `Bᵢ = λ b(rᵢ)` and `A` is `λ`
//! times the shared-obstruction integral. Averaging over `(v₁, v₂) ∈ [0, 1]²`
//! and subtracting `h(r₁)h(r₂)` gives
//!
//! ```text
//! q = [M(B₁+B₂) − e^{−B₂} M(B₁)]/B₂ + [M(B₁+B₂) − e^{−B₁} M(B₂)]/B₁,
//! M(K) = ∫₀¹ e^{−Kv} (e^{Av} − 1) dv.
//! ```

use crate::quad::{self, Tolerance};

use super::psi;

/// Largest series order kept; terms shrink at least like `4^{-n}`.
const SERIES_TERMS: usize = 48;

/// `P(n+1, K)` (regularized lower incomplete gamma) for `n = 0..len`, for
/// `K > 1`. Summed as tails of the Poisson(K) mass function, so every entry
/// is a sum of positive terms.
fn poisson_upper_tails(k: f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    if k > 60.0 {
        // P(n+1, K) = 1 − Σ_{j≤n} e^{−K}K^j/j!, close to 1 for n ≪ K.
        let mut t = (-k).exp();
        let mut acc = 1.0 - t;
        for (n, slot) in out.iter_mut().enumerate() {
            *slot = acc;
            t *= k / (n + 1) as f64;
            acc -= t;
        }
        return out;
    }
    let last = len + k as usize + 60;
    let mut terms = Vec::with_capacity(last + 1);
    let mut t = (-k).exp();
    terms.push(t);
    for j in 1..=last {
        t *= k / j as f64;
        terms.push(t);
    }
    let mut suffix = 0.0;
    for j in (1..=last).rev() {
        suffix += terms[j];
        if j - 1 < len {
            out[j - 1] = suffix;
        }
    }
    out
}

/// `M(K) = ∫₀¹ e^{−Kv} expm1(Av) dv`.
pub(crate) fn m_integral(k: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    if a <= 0.25 * k.max(1.0) {
        if k <= 1.0 {
            // m_n(K) = ∫ v^n e^{−Kv} dv by backward recurrence, stable for n > K.
            let mut m = vec![0.0; SERIES_TERMS + 1];
            let top = SERIES_TERMS + 20;
            let ek = (-k).exp();
            let mut cur = ek / (top as f64 + 1.0);
            for n in (1..=top).rev() {
                let prev = (k * cur + ek) / n as f64;
                if n - 1 <= SERIES_TERMS {
                    m[n - 1] = prev;
                }
                cur = prev;
            }
            let mut sum = 0.0;
            let mut coef = 1.0;
            for (n, mn) in m.iter().enumerate().skip(1) {
                coef *= a / n as f64;
                let term = coef * mn;
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            sum
        } else {
            // A^n m_n / n! = (A/K)^n P(n+1, K)/K.
            let tails = poisson_upper_tails(k, SERIES_TERMS + 1);
            let rho = a / k;
            let mut sum = 0.0;
            let mut pow = 1.0;
            for tail in tails.iter().skip(1) {
                pow *= rho;
                let term = pow * tail;
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            sum / k
        }
    } else {
        psi(k - a) - psi(k)
    }
}

/// `m₁(K) = ∫₀¹ v e^{−Kv} dv`, the `A → 0` slope of `M(K)`.
pub(crate) fn first_moment(k: f64) -> f64 {
    if k <= 1.0 {
        let mut sum = 0.0;
        let mut coef = 1.0;
        // Σ (−K)^n / (n! (n+2))
        for n in 0..40 {
            let term = coef / (n as f64 + 2.0);
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
            coef *= -k / (n as f64 + 1.0);
        }
        sum
    } else {
        poisson_upper_tails(k, 2)[1] / (k * k)
    }
}

fn combine<M: Fn(f64) -> f64>(m: M, b1: f64, b2: f64) -> f64 {
    let s = m(b1 + b2);
    (s - (-b2).exp() * m(b1)) / b2 + (s - (-b1).exp() * m(b2)) / b1
}

/// Retention covariance for random weights at separation beyond contact.
pub(crate) fn covariance(a: f64, b1: f64, b2: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    if b1.min(b2) >= 1e-6 {
        return combine(|k| m_integral(k, a), b1, b2);
    }
    // ∫ e^{−B₁v}expm1(Av)∫_v^1 e^{−B₂v₂}dv₂ dv plus the mirrored term.
    let half = |b1: f64, b2: f64| {
        quad::integrate(
            |v: f64| {
                (-b1 * v).exp()
                    * (a * v).exp_m1()
                    * (-b2 * v).exp()
                    * (1.0 - v)
                    * psi(b2 * (1.0 - v))
            },
            0.0,
            1.0,
            &[],
            Tolerance::new(1e-300, 1e-12),
        )
        .value
    };
    half(b1, b2) + half(b2, b1)
}

/// `∬ min(v₁, v₂) e^{−B₁v₁ − B₂v₂} dv`, the coefficient of `A` in
/// [`covariance`] as `A → 0`.
pub(crate) fn shared_slope(b1: f64, b2: f64) -> f64 {
    if b1.min(b2) >= 1e-6 {
        return combine(first_moment, b1, b2);
    }
    let half = |b1: f64, b2: f64| {
        quad::integrate(
            |v: f64| v * (-(b1 + b2) * v).exp() * (1.0 - v) * psi(b2 * (1.0 - v)),
            0.0,
            1.0,
            &[],
            Tolerance::new(1e-300, 1e-12),
        )
        .value
    };
    half(b1, b2) + half(b2, b1)
}
