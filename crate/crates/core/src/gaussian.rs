//! Standard normal helpers used by the rating math.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

/// Below this argument `v(t)` switches from the direct ratio to the
/// Mills-ratio continued fraction.
const TAIL_SWITCH: f64 = -5.0;

/// Terms used by the backward continued-fraction evaluation.
const MILLS_TERMS: usize = 120;

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, `0.5 * erfc(-x / sqrt 2)`.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile. `p` must lie in (0, 1).
///
/// Seeded from `erfc_inv` and polished with Newton steps against [`cdf`],
/// whose accuracy is the better of the two.
pub fn quantile(p: f64) -> f64 {
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..3 {
        let density = pdf(x);
        if !(density > 0.0) {
            break;
        }
        x -= (cdf(x) - p) / density;
    }
    x
}

/// Mills ratio `(1 - Φ(x)) / φ(x)` for `x > 0`, via the classic continued
/// fraction `1 / (x + 1 / (x + 2 / (x + 3 / (x + ...))))`.
fn mills_ratio(x: f64) -> f64 {
    let mut tail = x;
    for k in (1..=MILLS_TERMS).rev() {
        tail = x + k as f64 / tail;
    }
    1.0 / tail
}

/// Mean additive correction of a Gaussian truncated to `(-t, inf)`:
/// `v(t) = φ(t) / Φ(t)`.
pub fn v_win(t: f64) -> f64 {
    if t < TAIL_SWITCH {
        1.0 / mills_ratio(-t)
    } else {
        pdf(t) / cdf(t)
    }
}

/// Variance multiplicative correction `w(t) = v(t) (v(t) + t)`, in (0, 1).
pub fn w_win(t: f64) -> f64 {
    let v = v_win(t);
    let w = v * (v + t);
    // Cancellation in `v + t` for very negative `t` can push w marginally
    // outside its open range.
    w.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}
