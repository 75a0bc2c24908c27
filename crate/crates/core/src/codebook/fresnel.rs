//! Fresnel integrals and the distance-sampling parameter derived from them.
//!
//! `C(x) = ∫₀ˣ cos(πt²/2) dt`, `S(x) = ∫₀ˣ sin(πt²/2) dt`. Small arguments use
//! the alternating power series; larger ones use a continued fraction for the
//! complementary complex error function, which keeps full double precision
//! where the series would lose digits to cancellation.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{domain, Result};

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const SERIES_LIMIT: f64 = 1.5;
const MAX_ITER: usize = 200;

/// Returns `(C(x), S(x))`.
pub fn fresnel(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (c, s) = if ax < FPMIN.sqrt() {
        (ax, 0.0)
    } else if ax <= SERIES_LIMIT {
        series(ax)
    } else {
        continued_fraction(ax)
    };
    if x < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

fn series(ax: f64) -> (f64, f64) {
    let fact = FRAC_PI_2 * ax * ax;
    let mut sum = 0.0;
    let mut sums = 0.0;
    let mut sumc = ax;
    let mut sign = 1.0;
    let mut odd = true;
    let mut term = ax;
    let mut n = 3.0;
    for k in 1..MAX_ITER {
        term *= fact / k as f64;
        sum += sign * term / n;
        let test = sum.abs() * EPS;
        if odd {
            sign = -sign;
            sums = sum;
            sum = sumc;
        } else {
            sumc = sum;
            sum = sums;
        }
        if term < test {
            break;
        }
        odd = !odd;
        n += 2.0;
    }
    (sumc, sums)
}

// Modified Lentz evaluation of the continued fraction for erfc.
fn continued_fraction(ax: f64) -> (f64, f64) {
    let pix2 = PI * ax * ax;
    let mut b = Complex64::new(1.0, -pix2);
    let mut cc = Complex64::new(1.0 / FPMIN, 0.0);
    let mut d = b.inv();
    let mut h = d;
    let mut n = -1.0;
    for _ in 2..MAX_ITER {
        n += 2.0;
        let a = -n * (n + 1.0);
        b += Complex64::new(4.0, 0.0);
        d = (d * a + b).inv();
        cc = b + cc.inv() * a;
        let del = cc * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < EPS {
            break;
        }
    }
    h *= Complex64::new(ax, -ax);
    let cs = Complex64::new(0.5, 0.5) * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, 0.5 * pix2) * h);
    (cs.re, cs.im)
}

/// `|C(ζ) + jS(ζ)| / ζ`, the projection between two codewords whose
/// quadratic phase profiles differ by the distance-sampling parameter `ζ`.
pub fn fresnel_ratio(zeta: f64) -> f64 {
    if zeta.abs() < 1e-8 {
        return 1.0;
    }
    let (c, s) = fresnel(zeta);
    c.hypot(s) / zeta.abs()
}

/// Smallest `ζ > 0` beyond which [`fresnel_ratio`] never exceeds `threshold`.
///
/// The ratio oscillates while decaying, so the first downward crossing can
/// be followed by excursions back above the threshold. The scan runs on a
/// dense grid up to `1/threshold + 1`; past that point `|C + jS| < 0.95`
/// keeps the ratio below the threshold. The final crossing is refined by
/// bisection to 1e-10.
pub fn zeta_for_threshold(threshold: f64) -> Result<f64> {
    if !(threshold > 0.05 && threshold < 0.99) {
        return domain(format!("threshold must lie in (0.05, 0.99), got {threshold}"));
    }
    const STEP: f64 = 1e-3;
    let limit = 1.0 / threshold + 1.0;
    let steps = (limit / STEP).ceil() as usize;
    let mut last_above = 0.0;
    for i in 1..=steps {
        let z = i as f64 * STEP;
        if fresnel_ratio(z) > threshold {
            last_above = z;
        }
    }
    let (mut lo, mut hi) = (last_above, last_above + STEP);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if fresnel_ratio(mid) > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
