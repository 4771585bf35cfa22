//! Error functions and the scaled upper incomplete gamma function at the
//! negative half-integer orders needed by the closed-form heat weights.

use std::f64::consts::PI;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `½[erf(b) − erf(a)]` without cancellation when both arguments share a sign.
pub fn half_erf_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        0.5 * (erfc(a) - erfc(b))
    } else if a <= 0.0 && b <= 0.0 {
        0.5 * (erfc(-b) - erfc(-a))
    } else {
        0.5 * (erf(b) - erf(a))
    }
}

/// Scaled incomplete gamma functions `Φ_s(x) = x^{-s} Γ(s, x)` for
/// `s = -1/2, -3/2, -5/2`, returned in that order.
///
/// At `x = 0` the values are the limits `1/(-s)`.
pub fn scaled_gamma_neg_half(x: f64) -> [f64; 3] {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return [2.0, 2.0 / 3.0, 0.4];
    }
    if x < 1.0 {
        // Φ_s = (x Φ_{s+1} − e^{−x}) / s, starting from x Φ_{1/2} = √(πx) erfc(√x).
        let e = (-x).exp();
        let x_phi_half = (PI * x).sqrt() * erfc(x.sqrt());
        let p1 = (x_phi_half - e) / -0.5;
        let p3 = (x * p1 - e) / -1.5;
        let p5 = (x * p3 - e) / -2.5;
        [p1, p3, p5]
    } else {
        [gamma_cf(-0.5, x), gamma_cf(-1.5, x), gamma_cf(-2.5, x)]
    }
}

/// `x^{-s} Γ(s, x)` by the Legendre continued fraction (modified Lentz).
fn gamma_cf(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x).exp() * h
}
