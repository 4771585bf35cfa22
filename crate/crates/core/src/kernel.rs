//! Dirichlet heat kernel `G` and the boundary-weighted kernel `K` on the
//! whole space, the half-space and the interval `(0, L)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::{check_time, Domain, DomainKind, Point};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, QuadOptions, Region};

/// Distances below `K_SWITCH·(d + √t)` are treated as on the boundary by `K`.
pub const K_SWITCH: f64 = 1e-6;

/// Free Gaussian `(4πt)^{-1/2} e^{-u²/4t}`.
#[inline]
pub fn gauss_1d(u: f64, t: f64) -> f64 {
    (-u * u / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

#[inline]
fn gauss_prefactor(dim: usize, t: f64) -> f64 {
    (4.0 * PI * t).powf(-0.5 * dim as f64)
}

/// Which kernel an identity check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    G,
    K,
}

/// Dirichlet heat kernel `G_Ω(x, y, t)`.
pub fn heat_kernel(domain: &Domain, x: &Point, y: &Point, t: f64) -> Result<f64> {
    check_time(t)?;
    domain.check_point(x, "x")?;
    domain.check_point(y, "y")?;
    heat_kernel_unchecked(domain, x, y, t)
}

/// `heat_kernel` without argument validation; series failures still surface.
pub fn heat_kernel_unchecked(domain: &Domain, x: &Point, y: &Point, t: f64) -> Result<f64> {
    match domain.kind {
        DomainKind::WholeSpace { dim } => {
            Ok(gauss_prefactor(dim, t) * (-x.dist2(y) / (4.0 * t)).exp())
        }
        DomainKind::HalfSpace { dim } => {
            let (xn, yn) = (x.last(), y.last());
            if xn <= 0.0 || yn <= 0.0 {
                return Ok(0.0);
            }
            Ok(
                gauss_prefactor(dim, t)
                    * (-x.dist2(y) / (4.0 * t)).exp()
                    * -(-xn * yn / t).exp_m1(),
            )
        }
        DomainKind::Interval { length } => {
            let (x, y) = (x.get(0), y.get(0));
            if prefers_eigen(length, t) {
                if x <= 0.0 || y <= 0.0 || x >= length || y >= length {
                    return Ok(0.0);
                }
                Ok(interval_eigen(length, x, y, t, domain.series_tol, domain.max_terms)?.max(0.0))
            } else {
                interval_images(length, x, y, t, domain.series_tol, domain.max_terms)
            }
        }
    }
}

/// Past a fraction of the slowest decay time the image sum cancels badly
/// and the eigen-expansion converges in a handful of modes.
fn prefers_eigen(l: f64, t: f64) -> bool {
    t * (PI / l).powi(2) >= 0.5
}

/// Interval kernel by the method of images, with the two nearest image
/// pairs combined to avoid cancellation next to either end.
pub fn interval_images(l: f64, x: f64, y: f64, t: f64, tol: f64, max_terms: usize) -> Result<f64> {
    if x <= 0.0 || y <= 0.0 || x >= l || y >= l {
        return Ok(0.0);
    }
    let radius = Domain::gaussian_radius(t, tol);
    // Images at x − y + 2kL and x + y + 2kL; only |shift| ≤ radius matter.
    let kmax = ((radius + 2.0 * l) / (2.0 * l)).ceil() as i64;
    if kmax as usize * 4 > max_terms {
        return Err(Error::TruncationFailure {
            achieved: (-(2.0 * l * max_terms as f64 / 4.0 - l).powi(2) / (4.0 * t)).exp(),
            terms: max_terms,
        });
    }
    let g0 = gauss_1d(x - y, t);
    let near = if x + y <= l {
        -(-x * y / t).exp_m1() - (-(l - x) * (l - y) / t).exp()
    } else {
        -(-(l - x) * (l - y) / t).exp_m1() - (-x * y / t).exp()
    };
    let mut sum = g0 * near;
    for k in -kmax..=kmax {
        let shift = 2.0 * k as f64 * l;
        if k != 0 {
            sum += gauss_1d(x - y + shift, t);
        }
        if k != 0 && k != -1 {
            sum -= gauss_1d(x + y + shift, t);
        }
    }
    Ok(sum.max(0.0))
}

/// Interval kernel by its Dirichlet eigenfunction expansion.
pub fn interval_eigen(l: f64, x: f64, y: f64, t: f64, tol: f64, max_terms: usize) -> Result<f64> {
    let nmax = ((l / PI) * ((1.0 / tol).ln() / t).sqrt()).ceil() as usize + 1;
    if nmax > max_terms {
        return Err(Error::TruncationFailure {
            achieved: (-(max_terms as f64 * PI / l).powi(2) * t).exp(),
            terms: max_terms,
        });
    }
    let mut sum = 0.0;
    for n in 1..=nmax {
        let k = n as f64 * PI / l;
        sum += (-k * k * t).exp() * (k * x).sin() * (k * y).sin();
    }
    Ok(2.0 / l * sum)
}

/// Boundary-weighted kernel `K_Ω(x, y, t)`: `G/d(y)` inside, the inner
/// normal derivative of `G` for boundary `y`.
pub fn k_kernel(domain: &Domain, x: &Point, y: &Point, t: f64) -> Result<f64> {
    if !domain.has_boundary() {
        return Err(Error::UnsupportedDomain(
            "K is undefined without a boundary".into(),
        ));
    }
    check_time(t)?;
    domain.check_point(x, "x")?;
    domain.check_point(y, "y")?;
    k_kernel_unchecked(domain, x, y, t)
}

pub fn k_kernel_unchecked(domain: &Domain, x: &Point, y: &Point, t: f64) -> Result<f64> {
    if domain.distance(x) <= 0.0 {
        return Ok(0.0);
    }
    let dy = domain.distance(y);
    if dy < K_SWITCH * (dy + t.sqrt()) {
        let yb = domain
            .project_to_boundary(y)
            .expect("domain has a boundary");
        return boundary_k(domain, x, &yb, t);
    }
    Ok(heat_kernel_unchecked(domain, x, y, t)? / dy)
}

/// Closed form of `K(x, y, t)` for `y` on the boundary.
fn boundary_k(domain: &Domain, x: &Point, yb: &Point, t: f64) -> Result<f64> {
    match domain.kind {
        DomainKind::WholeSpace { .. } => Err(Error::UnsupportedDomain("no boundary".into())),
        DomainKind::HalfSpace { dim } => {
            let xn = x.last();
            Ok(gauss_prefactor(dim, t) * (xn / t) * (-x.dist2(yb) / (4.0 * t)).exp())
        }
        DomainKind::Interval { length } => {
            let xs = if yb.get(0) <= 0.5 * length {
                x.get(0)
            } else {
                length - x.get(0)
            };
            interval_boundary_k(length, xs, t, domain.series_tol, domain.max_terms)
        }
    }
}

/// `K(x, 0, t) = Σ_k (x + 2kL)/t · g(x + 2kL, t)` on the interval.
pub fn interval_boundary_k(l: f64, x: f64, t: f64, tol: f64, max_terms: usize) -> Result<f64> {
    if x <= 0.0 || x >= l {
        return Ok(0.0);
    }
    if prefers_eigen(l, t) {
        let nmax = ((l / PI) * ((1.0 / tol).ln() / t).sqrt()).ceil() as usize + 1;
        let mut sum = 0.0;
        for n in 1..=nmax {
            let k = n as f64 * PI / l;
            sum += (-k * k * t).exp() * (k * x).sin() * k;
        }
        return Ok((2.0 / l * sum).max(0.0));
    }
    let radius = Domain::gaussian_radius(t, tol);
    let kmax = ((radius + 2.0 * l) / (2.0 * l)).ceil() as i64;
    if kmax as usize * 2 > max_terms {
        return Err(Error::TruncationFailure {
            achieved: f64::NAN,
            terms: max_terms,
        });
    }
    let mut sum = 0.0;
    for k in -kmax..=kmax {
        let u = x + 2.0 * k as f64 * l;
        sum += u / t * gauss_1d(u, t);
    }
    Ok(sum.max(0.0))
}

/// Absolute and relative residual of a composition identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    /// Error estimate of the quadrature behind `rhs`.
    pub quad_error: f64,
}

impl ResidualReport {
    pub fn new(lhs: f64, rhs: f64, quad_error: f64) -> Self {
        let abs_residual = (lhs - rhs).abs();
        Self {
            lhs,
            rhs,
            abs_residual,
            rel_residual: if lhs != 0.0 {
                abs_residual / lhs.abs()
            } else {
                abs_residual
            },
            quad_error,
        }
    }
}

/// Box `[lo, hi]` clipped to the domain and translated in the last
/// coordinate to start at zero; returns the region and the translation.
fn clipped_box(domain: &Domain, mut lo: Vec<f64>, mut hi: Vec<f64>) -> (Region, f64) {
    let n = lo.len();
    match domain.kind {
        DomainKind::WholeSpace { .. } => {}
        DomainKind::HalfSpace { .. } => lo[n - 1] = lo[n - 1].max(0.0),
        DomainKind::Interval { length } => {
            lo[0] = lo[0].max(0.0);
            hi[0] = hi[0].min(length);
        }
    }
    let shift = lo[n - 1];
    lo[n - 1] = 0.0;
    hi[n - 1] -= shift;
    (Region::HalfSpaceBox { lo, hi }, shift)
}

/// Truncated integration window of `z ↦ G(x,z,t)·G(z,y,s)` inside the domain.
fn composition_window(
    domain: &Domain,
    x: &Point,
    y: &Point,
    t: f64,
    s: f64,
    tau: f64,
) -> (Region, f64) {
    let rx = Domain::gaussian_radius(t, tau);
    let ry = Domain::gaussian_radius(s, tau);
    let n = domain.dim();
    let lo = (0..n).map(|i| (x.get(i) - rx).min(y.get(i) - ry)).collect();
    let hi = (0..n).map(|i| (x.get(i) + rx).max(y.get(i) + ry)).collect();
    clipped_box(domain, lo, hi)
}

/// Check `G(t+s) = G(t)∘G(s)` or `K(t+s) = G(t)∘K(s)` at one `(x, y)`.
pub fn verify_semigroup(
    domain: &Domain,
    which: KernelKind,
    x: &Point,
    y: &Point,
    t: f64,
    s: f64,
    opts: &QuadOptions,
) -> Result<ResidualReport> {
    domain.validate()?;
    check_time(t)?;
    check_time(s)?;
    domain.check_point(x, "x")?;
    domain.check_point(y, "y")?;
    let second = |z: &Point| match which {
        KernelKind::G => heat_kernel_unchecked(domain, z, y, s),
        KernelKind::K => k_kernel_unchecked(domain, z, y, s),
    };
    let lhs = match which {
        KernelKind::G => heat_kernel_unchecked(domain, x, y, t + s)?,
        KernelKind::K => k_kernel(domain, x, y, t + s)?,
    };
    let tau = opts.tol.rel.max(1e-15) * 1e-2;
    let n = domain.dim();
    let (region, shift) = composition_window(domain, x, y, t, s, tau);
    let failed = std::cell::Cell::new(None);
    let res = integrate(
        |z: &Point| {
            let mut z = *z;
            z.set(n - 1, z.get(n - 1) + shift);
            let a = heat_kernel_unchecked(domain, x, &z, t);
            let b = second(&z);
            match (a, b) {
                (Ok(a), Ok(b)) => a * b,
                (Err(e), _) | (_, Err(e)) => {
                    failed.set(Some(e.to_string()));
                    0.0
                }
            }
        },
        &region,
        opts,
        None,
    )?;
    if let Some(msg) = failed.take() {
        return Err(invalid(msg));
    }
    Ok(ResidualReport::new(lhs, res.value, res.error_estimate))
}

/// Empirical constants of the two-sided Gaussian bound
/// `c1⁻¹ B e^{−c2|x−y|²/t} ≤ G ≤ c1 B e^{−|x−y|²/(c2 t)}`,
/// `B = t^{−N/2} d(x)/(d(x)+√t) · d(y)/(d(y)+√t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBoundsCert {
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub sample_count: usize,
    /// Samples where both `G` and the lower envelope underflow; they constrain nothing.
    pub skipped: usize,
    /// `max(bound/G − 1)` over both sides after fitting; `≤ 0` on success.
    pub max_violation: f64,
}

/// Fit `c1` for a fixed Gaussian exponent constant `c2 ≥ 1` from per-sample
/// ratio extremes.
pub fn certify_gaussian_bounds(
    domain: &Domain,
    samples: &[(Point, Point, f64)],
    horizon: f64,
    c2: f64,
) -> Result<KernelBoundsCert> {
    if !domain.has_boundary() {
        return Err(Error::UnsupportedDomain(
            "bounds involve the distance to the boundary".into(),
        ));
    }
    if samples.is_empty() {
        return Err(invalid("empty sample grid"));
    }
    if !(c2 >= 1.0) {
        return Err(invalid("c2 must be at least 1"));
    }
    let n = domain.dim() as f64;
    let mut ratios = Vec::with_capacity(samples.len());
    let mut skipped = 0;
    for (x, y, t) in samples {
        let t = *t;
        if !(t > 0.0 && t < horizon) {
            return Err(invalid(format!("sample time {t} outside (0, {horizon})")));
        }
        let g = heat_kernel(domain, x, y, t)?;
        let (dx, dy) = (domain.distance(x), domain.distance(y));
        let st = t.sqrt();
        let b = t.powf(-0.5 * n) * dx / (dx + st) * dy / (dy + st);
        let r2 = x.dist2(y) / t;
        let lower = b * (-c2 * r2).exp();
        let upper = b * (-r2 / c2).exp();
        if g == 0.0 {
            if b == 0.0 || lower == 0.0 {
                skipped += 1;
                continue;
            }
            return Err(invalid(format!(
                "kernel underflows at an admissible sample ({:?}, {:?}, {t})",
                x.coords(),
                y.coords()
            )));
        }
        ratios.push((g / upper, lower / g));
    }
    let c1 = ratios.iter().map(|(u, l)| u.max(*l)).fold(1.0f64, f64::max);
    if !c1.is_finite() {
        return Err(invalid(
            "two-sided bound constant is not finite on the grid",
        ));
    }
    let max_violation = ratios
        .iter()
        .map(|(u, l)| (u / c1 - 1.0).max(l / c1 - 1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(KernelBoundsCert {
        c1_hat: c1,
        c2_hat: c2,
        sample_count: samples.len(),
        skipped,
        max_violation,
    })
}

/// `∫_Ω G(x, y, t) dy`, the probability of surviving absorption up to time `t`.
pub fn survival_mass(
    domain: &Domain,
    x: &Point,
    t: f64,
    opts: &QuadOptions,
) -> Result<crate::QuadResult> {
    domain.validate()?;
    check_time(t)?;
    domain.check_point(x, "x")?;
    if domain.is_boundary(x) {
        return Ok(crate::QuadResult::zero());
    }
    let tau = opts.tol.abs.max(opts.tol.rel).max(1e-15) * 1e-2;
    let r = Domain::gaussian_radius(t, tau);
    let n = domain.dim();
    let lo = (0..n).map(|i| x.get(i) - r).collect();
    let hi = (0..n).map(|i| x.get(i) + r).collect();
    let (region, shift) = clipped_box(domain, lo, hi);
    let failed = std::cell::Cell::new(None);
    let res = integrate(
        |z: &Point| {
            let mut z = *z;
            z.set(n - 1, z.get(n - 1) + shift);
            heat_kernel_unchecked(domain, x, &z, t).unwrap_or_else(|e| {
                failed.set(Some(e.to_string()));
                0.0
            })
        },
        &region,
        opts,
        None,
    )?;
    if let Some(msg) = failed.take() {
        return Err(invalid(msg));
    }
    Ok(res)
}
