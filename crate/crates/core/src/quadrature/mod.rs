//! Adaptive quadrature over intervals, balls, boxes, boundary patches and
//! time intervals.
//!
//! Multi-dimensional regions are integrated by iterated one-dimensional
//! adaptive rules. With a singularity hint the region is parametrised in
//! polar coordinates about the hinted point so that the radial rule can grade
//! toward it.

mod adaptive;
pub mod rule;

use std::cell::Cell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use adaptive::{integrate_1d, resolution_floor, SingularPoint};

use crate::domain::Point;
use crate::error::{invalid, Error, Result};

/// Absolute/relative tolerance pair; a result is accepted when
/// `error ≤ max(abs, rel·|value|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
}

impl Tol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadOptions {
    pub tol: Tol,
    /// Evaluation budget per one-dimensional sweep.
    pub max_evals: usize,
}

impl QuadOptions {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            tol: Tol::new(abs, rel),
            max_evals: 400_000,
        }
    }

    pub fn abs(abs: f64) -> Self {
        Self::new(abs, 0.0)
    }

    pub fn with_budget(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol.abs >= 0.0 && self.tol.rel >= 0.0)
            || (self.tol.abs == 0.0 && self.tol.rel == 0.0)
        {
            return Err(invalid("quadrature tolerance must be positive"));
        }
        if self.max_evals == 0 {
            return Err(invalid("quadrature budget must be positive"));
        }
        Ok(())
    }

    /// Options for an inner integral of an iterated rule over an outer range
    /// of measure `outer`.
    fn inner(&self, outer: f64) -> Self {
        Self {
            tol: Tol::new(0.1 * self.tol.abs / outer.max(1e-300), 0.1 * self.tol.rel),
            max_evals: self.max_evals,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

impl QuadResult {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 1,
        }
    }

    /// Accept a failed result as is, keeping its partial estimate.
    pub fn or_partial(r: Result<QuadResult>) -> Result<QuadResult> {
        match r {
            Err(Error::Quadrature { partial }) => Ok(partial),
            other => other,
        }
    }
}

/// Bounded integration regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Ball in `R^N`, optionally intersected with `{x_N ≥ 0}`.
    Ball {
        center: Point,
        radius: f64,
        upper_half: bool,
    },
    /// Axis-aligned box with `lo[N−1] ≥ 0`.
    HalfSpaceBox { lo: Vec<f64>, hi: Vec<f64> },
    /// `(N−1)`-ball of the hyperplane `{x_N = 0}`; for `N = 1` the single point.
    BoundaryPatch { center: Point, radius: f64 },
    TimeInterval {
        t0: f64,
        t1: f64,
        singular_start: bool,
        singular_end: bool,
    },
}

impl Region {
    pub fn ball(center: Point, radius: f64) -> Self {
        Region::Ball {
            center,
            radius,
            upper_half: false,
        }
    }

    pub fn half_ball(center: Point, radius: f64) -> Self {
        Region::Ball {
            center,
            radius,
            upper_half: true,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Region::Ball { radius, .. } | Region::BoundaryPatch { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("region radius must be positive and finite"));
                }
            }
            Region::HalfSpaceBox { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() || lo.len() > 3 {
                    return Err(invalid("box bounds must have matching dimension 1..=3"));
                }
                if lo
                    .iter()
                    .zip(hi)
                    .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
                {
                    return Err(invalid("box bounds must be finite and ordered"));
                }
                if lo[lo.len() - 1] < 0.0 {
                    return Err(invalid("box must lie in the upper half-space"));
                }
            }
            Region::TimeInterval { t0, t1, .. } => {
                if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
                    return Err(invalid("time interval must be finite and ordered"));
                }
            }
        }
        Ok(())
    }
}

/// A point near which the integrand may be singular, with the expected
/// power-law exponent (`|x − location|^{exponent}`) and, for log-critical
/// integrands, the power `b` of the `[log(e + 1/r)]^{-b}` factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularityHint {
    pub location: Point,
    pub exponent: f64,
    #[serde(default)]
    pub log_power: f64,
}

impl SingularityHint {
    pub fn new(location: Point, exponent: f64) -> Self {
        Self {
            location,
            exponent,
            log_power: 0.0,
        }
    }

    pub fn with_log_power(mut self, b: f64) -> Self {
        self.log_power = b;
        self
    }

    fn along(&self, k: usize) -> SingularPoint {
        SingularPoint::new(self.location.get(k)).with_log_power(self.log_power)
    }

    /// Known power along a line through the point, when not log-critical.
    fn known_exponent(&self) -> Option<f64> {
        (self.log_power == 0.0).then_some(self.exponent)
    }
}

/// Which end of a time interval carries a singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeEnd {
    Start,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointSingularity {
    pub end: TimeEnd,
    pub exponent: f64,
}

/// Integrate `f` over `region`.
pub fn integrate<F: Fn(&Point) -> f64>(
    f: F,
    region: &Region,
    opts: &QuadOptions,
    hint: Option<&SingularityHint>,
) -> Result<QuadResult> {
    opts.validate()?;
    region.validate()?;
    match region {
        Region::TimeInterval {
            t0,
            t1,
            singular_start,
            singular_end,
        } => {
            let mut sing = Vec::new();
            if *singular_start {
                sing.push(SingularPoint::new(*t0));
            }
            if *singular_end {
                sing.push(SingularPoint::new(*t1));
            }
            integrate_1d(|t| f(&Point::x1(t)), *t0, *t1, opts, &[], &sing)
        }
        Region::BoundaryPatch { center, radius } => {
            let n = center.dim();
            if center.last() != 0.0 {
                return Err(invalid("boundary patch must be centred on x_N = 0"));
            }
            if n == 1 {
                return Ok(QuadResult {
                    value: f(center),
                    error_estimate: 0.0,
                    evaluations: 1,
                });
            }
            // Integrate over the (N−1)-dimensional disk with the last coordinate pinned.
            let lift = |q: &[f64]| {
                let mut c = q.to_vec();
                c.push(0.0);
                Point::new(&c)
            };
            let c: Vec<f64> = center.coords()[..n - 1].to_vec();
            let h = hint.map(|h| SingularityHint {
                location: Point::new(&h.location.coords()[..n - 1]),
                ..*h
            });
            iterated_ball(
                &|q: &[f64]| f(&lift(q)),
                &c,
                *radius,
                false,
                opts,
                h.as_ref(),
            )
        }
        Region::Ball {
            center,
            radius,
            upper_half,
        } => iterated_ball(
            &|q: &[f64]| f(&Point::new(q)),
            center.coords(),
            *radius,
            *upper_half,
            opts,
            hint,
        ),
        Region::HalfSpaceBox { lo, hi } => {
            let g = |q: &[f64]| f(&Point::new(q));
            match hint {
                Some(h) if lo.len() > 1 => polar(&g, h, &Clip::Box { lo, hi }, opts),
                _ => iterated_box(&g, lo, hi, opts, hint),
            }
        }
    }
}

/// Time integral of `g` over `[t0, t1]` with optional endpoint grading.
pub fn integrate_time<G: Fn(f64) -> f64>(
    g: G,
    t0: f64,
    t1: f64,
    opts: &QuadOptions,
    endpoint: Option<EndpointSingularity>,
) -> Result<QuadResult> {
    let region = Region::TimeInterval {
        t0,
        t1,
        singular_start: matches!(
            endpoint,
            Some(EndpointSingularity {
                end: TimeEnd::Start,
                ..
            })
        ),
        singular_end: matches!(
            endpoint,
            Some(EndpointSingularity {
                end: TimeEnd::End,
                ..
            })
        ),
    };
    integrate(|p: &Point| g(p.get(0)), &region, opts, None)
}

enum Clip<'a> {
    Ball {
        center: &'a [f64],
        radius: f64,
        upper_half: bool,
    },
    Box {
        lo: &'a [f64],
        hi: &'a [f64],
    },
}

impl Clip<'_> {
    /// Parameter interval `[r0, r1] ⊂ [0, ∞)` of the ray `s + r·dir` inside the region.
    fn ray(&self, s: &[f64], dir: &[f64]) -> Option<(f64, f64)> {
        let mut r0: f64 = 0.0;
        let mut r1 = f64::INFINITY;
        let n = s.len();
        match self {
            Clip::Ball {
                center,
                radius,
                upper_half,
            } => {
                let mut b = 0.0;
                let mut c = -radius * radius;
                for i in 0..n {
                    let d = s[i] - center[i];
                    b += d * dir[i];
                    c += d * d;
                }
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // Stable roots of r² + 2br + c = 0.
                let q = if b >= 0.0 { -b - sq } else { -b + sq };
                let (lo, hi) = if q == 0.0 {
                    (0.0, 0.0)
                } else {
                    let other = c / q;
                    (q.min(other), q.max(other))
                };
                r0 = r0.max(lo);
                r1 = r1.min(hi);
                if *upper_half {
                    half_space_clip(s[n - 1], dir[n - 1], &mut r0, &mut r1);
                }
            }
            Clip::Box { lo, hi } => {
                for i in 0..n {
                    slab_clip(s[i], dir[i], lo[i], hi[i], &mut r0, &mut r1);
                }
            }
        }
        (r1 > r0).then_some((r0, r1))
    }
}

fn half_space_clip(s: f64, d: f64, r0: &mut f64, r1: &mut f64) {
    slab_clip(s, d, 0.0, f64::INFINITY, r0, r1);
}

fn slab_clip(s: f64, d: f64, lo: f64, hi: f64, r0: &mut f64, r1: &mut f64) {
    if d == 0.0 {
        if s < lo || s > hi {
            *r1 = -1.0;
        }
        return;
    }
    let a = (lo - s) / d;
    let b = (hi - s) / d;
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    *r0 = r0.max(a);
    *r1 = r1.min(b);
}

/// Iterated rule over a ball, optionally clipped to the upper half-space.
fn iterated_ball(
    f: &dyn Fn(&[f64]) -> f64,
    center: &[f64],
    radius: f64,
    upper_half: bool,
    opts: &QuadOptions,
    hint: Option<&SingularityHint>,
) -> Result<QuadResult> {
    let n = center.len();
    if n >= 2 {
        if let Some(h) = hint {
            let clip = Clip::Ball {
                center,
                radius,
                upper_half,
            };
            return polar(f, h, &clip, opts);
        }
    }
    let mut lo = center[0] - radius;
    let hi = center[0] + radius;
    if n == 1 {
        if upper_half {
            lo = lo.max(0.0);
        }
        if lo >= hi {
            return Ok(QuadResult::zero());
        }
        let sing: Vec<SingularPoint> = hint
            .map(|h| vec![h.along(0).with_exponent(h.known_exponent())])
            .unwrap_or_default();
        return integrate_1d(|x| f(&[x]), lo, hi, opts, &[], &sing);
    }
    // Cartesian nesting: x_0 outermost, chord bounds for the rest.
    nested(
        f,
        &mut vec![0.0; n],
        0,
        opts,
        &|k: usize, prefix: &[f64]| {
            let used: f64 = (0..k).map(|i| (prefix[i] - center[i]).powi(2)).sum();
            let rem = radius * radius - used;
            if rem <= 0.0 {
                return None;
            }
            let w = rem.sqrt();
            let mut a = center[k] - w;
            let b = center[k] + w;
            if upper_half && k == n - 1 {
                a = a.max(0.0);
            }
            (a < b).then_some((a, b, true))
        },
        hint,
    )
}

fn iterated_box(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    opts: &QuadOptions,
    hint: Option<&SingularityHint>,
) -> Result<QuadResult> {
    let n = lo.len();
    nested(
        f,
        &mut vec![0.0; n],
        0,
        opts,
        &|k: usize, _prefix: &[f64]| Some((lo[k], hi[k], false)),
        hint,
    )
}

type Bounds<'a> = dyn Fn(usize, &[f64]) -> Option<(f64, f64, bool)> + 'a;

/// Recursive iterated integral; `bounds(k, prefix)` gives the range of
/// coordinate `k` and whether its ends are square-root edges.
fn nested(
    f: &dyn Fn(&[f64]) -> f64,
    buf: &mut [f64],
    k: usize,
    opts: &QuadOptions,
    bounds: &Bounds<'_>,
    hint: Option<&SingularityHint>,
) -> Result<QuadResult> {
    let n = buf.len();
    let Some((a, b, edges)) = bounds(k, buf) else {
        return Ok(QuadResult::zero());
    };
    let mut sing = Vec::new();
    if let Some(h) = hint {
        sing.push(h.along(k));
    }
    if edges && k + 1 < n {
        sing.push(SingularPoint::new(a));
        sing.push(SingularPoint::new(b));
    }
    if k + 1 == n {
        let mut local = buf.to_vec();
        return integrate_1d(
            |x| {
                local[k] = x;
                f(&local)
            },
            a,
            b,
            opts,
            &[],
            &sing,
        );
    }
    let inner_opts = opts.inner(b - a);
    let inner_err = Cell::new(0.0f64);
    let evals = Cell::new(0usize);
    let failure: Cell<Option<String>> = Cell::new(None);
    let mut local = buf.to_vec();
    let outer = integrate_1d(
        |x| {
            local[k] = x;
            let mut child = local.clone();
            match nested(f, &mut child, k + 1, &inner_opts, bounds, hint) {
                Ok(r) => {
                    inner_err.set(inner_err.get().max(r.error_estimate));
                    evals.set(evals.get() + r.evaluations);
                    r.value
                }
                Err(Error::Quadrature { partial }) => {
                    inner_err.set(inner_err.get().max(partial.error_estimate));
                    evals.set(evals.get() + partial.evaluations);
                    partial.value
                }
                Err(e) => {
                    failure.set(Some(e.to_string()));
                    0.0
                }
            }
        },
        a,
        b,
        opts,
        &[],
        &sing,
    );
    if let Some(msg) = failure.take() {
        return Err(invalid(msg));
    }
    combine(outer, inner_err.get() * (b - a), evals.get(), opts)
}

/// Fold the inner error budget into an outer result and re-check tolerance.
fn combine(
    outer: Result<QuadResult>,
    extra_err: f64,
    extra_evals: usize,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    let mut r = match outer {
        Ok(r) => r,
        Err(Error::Quadrature { partial }) => partial,
        Err(e) => return Err(e),
    };
    r.error_estimate += extra_err;
    r.evaluations += extra_evals;
    if r.error_estimate <= opts.tol.target(r.value) && r.value.is_finite() {
        Ok(r)
    } else {
        Err(Error::Quadrature { partial: r })
    }
}

/// Polar/spherical coordinates about `s`; the radial rule grades toward `r = 0`.
fn polar(
    f: &dyn Fn(&[f64]) -> f64,
    hint: &SingularityHint,
    clip: &Clip<'_>,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    let s = hint.location.coords();
    let n = s.len();
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let origin = SingularPoint::new(0.0)
        .with_log_power(hint.log_power)
        .with_floor(resolution_floor(scale));
    let inner_err = Cell::new(0.0f64);
    let evals = Cell::new(0usize);
    let radial = |dir: &[f64], o: &QuadOptions| -> f64 {
        let Some((r0, r1)) = clip.ray(s, dir) else {
            return 0.0;
        };
        let mut x = vec![0.0; n];
        let res = integrate_1d(
            |r| {
                for i in 0..n {
                    x[i] = s[i] + r * dir[i];
                }
                let v = f(&x);
                if v == 0.0 {
                    0.0
                } else {
                    v * r.powi(n as i32 - 1)
                }
            },
            r0,
            r1,
            o,
            &[],
            &[origin],
        );
        let r = match res {
            Ok(r) => r,
            Err(Error::Quadrature { partial }) => partial,
            Err(_) => return f64::NAN,
        };
        inner_err.set(inner_err.get().max(r.error_estimate));
        evals.set(evals.get() + r.evaluations);
        r.value
    };
    match n {
        2 => {
            let o = opts.inner(2.0 * PI);
            let outer = integrate_1d(
                |th| radial(&[th.cos(), th.sin()], &o),
                0.0,
                2.0 * PI,
                opts,
                &[0.5 * PI, PI, 1.5 * PI],
                &[],
            );
            combine(outer, inner_err.get() * 2.0 * PI, evals.get(), opts)
        }
        3 => {
            let o_mid = opts.inner(PI);
            let o_in = o_mid.inner(2.0 * PI);
            let mid_err = Cell::new(0.0f64);
            let outer = integrate_1d(
                |th| {
                    let (st, ct) = th.sin_cos();
                    let r = integrate_1d(
                        |ph| {
                            let (sp, cp) = ph.sin_cos();
                            radial(&[st * cp, st * sp, ct], &o_in)
                        },
                        0.0,
                        2.0 * PI,
                        &o_mid,
                        &[0.5 * PI, PI, 1.5 * PI],
                        &[],
                    );
                    let r = match r {
                        Ok(r) | Err(Error::Quadrature { partial: r }) => r,
                        Err(_) => return f64::NAN,
                    };
                    mid_err.set(mid_err.get().max(r.error_estimate));
                    r.value * st
                },
                0.0,
                PI,
                opts,
                &[0.5 * PI],
                &[],
            );
            let extra = (mid_err.get() + inner_err.get() * 2.0 * PI) * PI;
            combine(outer, extra, evals.get(), opts)
        }
        _ => Err(invalid("polar integration needs dimension 2 or 3")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_in_one_dimension() {
        let r = integrate(
            |_| 1.0,
            &Region::ball(Point::x1(0.0), 1.0),
            &QuadOptions::abs(1e-10),
            None,
        )
        .unwrap();
        assert!((r.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn disk_area_cartesian_and_polar() {
        let reg = Region::ball(Point::new(&[0.3, -0.2]), 1.5);
        let o = QuadOptions::abs(1e-8);
        let a = integrate(|_| 1.0, &reg, &o, None).unwrap();
        let hint = SingularityHint::new(Point::new(&[0.0, 0.0]), 0.0);
        let b = integrate(|_| 1.0, &reg, &o, Some(&hint)).unwrap();
        let exact = PI * 2.25;
        assert!((a.value - exact).abs() < 1e-8, "{a:?}");
        assert!((b.value - exact).abs() < 1e-8, "{b:?}");
    }

    #[test]
    fn half_disk_with_singular_centre() {
        // ∫ over the upper unit half-disk of |x|^{-1} = π.
        let reg = Region::half_ball(Point::new(&[0.0, 0.0]), 1.0);
        let hint = SingularityHint::new(Point::new(&[0.0, 0.0]), -1.0);
        let r = integrate(
            |p| 1.0 / p.norm(),
            &reg,
            &QuadOptions::abs(1e-8),
            Some(&hint),
        )
        .unwrap();
        assert!((r.value - PI).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn boundary_patch_in_two_dimensions() {
        let reg = Region::BoundaryPatch {
            center: Point::new(&[0.0, 0.0]),
            radius: 1.0,
        };
        let hint = SingularityHint::new(Point::new(&[0.0, 0.0]), -0.5);
        let r = integrate(
            |p| p.get(0).abs().powf(-0.5),
            &reg,
            &QuadOptions::abs(1e-9),
            Some(&hint),
        )
        .unwrap();
        assert!((r.value - 4.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn ball_volume_in_three_dimensions() {
        let reg = Region::ball(Point::new(&[0.0, 0.0, 0.0]), 1.0);
        let r = integrate(|_| 1.0, &reg, &QuadOptions::abs(1e-6), None).unwrap();
        assert!((r.value - 4.0 * PI / 3.0).abs() < 1e-6, "{r:?}");
        let hint = SingularityHint::new(Point::new(&[0.0, 0.0, 0.5]), 0.0);
        let r = integrate(|_| 1.0, &reg, &QuadOptions::abs(1e-6), Some(&hint)).unwrap();
        assert!((r.value - 4.0 * PI / 3.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn time_interval_with_singular_end() {
        let t = 0.3;
        let r = integrate_time(
            |s| (t - s).powf(-0.5),
            0.0,
            t,
            &QuadOptions::abs(1e-10),
            Some(EndpointSingularity {
                end: TimeEnd::End,
                exponent: -0.5,
            }),
        )
        .unwrap();
        assert!((r.value - 2.0 * t.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn box_integral_of_gaussian() {
        let reg = Region::HalfSpaceBox {
            lo: vec![-6.0, 0.0],
            hi: vec![6.0, 6.0],
        };
        let r = integrate(
            |p| (-p.dist2(&Point::origin(2))).exp(),
            &reg,
            &QuadOptions::abs(1e-9),
            None,
        )
        .unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-8, "{r:?}");
    }
}
