//! Initial traces: pairings `∫ ψ d u(t)`, their extrapolation to `t = 0`,
//! and the kernel transform `ψ_d(x, t) = ∫ G(x, y, t) d(y) ψ(y) dy`.

use serde::{Deserialize, Serialize};

use crate::domain::{check_time, Domain, DomainKind, Point};
use crate::error::{invalid, Error, Result};
use crate::kernel::{heat_kernel_unchecked, k_kernel_unchecked};
use crate::measure::{bump, MeasureSpec, Window};
use crate::quadrature::{integrate, integrate_1d, QuadOptions, QuadResult, Region};
use crate::solver::GridFunction;

/// Compactly supported smooth test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `height·exp(1 − 1/(1 − |x−c|²/R²))` on `|x − c| < R`.
    Bump {
        center: Point,
        radius: f64,
        height: f64,
    },
    /// Equal to 1 on `|x − c| ≤ inner`, smoothly decreasing to 0 at `outer`.
    Plateau {
        center: Point,
        inner: f64,
        outer: f64,
    },
}

impl TestFunction {
    pub fn bump(center: Point, radius: f64) -> Self {
        TestFunction::Bump {
            center,
            radius,
            height: 1.0,
        }
    }

    pub fn plateau(center: Point, inner: f64, outer: f64) -> Self {
        TestFunction::Plateau {
            center,
            inner,
            outer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TestFunction::Bump {
                center,
                radius,
                height,
            } => center.is_finite() && radius > 0.0 && radius.is_finite() && height.is_finite(),
            TestFunction::Plateau {
                center,
                inner,
                outer,
            } => center.is_finite() && inner >= 0.0 && outer > inner && outer.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("bad test function {self:?}")))
        }
    }

    pub fn center(&self) -> Point {
        match *self {
            TestFunction::Bump { center, .. } | TestFunction::Plateau { center, .. } => center,
        }
    }

    /// Radius of the closed support ball about [`TestFunction::center`].
    pub fn support_radius(&self) -> f64 {
        match *self {
            TestFunction::Bump { radius, .. } => radius,
            TestFunction::Plateau { outer, .. } => outer,
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match *self {
            TestFunction::Bump {
                center,
                radius,
                height,
            } => height * bump(x.dist(&center) / radius),
            TestFunction::Plateau {
                center,
                inner,
                outer,
            } => {
                let r = x.dist(&center);
                if r <= inner {
                    1.0
                } else if r >= outer {
                    0.0
                } else {
                    smooth_step((outer - r) / (outer - inner))
                }
            }
        }
    }

    /// Largest value.
    pub fn sup(&self) -> f64 {
        match *self {
            TestFunction::Bump { height, .. } => height.abs(),
            TestFunction::Plateau { .. } => 1.0,
        }
    }

    fn window(&self) -> Window {
        Window::ball(self.center(), self.support_radius())
    }
}

/// C∞ step from 0 at `s ≤ 0` to 1 at `s ≥ 1`.
fn smooth_step(s: f64) -> f64 {
    let f = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
    let (a, b) = (f(s), f(1.0 - s));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

fn default_opts() -> QuadOptions {
    QuadOptions::new(1e-14, 1e-10)
}

/// `∫ ψ(y) d(y) u(y, t_k) dy` over the piecewise-linear reconstruction of
/// level `k` (weight 1 on the whole line).
pub fn trace_pairing(u: &GridFunction, psi: &TestFunction, k: usize) -> Result<QuadResult> {
    psi.validate()?;
    let (c, r) = (psi.center().get(0), psi.support_radius());
    field_pairing(u, k, c - r, c + r, |x| psi.eval(&Point::x1(x)))
}

/// `∫_a^b g(x) d(x) u(x, t_k) dx` over the piecewise-linear reconstruction
/// of level `k` (weight 1 on the whole line); `g` may jump at `a` and `b`.
pub fn field_pairing<G: Fn(f64) -> f64>(
    u: &GridFunction,
    k: usize,
    a: f64,
    b: f64,
    g: G,
) -> Result<QuadResult> {
    let grid = &u.grid;
    if k >= grid.n_levels() {
        return Err(invalid(format!("level {k} out of range")));
    }
    let xs = &grid.xs;
    let (a, b) = (a.max(xs[0]), b.min(xs[xs.len() - 1]));
    if !(a < b) {
        return Ok(QuadResult::zero());
    }
    let domain = &grid.domain;
    let mut bps: Vec<f64> = xs.iter().copied().filter(|&x| x > a && x < b).collect();
    if let DomainKind::Interval { length } = domain.kind {
        bps.push(0.5 * length);
    }
    let weight = |x: f64| {
        let d = domain.distance(&Point::x1(x));
        if d.is_finite() {
            d
        } else {
            1.0
        }
    };
    integrate_1d(
        |x| {
            let v = u.eval(k, x);
            if v == 0.0 {
                0.0
            } else {
                g(x) * weight(x) * v
            }
        },
        a,
        b,
        &default_opts(),
        &bps,
        &[],
    )
}

/// `∫ ψ dμ`, the value the trace pairings should converge to.
pub fn measure_pairing(
    mu: &MeasureSpec,
    psi: &TestFunction,
    domain: &Domain,
) -> Result<QuadResult> {
    psi.validate()?;
    mu.integrate(domain, &psi.window(), |y, _| psi.eval(y), &default_opts())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStatus {
    Estimated,
    /// The pairing sequence is not monotone in `t`; the error bar covers its range.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub times: Vec<f64>,
    pub pairings: Vec<f64>,
    /// Quadrature error of each pairing.
    pub pairing_errors: Vec<f64>,
    pub limit: f64,
    pub error: f64,
    pub status: TraceStatus,
}

/// Extrapolate pairings to `t = 0` by a degree-2 least-squares polynomial
/// in `√t`. The error bar is the gap to the exact quadratic through the
/// three smallest times plus the largest pairing quadrature error.
pub fn extrapolate_pairings(
    times: &[f64],
    pairings: &[f64],
    pairing_errors: &[f64],
) -> Result<TraceEstimate> {
    let m = times.len();
    if m < 3 || pairings.len() != m || pairing_errors.len() != m {
        return Err(invalid("need at least 3 pairings with matching errors"));
    }
    if times.iter().any(|t| !(*t > 0.0)) || pairings.iter().any(|v| !v.is_finite()) {
        return Err(invalid("times must be positive and pairings finite"));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
    let s: Vec<f64> = order.iter().map(|&i| times[i].sqrt()).collect();
    let v: Vec<f64> = order.iter().map(|&i| pairings[i]).collect();
    let full = quadratic_intercept(&s, &v);
    let near = quadratic_intercept(&s[..3], &v[..3]);
    let quad = pairing_errors.iter().copied().fold(0.0, f64::max);
    let mut error = (full - near).abs() + quad;
    let steps: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = steps.iter().all(|d| *d >= 0.0) || steps.iter().all(|d| *d <= 0.0);
    let status = if monotone {
        TraceStatus::Estimated
    } else {
        let (lo, hi) = v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        error = error.max(hi - lo);
        TraceStatus::Inconclusive
    };
    Ok(TraceEstimate {
        times: order.iter().map(|&i| times[i]).collect(),
        pairings: v,
        pairing_errors: order.iter().map(|&i| pairing_errors[i]).collect(),
        limit: full,
        error,
        status,
    })
}

/// Value at 0 of the least-squares polynomial of degree `min(2, n−1)`.
fn quadratic_intercept(s: &[f64], v: &[f64]) -> f64 {
    let n = s.len();
    let deg = (n - 1).min(2);
    // Scale the abscissa so the normal equations stay well conditioned.
    let scale = s
        .iter()
        .copied()
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (&si, &vi) in s.iter().zip(v) {
        let x = si / scale;
        let pw = [1.0, x, x * x];
        for r in 0..=deg {
            atb[r] += pw[r] * vi;
            for c in 0..=deg {
                ata[r][c] += pw[r] * pw[c];
            }
        }
    }
    solve_small(&mut ata, &mut atb, deg + 1)[0]
}

/// Gaussian elimination with partial pivoting on the leading `n×n` block.
fn solve_small(a: &mut [[f64; 3]; 3], b: &mut [f64; 3], n: usize) -> [f64; 3] {
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let pivot = a[col];
            for (x, p) in a[row][col..n].iter_mut().zip(&pivot[col..n]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Pair `u` with `ψ` on the given levels and extrapolate to `t = 0`.
pub fn recover_trace(
    u: &GridFunction,
    psi: &TestFunction,
    levels: &[usize],
) -> Result<TraceEstimate> {
    if levels.len() < 3 {
        return Err(invalid("need at least 3 time levels"));
    }
    let mut times = Vec::with_capacity(levels.len());
    let mut vals = Vec::with_capacity(levels.len());
    let mut errs = Vec::with_capacity(levels.len());
    for &k in levels {
        let q = trace_pairing(u, psi, k)?;
        times.push(u.grid.times[k]);
        vals.push(q.value);
        errs.push(q.error_estimate);
    }
    extrapolate_pairings(&times, &vals, &errs)
}

/// The four smallest time levels, the default extrapolation window.
pub fn default_trace_levels(u: &GridFunction) -> Vec<usize> {
    (0..u.grid.n_levels().min(4)).collect()
}

/// `ψ_d(x, t)` and its normalisation `ψ_*(x, t) = ψ_d(x, t)/d(x)` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiDValue {
    pub x: Point,
    pub psi_d: f64,
    /// Boundary limit `∫ K(y, x, t) d(y) ψ(y) dy` when `d(x) = 0`.
    pub psi_star: f64,
    pub error: f64,
}

/// Evaluate `ψ_d(·, t)` and `ψ_*(·, t)` at the given points.
///
/// `ψ_*` is computed directly as `∫ K(y, x, t) d(y) ψ(y) dy` (the kernel is
/// symmetric), which stays accurate as `d(x) → 0`.
pub fn psi_d_transform(
    psi: &TestFunction,
    t: f64,
    domain: &Domain,
    points: &[Point],
) -> Result<Vec<PsiDValue>> {
    psi.validate()?;
    check_time(t)?;
    domain.validate()?;
    if !domain.has_boundary() {
        return Err(Error::UnsupportedDomain("ψ_* needs a boundary".into()));
    }
    points
        .iter()
        .map(|x| {
            domain.check_point(x, "x")?;
            let star = integrate_near(psi, t, domain, x, |y, dy| {
                if dy == 0.0 {
                    return 0.0;
                }
                let kv = k_kernel_unchecked(domain, y, x, t).unwrap_or(f64::NAN);
                kv * dy * psi.eval(y)
            })?;
            let d = domain.distance(x);
            let (psi_d, err) = if d > 0.0 {
                let q = integrate_near(psi, t, domain, x, |y, dy| {
                    heat_kernel_unchecked(domain, x, y, t).unwrap_or(f64::NAN) * dy * psi.eval(y)
                })?;
                (q.value, q.error_estimate.max(star.error_estimate * d))
            } else {
                (0.0, 0.0)
            };
            Ok(PsiDValue {
                x: *x,
                psi_d,
                psi_star: star.value,
                error: if d > 0.0 {
                    err / d
                } else {
                    star.error_estimate
                },
            })
        })
        .collect()
}

/// `sup |ψ_*(·, t) − ψ|` over the points, with the quadrature error.
pub fn psi_star_deviation(
    psi: &TestFunction,
    t: f64,
    domain: &Domain,
    points: &[Point],
) -> Result<(f64, f64)> {
    let vals = psi_d_transform(psi, t, domain, points)?;
    Ok(vals.iter().fold((0.0f64, 0.0f64), |(m, e), v| {
        (m.max((v.psi_star - psi.eval(&v.x)).abs()), e.max(v.error))
    }))
}

/// Integrate `g(y, d(y))` over `supp ψ ∩ Ω` within the Gaussian reach of `x`.
fn integrate_near<G: Fn(&Point, f64) -> f64>(
    psi: &TestFunction,
    t: f64,
    domain: &Domain,
    x: &Point,
    g: G,
) -> Result<QuadResult> {
    let reach = Domain::gaussian_radius(t, 1e-16);
    let (c, r) = (psi.center(), psi.support_radius());
    if x.dist(&c) > r + reach {
        return Ok(QuadResult::zero());
    }
    let opts = QuadOptions::new(1e-15, 1e-9);
    let f = |y: &Point| {
        if y.dist(&c) >= r || !domain.contains(y) {
            return 0.0;
        }
        g(y, domain.distance(y))
    };
    if domain.dim() == 1 {
        let (mut a, mut b) = (
            (c.get(0) - r).max(x.get(0) - reach),
            (c.get(0) + r).min(x.get(0) + reach),
        );
        if let DomainKind::HalfSpace { .. } | DomainKind::Interval { .. } = domain.kind {
            a = a.max(0.0);
        }
        if let DomainKind::Interval { length } = domain.kind {
            b = b.min(length);
        }
        if a >= b {
            return Ok(QuadResult::zero());
        }
        let mut bps = vec![x.get(0)];
        if let DomainKind::Interval { length } = domain.kind {
            bps.push(0.5 * length);
        }
        return integrate_1d(|s| f(&Point::x1(s)), a, b, &opts, &bps, &[]);
    }
    // Integrate over the Gaussian ball about x; ψ vanishes outside its support.
    let radius = reach.min(r + x.dist(&c));
    let region = match domain.kind {
        DomainKind::HalfSpace { .. } => Region::half_ball(*x, radius),
        _ => Region::ball(*x, radius),
    };
    integrate(f, &region, &opts, None)
}
