//! Smooth cut-off functions for localized energy estimates and the bound
//! for the differential inequality `m + ξ ≤ c_* η (ξ')^{1/α}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Point;
use crate::error::{invalid, Result};
use crate::quadrature::{integrate_1d, QuadOptions};

/// `1/s` above which `e^{−1/s}` is treated as zero.
pub const UNDERFLOW_ARG: f64 = 700.0;

/// `f(s) = e^{−1/s}` for `s > 0`, zero otherwise, with derivatives.
fn f_and_derivs(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 || 1.0 / s > UNDERFLOW_ARG {
        return (0.0, 0.0, 0.0);
    }
    let f = (-1.0 / s).exp();
    let s2 = s * s;
    let d1 = f / s2;
    let d2 = f * (1.0 / (s2 * s2) - 2.0 / (s2 * s));
    (f, d1, d2)
}

/// `η` with its first two derivatives.
pub fn eta_derivs(s: f64) -> (f64, f64, f64) {
    let (a, fa1, fa2) = f_and_derivs(2.0 - s);
    let (b, fb1, fb2) = f_and_derivs(s - 1.0);
    let d = a + b;
    if b == 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if a == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let (a1, a2) = (-fa1, fa2);
    let (b1, b2) = (fb1, fb2);
    let num = a1 * b - a * b1;
    let d1 = a1 + b1;
    let e1 = num / (d * d);
    let e2 = (a2 * b - a * b2) / (d * d) - 2.0 * num * d1 / (d * d * d);
    (a / d, e1, e2)
}

/// Smooth step: 1 on `[0, 1]`, 0 on `[2, ∞)`, nonincreasing.
pub fn eta(s: f64) -> f64 {
    eta_derivs(s).0
}

/// `η` restricted to `[1, ∞)`, zero on `[0, 1)`.
pub fn eta_star(s: f64) -> f64 {
    if s < 1.0 {
        0.0
    } else {
        eta(s)
    }
}

/// Cut-off `ψ_r(x − z, t) = η((2|x − z|² + 2t)/r)` and its companion `ψ_r*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffParams {
    pub r: f64,
    pub p: f64,
    pub center: Point,
}

impl CutoffParams {
    pub fn new(r: f64, p: f64, center: Point) -> Result<Self> {
        let c = Self { r, p, center };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid("cut-off scale r must be positive"));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(invalid("p must exceed 1"));
        }
        Ok(())
    }

    fn argument(&self, x: &Point, t: f64) -> f64 {
        (2.0 * x.dist2(&self.center) + 2.0 * t) / self.r
    }
}

/// Values of `ψ_r` at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffEval {
    pub value: f64,
    pub star: f64,
    pub dt: f64,
    pub grad: Vec<f64>,
    pub lap: f64,
}

/// `ψ_r`, `ψ_r*`, `∂ₜψ_r`, `∇ψ_r` and `Δψ_r` at `(x, t)`.
pub fn psi_r(params: &CutoffParams, x: &Point, t: f64) -> Result<CutoffEval> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(invalid("t must be nonnegative"));
    }
    if x.dim() != params.center.dim() {
        return Err(invalid("point dimension differs from the cut-off center"));
    }
    let s = params.argument(x, t);
    let (e, e1, e2) = eta_derivs(s);
    let r = params.r;
    let n = x.dim() as f64;
    let rel: Vec<f64> = x
        .coords()
        .iter()
        .zip(params.center.coords())
        .map(|(a, b)| a - b)
        .collect();
    let rho2 = x.dist2(&params.center);
    Ok(CutoffEval {
        value: e,
        star: if s < 1.0 { 0.0 } else { e },
        dt: 2.0 * e1 / r,
        grad: rel.iter().map(|c| 4.0 * c * e1 / r).collect(),
        lap: 16.0 * rho2 / (r * r) * e2 + 4.0 * n * e1 / r,
    })
}

/// Smallest constants making
/// `|∂ₜψ| ≤ C ψ*^{1/p}/r`, `|∇ψ| ≤ C |x − z| ψ*^{1/p}/r`, `|Δψ| ≤ C ψ*^{1/p}/r`
/// hold on a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffConstants {
    pub r: f64,
    pub p: f64,
    pub c_dt: f64,
    pub c_grad: f64,
    pub c_lap: f64,
    /// Samples where a derivative is nonzero while `ψ*` vanishes.
    pub unsupported: usize,
    pub samples: usize,
    /// Samples skipped because `ψ*^{1/p}` underflows.
    pub skipped: usize,
}

/// Samples filling the support `{(x, t): 2|x − z|² + 2t ∈ [0, 2r]}` with
/// the radial coordinate along the first axis, in units scaled by `r` so
/// that grids for different `r` are images of each other.
pub fn support_grid(params: &CutoffParams, n_s: usize, n_theta: usize) -> Vec<(Point, f64)> {
    let mut out = Vec::with_capacity(n_s * n_theta);
    for i in 0..n_s {
        // s from just above 0 to 2.
        let s = 2.0 * (i as f64 + 0.5) / n_s as f64;
        for j in 0..n_theta {
            // Split s r between 2|x|² and 2t.
            let theta = (j as f64 + 0.5) / n_theta as f64;
            let rho = (0.5 * theta * s * params.r).sqrt();
            let t = 0.5 * (1.0 - theta) * s * params.r;
            let mut x = params.center;
            x.set(0, params.center.get(0) + rho);
            out.push((x, t));
        }
    }
    out
}

/// Empirical constants of the cut-off derivative bounds on `grid`.
pub fn verify_cutoff_bounds(
    params: &CutoffParams,
    grid: &[(Point, f64)],
) -> Result<CutoffConstants> {
    params.validate()?;
    let evals: Vec<(CutoffEval, f64)> = grid
        .par_iter()
        .map(|(x, t)| psi_r(params, x, *t).map(|e| (e, x.dist(&params.center))))
        .collect::<Result<_>>()?;
    let r = params.r;
    let mut c = CutoffConstants {
        r,
        p: params.p,
        c_dt: 0.0,
        c_grad: 0.0,
        c_lap: 0.0,
        unsupported: 0,
        samples: grid.len(),
        skipped: 0,
    };
    for (e, rho) in &evals {
        let gnorm = e.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let nonzero = e.dt != 0.0 || gnorm != 0.0 || e.lap != 0.0;
        let w = e.star.powf(1.0 / params.p);
        if w == 0.0 {
            if e.star == 0.0 && nonzero && e.value != 0.0 && e.value != 1.0 {
                c.unsupported += 1;
            }
            c.skipped += 1;
            continue;
        }
        c.c_dt = c.c_dt.max(e.dt.abs() * r / w);
        c.c_lap = c.c_lap.max(e.lap.abs() * r / w);
        if *rho > 0.0 {
            c.c_grad = c.c_grad.max(gnorm * r / (rho * w));
        }
    }
    Ok(c)
}

/// Bound on `m` under the differential inequality and the extremal `m`
/// found from the equality ODE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma31Report {
    pub rhs_bound: f64,
    /// Largest `m` whose equality solution stayed finite on `[a, b]`.
    pub ode_witness_m: f64,
    /// Smallest `m` whose equality solution blew up (or exhausted the step budget).
    pub witness_upper: f64,
    /// Whether any bisection solve exhausted its step budget.
    pub budget_exceeded: bool,
}

/// Bisection steps on `m`.
const WITNESS_BISECTIONS: usize = 60;
/// Steps allowed to one ODE solve.
const ODE_STEP_BUDGET: usize = 200_000;
/// `ξ` beyond this multiple of its scale counts as blow-up.
const BLOWUP_FACTOR: f64 = 1e12;

/// `c_*^{α/(α−1)} (1/(α−1))^{1/(α−1)} (∫_a^b η^{−α})^{−1/(α−1)}` together
/// with the extremal `m` for which `ξ' = ((m + ξ)/(c_* η))^α`, `ξ(a) = ξ₀`
/// stays finite on `[a, b]`.
pub fn lemma31_bound<E: Fn(f64) -> f64 + Sync>(
    a: f64,
    b: f64,
    eta_fn: E,
    c_star: f64,
    alpha: f64,
    xi0: f64,
) -> Result<Lemma31Report> {
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(invalid("need 0 < a < b < ∞"));
    }
    if !(alpha > 1.0 && c_star > 0.0 && xi0 >= 0.0) {
        return Err(invalid("need α > 1, c_* > 0 and ξ(a) ≥ 0"));
    }
    let mut bad = false;
    let q = integrate_1d(
        |r| {
            let e = eta_fn(r);
            if !(e > 0.0 && e.is_finite()) {
                bad = true;
                return 0.0;
            }
            e.powf(-alpha)
        },
        a,
        b,
        &QuadOptions::new(1e-300, 1e-12),
        &[],
        &[],
    )?;
    if bad {
        return Err(invalid("η must be positive and finite on [a, b]"));
    }
    let k = 1.0 / (alpha - 1.0);
    let rhs = c_star.powf(alpha * k) * k.powf(k) * q.value.powf(-k);

    // Bracket: small m survives, large m blows up.
    let mut lo = 0.0;
    let mut hi = rhs.max(1e-300);
    let mut budget_exceeded = false;
    let mut widen = 0;
    loop {
        match equality_ode_finite(a, b, &eta_fn, c_star, alpha, xi0, hi) {
            OdeFate::Finite => {
                lo = hi;
                hi *= 2.0;
                widen += 1;
                if widen > 200 {
                    return Err(invalid("equality solution stays finite for every tried m"));
                }
            }
            OdeFate::BlowUp => break,
            OdeFate::Budget => {
                budget_exceeded = true;
                break;
            }
        }
    }
    for _ in 0..WITNESS_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        match equality_ode_finite(a, b, &eta_fn, c_star, alpha, xi0, mid) {
            OdeFate::Finite => lo = mid,
            OdeFate::BlowUp => hi = mid,
            OdeFate::Budget => {
                budget_exceeded = true;
                hi = mid;
            }
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(Lemma31Report {
        rhs_bound: rhs,
        ode_witness_m: lo,
        witness_upper: hi,
        budget_exceeded,
    })
}

enum OdeFate {
    Finite,
    BlowUp,
    Budget,
}

/// Dormand–Prince 5(4) on `ξ' = ((m + ξ)/(c_* η(r)))^α` from `a` to `b`.
fn equality_ode_finite<E: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    eta_fn: &E,
    c_star: f64,
    alpha: f64,
    xi0: f64,
    m: f64,
) -> OdeFate {
    let rhs = |r: f64, xi: f64| ((m + xi) / (c_star * eta_fn(r))).powf(alpha);
    let cap = BLOWUP_FACTOR * (1.0 + m + xi0);
    let (rtol, atol) = (1e-10, 1e-14);
    let mut r = a;
    let mut y = xi0;
    let mut h = 1e-3 * (b - a);
    let mut k1 = rhs(r, y);
    for _ in 0..ODE_STEP_BUDGET {
        if r >= b {
            return OdeFate::Finite;
        }
        h = h.min(b - r);
        if h <= 1e-15 * (b - a) {
            return OdeFate::BlowUp;
        }
        let k2 = rhs(r + h / 5.0, y + h * (k1 / 5.0));
        let k3 = rhs(
            r + 3.0 * h / 10.0,
            y + h * (3.0 * k1 / 40.0 + 9.0 * k2 / 40.0),
        );
        let k4 = rhs(
            r + 4.0 * h / 5.0,
            y + h * (44.0 * k1 / 45.0 - 56.0 * k2 / 15.0 + 32.0 * k3 / 9.0),
        );
        let k5 = rhs(
            r + 8.0 * h / 9.0,
            y + h
                * (19372.0 * k1 / 6561.0 - 25360.0 * k2 / 2187.0 + 64448.0 * k3 / 6561.0
                    - 212.0 * k4 / 729.0),
        );
        let k6 = rhs(
            r + h,
            y + h
                * (9017.0 * k1 / 3168.0 - 355.0 * k2 / 33.0
                    + 46732.0 * k3 / 5247.0
                    + 49.0 * k4 / 176.0
                    - 5103.0 * k5 / 18656.0),
        );
        let y5 = y + h
            * (35.0 * k1 / 384.0 + 500.0 * k3 / 1113.0 + 125.0 * k4 / 192.0 - 2187.0 * k5 / 6784.0
                + 11.0 * k6 / 84.0);
        let k7 = rhs(r + h, y5);
        let y4 = y + h
            * (5179.0 * k1 / 57600.0 + 7571.0 * k3 / 16695.0 + 393.0 * k4 / 640.0
                - 92097.0 * k5 / 339200.0
                + 187.0 * k6 / 2100.0
                + k7 / 40.0);
        let err = (y5 - y4).abs() / (atol + rtol * y5.abs().max(y.abs()));
        if !y5.is_finite() || !err.is_finite() {
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            r += h;
            y = y5;
            k1 = k7;
            if y > cap {
                return OdeFate::BlowUp;
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    OdeFate::Budget
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn eta_endpoint_values() {
        assert_eq!(eta(0.5), 1.0);
        assert_eq!(eta(1.0), 1.0);
        assert_eq!(eta(2.0), 0.0);
        assert_eq!(eta(3.0), 0.0);
        assert!((eta(1.5) - 0.5).abs() < 1e-15);
        assert_eq!(eta_star(0.99), 0.0);
        assert_eq!(eta_star(1.5), eta(1.5));
    }

    #[test]
    fn eta_is_nonincreasing_and_bounded() {
        let mut prev = 1.0;
        for i in 0..=30_000 {
            let s = i as f64 * 1e-4;
            let e = eta(s);
            assert!((0.0..=1.0).contains(&e));
            assert!(e <= prev + 1e-15, "s = {s}");
            assert!(eta_derivs(s).1 <= 0.0);
            prev = e;
        }
    }

    #[test]
    fn eta_derivatives_match_differences() {
        for s in [1.1, 1.3, 1.5, 1.7, 1.9] {
            let h = 1e-5;
            let (_, d1, d2) = eta_derivs(s);
            let fd1 = (eta(s + h) - eta(s - h)) / (2.0 * h);
            let fd2 = (eta(s + h) - 2.0 * eta(s) + eta(s - h)) / (h * h);
            assert!((d1 - fd1).abs() <= 1e-8 * (1.0 + d1.abs()), "s = {s}");
            assert!((d2 - fd2).abs() <= 1e-4 * (1.0 + d2.abs()), "s = {s}");
        }
    }

    #[test]
    fn psi_support_and_center_value() {
        let c = CutoffParams::new(0.5, 2.0, Point::new(&[0.3, -0.2])).unwrap();
        let e = psi_r(&c, &c.center, 0.0).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.dt, 0.0);
        let far = Point::new(&[0.3 + 0.8, -0.2]);
        let e = psi_r(&c, &far, 0.0).unwrap();
        assert_eq!((e.value, e.dt, e.lap), (0.0, 0.0, 0.0));
        assert!(e.grad.iter().all(|g| *g == 0.0));
        let late = psi_r(&c, &c.center, 0.5).unwrap();
        assert_eq!(late.value, 0.0);
        assert!(psi_r(&c, &c.center, -1.0).is_err());
    }

    #[test]
    fn psi_derivatives_match_differences() {
        let c = CutoffParams::new(1.0, 2.0, Point::new(&[0.1, 0.2])).unwrap();
        let x = Point::new(&[0.6, 0.4]);
        let t = 0.3;
        let e = psi_r(&c, &x, t).unwrap();
        let val = |x: &Point, t: f64| psi_r(&c, x, t).unwrap().value;
        let h = 1e-5;
        let dt = (val(&x, t + h) - val(&x, t - h)) / (2.0 * h);
        assert!((e.dt - dt).abs() <= 1e-6 * e.dt.abs().max(1e-3));
        let mut lap = 0.0;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp.set(i, x.get(i) + h);
            xm.set(i, x.get(i) - h);
            let g = (val(&xp, t) - val(&xm, t)) / (2.0 * h);
            assert!((e.grad[i] - g).abs() <= 1e-6 * e.grad[i].abs().max(1e-3));
            lap += (val(&xp, t) - 2.0 * val(&x, t) + val(&xm, t)) / (h * h);
        }
        assert!((e.lap - lap).abs() <= 1e-4 * e.lap.abs().max(1e-2));
    }

    #[test]
    fn cutoff_constants_are_scale_invariant() {
        let consts: Vec<CutoffConstants> = [0.01, 0.1, 1.0]
            .iter()
            .map(|r| {
                let c = CutoffParams::new(*r, 2.0, Point::new(&[0.0, 0.0])).unwrap();
                verify_cutoff_bounds(&c, &support_grid(&c, 400, 16)).unwrap()
            })
            .collect();
        for c in &consts {
            assert!(c.c_dt.is_finite() && c.c_grad.is_finite() && c.c_lap.is_finite());
            assert!(c.c_dt > 0.0);
            assert_eq!(c.unsupported, 0);
            assert!((c.c_dt / consts[2].c_dt - 1.0).abs() < 0.05);
            assert!((c.c_grad / consts[2].c_grad - 1.0).abs() < 0.05);
            assert!((c.c_lap / consts[2].c_lap - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn larger_p_does_not_need_larger_constants() {
        // ψ* ≤ 1, so ψ*^{1/p} increases with p and the constants cannot grow.
        let c2 = CutoffParams::new(1.0, 2.0, Point::x1(0.0)).unwrap();
        let c4 = CutoffParams::new(1.0, 4.0, Point::x1(0.0)).unwrap();
        let k2 = verify_cutoff_bounds(&c2, &support_grid(&c2, 400, 8)).unwrap();
        let k4 = verify_cutoff_bounds(&c4, &support_grid(&c4, 400, 8)).unwrap();
        assert!(k4.c_dt <= k2.c_dt && k4.c_lap <= k2.c_lap && k4.c_grad <= k2.c_grad);
    }

    #[test]
    fn lemma31_constant_eta() {
        let rep = lemma31_bound(1.0, 2.0, |_| 1.0, 1.0, 2.0, 0.0).unwrap();
        assert!((rep.rhs_bound - 1.0).abs() < 1e-12);
        assert!(rep.ode_witness_m <= rep.rhs_bound);
        assert!(rep.ode_witness_m > 0.99 * rep.rhs_bound);
    }

    #[test]
    fn lemma31_witness_never_exceeds_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let a = rng.gen_range(0.1..1.0);
            let b = a + rng.gen_range(0.2..2.0);
            let alpha = rng.gen_range(1.2..4.0);
            let c_star = rng.gen_range(0.5..2.0);
            let xi0 = rng.gen_range(0.0..0.5);
            let k = rng.gen_range(1.0..5.0);
            let rep =
                lemma31_bound(a, b, |r| 1.0 + 0.5 * (k * r).sin(), c_star, alpha, xi0).unwrap();
            assert!(!rep.budget_exceeded);
            assert!(rep.ode_witness_m <= rep.rhs_bound, "{rep:?}");
        }
    }

    #[test]
    fn lemma31_rejects_bad_input() {
        assert!(lemma31_bound(2.0, 1.0, |_| 1.0, 1.0, 2.0, 0.0).is_err());
        assert!(lemma31_bound(1.0, 2.0, |_| 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(lemma31_bound(1.0, 2.0, |_| -1.0, 1.0, 2.0, 0.0).is_err());
    }
}
