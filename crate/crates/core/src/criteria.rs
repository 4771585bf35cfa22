//! Necessary and sufficient solvability conditions evaluated on sample
//! lattices, with log-log exponent fits and boundedness verdicts.
//!
//! The constants in the bounds are not explicit, so a bound "holds" when the
//! ratio of the computed quantity to the bound shows no growth trend over the
//! sample sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainKind, Point};
use crate::error::{invalid, Error, Result};
use crate::measure::{
    ball_mass, critical_exponent, weighted_ball_integral, MeasureSpec, WeightMode, Window,
    CRITICAL_EPS,
};
use crate::quadrature::{integrate_1d, QuadOptions, QuadResult};
use crate::solver::GridFunction;
use crate::trace::{extrapolate_pairings, field_pairing};

/// Largest admissible growth rate `d log(ratio) / d log(1/σ)` of a bounded ratio.
pub const TREND_TOL: f64 = 0.1;
/// Largest admissible growth rate `d log(ratio) / d log L(σ)` against a log bound.
pub const LOG_TREND_TOL: f64 = 0.25;
/// Slack on a decay exponent before an upper-bound rate counts as violated.
pub const RATE_TOL: f64 = 0.1;
/// Fits need at least this many samples.
pub const FIT_MIN_SAMPLES: usize = 5;
/// Fits need samples spanning at least this many decades of σ.
pub const FIT_MIN_DECADES: f64 = 1.5;
/// Window radius beyond which the growth of `sup μ(B(z,1))/(1 + d(z))` is fitted.
pub const FAR_RADIUS: f64 = 8.0;
/// Points of the geometric `s`-ladder used for `inf_{s ∈ [σ, √T)}`.
pub const S_LADDER_POINTS: usize = 24;
/// Integrand slopes within this distance of `−1` near `s = 0` count as a
/// (logarithmic) divergence: a fit over the smallest samples cannot tell them apart.
pub const DIVERGENCE_SLACK: f64 = 0.02;
/// Points of the geometric `s`-ladder of the sufficient condition integral.
const SUFFICIENT_POINTS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Violated,
    Inconclusive,
}

/// Parameters a criterion was evaluated with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<u8>,
}

/// One row of a sample table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub z: Option<Point>,
    /// `σ`, or `√s` for time-integral criteria.
    pub sigma: f64,
    pub lhs: f64,
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    /// Quadrature error of `lhs`.
    pub error: f64,
}

/// Least-squares slope of `log value` against `log σ` (or `log L`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    /// Two standard errors of the slope.
    pub band: f64,
    pub intercept: f64,
    pub samples: usize,
}

impl ExponentFit {
    /// Whether `target` lies within `tol` of the slope.
    pub fn agrees(&self, target: f64, tol: f64) -> bool {
        (self.slope - target).abs() <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: String,
    pub params: ParamSet,
    pub samples: Vec<SampleRow>,
    pub fitted: Option<ExponentFit>,
    pub predicted: Option<f64>,
    /// Scalar result (a supremum, a mass or an integral) where one exists.
    pub value: Option<f64>,
    /// Largest ratio to the bound over the table.
    pub sup_ratio: Option<f64>,
    /// Growth rate of the ratio used for the verdict.
    pub trend: Option<f64>,
    pub verdict: Verdict,
    pub note: String,
}

impl CriterionReport {
    fn new(id: &str, params: ParamSet, samples: Vec<SampleRow>) -> Self {
        Self {
            id: id.to_string(),
            params,
            samples,
            fitted: None,
            predicted: None,
            value: None,
            sup_ratio: None,
            trend: None,
            verdict: Verdict::Inconclusive,
            note: String::new(),
        }
    }
}

fn opts() -> QuadOptions {
    QuadOptions::new(1e-300, 1e-8)
}

/// `n` points geometric in `[lo, hi]`.
pub fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * (r * i as f64).exp()
            }
        })
        .collect()
}

/// Default σ sweep: 12 points geometric in `[1e−3, √T/2]`.
pub fn default_sigmas(horizon: f64) -> Vec<f64> {
    geometric(1e-3, 0.5 * horizon.sqrt(), 12)
}

/// Structured z lattice: each anchor, the boundary point below it, and
/// points at distances `{1e−3, 1e−2, 1e−1, 1}` on the normal line through it.
pub fn z_lattice(mu: &MeasureSpec, domain: &Domain) -> Vec<Point> {
    let n = domain.dim();
    let mut anchors = mu.anchors();
    if anchors.is_empty() {
        let mut c = Point::origin(n);
        c.set(n - 1, 1.0);
        if let DomainKind::Interval { length } = domain.kind {
            c.set(0, 0.5 * length);
        }
        anchors.push(c);
    }
    let mut out: Vec<Point> = Vec::new();
    let mut push = |p: Point| {
        if domain.contains(&p) && !out.iter().any(|q| q.dist(&p) < 1e-15) {
            out.push(p);
        }
    };
    for a in &anchors {
        push(*a);
        if domain.has_boundary() {
            if let Some(b) = domain.project_to_boundary(a) {
                push(b);
                let normal = domain.inner_normal(&b).unwrap_or_else(|| vec![0.0; n]);
                for d in [1e-3, 1e-2, 1e-1, 1.0] {
                    let q = b.offset(&normal, d);
                    if (domain.distance(&q) - d).abs() < 1e-12 {
                        push(q);
                    }
                }
            }
        }
    }
    out
}

/// Lattice for conditions that look at `z → ∞`: distances `{0, 0.5, 1, 2, …, 256}`
/// from the boundary (both directions on the whole line).
pub fn far_lattice(domain: &Domain) -> Vec<Point> {
    let n = domain.dim();
    let mut ds = vec![0.0, 0.5];
    ds.extend((0..9).map(|k| 2f64.powi(k)));
    let mut out = Vec::new();
    for d in ds {
        let mut z = Point::origin(n);
        match domain.kind {
            DomainKind::WholeSpace { .. } => {
                z.set(n - 1, d);
                out.push(z);
                if d > 0.0 {
                    let mut m = Point::origin(n);
                    m.set(n - 1, -d);
                    out.push(m);
                }
            }
            DomainKind::HalfSpace { .. } => {
                z.set(n - 1, d);
                out.push(z);
            }
            DomainKind::Interval { length } => {
                if d <= 0.5 * length {
                    z.set(0, d);
                    out.push(z);
                }
            }
        }
    }
    out
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(samples: &[(f64, f64)]) -> Result<ExponentFit> {
    if samples.len() < FIT_MIN_SAMPLES {
        return Err(invalid(format!("need at least {FIT_MIN_SAMPLES} samples")));
    }
    if samples
        .iter()
        .any(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(invalid("fit samples must be positive and finite"));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), (x, _)| {
            (a.min(*x), b.max(*x))
        });
    if (hi / lo).log10() < FIT_MIN_DECADES - 1e-9 {
        return Err(invalid(format!(
            "samples must span {FIT_MIN_DECADES} decades"
        )));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    Ok(ols(&pts))
}

/// Least-squares slope of `ln y` against `ln L(σ)`, `L = log(e + √T/σ)`.
pub fn fit_log_power(samples: &[(f64, f64)], horizon: f64) -> Result<ExponentFit> {
    fit_exponent(samples)?;
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|(s, y)| (log_factor(horizon.sqrt() / s).ln(), y.ln()))
        .collect();
    Ok(ols(&pts))
}

fn ols(pts: &[(f64, f64)]) -> ExponentFit {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ssr: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let band = if pts.len() > 2 && sxx > 0.0 {
        2.0 * (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    ExponentFit {
        slope,
        band,
        intercept,
        samples: pts.len(),
    }
}

/// `log(e + x)`.
fn log_factor(x: f64) -> f64 {
    (std::f64::consts::E + x).ln()
}

/// Slope of `ln y` against `x` over rows with finite positive `y`; `None`
/// with fewer than three such rows.
fn growth(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y > 0.0 && y.is_finite())
        .map(|(x, y)| (*x, y.ln()))
        .collect();
    (pts.len() >= 3).then(|| ols(&pts).slope)
}

/// Verdict from the per-σ ratio suprema and their growth rate.
fn bounded_verdict(report: &mut CriterionReport, sup_by_sigma: &[f64], x: &[f64], tol: f64) {
    report.sup_ratio = Some(sup_by_sigma.iter().copied().fold(0.0, f64::max));
    if sup_by_sigma.iter().any(|r| !r.is_finite()) {
        report.verdict = Verdict::Violated;
        report.note = "ratio is infinite on the table".into();
        return;
    }
    if sup_by_sigma.iter().all(|r| *r == 0.0) {
        report.trend = Some(0.0);
        report.verdict = Verdict::Consistent;
        report.note = "the measured quantity vanishes on the table".into();
        return;
    }
    match growth(x, sup_by_sigma) {
        Some(g) => {
            report.trend = Some(g);
            report.verdict = if g > tol {
                Verdict::Violated
            } else {
                Verdict::Consistent
            };
            report.note = format!("ratio growth rate {g:.4} against tolerance {tol}");
        }
        None => {
            report.verdict = Verdict::Inconclusive;
            report.note = "too few nonzero ratios to judge a trend".into();
        }
    }
}

fn check_samples(z: &[Point], sigmas: &[f64]) -> Result<()> {
    if z.is_empty() || sigmas.is_empty() {
        return Err(invalid("empty sample set"));
    }
    if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(invalid("σ samples must be positive"));
    }
    Ok(())
}

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid("T must be positive and finite"))
    }
}

/// Table of `(z, σ) ↦ (lhs, bound)` evaluated in parallel, in row-major order.
fn table<L, B>(z: &[Point], sigmas: &[f64], lhs: L, bound: B) -> Result<Vec<SampleRow>>
where
    L: Fn(&Point, f64) -> Result<QuadResult> + Sync,
    B: Fn(&Point, f64) -> f64 + Sync,
{
    let cells: Vec<(usize, usize)> = (0..sigmas.len())
        .flat_map(|j| (0..z.len()).map(move |i| (j, i)))
        .collect();
    cells
        .par_iter()
        .map(|&(j, i)| {
            let (zi, s) = (&z[i], sigmas[j]);
            let q = lhs(zi, s)?;
            let b = bound(zi, s);
            Ok(SampleRow {
                z: Some(*zi),
                sigma: s,
                lhs: q.value,
                bound: Some(b),
                ratio: Some(if q.value == 0.0 { 0.0 } else { q.value / b }),
                error: q.error_estimate,
            })
        })
        .collect()
}

/// Per-σ suprema of `f(row)` over the z samples, in σ order.
fn sup_per_sigma(rows: &[SampleRow], sigmas: &[f64], f: impl Fn(&SampleRow) -> f64) -> Vec<f64> {
    sigmas
        .iter()
        .map(|s| {
            rows.iter()
                .filter(|r| r.sigma == *s)
                .map(&f)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Attach a fit of `values` against σ when the samples allow one.
fn attach_fit(
    report: &mut CriterionReport,
    sigmas: &[f64],
    values: &[f64],
    log_horizon: Option<f64>,
) {
    let pts: Vec<(f64, f64)> = sigmas
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(s, v)| (*s, *v))
        .collect();
    report.fitted = match log_horizon {
        Some(t) => fit_log_power(&pts, t).ok(),
        None => fit_exponent(&pts).ok(),
    };
}

/// `min_{s ∈ [σ, √T)} (d + s) s^e` over the geometric ladder plus the
/// stationary point `s* = −e·d/(e + 1)` when it falls inside.
fn inf_power_bound(d: f64, sigma: f64, root_t: f64, e: f64) -> f64 {
    let g = |s: f64| (d + s) * s.powf(e);
    let mut best = geometric(sigma, root_t, S_LADDER_POINTS)
        .into_iter()
        .map(g)
        .fold(f64::INFINITY, f64::min);
    if e < 0.0 && e > -1.0 {
        let s_star = -e * d / (e + 1.0);
        if s_star > sigma && s_star < root_t {
            best = best.min(g(s_star));
        }
    }
    best
}

/// Ball-mass bound `μ(B_Ω(z, σ)) ≤ C inf_{s∈[σ,√T)} (d(z) + s) s^{N − 2/(p−1)}`.
///
/// The fitted exponent is that of `σ ↦ μ(B_Ω(z₀, σ))` at the first z sample;
/// its prediction is `N − 2/(p−1)`, plus one when `z₀` is on the boundary.
pub fn thm12_ball_bound(
    mu: &MeasureSpec,
    domain: &Domain,
    p: f64,
    horizon: f64,
    z: &[Point],
    sigmas: &[f64],
) -> Result<CriterionReport> {
    check_samples(z, sigmas)?;
    check_horizon(horizon)?;
    let n = domain.dim();
    if !(p > 1.0) {
        return Err(invalid("p must exceed 1"));
    }
    if (p - critical_exponent(n)).abs() < CRITICAL_EPS {
        return Err(invalid("p = p_N takes the logarithmic bound"));
    }
    let root_t = horizon.sqrt();
    let sig: Vec<f64> = sigmas.iter().copied().filter(|s| *s < root_t).collect();
    if sig.is_empty() {
        return Err(invalid("no σ sample below √T"));
    }
    let e = n as f64 - 2.0 / (p - 1.0);
    let rows = table(
        z,
        &sig,
        |zi, s| ball_mass(mu, domain, zi, s, &opts()),
        |zi, s| inf_power_bound(domain.distance(zi), s, root_t, e),
    )?;
    let params = ParamSet {
        p: Some(p),
        horizon: Some(horizon),
        ..Default::default()
    };
    let mut rep = CriterionReport::new("thm12_ball_bound", params, rows);
    let sups = sup_per_sigma(&rep.samples, &sig, |r| r.ratio.unwrap_or(0.0));
    let x: Vec<f64> = sig.iter().map(|s| -s.ln()).collect();
    bounded_verdict(&mut rep, &sups, &x, TREND_TOL);
    let at0: Vec<f64> = sig
        .iter()
        .map(|s| {
            rep.samples
                .iter()
                .find(|r| r.sigma == *s && r.z == Some(z[0]))
                .map_or(0.0, |r| r.lhs)
        })
        .collect();
    attach_fit(&mut rep, &sig, &at0, None);
    let boundary = domain.has_boundary() && domain.distance(&z[0]) == 0.0;
    rep.predicted = Some(e + if boundary { 1.0 } else { 0.0 });
    rep.note = format!("{}; inf over a {S_LADDER_POINTS}-point s-ladder", rep.note);
    Ok(rep)
}

/// Which logarithmic ball-mass bound to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogVariant {
    /// `p = p_N`: `(d(z) + σ) [log(e + min{d(z), √T}/σ)]^{−N/2}`.
    PnInterior,
    /// `p = p_{N+1}`, `z ∈ ∂Ω`: `[log(e + √T/σ)]^{−(N+1)/2}`.
    Pn1Boundary,
}

/// Logarithmic ball-mass bounds at the critical exponents. The fitted
/// exponent is the log power of `σ ↦ μ(B_Ω(z₀, σ))` against `log(e + √T/σ)`.
pub fn thm12_log_bounds(
    mu: &MeasureSpec,
    domain: &Domain,
    horizon: f64,
    variant: LogVariant,
    z: &[Point],
    sigmas: &[f64],
) -> Result<CriterionReport> {
    check_samples(z, sigmas)?;
    check_horizon(horizon)?;
    let nf = domain.dim() as f64;
    let root_t = horizon.sqrt();
    if variant == LogVariant::Pn1Boundary && z.iter().any(|zi| domain.distance(zi) != 0.0) {
        return Err(invalid("the boundary variant needs z on the boundary"));
    }
    let sig: Vec<f64> = sigmas.iter().copied().filter(|s| *s < root_t).collect();
    if sig.is_empty() {
        return Err(invalid("no σ sample below √T"));
    }
    let bound = |zi: &Point, s: f64| match variant {
        LogVariant::PnInterior => {
            let d = domain.distance(zi);
            (d + s) * log_factor(d.min(root_t) / s).powf(-0.5 * nf)
        }
        LogVariant::Pn1Boundary => log_factor(root_t / s).powf(-0.5 * (nf + 1.0)),
    };
    let rows = table(
        z,
        &sig,
        |zi, s| ball_mass(mu, domain, zi, s, &opts()),
        bound,
    )?;
    let (id, pred, p) = match variant {
        LogVariant::PnInterior => (
            "thm12_log_bounds/pn_interior",
            -0.5 * nf,
            critical_exponent(domain.dim()),
        ),
        LogVariant::Pn1Boundary => (
            "thm12_log_bounds/pn1_boundary",
            -0.5 * (nf + 1.0),
            critical_exponent(domain.dim() + 1),
        ),
    };
    let params = ParamSet {
        p: Some(p),
        horizon: Some(horizon),
        ..Default::default()
    };
    let mut rep = CriterionReport::new(id, params, rows);
    let sups = sup_per_sigma(&rep.samples, &sig, |r| r.ratio.unwrap_or(0.0));
    let x: Vec<f64> = sig.iter().map(|s| log_factor(root_t / s).ln()).collect();
    bounded_verdict(&mut rep, &sups, &x, LOG_TREND_TOL);
    let at0: Vec<f64> = sig
        .iter()
        .map(|s| {
            rep.samples
                .iter()
                .find(|r| r.sigma == *s && r.z == Some(z[0]))
                .map_or(0.0, |r| r.lhs)
        })
        .collect();
    attach_fit(&mut rep, &sig, &at0, Some(horizon));
    rep.predicted = Some(pred);
    Ok(rep)
}

/// Boundary mass of `μ` inside `window`; for `p ≥ 2` any positive boundary
/// mass rules out solvability.
pub fn boundary_mass_check(
    mu: &MeasureSpec,
    domain: &Domain,
    p: f64,
    window: &Window,
) -> Result<CriterionReport> {
    if !(p >= 2.0) {
        return Err(invalid("the boundary mass condition needs p ≥ 2"));
    }
    let q = mu.integrate_boundary(domain, window, |_| 1.0, &opts())?;
    let atoms = mu.sum_atoms(window, |y| if domain.is_boundary(y) { 1.0 } else { 0.0 });
    let mass = q.value + atoms;
    let sigma = match window {
        Window::Ball { radius, .. } => *radius,
        Window::Interval { a, b } => 0.5 * (b - a),
    };
    let row = SampleRow {
        z: match window {
            Window::Ball { center, .. } => Some(*center),
            Window::Interval { .. } => None,
        },
        sigma,
        lhs: mass,
        bound: Some(0.0),
        ratio: None,
        error: q.error_estimate,
    };
    let params = ParamSet {
        p: Some(p),
        ..Default::default()
    };
    let mut rep = CriterionReport::new("boundary_mass_check", params, vec![row]);
    rep.value = Some(mass);
    if mass > q.error_estimate {
        rep.verdict = Verdict::Violated;
        rep.note = format!("boundary mass {mass:e} > 0 with p = {p} ≥ 2");
    } else {
        rep.verdict = Verdict::Consistent;
        rep.note = "no boundary mass in the window".into();
    }
    Ok(rep)
}

/// `sup_z μ(B_Ω(z, 1))/(1 + d(z))`; finite and not growing as the z window
/// widens means the subcritical solvability condition holds.
pub fn cond_1_16(mu: &MeasureSpec, domain: &Domain, z: &[Point]) -> Result<CriterionReport> {
    if z.is_empty() {
        return Err(invalid("empty sample set"));
    }
    let rows = table(
        z,
        &[1.0],
        |zi, s| ball_mass(mu, domain, zi, s, &opts()),
        |zi, _| 1.0 + domain.distance(zi),
    )?;
    let mut rep = CriterionReport::new("cond_1_16", ParamSet::default(), rows);
    let ratios: Vec<f64> = rep.samples.iter().map(|r| r.ratio.unwrap_or(0.0)).collect();
    let sup = ratios.iter().copied().fold(0.0, f64::max);
    rep.value = Some(sup);
    rep.sup_ratio = Some(sup);
    if ratios.iter().any(|r| !r.is_finite()) {
        rep.verdict = Verdict::Violated;
        rep.note = "infinite ball mass".into();
        return Ok(rep);
    }
    // Running supremum over windows |z − z₀| ≤ R, fitted in the far field only so
    // that a bounded ratio still saturating near R = 1 is not mistaken for growth.
    let mut order: Vec<usize> = (0..z.len()).collect();
    let radius = |i: usize| z[i].dist(&z[0]);
    order.sort_by(|&a, &b| radius(a).total_cmp(&radius(b)));
    let mut running = 0.0f64;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &i in &order {
        running = running.max(ratios[i]);
        if radius(i) >= FAR_RADIUS {
            xs.push(radius(i).ln());
            ys.push(running);
        }
    }
    match growth(&xs, &ys) {
        Some(g) => {
            rep.trend = Some(g);
            rep.verdict = if g > TREND_TOL {
                Verdict::Violated
            } else {
                Verdict::Consistent
            };
            rep.note =
                format!("windowed supremum growth rate {g:.4} against tolerance {TREND_TOL}");
        }
        None => {
            rep.verdict = Verdict::Consistent;
            rep.note = "finite supremum; too few far samples for a trend".into();
        }
    }
    Ok(rep)
}

/// `∫_0^T s^{−N(p−1)/2} (sup_z ∫_{B_Ω(z,√s)} dμ/(d + √s))^{p−1} ds`.
///
/// The integral is taken on a geometric ladder down to `1e−8·T` with the
/// rest closed by the power fitted to the smallest eight samples. The
/// fitted exponent is that of the integrand in `s`; for data satisfying
/// the subcritical condition it is at least `−(N+1)(p−1)/2`.
pub fn sufficient_5_7(
    mu: &MeasureSpec,
    domain: &Domain,
    p: f64,
    horizon: f64,
    z: &[Point],
) -> Result<CriterionReport> {
    if !(p > 1.0) {
        return Err(invalid("p must exceed 1"));
    }
    check_horizon(horizon)?;
    if z.is_empty() {
        return Err(invalid("empty sample set"));
    }
    let nf = domain.dim() as f64;
    let s_ladder = geometric(1e-8 * horizon, horizon, SUFFICIENT_POINTS);
    let roots: Vec<f64> = s_ladder.iter().map(|s| s.sqrt()).collect();
    let rows = table(
        z,
        &roots,
        |zi, rs| weighted_ball_integral(mu, domain, zi, rs * rs, &opts()),
        |_, _| f64::NAN,
    )?;
    let sup_w = sup_per_sigma(&rows, &roots, |r| r.lhs);
    let q: Vec<f64> = s_ladder
        .iter()
        .zip(&sup_w)
        .map(|(s, w)| {
            if *w == 0.0 {
                0.0
            } else {
                s.powf(-0.5 * nf * (p - 1.0)) * w.powf(p - 1.0)
            }
        })
        .collect();
    let samples: Vec<SampleRow> = roots
        .iter()
        .zip(&q)
        .map(|(rs, v)| SampleRow {
            z: None,
            sigma: *rs,
            lhs: *v,
            bound: None,
            ratio: None,
            error: 0.0,
        })
        .collect();
    let params = ParamSet {
        p: Some(p),
        horizon: Some(horizon),
        ..Default::default()
    };
    let mut rep = CriterionReport::new("sufficient_5_7", params, samples);
    rep.predicted = Some(-0.5 * (nf + 1.0) * (p - 1.0));
    if q.iter().all(|v| *v == 0.0) {
        rep.value = Some(0.0);
        rep.verdict = Verdict::Consistent;
        rep.note = "zero measure".into();
        return Ok(rep);
    }
    let pairs: Vec<(f64, f64)> = s_ladder
        .iter()
        .copied()
        .zip(q.iter().copied())
        .filter(|(_, v)| *v > 0.0)
        .collect();
    rep.fitted = fit_exponent(&pairs).ok();
    // Trapezoid rule in ln s of q(s)·s.
    let mut total = 0.0;
    for k in 1..s_ladder.len() {
        let h = (s_ladder[k] / s_ladder[k - 1]).ln();
        total += 0.5 * h * (q[k] * s_ladder[k] + q[k - 1] * s_ladder[k - 1]);
    }
    let head = &pairs[..pairs.len().min(8)];
    let tail_fit = if head.len() >= 3 {
        Some(ols(&head
            .iter()
            .map(|(s, v)| (s.ln(), v.ln()))
            .collect::<Vec<_>>()))
    } else {
        None
    };
    match tail_fit {
        Some(f) if f.slope <= -1.0 + DIVERGENCE_SLACK => {
            rep.value = Some(f64::INFINITY);
            rep.trend = Some(f.slope);
            rep.verdict = Verdict::Inconclusive;
            rep.note = format!(
                "integrand behaves like s^{:.3} near 0 and the integral diverges: the sufficient condition fails",
                f.slope
            );
        }
        Some(f) => {
            let (s0, q0) = (s_ladder[0], q[0]);
            total += q0 * s0 / (f.slope + 1.0);
            rep.value = Some(total);
            rep.trend = Some(f.slope);
            rep.verdict = Verdict::Consistent;
            rep.note = format!(
                "finite integral; integrand ~ s^{:.3} near 0, value scales like T^{:.3}",
                f.slope,
                f.slope + 1.0
            );
        }
        None => {
            rep.value = Some(total);
            rep.verdict = Verdict::Consistent;
            rep.note = "integrand vanishes near s = 0".into();
        }
    }
    Ok(rep)
}

/// Density `f` of the interior part written as `f d dx`.
fn f_of_distance_form(mu: &MeasureSpec) -> impl Fn(f64, f64) -> f64 + Sync + '_ {
    let lebesgue = matches!(
        mu.interior.as_ref().map(|i| i.weight),
        Some(WeightMode::Lebesgue)
    );
    move |raw: f64, d: f64| {
        if lebesgue {
            if d > 0.0 {
                raw / d
            } else {
                f64::INFINITY
            }
        } else {
            raw
        }
    }
}

/// Power and log power of the density's singular point, scaled by `alpha`.
fn scaled_local(mu: &MeasureSpec, alpha: f64, log_shift: f64) -> Option<(f64, f64)> {
    mu.interior
        .as_ref()
        .and_then(|i| i.density.singular_points())
        .map(|(_, a, b)| (alpha * a, alpha * b - log_shift))
}

fn boundary_local(mu: &MeasureSpec, alpha: f64, log_shift: f64) -> Option<(f64, f64)> {
    mu.boundary
        .as_ref()
        .and_then(|h| h.singular_points())
        .map(|(_, a, b)| (alpha * a, alpha * b - log_shift))
}

/// Boundary points of a lattice (projections of the others included).
fn boundary_points(domain: &Domain, z: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for zi in z {
        if let Some(b) = domain.project_to_boundary(zi) {
            if !out.iter().any(|q| q.dist(&b) < 1e-15) {
                out.push(b);
            }
        }
    }
    out
}

/// Moment conditions `sup_z ∫_{B(z,σ)} d/(d+σ) f^α dy ≤ γ σ^{N − 2α/(p−1)}`
/// and `sup_{z∈∂Ω} ∫_{B(z,σ)∩∂Ω} h^α dS ≤ γ σ^{N−1−2α(2−p)/(p−1)}` for
/// `dμ = f d dx + h dS`. Returns the interior report and, when `μ` has a
/// boundary part, the boundary report.
pub fn prop52_moments(
    mu: &MeasureSpec,
    domain: &Domain,
    alpha: f64,
    p: f64,
    horizon: f64,
    z: &[Point],
    sigmas: &[f64],
) -> Result<Vec<CriterionReport>> {
    check_samples(z, sigmas)?;
    check_horizon(horizon)?;
    if !(alpha > 1.0) || !(p > 1.0) {
        return Err(invalid("need α > 1 and p > 1"));
    }
    if p >= 2.0 && mu.boundary.is_some() {
        return Err(invalid("a boundary density is only admissible for p < 2"));
    }
    let nf = domain.dim() as f64;
    let params = ParamSet {
        p: Some(p),
        horizon: Some(horizon),
        alpha: Some(alpha),
        ..Default::default()
    };
    let f_of = f_of_distance_form(mu);
    let local = scaled_local(mu, alpha, 0.0);
    let rows = table(
        z,
        sigmas,
        |zi, s| {
            mu.integrate_density(
                domain,
                &Window::ball(*zi, s),
                |_, raw, d| {
                    let f = f_of(raw, d);
                    if d == 0.0 {
                        0.0
                    } else {
                        d / (d + s) * f.powf(alpha)
                    }
                },
                local,
                &opts(),
            )
        },
        |_, s| s.powf(nf - 2.0 * alpha / (p - 1.0)),
    )?;
    let mut out = Vec::new();
    let mut rep = CriterionReport::new("prop52_moments/interior", params, rows);
    finish_moment(&mut rep, sigmas, nf - 2.0 * alpha / (p - 1.0));
    out.push(rep);
    if mu.boundary.is_some() {
        let zb = boundary_points(domain, z);
        if zb.is_empty() {
            return Err(invalid("no boundary points in the z samples"));
        }
        let local = boundary_local(mu, alpha, 0.0);
        let e = nf - 1.0 - 2.0 * alpha * (2.0 - p) / (p - 1.0);
        let rows = table(
            &zb,
            sigmas,
            |zi, s| {
                mu.integrate_boundary_density(
                    domain,
                    &Window::ball(*zi, s),
                    |_, h| h.powf(alpha),
                    local,
                    &opts(),
                )
            },
            |_, s| s.powf(e),
        )?;
        let mut rep = CriterionReport::new("prop52_moments/boundary", params, rows);
        finish_moment(&mut rep, sigmas, e);
        out.push(rep);
    }
    Ok(out)
}

fn finish_moment(rep: &mut CriterionReport, sigmas: &[f64], predicted: f64) {
    let sups = sup_per_sigma(&rep.samples, sigmas, |r| r.lhs);
    let ratios = sup_per_sigma(&rep.samples, sigmas, |r| r.ratio.unwrap_or(0.0));
    let x: Vec<f64> = sigmas.iter().map(|s| -s.ln()).collect();
    bounded_verdict(rep, &ratios, &x, TREND_TOL);
    attach_fit(rep, sigmas, &sups, None);
    rep.predicted = Some(predicted);
}

/// `Ψ(r) = r [log(e + r)]^β`.
pub fn orlicz_psi(r: f64, beta: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * log_factor(r).powf(beta)
    }
}

/// Orlicz condition at `p = p_{N+ℓ}`:
/// `sup_z ∫_{B(z,σ)} d^ℓ Ψ(T^{1/(p−1)} f) dy` against
/// `T^{(N+ℓ)/2} [log(e + √T/σ)]^{β − (N+ℓ)/2}`.
#[allow(clippy::too_many_arguments)]
pub fn prop53_orlicz(
    mu: &MeasureSpec,
    domain: &Domain,
    beta: f64,
    p: f64,
    ell: u8,
    horizon: f64,
    z: &[Point],
    sigmas: &[f64],
) -> Result<CriterionReport> {
    check_samples(z, sigmas)?;
    check_horizon(horizon)?;
    if ell > 1 || !(beta > 0.0) {
        return Err(invalid("need ℓ ∈ {0, 1} and β > 0"));
    }
    let n = domain.dim();
    if (p - critical_exponent(n + ell as usize)).abs() > CRITICAL_EPS {
        return Err(invalid(format!(
            "p must equal p_(N+ℓ) = {}",
            critical_exponent(n + ell as usize)
        )));
    }
    let k = (n + ell as usize) as f64;
    let root_t = horizon.sqrt();
    let scale = horizon.powf(1.0 / (p - 1.0));
    let f_of = f_of_distance_form(mu);
    let local = scaled_local(mu, 1.0, beta);
    let rows = table(
        z,
        sigmas,
        |zi, s| {
            mu.integrate_density(
                domain,
                &Window::ball(*zi, s),
                |_, raw, d| {
                    let w = if ell == 1 { d } else { 1.0 };
                    if w == 0.0 {
                        0.0
                    } else {
                        w * orlicz_psi(scale * f_of(raw, d), beta)
                    }
                },
                local,
                &opts(),
            )
        },
        |_, s| horizon.powf(0.5 * k) * log_factor(root_t / s).powf(beta - 0.5 * k),
    )?;
    let params = ParamSet {
        p: Some(p),
        horizon: Some(horizon),
        beta: Some(beta),
        ell: Some(ell),
        ..Default::default()
    };
    let mut rep = CriterionReport::new("prop53_orlicz", params, rows);
    finish_orlicz(&mut rep, sigmas, horizon, beta - 0.5 * k);
    Ok(rep)
}

fn finish_orlicz(rep: &mut CriterionReport, sigmas: &[f64], horizon: f64, predicted: f64) {
    let sups = sup_per_sigma(&rep.samples, sigmas, |r| r.lhs);
    let ratios = sup_per_sigma(&rep.samples, sigmas, |r| r.ratio.unwrap_or(0.0));
    let x: Vec<f64> = sigmas
        .iter()
        .map(|s| log_factor(horizon.sqrt() / s).ln())
        .collect();
    bounded_verdict(rep, &ratios, &x, LOG_TREND_TOL);
    attach_fit(rep, sigmas, &sups, Some(horizon));
    rep.predicted = Some(predicted);
}

/// Boundary Orlicz condition at `p = p_{N+1} < 2`:
/// `sup_{z∈∂Ω} ∫_{B(z,σ)∩∂Ω} Ψ(T^{1/(p−1)} h) dS` against
/// `T^{(N−1)/2} [log(e + √T/σ)]^{β − (N+1)/2}`.
pub fn prop54_orlicz_boundary(
    mu: &MeasureSpec,
    domain: &Domain,
    beta: f64,
    horizon: f64,
    z: &[Point],
    sigmas: &[f64],
) -> Result<CriterionReport> {
    check_samples(z, sigmas)?;
    check_horizon(horizon)?;
    let n = domain.dim();
    let p = critical_exponent(n + 1);
    if !(p < 2.0) {
        return Err(invalid("p_(N+1) < 2 needs N ≥ 2"));
    }
    if !(beta > 0.0) {
        return Err(invalid("β must be positive"));
    }
    let zb = boundary_points(domain, z);
    if zb.is_empty() {
        return Err(invalid("no boundary points in the z samples"));
    }
    let nf = n as f64;
    let root_t = horizon.sqrt();
    let scale = horizon.powf(1.0 / (p - 1.0));
    let local = boundary_local(mu, 1.0, beta);
    let rows = table(
        &zb,
        sigmas,
        |zi, s| {
            mu.integrate_boundary_density(
                domain,
                &Window::ball(*zi, s),
                |_, h| orlicz_psi(scale * h, beta),
                local,
                &opts(),
            )
        },
        |_, s| {
            horizon.powf(0.5 * (nf - 1.0)) * log_factor(root_t / s).powf(beta - 0.5 * (nf + 1.0))
        },
    )?;
    let params = ParamSet {
        p: Some(p),
        horizon: Some(horizon),
        beta: Some(beta),
        ..Default::default()
    };
    let mut rep = CriterionReport::new("prop54_orlicz_boundary", params, rows);
    finish_orlicz(&mut rep, sigmas, horizon, beta - 0.5 * (nf + 1.0));
    Ok(rep)
}

/// Where the boundary-strip functionals come from.
#[derive(Debug, Clone, Copy)]
pub enum StripSource<'a> {
    /// Evaluate against a measure directly.
    Measure(&'a MeasureSpec),
    /// Recover from a solution: pairings of `d·u(t)` on the given levels,
    /// extrapolated to `t = 0`.
    Solution {
        field: &'a GridFunction,
        levels: &'a [usize],
    },
}

/// `φ(y)/d(y)` for `φ = sin(πy/L)`, with its boundary limit `π/L`.
fn phi_over_d(l: f64, y: f64) -> f64 {
    let d = y.min(l - y);
    if d <= 0.0 {
        std::f64::consts::PI / l
    } else {
        (std::f64::consts::PI * y / l).sin() / d
    }
}

/// `∫_{Ω(ρ)} φ dy` for `φ = sin(πy/L)`.
fn strip_phi_integral(l: f64, rho: f64) -> f64 {
    let pi = std::f64::consts::PI;
    if rho >= 0.5 * l {
        2.0 * l / pi
    } else {
        2.0 * l / pi * (1.0 - (pi * rho / l).cos())
    }
}

/// `(∫_{2σ²}^T (∫_{Ω(√r)} φ)^{−(p−1)} dr)^{−1/(p−1)}`.
fn thm13_rhs(l: f64, p: f64, horizon: f64, sigma: f64) -> Result<f64> {
    let lo = 2.0 * sigma * sigma;
    // Substitute r = e^v to flatten the r^{−(p−1)} growth at the lower end.
    let q = integrate_1d(
        |v| {
            let r = v.exp();
            r * strip_phi_integral(l, r.sqrt()).powf(-(p - 1.0))
        },
        lo.ln(),
        horizon.ln(),
        &QuadOptions::new(1e-300, 1e-10),
        &[],
        &[],
    )?;
    Ok(q.value.powf(-1.0 / (p - 1.0)))
}

/// `∫_W g dν` for the strip source, with its error.
fn strip_functional<G: Fn(f64) -> f64 + Copy>(
    src: &StripSource<'_>,
    domain: &Domain,
    a: f64,
    b: f64,
    g: G,
) -> Result<(f64, f64)> {
    match src {
        StripSource::Measure(mu) => {
            let q = mu.integrate(
                domain,
                &Window::Interval { a, b },
                |y, _| g(y.get(0)),
                &opts(),
            )?;
            Ok((q.value, q.error_estimate))
        }
        StripSource::Solution { field, levels } => {
            let mut times = Vec::new();
            let mut vals = Vec::new();
            let mut errs = Vec::new();
            for &k in levels.iter() {
                let q = field_pairing(field, k, a, b, g)?;
                times.push(field.grid.times[k]);
                vals.push(q.value);
                errs.push(q.error_estimate);
            }
            let e = extrapolate_pairings(&times, &vals, &errs)?;
            Ok((e.limit, e.error))
        }
    }
}

/// Weighted strip bound on `Interval(L)` with `φ = sin(πx/L)`:
/// `∫_{Ω(σ)} φ/d dν ≤ C (∫_{2σ²}^T (∫_{Ω(√r)} φ)^{−(p−1)} dr)^{−1/(p−1)}`,
/// and for `p ≥ 2` the strip-mass rate `ν(B(0, L/2) ∩ Ω(σ))`, which is
/// `O(σ^{2(p−2)/(p−1)})` for `p > 2` and `O([log(e + √T/σ)]^{−1})` at `p = 2`.
/// Returns the inequality report and, for `p ≥ 2`, the rate report.
pub fn thm13_weighted(
    src: StripSource<'_>,
    domain: &Domain,
    p: f64,
    horizon: f64,
    sigmas: &[f64],
) -> Result<Vec<CriterionReport>> {
    let DomainKind::Interval { length: l } = domain.kind else {
        return Err(Error::UnsupportedDomain(
            "the weighted strip bound is implemented on an interval".into(),
        ));
    };
    check_horizon(horizon)?;
    if !(p > 1.0) {
        return Err(invalid("p must exceed 1"));
    }
    let sig: Vec<f64> = sigmas
        .iter()
        .copied()
        .filter(|s| *s > 0.0 && *s < (0.5 * horizon).sqrt() && *s < 0.5 * l)
        .collect();
    if sig.is_empty() {
        return Err(invalid("no σ sample in (0, min(√(T/2), L/2))"));
    }
    let mut rows = Vec::with_capacity(sig.len());
    let mut strip = Vec::with_capacity(sig.len());
    for &s in &sig {
        let (left, e1) = strip_functional(&src, domain, 0.0, s, |y| phi_over_d(l, y))?;
        let (right, e2) = strip_functional(&src, domain, l - s, l, |y| phi_over_d(l, y))?;
        let lhs = left + right;
        let rhs = thm13_rhs(l, p, horizon, s)?;
        rows.push(SampleRow {
            z: None,
            sigma: s,
            lhs,
            bound: Some(rhs),
            ratio: Some(lhs / rhs),
            error: e1 + e2,
        });
        let (m, em) = strip_functional(&src, domain, 0.0, s, |_| 1.0)?;
        strip.push(SampleRow {
            z: Some(Point::x1(0.0)),
            sigma: s,
            lhs: m,
            bound: None,
            ratio: None,
            error: em,
        });
    }
    let params = ParamSet {
        p: Some(p),
        horizon: Some(horizon),
        ..Default::default()
    };
    let mut rep = CriterionReport::new("thm13_weighted", params, rows);
    let ratios: Vec<f64> = rep
        .samples
        .iter()
        .map(|r| r.ratio.unwrap_or(0.0).max(0.0))
        .collect();
    let x: Vec<f64> = sig.iter().map(|s| -s.ln()).collect();
    bounded_verdict(&mut rep, &ratios, &x, TREND_TOL);
    rep.value = rep.sup_ratio;
    let mut out = vec![rep];
    if p >= 2.0 {
        let mut rate = CriterionReport::new("cor11_strip_rate", params, strip);
        let masses: Vec<f64> = rate.samples.iter().map(|r| r.lhs).collect();
        if p > 2.0 {
            attach_fit(&mut rate, &sig, &masses, None);
            rate.predicted = Some(2.0 * (p - 2.0) / (p - 1.0));
        } else {
            attach_fit(&mut rate, &sig, &masses, Some(horizon));
            rate.predicted = Some(-1.0);
        }
        let pred = rate.predicted.unwrap_or(0.0);
        match rate.fitted {
            _ if masses.iter().all(|m| *m <= 0.0) => {
                rate.verdict = Verdict::Consistent;
                rate.note = "no mass in the strips".into();
            }
            Some(f) => {
                // The rate is an upper bound: slower decay than predicted violates it.
                rate.verdict = if f.slope >= pred - RATE_TOL {
                    Verdict::Consistent
                } else {
                    Verdict::Violated
                };
                rate.note = format!(
                    "fitted {:.4} ± {:.4} against at least {pred:.4} − {RATE_TOL}",
                    f.slope, f.band
                );
            }
            None => {
                rate.verdict = Verdict::Inconclusive;
                rate.note = "too few positive strip masses for a fit".into();
            }
        }
        out.push(rate);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_family, Density, FamilyId, SingularFamily};

    #[test]
    fn exact_power_fits_exactly() {
        let s = geometric(1e-3, 1e-1, 8);
        let pts: Vec<(f64, f64)> = s.iter().map(|x| (*x, x * x)).collect();
        let f = fit_exponent(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-10);
        assert!(f.band < 1e-10);
    }

    #[test]
    fn noisy_power_fits_within_band() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let s = geometric(1e-3, 1e-1, 12);
        let pts: Vec<(f64, f64)> = s
            .iter()
            .map(|x| {
                (
                    *x,
                    x.powf(1.0 / 3.0) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)),
                )
            })
            .collect();
        let f = fit_exponent(&pts).unwrap();
        assert!((f.slope - 1.0 / 3.0).abs() < 0.02, "{f:?}");
    }

    #[test]
    fn constant_values_fit_zero_slope() {
        let s = geometric(1e-3, 1e-1, 6);
        let pts: Vec<(f64, f64)> = s.iter().map(|x| (*x, 4.0)).collect();
        assert!(fit_exponent(&pts).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn fit_preconditions() {
        let few: Vec<(f64, f64)> = geometric(1e-3, 1e-1, 4)
            .into_iter()
            .map(|x| (x, x))
            .collect();
        assert!(fit_exponent(&few).is_err());
        let narrow: Vec<(f64, f64)> = geometric(1e-2, 1e-1, 8)
            .into_iter()
            .map(|x| (x, x))
            .collect();
        assert!(fit_exponent(&narrow).is_err());
    }

    #[test]
    fn default_sweep_spans_the_stated_range() {
        let s = default_sigmas(1.0);
        assert_eq!(s.len(), 12);
        assert!((s[0] - 1e-3).abs() < 1e-18 && (s[11] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn infimum_catches_the_interior_minimum() {
        // (1 + s) s^{-1/2} is minimal at s = 1.
        let v = inf_power_bound(1.0, 0.01, 10.0, -0.5);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mu1_ball_bound_is_consistent() {
        let d = Domain::half_space(1);
        let mu = make_family(
            &SingularFamily::new(FamilyId::Mu1, Point::x1(1.0), 4.0, 1.0),
            &d,
        )
        .unwrap();
        let z = z_lattice(&mu, &d);
        let r = thm12_ball_bound(&mu, &d, 4.0, 1.0, &z, &default_sigmas(1.0)).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent, "{}", r.note);
        let f = r.fitted.unwrap();
        assert!((f.slope - 1.0 / 3.0).abs() < 0.05, "{f:?}");
    }

    #[test]
    fn interior_atom_violates_the_ball_bound() {
        let d = Domain::half_space(1);
        let mu = MeasureSpec::atom(Point::x1(1.0), 1.0);
        let z = z_lattice(&mu, &d);
        let r = thm12_ball_bound(&mu, &d, 4.0, 1.0, &z, &default_sigmas(1.0)).unwrap();
        assert_eq!(r.verdict, Verdict::Violated, "{}", r.note);
    }

    #[test]
    fn zero_measure_is_consistent_everywhere() {
        let d = Domain::half_space(1);
        let mu = MeasureSpec::zero();
        let z = z_lattice(&mu, &d);
        let r = thm12_ball_bound(&mu, &d, 4.0, 1.0, &z, &default_sigmas(1.0)).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
        assert_eq!(r.sup_ratio, Some(0.0));
        let b = boundary_mass_check(&mu, &d, 2.5, &Window::ball(Point::x1(0.0), 1.0)).unwrap();
        assert_eq!(b.verdict, Verdict::Consistent);
        let s = sufficient_5_7(&mu, &d, 1.5, 1.0, &z).unwrap();
        assert_eq!(s.value, Some(0.0));
    }

    #[test]
    fn critical_exponent_is_refused_by_the_power_bound() {
        let d = Domain::half_space(1);
        assert!(thm12_ball_bound(
            &MeasureSpec::zero(),
            &d,
            3.0,
            1.0,
            &[Point::x1(1.0)],
            &[0.1]
        )
        .is_err());
        assert!(thm12_ball_bound(&MeasureSpec::zero(), &d, 4.0, 1.0, &[], &[0.1]).is_err());
    }

    #[test]
    fn log_critical_mu1_ratio_is_bounded() {
        let d = Domain::half_space(1);
        let mu = make_family(
            &SingularFamily::new(FamilyId::Mu1, Point::x1(1.0), 3.0, 1.0),
            &d,
        )
        .unwrap();
        let z = z_lattice(&mu, &d);
        let s = geometric(1e-3, 1e-1, 10);
        let r = thm12_log_bounds(&mu, &d, 1.0, LogVariant::PnInterior, &z, &s).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent, "{}", r.note);
    }

    #[test]
    fn surface_measure_violates_boundary_mass_condition() {
        let d = Domain::half_space(2);
        let mu = MeasureSpec::boundary(Density::Constant { value: 1.0 })
            .with_support(Point::origin(2), 1.0);
        let r = boundary_mass_check(&mu, &d, 2.5, &Window::ball(Point::origin(2), 0.5)).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!((r.value.unwrap() - 1.0).abs() < 1e-8);
        let inner = MeasureSpec::atom(Point::new(&[0.0, 0.5]), 1.0);
        let r = boundary_mass_check(&inner, &d, 2.5, &Window::ball(Point::origin(2), 1.0)).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
    }

    #[test]
    fn subcritical_condition_on_uniform_and_growing_densities() {
        let d = Domain::half_space(1);
        let z = far_lattice(&d);
        let flat = MeasureSpec::interior(
            Density::Constant { value: 1.0 },
            WeightMode::DistanceWeighted,
        );
        let r = cond_1_16(&flat, &d, &z).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent, "{}", r.note);
        let grow =
            MeasureSpec::interior(Density::DistancePower { power: 2.0 }, WeightMode::Lebesgue);
        let r = cond_1_16(&grow, &d, &z).unwrap();
        assert_eq!(r.verdict, Verdict::Violated, "{}", r.note);
    }

    #[test]
    fn boundary_atom_fails_the_sufficient_condition_above_the_boundary_exponent() {
        let d = Domain::half_space(1);
        let mu = MeasureSpec::atom(Point::x1(0.0), 1.0);
        let z = vec![Point::x1(0.0), Point::x1(0.01)];
        let r = sufficient_5_7(&mu, &d, 3.0, 1.0, &z).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert_eq!(r.value, Some(f64::INFINITY));
        let slope = r.fitted.unwrap().slope;
        assert!((slope + 2.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn bounded_density_meets_the_sufficient_condition_below_the_boundary_exponent() {
        let d = Domain::half_space(1);
        let mu = MeasureSpec::interior(
            Density::Bump {
                center: Point::x1(0.5),
                radius: 0.5,
                height: 1.0,
            },
            WeightMode::Lebesgue,
        );
        let z = z_lattice(&mu, &d);
        let p = 1.5;
        let r = sufficient_5_7(&mu, &d, p, 1.0, &z).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent, "{}", r.note);
        assert!(r.value.unwrap().is_finite());
        assert!(r.fitted.unwrap().slope >= -(p - 1.0) - 0.05);
    }

    #[test]
    fn moment_exponent_for_mu1() {
        let d = Domain::half_space(1);
        let (p, alpha, t) = (4.0, 1.1, 0.01);
        let mu = make_family(
            &SingularFamily::new(FamilyId::Mu1, Point::x1(1.0), p, 1.0),
            &d,
        )
        .unwrap();
        let z = z_lattice(&mu, &d);
        let r = prop52_moments(&mu, &d, alpha, p, t, &z, &default_sigmas(t)).unwrap();
        let f = r[0].fitted.unwrap();
        assert!(f.agrees(1.0 - 2.0 * alpha / (p - 1.0), 0.05), "{f:?}");
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn moments_of_zero_data_vanish() {
        let d = Domain::half_space(1);
        let r = prop52_moments(
            &MeasureSpec::zero(),
            &d,
            1.5,
            4.0,
            1.0,
            &[Point::x1(1.0)],
            &default_sigmas(1.0),
        )
        .unwrap();
        assert!(r[0].samples.iter().all(|s| s.lhs == 0.0));
        assert!(prop52_moments(
            &MeasureSpec::zero(),
            &d,
            1.0,
            4.0,
            1.0,
            &[Point::x1(1.0)],
            &[0.1]
        )
        .is_err());
    }

    #[test]
    fn strip_bound_for_uniform_data() {
        let d = Domain::interval(1.0);
        let mu = MeasureSpec::interior(Density::Constant { value: 1.0 }, WeightMode::Lebesgue);
        let s = geometric(1e-3, 0.3, 8);
        let r = thm13_weighted(StripSource::Measure(&mu), &d, 3.0, 1.0, &s).unwrap();
        assert_eq!(r[0].verdict, Verdict::Consistent, "{}", r[0].note);
        let rate = r[1].fitted.unwrap();
        assert!(rate.agrees(1.0, 0.05), "{rate:?}");
    }

    #[test]
    fn strip_bound_refuses_other_domains() {
        let d = Domain::half_space(1);
        assert!(thm13_weighted(
            StripSource::Measure(&MeasureSpec::zero()),
            &d,
            3.0,
            1.0,
            &[0.1]
        )
        .is_err());
    }

    #[test]
    fn orlicz_psi_values() {
        assert_eq!(orlicz_psi(0.0, 1.0), 0.0);
        assert!((orlicz_psi(1.0, 1.0) - (std::f64::consts::E + 1.0).ln()).abs() < 1e-15);
    }
}
