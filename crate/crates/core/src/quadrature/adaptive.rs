//! Globally adaptive one-dimensional integration with breakpoints and
//! geometric grading toward singular points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::rule::gk15;
use super::{QuadOptions, QuadResult};
use crate::error::{Error, Result};

/// Grading ratio toward a singular point.
const GRADE_RATIO: f64 = 0.25;
/// Number of graded pieces before the innermost exponential map.
const GRADE_LEVELS: usize = 8;

/// An integrable singularity of a one-dimensional integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPoint {
    pub at: f64,
    /// Power `b` of a `[log(e + 1/r)]^{-b}` factor, for integrands that
    /// behave like `r^{-1}` times that factor (log-critical tails).
    pub log_power: f64,
    /// Distance below which the integrand is not sampled; the gap is
    /// closed by extrapolation.
    pub floor: f64,
    /// Known power `a` in `f ≈ r^a`, when the caller has it; otherwise the
    /// power is fitted from samples.
    pub exponent: Option<f64>,
}

impl SingularPoint {
    pub fn new(at: f64) -> Self {
        Self {
            at,
            log_power: 0.0,
            floor: resolution_floor(at),
            exponent: None,
        }
    }

    pub fn with_exponent(mut self, a: Option<f64>) -> Self {
        self.exponent = a;
        self
    }

    pub fn with_log_power(mut self, b: f64) -> Self {
        self.log_power = b;
        self
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor.max(resolution_floor(self.at));
        self
    }
}

impl From<f64> for SingularPoint {
    fn from(at: f64) -> Self {
        Self::new(at)
    }
}

/// Distance to a singular point below which `x − s` loses accuracy.
pub fn resolution_floor(s: f64) -> f64 {
    // Squares of distances must stay representable.
    (1_073_741_824.0 * f64::EPSILON * s.abs()).max(1e-150)
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Linear,
    /// `x = s + dir·δ·exp(−u)`, `u ∈ [0, ln(δ/floor)]`.
    Exp {
        s: f64,
        dir: f64,
        delta: f64,
    },
}

impl Map {
    fn eval<F: FnMut(f64) -> f64>(&self, f: &mut F, v: f64) -> f64 {
        match *self {
            Map::Linear => f(v),
            Map::Exp { s, dir, delta } => {
                let r = delta * (-v).exp();
                let fx = f(s + dir * r);
                if fx == 0.0 {
                    0.0
                } else {
                    fx * r
                }
            }
        }
    }
}

/// Extrapolated `∫ f` over the unsampled gap between `s` and `s + dir·rc`.
///
/// The local exponent is fitted from three samples; a fit at `r^{-1}` with
/// a logarithmic factor uses the exact log-critical antiderivative.
fn gap_tail<F: FnMut(f64) -> f64>(f: &mut F, sp: &SingularPoint, dir: f64) -> (f64, f64) {
    let (s, rc) = (sp.at, sp.floor);
    // Relative accuracy of `x − s` at the floor.
    let fuzz = 2.0 * f64::EPSILON * s.abs() / rc;
    let f1 = f(s + dir * rc);
    if f1 == 0.0 {
        return (0.0, 0.0);
    }
    if !f1.is_finite() {
        return (0.0, f64::INFINITY);
    }
    let f2 = f(s + dir * 2.0 * rc);
    let f4 = f(s + dir * 4.0 * rc);
    let log_l = |r: f64| (std::f64::consts::E + 1.0 / r).ln();
    let f8 = f(s + dir * 8.0 * rc);
    if sp.log_power > 1.0 {
        let b = sp.log_power;
        let l = log_l(rc);
        // Model f ≈ C r^{-1} L^{-b} (1 + c r), fitted at rc and 4·rc and
        // checked at 8·rc; ∫_0^rc ≈ C [L^{1−b}/(b−1) + (e + c)·rc·L^{−b}].
        let k = |fr: f64, r: f64| fr * r * log_l(r).powf(b);
        let (k1, k4, k8) = (k(f1, rc), k(f4, 4.0 * rc), k(f8, 8.0 * rc));
        let ratio = k4 / k1;
        let x = (ratio - 1.0) / (4.0 - ratio);
        let c = k1 / (1.0 + x);
        let misfit = (c * (1.0 + 8.0 * x) / k8 - 1.0).abs();
        if misfit < 0.01 && x.abs() < 0.01 {
            let value = c
                * (l.powf(1.0 - b) / (b - 1.0) + (std::f64::consts::E + x / rc) * rc * l.powf(-b));
            let model = if misfit > 64.0 * fuzz { misfit } else { 0.0 };
            return (value, (model + x * x + fuzz) * value.abs());
        }
    }
    if let Some(a) = sp.exponent.filter(|a| *a > -1.0 && sp.log_power == 0.0) {
        // Known power: only the smooth factor A(1 + c r) is fitted, from rc
        // and 2·rc, and checked at 4·rc.
        let (k1, k2, k4) = (f1, f2 * 2f64.powf(-a), f4 * 4f64.powf(-a));
        let rho = k2 / k1;
        let x = (rho - 1.0) / (2.0 - rho);
        let amp = k1 / (1.0 + x);
        if x.is_finite() && amp.is_finite() {
            let value = amp * rc * (1.0 / (a + 1.0) + x / (a + 2.0));
            let misfit = (amp * (1.0 + 4.0 * x) / k4 - 1.0).abs();
            let misfit = if misfit.is_finite() {
                misfit
            } else {
                f64::INFINITY
            };
            let model = if misfit > 64.0 * fuzz { misfit } else { 0.0 };
            return (value, (model + fuzz) * value.abs());
        }
    }
    // Model f ≈ A r^a (1 + c r): the correction x = c·rc follows from
    // q2²/q4 and the model is checked against a fourth sample at 8·rc.
    let (q2, q4) = (f2 / f1, f4 / f1);
    let rho = q2 * q2 / q4;
    let (qa, qb, qc) = (4.0 * (1.0 - rho), 4.0 - 5.0 * rho, 1.0 - rho);
    let disc = qb * qb - 4.0 * qa * qc;
    let x = if qc == 0.0 {
        0.0
    } else if disc >= 0.0 && qb != 0.0 {
        -2.0 * qc / (qb + qb.signum() * disc.sqrt())
    } else {
        f64::NAN
    };
    let a = (q2 * (1.0 + x) / (1.0 + 2.0 * x)).log2();
    if !(a > -1.0) || !x.is_finite() || !a.is_finite() {
        return (0.0, f64::INFINITY);
    }
    let amp = f1 / (1.0 + x);
    let value = amp * rc * (1.0 / (a + 1.0) + x / (a + 2.0));
    let predicted = amp * 8f64.powf(a) * (1.0 + 8.0 * x);
    let misfit = (predicted / f8 - 1.0).abs();
    let misfit = if misfit.is_finite() {
        misfit
    } else {
        f64::INFINITY
    };
    // Drop the noise floor of the three-point fit from the misfit.
    let noise = 64.0 * fuzz;
    let model = if misfit > noise { misfit } else { 0.0 };
    (value, (model + fuzz) * value.abs())
}

struct Piece {
    lo: f64,
    hi: f64,
    map: Map,
    value: f64,
    error: f64,
    seq: usize,
}

#[derive(PartialEq)]
struct Key {
    error: f64,
    seq: usize,
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Integrate `f` over `[a, b]`.
///
/// `breakpoints` mark kinks or jumps; `singular` mark integrable singularities,
/// which may lie inside or just outside the interval.
pub fn integrate_1d<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
    breakpoints: &[f64],
    singular: &[SingularPoint],
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult::zero());
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(crate::error::invalid("integration bounds must be finite"));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = vec![lo, hi];
    cuts.extend(
        breakpoints
            .iter()
            .copied()
            .chain(singular.iter().map(|s| s.at))
            .filter(|&x| x > lo && x < hi),
    );
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut pieces: Vec<(f64, f64, Map)> = Vec::new();
    let mut tails: Vec<(SingularPoint, f64)> = Vec::new();
    for w in cuts.windows(2) {
        grade_segment(w[0], w[1], singular, &mut pieces, &mut tails);
    }
    let mut tail_value = 0.0;
    let mut tail_error = 0.0;
    let mut evals = 0usize;
    for (sp, dir) in tails {
        let (tv, te) = gap_tail(&mut f, &sp, dir);
        evals += 4;
        tail_value += tv;
        tail_error += te;
    }

    let mut store: Vec<Piece> = Vec::with_capacity(pieces.len() * 4);
    let mut heap = BinaryHeap::new();
    for (l, r, map) in pieces {
        let p = gk15(&mut |v| map.eval(&mut f, v), l, r);
        evals += 15;
        let seq = store.len();
        heap.push(Key {
            error: p.error,
            seq,
        });
        store.push(Piece {
            lo: l,
            hi: r,
            map,
            value: p.value,
            error: p.error,
            seq,
        });
    }

    // Retired pieces carry `seq == usize::MAX`.
    let totals = |store: &[Piece]| {
        store
            .iter()
            .filter(|p| p.seq != usize::MAX)
            .fold((tail_value, tail_error), |(v, e), p| {
                (v + p.value, e + p.error)
            })
    };

    let (mut value, mut error) = totals(&store);
    while error > opts.tol.target(value) && evals < opts.max_evals {
        let Some(key) = heap.pop() else { break };
        let (l, r, map) = {
            let p = &store[key.seq];
            (p.lo, p.hi, p.map)
        };
        let m = 0.5 * (l + r);
        if !(m > l && m < r) || (r - l) <= 4.0 * f64::EPSILON * l.abs().max(r.abs()) {
            // Too narrow to split; leave it in the totals as is.
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let p1 = gk15(&mut |v| map.eval(&mut f, v), l, m);
        let p2 = gk15(&mut |v| map.eval(&mut f, v), m, r);
        evals += 30;
        value += p1.value + p2.value - store[key.seq].value;
        error += p1.error + p2.error - store[key.seq].error;
        store[key.seq].seq = usize::MAX;
        for (pl, pr, pan) in [(l, m, p1), (m, r, p2)] {
            let seq = store.len();
            heap.push(Key {
                error: pan.error,
                seq,
            });
            store.push(Piece {
                lo: pl,
                hi: pr,
                map,
                value: pan.value,
                error: pan.error,
                seq,
            });
        }
        // Periodic resummation keeps the running totals free of drift.
        if store.len().is_multiple_of(256) {
            (value, error) = totals(&store);
        }
    }
    (value, error) = totals(&store);

    let result = QuadResult {
        value: sign * value,
        error_estimate: error,
        evaluations: evals,
    };
    if error <= opts.tol.target(value) && value.is_finite() {
        Ok(result)
    } else {
        Err(Error::Quadrature { partial: result })
    }
}

/// Split `[l, r]` geometrically toward singular points at or beyond its ends.
fn grade_segment(
    l: f64,
    r: f64,
    singular: &[SingularPoint],
    out: &mut Vec<(f64, f64, Map)>,
    tails: &mut Vec<(SingularPoint, f64)>,
) {
    let w = r - l;
    let nearest = |pred: &dyn Fn(f64) -> bool, dist: &dyn Fn(f64) -> f64| {
        singular
            .iter()
            .filter(|s| pred(s.at))
            .min_by(|a, b| dist(a.at).total_cmp(&dist(b.at)))
            .map(|s| (*s, dist(s.at)))
            .filter(|(_, d)| *d < w)
    };
    let left = nearest(&|s| s <= l, &|s| l - s);
    let right = nearest(&|s| s >= r, &|s| s - r);
    match (left, right) {
        (None, None) => out.push((l, r, Map::Linear)),
        (Some((sl, gl)), Some((sr, gr))) => {
            let m = 0.5 * (l + r);
            grade_toward(l, m, sl, gl, 1.0, out, tails);
            grade_toward(m, r, sr, gr, -1.0, out, tails);
        }
        (Some((s, g)), None) => grade_toward(l, r, s, g, 1.0, out, tails),
        (None, Some((s, g))) => grade_toward(l, r, s, g, -1.0, out, tails),
    }
}

/// Pieces of `[l, r]` graded toward the end selected by `dir` (+1: left end),
/// where the singular point sits at distance `gap` beyond that end.
fn grade_toward(
    l: f64,
    r: f64,
    sp: SingularPoint,
    gap: f64,
    dir: f64,
    out: &mut Vec<(f64, f64, Map)>,
    tails: &mut Vec<(SingularPoint, f64)>,
) {
    let w = r - l;
    let anchor = if dir > 0.0 { l } else { r };
    let mut outer = w;
    let mut level = 0;
    loop {
        let inner = outer * GRADE_RATIO;
        let stop = if gap > 0.0 {
            inner < 0.25 * gap
        } else {
            level >= GRADE_LEVELS || inner <= sp.floor
        };
        if stop || level > 200 {
            break;
        }
        let (a, b) = if dir > 0.0 {
            (anchor + inner, anchor + outer)
        } else {
            (anchor - outer, anchor - inner)
        };
        out.push((a, b, Map::Linear));
        outer = inner;
        level += 1;
    }
    if gap == 0.0 && outer > sp.floor {
        out.push((
            0.0,
            (outer / sp.floor).ln(),
            Map::Exp {
                s: anchor,
                dir,
                delta: outer,
            },
        ));
        tails.push((sp, dir));
    } else if gap == 0.0 {
        out.push(if dir > 0.0 {
            (anchor, anchor + outer, Map::Linear)
        } else {
            (anchor - outer, anchor, Map::Linear)
        });
    } else {
        let (a, b) = if dir > 0.0 {
            (anchor, anchor + outer)
        } else {
            (anchor - outer, anchor)
        };
        out.push((a, b, Map::Linear));
    }
}
