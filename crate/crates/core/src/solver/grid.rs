//! Graded space-time grids and nodal fields on them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainKind, Point};
use crate::error::{invalid, Error, Result};
use crate::measure::MeasureSpec;

/// Resolution controls for [`SpaceTimeGrid::build`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    /// Largest spacing between nodes.
    pub h_max: f64,
    /// Spacing at anchors and at the boundary.
    pub h_min: f64,
    /// Growth of the spacing per unit distance from a refinement point.
    pub grading: f64,
    /// Ratio of consecutive time levels.
    pub time_ratio: f64,
    /// First level as a fraction of the horizon.
    pub t_min_factor: f64,
    /// Right end of the truncated half-line (or half-width on the whole line);
    /// derived from the measure when absent.
    pub extent: Option<f64>,
    /// Margin beyond the measure's support in units of `√T`.
    pub margin_widths: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            h_max: 0.05,
            h_min: 1e-4,
            grading: 0.1,
            time_ratio: 1.3,
            t_min_factor: 1e-4,
            extent: None,
            margin_widths: 8.0,
        }
    }
}

impl GridParams {
    /// The same grid with every spacing halved and twice as many time levels.
    pub fn refined(&self) -> Self {
        Self {
            h_max: 0.5 * self.h_max,
            h_min: 0.5 * self.h_min,
            grading: 0.5 * self.grading,
            time_ratio: self.time_ratio.sqrt(),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.h_min > 0.0
            && self.h_max >= self.h_min
            && self.grading > 0.0
            && self.grading < 1.0
            && self.time_ratio > 1.0
            && self.t_min_factor > 0.0
            && self.t_min_factor < 1.0
            && self.margin_widths > 0.0
            && self.extent.is_none_or(|e| e > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidResolution(format!(
                "grid parameters out of range: {self:?}"
            )))
        }
    }
}

/// Nodes `x_0 < … < x_n` of a one-dimensional domain and time levels
/// `0 < t_0 < … < t_M = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub domain: Domain,
    pub xs: Vec<f64>,
    pub times: Vec<f64>,
    pub horizon: f64,
}

impl SpaceTimeGrid {
    /// Grid graded toward the boundary and the anchors of `mu`.
    pub fn build(
        domain: &Domain,
        mu: &MeasureSpec,
        horizon: f64,
        params: &GridParams,
    ) -> Result<Self> {
        domain.validate()?;
        params.validate()?;
        if domain.dim() != 1 {
            return Err(Error::UnsupportedDomain(
                "the Picard solver is one-dimensional".into(),
            ));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon must be positive"));
        }
        let margin = params.margin_widths * horizon.sqrt();
        let support = mu.extent_1d();
        let (lo, hi, mut refine) = match domain.kind {
            DomainKind::Interval { length } => (0.0, length, vec![0.0, length]),
            DomainKind::HalfSpace { .. } => {
                let hi = match (params.extent, support) {
                    (Some(e), _) => e,
                    (None, Some((_, b))) => b.max(0.0) + margin,
                    (None, None) => {
                        return Err(invalid("unbounded measure needs an explicit grid extent"))
                    }
                };
                (0.0, hi, vec![0.0])
            }
            DomainKind::WholeSpace { .. } => match (params.extent, support) {
                (Some(e), _) => (-e, e, Vec::new()),
                (None, Some((a, b))) => (a - margin, b + margin, Vec::new()),
                (None, None) => {
                    return Err(invalid("unbounded measure needs an explicit grid extent"))
                }
            },
        };
        refine.extend(
            mu.anchors()
                .iter()
                .map(|a| a.get(0))
                .filter(|&a| a >= lo && a <= hi),
        );
        refine.sort_by(f64::total_cmp);
        refine.dedup();

        let mut keys: Vec<(f64, bool)> = refine.iter().map(|&r| (r, true)).collect();
        if keys.first().is_none_or(|k| k.0 > lo) {
            keys.insert(0, (lo, false));
        }
        if keys.last().is_none_or(|k| k.0 < hi) {
            keys.push((hi, false));
        }
        let mut xs = vec![keys[0].0];
        for w in keys.windows(2) {
            graded_segment(w[0], w[1], params, &mut xs);
        }
        let times = time_levels(horizon, params);
        Self::from_parts(domain, xs, times)
    }

    /// Grid from explicit nodes and levels.
    pub fn from_parts(domain: &Domain, xs: Vec<f64>, times: Vec<f64>) -> Result<Self> {
        if domain.dim() != 1 {
            return Err(Error::UnsupportedDomain(
                "the Picard solver is one-dimensional".into(),
            ));
        }
        if xs.len() < 3 || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidResolution(
                "nodes must be strictly increasing, at least 3".into(),
            ));
        }
        if xs.iter().any(|&x| !domain.contains(&Point::x1(x))) {
            return Err(Error::InvalidResolution(
                "nodes must lie in the closed domain".into(),
            ));
        }
        if times.len() < 2 || times[0] <= 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidResolution(
                "need at least 2 strictly increasing positive levels".into(),
            ));
        }
        let horizon = *times.last().expect("nonempty");
        Ok(Self {
            domain: *domain,
            xs,
            times,
            horizon,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.xs.len()
    }

    pub fn n_levels(&self) -> usize {
        self.times.len()
    }

    pub fn node(&self, i: usize) -> Point {
        Point::x1(self.xs[i])
    }

    pub fn distance(&self, i: usize) -> f64 {
        self.domain.distance(&self.node(i))
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.domain.is_boundary(&self.node(i))
    }

    /// Index of the level closest to `t`.
    pub fn nearest_level(&self, t: f64) -> usize {
        (0..self.times.len())
            .min_by(|&a, &b| {
                (self.times[a] - t)
                    .abs()
                    .total_cmp(&(self.times[b] - t).abs())
            })
            .expect("grid has levels")
    }
}

/// Nodes of `(a, b]` appended to `out`, graded toward refined ends.
fn graded_segment(a: (f64, bool), b: (f64, bool), params: &GridParams, out: &mut Vec<f64>) {
    let (xa, ra) = a;
    let (xb, rb) = b;
    let len = xb - xa;
    let spacing = |d: f64| (params.h_min + params.grading * d).min(params.h_max);
    // Distances from a refined end, strictly inside `(0, reach)`, with the
    // final gap no smaller than half the local spacing.
    let ladder = |reach: f64| {
        let mut d = 0.0;
        let mut v = Vec::new();
        loop {
            let next = d + spacing(d);
            if next > reach - 0.5 * spacing(next) {
                break;
            }
            v.push(next);
            d = next;
        }
        v
    };
    // Uniform points strictly between `l` and `r` at spacing at most `h`.
    let fill = |l: f64, r: f64, h: f64, pts: &mut Vec<f64>| {
        let k = ((r - l) / h).ceil() as usize;
        pts.extend((1..k).map(|m| l + (r - l) * m as f64 / k as f64));
    };
    match (ra, rb) {
        (true, true) => {
            let left = ladder(0.5 * len);
            let right = ladder(0.5 * len);
            let mut pts: Vec<f64> = left.iter().map(|d| xa + d).collect();
            let tail: Vec<f64> = right.iter().rev().map(|d| xb - d).collect();
            let (l, r) = (
                pts.last().copied().unwrap_or(xa),
                tail.first().copied().unwrap_or(xb),
            );
            fill(l, r, spacing(0.5 * len), &mut pts);
            out.extend(pts);
            out.extend(tail);
        }
        (true, false) => {
            let mut pts: Vec<f64> = ladder(len).iter().map(|d| xa + d).collect();
            let l = pts.last().copied().unwrap_or(xa);
            fill(l, xb, spacing(l - xa), &mut pts);
            out.extend(pts);
        }
        (false, true) => {
            let mut pts: Vec<f64> = Vec::new();
            let lad = ladder(len);
            let r = lad.last().map_or(xa, |d| xb - d);
            fill(xa, r, spacing(xb - r), &mut pts);
            out.extend(pts);
            out.extend(lad.iter().rev().map(|d| xb - d));
        }
        (false, false) => {
            let mut pts = Vec::new();
            fill(xa, xb, params.h_max, &mut pts);
            out.extend(pts);
        }
    }
    out.push(xb);
}

/// Geometric levels `T r^{-k}` down to `T·t_min_factor`, increasing.
fn time_levels(horizon: f64, params: &GridParams) -> Vec<f64> {
    let t_min = horizon * params.t_min_factor;
    let mut t = Vec::new();
    let mut k = 0i32;
    loop {
        let v = horizon * params.time_ratio.powi(-k);
        if v < t_min * (1.0 - 1e-12) && t.len() >= 2 {
            break;
        }
        t.push(v);
        k += 1;
    }
    t.reverse();
    t
}

/// Nonnegative nodal values `u(x_i, t_k)`, piecewise linear in space and time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Arc<SpaceTimeGrid>,
    /// Level-major: `values[k·n + i]`.
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Arc<SpaceTimeGrid>) -> Self {
        let len = grid.n_nodes() * grid.n_levels();
        Self {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn from_values(grid: Arc<SpaceTimeGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() * grid.n_levels() {
            return Err(invalid("value count does not match the grid"));
        }
        let f = Self { grid, values };
        f.validate()?;
        Ok(f)
    }

    /// All values finite and nonnegative; boundary nodes zero.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.n_nodes();
        for (idx, &v) in self.values.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "value {v} at node {} level {}",
                    idx % n,
                    idx / n
                )));
            }
            if v != 0.0 && self.grid.is_boundary_node(idx % n) {
                return Err(invalid(format!(
                    "nonzero boundary value at level {}",
                    idx / n
                )));
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.n_nodes() + i]
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let n = self.n_nodes();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.n_nodes();
        &mut self.values[k * n..(k + 1) * n]
    }

    /// Piecewise-linear value at `x` on level `k`; zero off the grid.
    pub fn eval(&self, k: usize, x: f64) -> f64 {
        interp(&self.grid.xs, self.level(k), x)
    }

    /// Value at `(x, t)`, linear in time between levels, for `t_0 ≤ t ≤ T`.
    pub fn eval_at(&self, x: f64, t: f64) -> Result<f64> {
        let times = &self.grid.times;
        if !(t >= times[0] && t <= self.grid.horizon) {
            return Err(invalid(format!(
                "time {t} outside [{}, {}]",
                times[0], self.grid.horizon
            )));
        }
        let k = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
        let th = (t - times[k - 1]) / (times[k] - times[k - 1]);
        Ok((1.0 - th) * self.eval(k - 1, x) + th * self.eval(k, x))
    }

    /// Largest value on the grid.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Largest value over nodes at distance more than `d_min` from the boundary.
    pub fn sup_interior(&self, d_min: f64) -> f64 {
        let n = self.n_nodes();
        let mask: Vec<bool> = (0..n).map(|i| self.grid.distance(i) > d_min).collect();
        self.values
            .iter()
            .enumerate()
            .filter(|(idx, _)| mask[idx % n])
            .map(|(_, &v)| v)
            .fold(0.0, f64::max)
    }

    /// `∫ d(x) u(x, t_k) dx` (plain `∫ u` on the whole line), Simpson per cell.
    pub fn weighted_l1(&self, k: usize) -> f64 {
        let xs = &self.grid.xs;
        let u = self.level(k);
        let w = |x: f64| {
            let d = self.grid.domain.distance(&Point::x1(x));
            if d.is_finite() {
                d
            } else {
                1.0
            }
        };
        (0..xs.len() - 1)
            .map(|i| {
                let (a, b) = (xs[i], xs[i + 1]);
                let m = 0.5 * (a + b);
                let um = 0.5 * (u[i] + u[i + 1]);
                (b - a) / 6.0 * (w(a) * u[i] + 4.0 * w(m) * um + w(b) * u[i + 1])
            })
            .sum()
    }
}

/// Piecewise-linear interpolation, zero outside the node range.
pub(crate) fn interp(xs: &[f64], v: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if !(x >= xs[0] && x <= xs[n - 1]) {
        return 0.0;
    }
    let j = xs.partition_point(|&s| s <= x).clamp(1, n - 1);
    let th = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    (1.0 - th) * v[j - 1] + th * v[j]
}

/// Local cubic Lagrange interpolation through the four nearest nodes,
/// zero outside the node range.
pub(crate) fn cubic_interp(xs: &[f64], v: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if !(x >= xs[0] && x <= xs[n - 1]) {
        return 0.0;
    }
    if n < 4 {
        return interp(xs, v, x);
    }
    let j = xs.partition_point(|&s| s <= x).clamp(1, n - 1);
    let start = (j as isize - 2).clamp(0, n as isize - 4) as usize;
    let idx = start..start + 4;
    let mut sum = 0.0;
    for a in idx.clone() {
        let mut w = 1.0;
        for b in idx.clone() {
            if a != b {
                w *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        sum += w * v[a];
    }
    sum
}
