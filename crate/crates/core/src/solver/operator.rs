//! The discrete Duhamel operator on a one-dimensional grid.
//!
//! Fields are piecewise linear in space (hat functions on the nodes) and in
//! time (between levels). Integrals of the Dirichlet heat kernel against hat
//! functions, and their time integrals with weights `(τ/Δ)^m`, have closed
//! forms in `erf`, `exp` and incomplete gamma functions, so the kernel itself
//! is never interpolated. With `D(t) = ∫_0^t e^{(t−s)Δ} F(s) ds` the levels obey
//!
//! `D_k = W(Δ_k) D_{k−1} + L₁(Δ_k) F_{k−1} + (L₀ − L₁)(Δ_k) F_k`,
//!
//! where `W(Δ)` is the heat propagator over `Δ` and
//! `L_m(Δ) = ∫_0^Δ (τ/Δ)^m W(τ) dτ`. On `(0, t_0]` the source is held at `F_0`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use super::grid::SpaceTimeGrid;
use crate::domain::{Domain, DomainKind};
use crate::special::{erfc, half_erf_diff, scaled_gamma_neg_half};

/// Gaussian tails below this relative size are dropped from the rows.
const TRUNCATION: f64 = 1e-15;

/// Compressed sparse rows with nonnegative entries.
#[derive(Debug, Clone, Default)]
pub struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// `y += A x`.
    pub fn mul_add(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = 0.0;
            for k in a..b {
                s += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi += s;
        });
    }

    /// Entry `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b]
            .binary_search(&(j as u32))
            .map_or(0.0, |k| self.vals[a + k])
    }
}

/// Image centres and signs of the Dirichlet kernel at `x`.
fn images(domain: &Domain, x: f64, radius: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let near = |c: f64| c + radius >= lo && c - radius <= hi;
    match domain.kind {
        DomainKind::WholeSpace { .. } => vec![(x, 1.0)],
        DomainKind::HalfSpace { .. } => vec![(x, 1.0), (-x, -1.0)],
        DomainKind::Interval { length } => {
            let k_max = (radius / (2.0 * length)).ceil() as i64 + 1;
            let mut v = Vec::new();
            for k in -k_max..=k_max {
                let shift = 2.0 * k as f64 * length;
                for (c, s) in [(x + shift, 1.0), (-x + shift, -1.0)] {
                    if near(c) {
                        v.push((c, s));
                    }
                }
            }
            v
        }
    }
}

/// Weights of the two hat functions of a cell `[u0, u1]` (offsets from the
/// Gaussian centre) given `I0 = ∫ ω` and `I1 = ∫ u ω` over the cell.
#[inline]
fn hat_weights(u0: f64, u1: f64, i0: f64, i1: f64) -> (f64, f64) {
    let h = u1 - u0;
    ((u1 * i0 - i1) / h, (i1 - u0 * i0) / h)
}

/// Per-node quantities for the propagator `W(Δ)`.
struct PropagatorNode {
    u: f64,
    z: f64,
    g: f64,
}

fn propagator_node(u: f64, delta: f64) -> PropagatorNode {
    let z = u / (2.0 * delta.sqrt());
    PropagatorNode {
        u,
        z,
        g: (-z * z).exp() / (4.0 * PI * delta).sqrt(),
    }
}

fn propagator_cell(a: &PropagatorNode, b: &PropagatorNode, delta: f64) -> (f64, f64) {
    let i0 = half_erf_diff(a.z, b.z);
    let i1 = 2.0 * delta * (a.g - b.g);
    hat_weights(a.u, b.u, i0, i1)
}

/// Time-integrated quantities at one offset `u`, for `m = 0, 1`:
/// `E_m = ∫_0^Δ τ^m erfc(|u|/2√τ) dτ` and `H_m = ∫_0^Δ τ^{m+1} g(u, τ) dτ`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TimeNode {
    pub u: f64,
    pub e: [f64; 2],
    pub h: [f64; 2],
}

pub(crate) fn time_node(u: f64, delta: f64) -> TimeNode {
    let x = u * u / (4.0 * delta);
    let phi = scaled_gamma_neg_half(x);
    let ec = erfc(x.sqrt());
    let sx = (x / PI).sqrt();
    let e0 = delta * (ec - sx * phi[0]);
    let e1 = 0.5 * delta * delta * (ec - sx * phi[1]);
    let c = (4.0 * PI).sqrt().recip();
    let h0 = c * delta.powf(1.5) * phi[1];
    let h1 = c * delta.powf(2.5) * phi[2];
    TimeNode {
        u,
        e: [e0.max(0.0), e1.max(0.0)],
        h: [h0, h1],
    }
}

/// `∫_0^Δ τ^m ½[erf(u1/2√τ) − erf(u0/2√τ)] dτ` without cancellation.
#[inline]
fn erf_time_diff(a: &TimeNode, b: &TimeNode, m: usize, delta: f64) -> f64 {
    let full = delta.powi(m as i32 + 1) / (m as f64 + 1.0);
    if a.u >= 0.0 {
        0.5 * (a.e[m] - b.e[m])
    } else if b.u <= 0.0 {
        0.5 * (b.e[m] - a.e[m])
    } else {
        full - 0.5 * (a.e[m] + b.e[m])
    }
}

/// Hat weights of `L₁` and `L₀ − L₁` for one cell.
fn time_cell(a: &TimeNode, b: &TimeNode, delta: f64) -> [(f64, f64); 2] {
    let i0_0 = erf_time_diff(a, b, 0, delta);
    let i0_1 = erf_time_diff(a, b, 1, delta) / delta;
    let i1_0 = 2.0 * (a.h[0] - b.h[0]);
    let i1_1 = 2.0 * (a.h[1] - b.h[1]) / delta;
    [
        hat_weights(a.u, b.u, i0_1, i1_1),
        hat_weights(a.u, b.u, i0_0 - i0_1, i1_0 - i1_1),
    ]
}

/// Sparse rows for one level: the propagator over `delta` or the pair
/// `(L₁, L₀ − L₁)`.
enum RowKind {
    Propagator,
    TimeIntegrals,
}

fn build_rows(grid: &SpaceTimeGrid, delta: f64, kind: RowKind) -> Vec<Csr> {
    let xs = &grid.xs;
    let n = xs.len();
    let (lo, hi) = (xs[0], xs[n - 1]);
    let radius = Domain::gaussian_radius(delta, TRUNCATION);
    let outputs = match kind {
        RowKind::Propagator => 1,
        RowKind::TimeIntegrals => 2,
    };
    let rows: Vec<Vec<Vec<(u32, f64)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if grid.is_boundary_node(i) {
                return vec![Vec::new(); outputs];
            }
            let mut acc: Vec<Vec<f64>> = vec![Vec::new(); outputs];
            let mut first = usize::MAX;
            let mut last = 0usize;
            let imgs = images(&grid.domain, xs[i], radius, lo, hi);
            for &(c, _) in &imgs {
                let j0 = xs.partition_point(|&y| y < c - radius).saturating_sub(1);
                let j1 = (xs.partition_point(|&y| y <= c + radius) + 1).min(n);
                if j1 > j0 {
                    first = first.min(j0);
                    last = last.max(j1);
                }
            }
            if first >= last {
                return vec![Vec::new(); outputs];
            }
            for a in acc.iter_mut() {
                a.resize(last - first, 0.0);
            }
            for &(c, sign) in &imgs {
                let j0 = xs.partition_point(|&y| y < c - radius).saturating_sub(1);
                let j1 = (xs.partition_point(|&y| y <= c + radius) + 1).min(n);
                if j1 <= j0 + 1 {
                    continue;
                }
                match kind {
                    RowKind::Propagator => {
                        let nodes: Vec<PropagatorNode> = (j0..j1)
                            .map(|j| propagator_node(xs[j] - c, delta))
                            .collect();
                        for (k, w) in nodes.windows(2).enumerate() {
                            let (wa, wb) = propagator_cell(&w[0], &w[1], delta);
                            let j = j0 + k - first;
                            acc[0][j] += sign * wa;
                            acc[0][j + 1] += sign * wb;
                        }
                    }
                    RowKind::TimeIntegrals => {
                        let nodes: Vec<TimeNode> =
                            (j0..j1).map(|j| time_node(xs[j] - c, delta)).collect();
                        for (k, w) in nodes.windows(2).enumerate() {
                            let pair = time_cell(&w[0], &w[1], delta);
                            let j = j0 + k - first;
                            for (o, (wa, wb)) in pair.into_iter().enumerate() {
                                acc[o][j] += sign * wa;
                                acc[o][j + 1] += sign * wb;
                            }
                        }
                    }
                }
            }
            acc.into_iter()
                .map(|row| {
                    row.into_iter()
                        .enumerate()
                        .filter(|&(j, v)| v > 0.0 && !grid.is_boundary_node(first + j))
                        .map(|(j, v)| ((first + j) as u32, v))
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut per_output: Vec<Vec<Vec<(u32, f64)>>> = vec![Vec::with_capacity(n); outputs];
    for r in rows {
        for (o, row) in r.into_iter().enumerate() {
            per_output[o].push(row);
        }
    }
    per_output.into_iter().map(Csr::from_rows).collect()
}

/// Heat propagator `W(Δ)` on the grid's hat functions.
pub fn propagator(grid: &SpaceTimeGrid, delta: f64) -> Csr {
    build_rows(grid, delta, RowKind::Propagator)
        .pop()
        .expect("one output")
}

/// `(L₁(Δ), L₀(Δ) − L₁(Δ))` on the grid's hat functions.
pub fn time_integrals(grid: &SpaceTimeGrid, delta: f64) -> (Csr, Csr) {
    let mut v = build_rows(grid, delta, RowKind::TimeIntegrals);
    let l0m1 = v.pop().expect("two outputs");
    let l1 = v.pop().expect("two outputs");
    (l1, l0m1)
}

#[derive(Debug, Clone)]
struct Level {
    /// Propagator from the previous level (absent on the first).
    w: Option<Csr>,
    /// Weight on `F_{k−1}` (absent on the first).
    prev: Option<Csr>,
    /// Weight on `F_k`.
    curr: Csr,
}

/// Precomputed level matrices of the Duhamel recursion for one grid.
#[derive(Debug, Clone)]
pub struct DuhamelOperator {
    pub grid: Arc<SpaceTimeGrid>,
    levels: Vec<Level>,
}

impl DuhamelOperator {
    pub fn new(grid: Arc<SpaceTimeGrid>) -> Self {
        let times = &grid.times;
        let mut levels = Vec::with_capacity(times.len());
        // On (0, t_0] the source is held at F_0, so the weight is L₀ = L₁ + (L₀ − L₁).
        let (l1, l0m1) = time_integrals(&grid, times[0]);
        levels.push(Level {
            w: None,
            prev: None,
            curr: add(&l1, &l0m1),
        });
        for k in 1..times.len() {
            let delta = times[k] - times[k - 1];
            let (l1, l0m1) = time_integrals(&grid, delta);
            levels.push(Level {
                w: Some(propagator(&grid, delta)),
                prev: Some(l1),
                curr: l0m1,
            });
        }
        Self { grid, levels }
    }

    pub fn nnz(&self) -> usize {
        self.levels
            .iter()
            .map(|l| {
                l.curr.nnz()
                    + l.w.as_ref().map_or(0, Csr::nnz)
                    + l.prev.as_ref().map_or(0, Csr::nnz)
            })
            .sum()
    }

    /// `D(x_i, t_k) = ∫_{t_s}^{t_k} ∫ G(x_i, y, t_k − s) F(y, s) dy ds` for all
    /// levels, where `F` is level-major nodal data and the lower limit is 0
    /// (`start = None`) or level `start`.
    pub fn apply(&self, f: &[f64], start: Option<usize>) -> Vec<f64> {
        let n = self.grid.n_nodes();
        let m = self.grid.n_levels();
        assert_eq!(f.len(), n * m, "source has the wrong shape");
        let mut d = vec![0.0; n * m];
        let first = start.map_or(0, |s| s + 1);
        if start.is_none() {
            self.levels[0].curr.mul_add(&f[..n], &mut d[..n]);
        }
        for k in first.max(1)..m {
            let (before, rest) = d.split_at_mut(k * n);
            let cur = &mut rest[..n];
            let lv = &self.levels[k];
            lv.w.as_ref()
                .expect("propagator")
                .mul_add(&before[(k - 1) * n..], cur);
            lv.prev
                .as_ref()
                .expect("previous weight")
                .mul_add(&f[(k - 1) * n..k * n], cur);
            lv.curr.mul_add(&f[k * n..(k + 1) * n], cur);
        }
        d
    }
}

fn add(a: &Csr, b: &Csr) -> Csr {
    let rows = (0..a.n_rows())
        .map(|i| {
            let mut m: Vec<(u32, f64)> = Vec::new();
            let (ra, rb) = (
                a.row_ptr[i]..a.row_ptr[i + 1],
                b.row_ptr[i]..b.row_ptr[i + 1],
            );
            let mut ia = ra.clone().peekable();
            let mut ib = rb.clone().peekable();
            loop {
                match (ia.peek(), ib.peek()) {
                    (Some(&x), Some(&y)) => {
                        if a.cols[x] == b.cols[y] {
                            m.push((a.cols[x], a.vals[x] + b.vals[y]));
                            ia.next();
                            ib.next();
                        } else if a.cols[x] < b.cols[y] {
                            m.push((a.cols[x], a.vals[x]));
                            ia.next();
                        } else {
                            m.push((b.cols[y], b.vals[y]));
                            ib.next();
                        }
                    }
                    (Some(&x), None) => {
                        m.push((a.cols[x], a.vals[x]));
                        ia.next();
                    }
                    (None, Some(&y)) => {
                        m.push((b.cols[y], b.vals[y]));
                        ib.next();
                    }
                    (None, None) => break,
                }
            }
            m
        })
        .collect();
    Csr::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Point;
    use crate::kernel::heat_kernel;
    use crate::quadrature::{integrate_1d, integrate_time, QuadOptions};

    fn grid(domain: Domain, xs: Vec<f64>) -> SpaceTimeGrid {
        SpaceTimeGrid::from_parts(&domain, xs, vec![0.01, 0.02]).unwrap()
    }

    fn hat(xs: &[f64], j: usize, y: f64) -> f64 {
        let mut v = vec![0.0; xs.len()];
        v[j] = 1.0;
        super::super::grid::interp(xs, &v, y)
    }

    #[test]
    fn time_moments_match_direct_integration() {
        let delta = 0.3;
        for u in [0.0, 0.05, -0.4, 1.3] {
            let tn = time_node(u, delta);
            for m in 0..2 {
                let e = integrate_1d(
                    |t: f64| t.powi(m as i32) * erfc(u.abs() / (2.0 * t.sqrt())),
                    0.0,
                    delta,
                    &QuadOptions::abs(1e-14),
                    &[],
                    &[0.0.into()],
                )
                .unwrap()
                .value;
                assert!(
                    (tn.e[m] - e).abs() < 1e-13,
                    "E_{m}({u}): {} vs {e}",
                    tn.e[m]
                );
                let h = integrate_1d(
                    |t: f64| t.powi(m as i32 + 1) * crate::kernel::gauss_1d(u, t),
                    0.0,
                    delta,
                    &QuadOptions::abs(1e-14),
                    &[],
                    &[0.0.into()],
                )
                .unwrap()
                .value;
                assert!(
                    (tn.h[m] - h).abs() < 1e-13,
                    "H_{m}({u}): {} vs {h}",
                    tn.h[m]
                );
            }
        }
    }

    #[test]
    fn propagator_rows_match_kernel_quadrature() {
        let xs = vec![0.0, 0.05, 0.1, 0.2, 0.35, 0.5, 0.8, 1.2, 2.0];
        for d in [Domain::half_space(1), Domain::interval(2.0)] {
            let g = grid(d, xs.clone());
            let delta = 0.07;
            let w = propagator(&g, delta);
            for i in [1, 4, 6] {
                for j in [1, 3, 5, 7] {
                    let q = integrate_1d(
                        |y: f64| {
                            heat_kernel(&d, &Point::x1(xs[i]), &Point::x1(y), delta).unwrap()
                                * hat(&xs, j, y)
                        },
                        xs[j - 1],
                        xs[j + 1],
                        &QuadOptions::abs(1e-14),
                        &[xs[j]],
                        &[],
                    )
                    .unwrap()
                    .value;
                    assert!(
                        (w.get(i, j) - q).abs() < 1e-12,
                        "{d:?} ({i},{j}): {} vs {q}",
                        w.get(i, j)
                    );
                }
            }
            assert_eq!(w.get(0, 1), 0.0);
        }
    }

    #[test]
    fn time_integral_rows_match_nested_quadrature() {
        let xs = vec![0.0, 0.05, 0.1, 0.2, 0.35, 0.5, 0.8, 1.2, 2.0];
        let d = Domain::half_space(1);
        let g = grid(d, xs.clone());
        let delta = 0.05;
        let (l1, l0m1) = time_integrals(&g, delta);
        for (i, j) in [(2, 2), (3, 4), (5, 3), (1, 6)] {
            let inner = |tau: f64| {
                integrate_1d(
                    |y: f64| {
                        heat_kernel(&d, &Point::x1(xs[i]), &Point::x1(y), tau).unwrap()
                            * hat(&xs, j, y)
                    },
                    xs[j - 1],
                    xs[j + 1],
                    &QuadOptions::new(1e-12, 1e-11),
                    &[xs[j], xs[i]],
                    &[],
                )
                .unwrap()
                .value
            };
            let o = QuadOptions::abs(1e-11);
            let a = integrate_time(|t| (t / delta) * inner(t), 1e-10, delta, &o, None)
                .unwrap()
                .value;
            let b = integrate_time(|t| (1.0 - t / delta) * inner(t), 1e-10, delta, &o, None)
                .unwrap()
                .value;
            assert!(
                (l1.get(i, j) - a).abs() < 1e-9,
                "L1 ({i},{j}): {} vs {a}",
                l1.get(i, j)
            );
            assert!(
                (l0m1.get(i, j) - b).abs() < 1e-9,
                "L0-L1 ({i},{j}): {} vs {b}",
                l0m1.get(i, j)
            );
        }
    }

    #[test]
    fn constant_source_on_the_whole_line_integrates_time() {
        // With F ≡ 1 away from the truncation edges, D(t) = t.
        let xs: Vec<f64> = (0..=400).map(|k| -10.0 + 0.05 * k as f64).collect();
        let d = Domain::whole_space(1);
        let g = Arc::new(SpaceTimeGrid::from_parts(&d, xs, vec![0.01, 0.02, 0.05, 0.1]).unwrap());
        let op = DuhamelOperator::new(g.clone());
        let f = vec![1.0; g.n_nodes() * g.n_levels()];
        let dd = op.apply(&f, None);
        let n = g.n_nodes();
        for (k, &t) in g.times.iter().enumerate() {
            assert!(
                (dd[k * n + 200] - t).abs() < 1e-13,
                "level {k}: {}",
                dd[k * n + 200]
            );
        }
        let tail = op.apply(&f, Some(1));
        assert_eq!(tail[n + 200], 0.0);
        assert!((tail[3 * n + 200] - 0.08).abs() < 1e-13);
    }
}
