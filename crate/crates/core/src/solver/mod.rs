//! Mild solutions by the monotone Picard iteration `u₁ = K(t)μ`,
//! `u_{j+1} = u₁ + ∫_0^t G(t−s) u_j(s)^p ds`, on a graded one-dimensional grid.

mod fd;
mod grid;
mod io;
pub mod operator;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fd::{fd_reference_solve, FdResolution};
pub use grid::{GridFunction, GridParams, SpaceTimeGrid};
pub use io::{write_field_csv, write_history_csv};
pub use operator::DuhamelOperator;

use crate::domain::{Domain, Point};
use crate::error::{invalid, Error, Result};
use crate::kernel::{heat_kernel_unchecked, k_kernel_unchecked};
use crate::measure::{MeasureSpec, WeightMode, Window};
use crate::quadrature::{integrate_1d, QuadOptions};

/// Iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveParams {
    pub p: f64,
    /// Coefficient of `u^p`; zero gives the linear evolution.
    pub nonlinearity: f64,
    pub max_iter: usize,
    /// Relative sup-norm change between iterates that counts as converged.
    pub conv_tol: f64,
    pub blowup_ceiling: f64,
    /// Nodes closer than this to the boundary are left out of the convergence test.
    pub d_min: f64,
    /// Relative tolerance of the quadrature behind `u₁`.
    pub quad_rel: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            nonlinearity: 1.0,
            max_iter: 300,
            conv_tol: 1e-6,
            blowup_ceiling: 1e8,
            d_min: 1e-3,
            quad_rel: 1e-8,
        }
    }
}

impl SolveParams {
    pub fn with_p(p: f64) -> Self {
        Self {
            p,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(invalid("p must exceed 1"));
        }
        if self.max_iter < 2 {
            return Err(invalid("max_iter must be at least 2"));
        }
        if !(self.conv_tol > 0.0
            && self.blowup_ceiling > 0.0
            && self.nonlinearity >= 0.0
            && self.quad_rel > 0.0)
        {
            return Err(invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Diverged,
    Inconclusive,
}

/// One row of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sup: f64,
    /// `∫ d(x) u(x, T) dx`.
    pub weighted_l1: f64,
    /// Sup over interior nodes of `u_j − u_{j−1}` (zero on the first iterate).
    pub sup_change: f64,
    /// Largest decrease `u_{j−1} − u_j` anywhere (monotonicity check).
    pub max_decrease: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub iterations: usize,
    pub field: GridFunction,
    pub history: Vec<IterationRecord>,
    pub params: SolveParams,
    pub diagnostic: Option<String>,
}

impl SolveOutcome {
    /// Largest decrease between consecutive iterates over the whole run.
    pub fn monotonicity_defect(&self) -> f64 {
        self.history
            .iter()
            .map(|h| h.max_decrease)
            .fold(0.0, f64::max)
    }
}

/// An overflowing nonlinearity at `(x_node, t_level)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overflow {
    pub level: usize,
    pub node: usize,
}

/// `u₁(x_i, t_k) = ∫ K(x_i, y, t_k) dμ(y)` on every node and level
/// (`G` in place of `K` on the whole line).
pub fn apply_initial_kernel(
    mu: &MeasureSpec,
    domain: &Domain,
    grid: &Arc<SpaceTimeGrid>,
    quad_rel: f64,
) -> Result<GridFunction> {
    mu.validate(domain)?;
    if grid.domain != *domain {
        return Err(invalid("grid belongs to another domain"));
    }
    if !domain.has_boundary()
        && mu
            .interior
            .as_ref()
            .is_some_and(|i| i.weight == WeightMode::DistanceWeighted)
    {
        return Err(Error::UnsupportedDomain(
            "distance weights need a boundary".into(),
        ));
    }
    let mut out = GridFunction::zeros(grid.clone());
    if mu.is_zero() {
        return Ok(out);
    }
    let n = grid.n_nodes();
    let cells: Vec<(usize, usize)> = (0..grid.n_levels())
        .flat_map(|k| (0..n).map(move |i| (k, i)))
        .collect();
    let opts = QuadOptions::new(1e-300, quad_rel).with_budget(2_000_000);
    let vals: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(k, i)| {
            if grid.is_boundary_node(i) {
                return Ok(0.0);
            }
            let t = grid.times[k];
            let x = grid.node(i);
            let r = Domain::gaussian_radius(t, 1e-17);
            let window = Window::Interval {
                a: x.get(0) - r,
                b: x.get(0) + r,
            };
            let kern = |y: &Point, _d: f64| {
                let v = if domain.has_boundary() {
                    k_kernel_unchecked(domain, &x, y, t)
                } else {
                    heat_kernel_unchecked(domain, &x, y, t)
                };
                v.unwrap_or(f64::NAN)
            };
            mu.integrate(domain, &window, kern, &opts)
                .map(|q| q.value.max(0.0))
        })
        .collect();
    for (&(k, i), v) in cells.iter().zip(vals) {
        out.values[k * n + i] = v?;
    }
    Ok(out)
}

/// `u₁ + ∫_0^t G(t−s) c·u_j(s)^p ds` on the grid.
pub fn duhamel_step(
    u_j: &GridFunction,
    u1: &GridFunction,
    p: f64,
    nonlinearity: f64,
    op: &DuhamelOperator,
) -> std::result::Result<GridFunction, Overflow> {
    let n = u_j.n_nodes();
    let grid = &u_j.grid;
    if nonlinearity == 0.0 {
        return Ok(u1.clone());
    }
    let mut f = Vec::with_capacity(u_j.values.len());
    for (idx, &v) in u_j.values.iter().enumerate() {
        let s = nonlinearity * v.powf(p);
        if !s.is_finite() {
            return Err(Overflow {
                level: idx / n,
                node: idx % n,
            });
        }
        f.push(s);
    }
    let d = op.apply(&f, None);
    let mut out = u1.clone();
    for (idx, (o, di)) in out.values.iter_mut().zip(d).enumerate() {
        let i = idx % n;
        *o = if grid.is_boundary_node(i) {
            0.0
        } else {
            *o + di
        };
        if !o.is_finite() {
            return Err(Overflow {
                level: idx / n,
                node: i,
            });
        }
    }
    Ok(out)
}

/// Picard iteration from `u₁ = K(t)μ` on a prepared grid.
pub fn picard_solve(
    mu: &MeasureSpec,
    domain: &Domain,
    grid: &Arc<SpaceTimeGrid>,
    params: &SolveParams,
) -> Result<SolveOutcome> {
    params.validate()?;
    let op = DuhamelOperator::new(grid.clone());
    let u1 = match apply_initial_kernel(mu, domain, grid, params.quad_rel) {
        Ok(u) => u,
        Err(e @ Error::Quadrature { .. }) => {
            return Ok(SolveOutcome {
                status: SolveStatus::Inconclusive,
                iterations: 0,
                field: GridFunction::zeros(grid.clone()),
                history: Vec::new(),
                params: *params,
                diagnostic: Some(format!("first iterate: {e}")),
            })
        }
        Err(e) => return Err(e),
    };
    Ok(picard_iterate(&u1, &op, params))
}

/// The iteration itself, for callers that reuse `u₁` and the operator.
pub fn picard_iterate(
    u1: &GridFunction,
    op: &DuhamelOperator,
    params: &SolveParams,
) -> SolveOutcome {
    let grid = &u1.grid;
    let last = grid.n_levels() - 1;
    let record = |j: usize, u: &GridFunction, prev: Option<&GridFunction>| {
        let (mut change, mut decrease) = (0.0f64, 0.0f64);
        if let Some(prev) = prev {
            let n = u.n_nodes();
            for (idx, (a, b)) in u.values.iter().zip(&prev.values).enumerate() {
                decrease = decrease.max(b - a);
                if grid.distance(idx % n) > params.d_min {
                    change = change.max((a - b).abs());
                }
            }
        }
        IterationRecord {
            iteration: j,
            sup: u.sup(),
            weighted_l1: u.weighted_l1(last),
            sup_change: change,
            max_decrease: decrease,
        }
    };
    let done = |status, j, field: GridFunction, history, diagnostic| SolveOutcome {
        status,
        iterations: j,
        field,
        history,
        params: *params,
        diagnostic,
    };

    let mut history = vec![record(1, u1, None)];
    if u1.sup() == 0.0 {
        return done(SolveStatus::Converged, 1, u1.clone(), history, None);
    }
    if u1.sup() > params.blowup_ceiling {
        return done(
            SolveStatus::Diverged,
            1,
            u1.clone(),
            history,
            Some("first iterate exceeds the blow-up ceiling".into()),
        );
    }
    let mut u = u1.clone();
    for j in 2..=params.max_iter {
        let next = match duhamel_step(&u, u1, params.p, params.nonlinearity, op) {
            Ok(v) => v,
            Err(o) => {
                let msg = format!("u^p overflowed at node {} level {}", o.node, o.level);
                return done(SolveStatus::Diverged, j, u, history, Some(msg));
            }
        };
        let rec = record(j, &next, Some(&u));
        let prev_sup = history.last().expect("nonempty").sup;
        history.push(rec);
        if rec.sup > params.blowup_ceiling {
            return done(
                SolveStatus::Diverged,
                j,
                next,
                history,
                Some("sup exceeded the blow-up ceiling".into()),
            );
        }
        if j > 3 && rec.sup >= 2.0 * prev_sup {
            return done(
                SolveStatus::Diverged,
                j,
                next,
                history,
                Some("sup doubled between iterations".into()),
            );
        }
        let scale = next.sup_interior(params.d_min).max(f64::MIN_POSITIVE);
        if rec.sup_change <= params.conv_tol * scale {
            return done(SolveStatus::Converged, j, next, history, None);
        }
        u = next;
    }
    let n = params.max_iter;
    done(
        SolveStatus::Inconclusive,
        n,
        u,
        history,
        Some("iteration budget exhausted".into()),
    )
}

/// Relative level below which nodes are not checked by [`restart_residual`].
pub const RESTART_FLOOR: f64 = 1e-3;

/// Both sides of the restart identity
/// `u(t₂) = G(t₂−t₁) u(t₁) + ∫_{t₁}^{t₂} G(t₂−s) u(s)^p ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartReport {
    pub t1: f64,
    pub t2: f64,
    pub max_rel_residual: f64,
    /// Node where the largest residual occurs.
    pub worst_x: f64,
    pub checked_nodes: usize,
}

/// Pointwise relative restart residual on interior nodes carrying at least `RESTART_FLOOR` of the
/// level's sup; far Gaussian tails are left out, where relative errors of
/// the piecewise-linear reconstruction are meaningless.
pub fn restart_residual(
    outcome: &SolveOutcome,
    op: &DuhamelOperator,
    k1: usize,
    k2: usize,
) -> Result<RestartReport> {
    if outcome.status != SolveStatus::Converged {
        return Err(Error::Refused(format!(
            "restart needs a converged solve, got {:?}",
            outcome.status
        )));
    }
    let u = &outcome.field;
    let grid = &u.grid;
    if !Arc::ptr_eq(grid, &op.grid) && **grid != *op.grid {
        return Err(invalid("operator built for another grid"));
    }
    if !(k1 < k2 && k2 < grid.n_levels()) {
        return Err(invalid("need level indices k1 < k2 on the grid"));
    }
    let n = grid.n_nodes();
    let (t1, t2) = (grid.times[k1], grid.times[k2]);
    let prm = &outcome.params;
    let tail = if prm.nonlinearity != 0.0 {
        let f: Vec<f64> = u
            .values
            .iter()
            .map(|v| prm.nonlinearity * v.powf(prm.p))
            .collect();
        op.apply(&f, Some(k1))[k2 * n..(k2 + 1) * n].to_vec()
    } else {
        vec![0.0; n]
    };
    let lhs = u.level(k2);
    let before = u.level(k1);
    let floor = RESTART_FLOOR * lhs.iter().copied().fold(0.0, f64::max);
    let lag = t2 - t1;
    let radius = Domain::gaussian_radius(lag, 1e-17);
    let opts = QuadOptions::new(1e-300, 1e-10);
    let checks: Vec<usize> = (0..n)
        .filter(|&i| grid.distance(i) > prm.d_min && lhs[i] > floor)
        .collect();
    // The propagated level uses a local cubic reconstruction, so the check
    // is independent of the piecewise-linear operator.
    let residuals: Vec<Result<f64>> = checks
        .par_iter()
        .map(|&i| {
            let x = grid.node(i);
            let a = (grid.xs[i] - radius).max(grid.xs[0]);
            let b = (grid.xs[i] + radius).min(grid.xs[n - 1]);
            let lo = grid.xs.partition_point(|&y| y <= a);
            let hi = grid.xs.partition_point(|&y| y < b);
            let sem = integrate_1d(
                |y| {
                    heat_kernel_unchecked(&grid.domain, &x, &Point::x1(y), lag).unwrap_or(f64::NAN)
                        * grid::cubic_interp(&grid.xs, before, y)
                },
                a,
                b,
                &opts,
                &grid.xs[lo..hi],
                &[],
            )?;
            Ok((lhs[i] - sem.value - tail[i]).abs() / lhs[i])
        })
        .collect();
    let mut worst = (0.0f64, f64::NAN);
    for (&i, r) in checks.iter().zip(residuals) {
        let r = r?;
        if r > worst.0 || worst.1.is_nan() {
            worst = (r, grid.xs[i]);
        }
    }
    let checked = checks.len();
    Ok(RestartReport {
        t1,
        t2,
        max_rel_residual: worst.0,
        worst_x: worst.1,
        checked_nodes: checked,
    })
}
