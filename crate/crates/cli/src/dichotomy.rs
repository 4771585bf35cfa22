//! Bisection in `κ` between converging and diverging Picard iterations for
//! a scaled singular family.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use heattrace_core::measure::{make_family, FamilyId, SingularFamily};
use heattrace_core::solver::{
    apply_initial_kernel, picard_iterate, DuhamelOperator, GridFunction, GridParams, SolveParams,
    SolveStatus, SpaceTimeGrid,
};
use heattrace_core::{Domain, Error, Point, Result};

/// Default horizon: short enough that late-time growth of the smooth part
/// of the data does not mix with the threshold set by the singularity.
pub const DEFAULT_HORIZON: f64 = 0.01;

/// One solve of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub kappa: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyResult {
    pub family: FamilyId,
    pub z: Point,
    pub p: f64,
    pub horizon: f64,
    /// Largest `κ` seen to converge.
    pub kappa_low: f64,
    /// Smallest `κ` seen to diverge.
    pub kappa_high: f64,
    pub grid: GridParams,
    /// Node and level counts of the grid every solve used.
    pub grid_id: String,
    /// Every solve in the order it ran.
    pub history: Vec<SweepRecord>,
    /// Why bisection stopped before the target ratio, if it did.
    pub stopped_early: Option<String>,
}

impl DichotomyResult {
    pub fn ratio(&self) -> f64 {
        self.kappa_high / self.kappa_low
    }

    /// Whether every solve below `κ_low` converged and every solve above `κ_high` diverged.
    pub fn is_monotone(&self) -> bool {
        self.history.iter().all(|r| {
            (r.kappa > self.kappa_low || r.status == SolveStatus::Converged)
                && (r.kappa < self.kappa_high || r.status == SolveStatus::Diverged)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepControls {
    pub kappa_bracket: (f64, f64),
    pub max_bisection: usize,
    pub target_ratio: f64,
    pub widen_cap: usize,
}

impl Default for SweepControls {
    fn default() -> Self {
        Self {
            kappa_bracket: (0.05, 0.5),
            max_bisection: 20,
            target_ratio: 1.2,
            widen_cap: 8,
        }
    }
}

/// Solves for one `κ` reuse `u₁` of the unit family and the operator, since
/// both are linear in the data.
struct Sweeper {
    u1: GridFunction,
    op: DuhamelOperator,
    params: SolveParams,
    history: Vec<SweepRecord>,
}

impl Sweeper {
    fn status_of(&self, kappa: f64) -> Option<SolveStatus> {
        self.history
            .iter()
            .find(|r| r.kappa == kappa)
            .map(|r| r.status)
    }

    fn run(&mut self, kappa: f64) -> SolveStatus {
        let mut u = self.u1.clone();
        u.values.iter_mut().for_each(|v| *v *= kappa);
        let out = picard_iterate(&u, &self.op, &self.params);
        log::info!(
            "kappa {kappa:.6e}: {:?} after {} iterations",
            out.status,
            out.iterations
        );
        self.history.push(SweepRecord {
            kappa,
            status: out.status,
            iterations: out.iterations,
            sup: out.field.sup(),
        });
        out.status
    }
}

/// Bracket the solvability threshold of `κ·family` and bisect it in `log κ`.
#[allow(clippy::too_many_arguments)]
pub fn dichotomy_sweep(
    family: FamilyId,
    z: Point,
    p: f64,
    domain: &Domain,
    horizon: f64,
    grid: &GridParams,
    controls: &SweepControls,
    solve: &SolveParams,
) -> Result<DichotomyResult> {
    let (mut lo, mut hi) = controls.kappa_bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < κ_low < κ_high, got [{lo}, {hi}]"
        )));
    }
    if !(controls.target_ratio > 1.0) {
        return Err(Error::InvalidArgument("target ratio must exceed 1".into()));
    }
    let params = SolveParams { p, ..*solve };
    params.validate()?;
    let base = make_family(&SingularFamily::new(family, z, p, 1.0), domain)?;
    let g = Arc::new(SpaceTimeGrid::build(domain, &base, horizon, grid)?);
    let grid_id = format!("{}x{}", g.n_nodes(), g.n_levels());
    let op = DuhamelOperator::new(g.clone());
    let u1 = apply_initial_kernel(&base, domain, &g, params.quad_rel)?;
    let mut s = Sweeper {
        u1,
        op,
        params,
        history: Vec::new(),
    };

    let mut widened = 0;
    loop {
        match s.run(lo) {
            SolveStatus::Converged => break,
            SolveStatus::Diverged => hi = hi.min(lo),
            SolveStatus::Inconclusive => {}
        }
        widened += 1;
        if widened > controls.widen_cap {
            return Err(Error::NoBracket(format!("no converging κ down to {lo:e}")));
        }
        lo *= 0.5;
    }
    widened = 0;
    while s.status_of(hi) != Some(SolveStatus::Diverged) && s.run(hi) != SolveStatus::Diverged {
        widened += 1;
        if widened > controls.widen_cap {
            return Err(Error::NoBracket(format!("no diverging κ up to {hi:e}")));
        }
        if s.status_of(hi) == Some(SolveStatus::Converged) {
            lo = lo.max(hi);
        }
        hi *= 2.0;
    }

    let mut stopped_early = None;
    let mut steps = 0;
    while hi / lo >= controls.target_ratio {
        if steps == controls.max_bisection {
            stopped_early = Some(format!(
                "bisection budget of {} steps exhausted",
                controls.max_bisection
            ));
            break;
        }
        steps += 1;
        let mid = (lo * hi).sqrt();
        match s.run(mid) {
            SolveStatus::Converged => lo = mid,
            SolveStatus::Diverged => hi = mid,
            SolveStatus::Inconclusive => {
                stopped_early = Some(format!("inconclusive solve at κ = {mid:e}"));
                break;
            }
        }
    }
    Ok(DichotomyResult {
        family,
        z,
        p,
        horizon,
        kappa_low: lo,
        kappa_high: hi,
        grid: *grid,
        grid_id,
        history: s.history,
        stopped_early,
    })
}
