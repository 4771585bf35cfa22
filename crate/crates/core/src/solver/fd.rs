//! Independent finite-difference reference for bounded data in one dimension:
//! backward Euler in time, central differences in space, explicit source.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{GridFunction, SpaceTimeGrid};
use crate::domain::{Domain, DomainKind, Point};
use crate::error::{invalid, Error, Result};
use crate::measure::{MeasureSpec, WeightMode};

/// Uniform spacing, step, truncation and number of stored levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdResolution {
    pub h: f64,
    pub dt: f64,
    /// Right end of the truncated half-line (half-width on the whole line).
    pub extent: f64,
    /// Levels kept in the output, evenly spaced and ending at `T`.
    pub output_levels: usize,
}

impl FdResolution {
    pub fn new(h: f64, dt: f64, extent: f64) -> Self {
        Self {
            h,
            dt,
            extent,
            output_levels: 20,
        }
    }
}

/// Solve `u_t = u_xx + c·u^p` with zero Dirichlet data from the bounded
/// initial function of `mu` (`f` for `f d(x) dx`, `f/d` for `f dx`).
pub fn fd_reference_solve(
    mu: &MeasureSpec,
    p: f64,
    nonlinearity: f64,
    horizon: f64,
    domain: &Domain,
    res: &FdResolution,
) -> Result<GridFunction> {
    domain.validate()?;
    mu.validate(domain)?;
    if domain.dim() != 1 {
        return Err(Error::UnsupportedDomain(
            "the reference solver is one-dimensional".into(),
        ));
    }
    if !(res.h > 0.0 && res.dt > 0.0 && res.extent > 0.0 && res.output_levels >= 2) {
        return Err(Error::InvalidResolution(format!("{res:?}")));
    }
    if !(horizon > 0.0) || !(p > 1.0) {
        return Err(invalid("need T > 0 and p > 1"));
    }
    if !mu.atoms.iter().all(|a| a.mass == 0.0)
        || mu.boundary.is_some()
        || mu.singular_hint().is_some()
    {
        return Err(invalid("the reference solver needs a bounded density"));
    }
    let (lo, hi) = match domain.kind {
        DomainKind::Interval { length } => (0.0, length),
        DomainKind::HalfSpace { .. } => (0.0, res.extent),
        DomainKind::WholeSpace { .. } => (-res.extent, res.extent),
    };
    let cells = ((hi - lo) / res.h).round().max(2.0) as usize;
    let h = (hi - lo) / cells as f64;
    let xs: Vec<f64> = (0..=cells).map(|i| lo + h * i as f64).collect();
    let steps_per_out = ((horizon / (res.output_levels as f64 * res.dt)).ceil() as usize).max(1);
    let steps = steps_per_out * res.output_levels;
    let dt = horizon / steps as f64;

    let weight = mu.interior.as_ref().map(|i| i.weight);
    let mut u: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let pt = Point::x1(x);
            let f = mu.raw_interior_density(&pt, domain);
            match weight {
                Some(WeightMode::Lebesgue) if f != 0.0 => f / domain.distance(&pt),
                _ => f,
            }
        })
        .collect();
    u[0] = 0.0;
    u[cells] = 0.0;
    if u.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid("initial function is unbounded on the grid"));
    }

    // Constant tridiagonal matrix (1 + 2r, −r) on the interior nodes.
    let r = dt / (h * h);
    let m = cells - 1;
    let (diag, off) = (1.0 + 2.0 * r, -r);
    // Thomas factors are reused every step.
    let mut c_prime = vec![0.0; m];
    let mut denom = vec![0.0; m];
    denom[0] = diag;
    c_prime[0] = off / diag;
    for i in 1..m {
        denom[i] = diag - off * c_prime[i - 1];
        c_prime[i] = off / denom[i];
    }

    let mut times = Vec::with_capacity(res.output_levels);
    let mut values = Vec::with_capacity(res.output_levels * xs.len());
    let mut rhs = vec![0.0; m];
    for step in 1..=steps {
        let umax = u.iter().copied().fold(0.0, f64::max);
        if nonlinearity > 0.0 && dt * p * nonlinearity * umax.powf(p - 1.0) > 0.5 {
            return Err(Error::InvalidResolution(format!(
                "step {dt:e} too large for the source at sup u = {umax:e}"
            )));
        }
        for i in 0..m {
            let v = u[i + 1];
            rhs[i] = v + dt * nonlinearity * v.powf(p);
        }
        rhs[0] /= denom[0];
        for i in 1..m {
            rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom[i];
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= c_prime[i] * rhs[i + 1];
        }
        u[1..=m].copy_from_slice(&rhs);
        if step % steps_per_out == 0 {
            times.push(dt * step as f64);
            values.extend(u.iter().map(|v| v.max(0.0)));
        }
    }
    let grid = Arc::new(SpaceTimeGrid::from_parts(domain, xs, times)?);
    GridFunction::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Density;

    #[test]
    fn zero_data_stays_zero() {
        let d = Domain::half_space(1);
        let u = fd_reference_solve(
            &MeasureSpec::zero(),
            2.0,
            1.0,
            1.0,
            &d,
            &FdResolution::new(0.1, 0.01, 5.0),
        )
        .unwrap();
        assert_eq!(u.sup(), 0.0);
    }

    #[test]
    fn sine_mode_decays_at_the_eigenvalue_rate() {
        let d = Domain::interval(1.0);
        let mu = MeasureSpec::interior(
            Density::Sine {
                length: 1.0,
                amplitude: 1.0,
            },
            WeightMode::DistanceWeighted,
        );
        let t = 0.1;
        let u =
            fd_reference_solve(&mu, 2.0, 0.0, t, &d, &FdResolution::new(0.01, 1e-5, 1.0)).unwrap();
        let k = u.grid.n_levels() - 1;
        let want = (-std::f64::consts::PI.powi(2) * t).exp();
        assert!(
            (u.eval(k, 0.5) - want).abs() < 2e-3 * want,
            "{} vs {want}",
            u.eval(k, 0.5)
        );
    }

    #[test]
    fn singular_data_is_rejected() {
        let d = Domain::half_space(1);
        let mu = MeasureSpec::atom(Point::x1(1.0), 1.0);
        assert!(
            fd_reference_solve(&mu, 2.0, 1.0, 1.0, &d, &FdResolution::new(0.1, 0.01, 5.0)).is_err()
        );
    }
}
