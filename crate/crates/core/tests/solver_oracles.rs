use std::sync::Arc;

use heattrace_core::measure::{
    make_family, Density, FamilyId, MeasureSpec, SingularFamily, WeightMode,
};
use heattrace_core::solver::{
    fd_reference_solve, picard_solve, restart_residual, DuhamelOperator, FdResolution, GridParams,
    SolveParams, SolveStatus, SpaceTimeGrid,
};
use heattrace_core::{Domain, Point};

/// Largest relative gap between the Picard and finite-difference fields on
/// the Picard level nearest `t`, over nodes carrying at least 1% of the level's
/// sup. The comparison sits on a Picard level because its levels are geometric
/// and linear interpolation between them would dominate the gap.
fn max_rel_gap(domain: &Domain, mu: &MeasureSpec, p: f64, horizon: f64, t: f64) -> (f64, usize) {
    let g = Arc::new(SpaceTimeGrid::build(domain, mu, horizon, &GridParams::default()).unwrap());
    let out = picard_solve(mu, domain, &g, &SolveParams::with_p(p)).unwrap();
    assert_eq!(out.status, SolveStatus::Converged, "{:?}", out.diagnostic);
    let k = g.nearest_level(t);
    let res = FdResolution {
        output_levels: 400,
        ..FdResolution::new(2e-3, 1e-5, 8.0)
    };
    let fd = fd_reference_solve(mu, p, 1.0, horizon, domain, &res).unwrap();
    let vals: Vec<(f64, f64)> = fd
        .grid
        .xs
        .iter()
        .map(|&x| (out.field.eval(k, x), fd.eval_at(x, g.times[k]).unwrap()))
        .collect();
    let top = vals.iter().map(|v| v.1).fold(0.0, f64::max);
    let checked: Vec<f64> = vals
        .iter()
        .filter(|v| v.1 > 1e-2 * top)
        .map(|(a, b)| (a - b).abs() / b)
        .collect();
    (checked.iter().copied().fold(0.0, f64::max), checked.len())
}

#[test]
fn picard_matches_finite_differences_on_the_half_line() {
    let d = Domain::half_space(1);
    let mu = MeasureSpec::interior(
        Density::Bump {
            center: Point::x1(1.0),
            radius: 0.5,
            height: 2.0,
        },
        WeightMode::DistanceWeighted,
    );
    let (gap, n) = max_rel_gap(&d, &mu, 2.0, 1.0, 0.5);
    assert!(n > 100);
    assert!(gap <= 0.03, "gap {gap}");
}

#[test]
fn picard_matches_finite_differences_on_the_interval() {
    let d = Domain::interval(1.0);
    let mu = MeasureSpec::interior(
        Density::Sine {
            length: 1.0,
            amplitude: 3.0,
        },
        WeightMode::Lebesgue,
    );
    let (gap, n) = max_rel_gap(&d, &mu, 2.0, 0.2, 0.1);
    assert!(n > 100);
    assert!(gap <= 0.03, "gap {gap}");
}

#[test]
fn nonlinear_restart_residual_is_small() {
    let d = Domain::half_space(1);
    let mu = make_family(
        &SingularFamily::new(FamilyId::Mu1, Point::x1(1.0), 4.0, 0.1),
        &d,
    )
    .unwrap();
    let g = Arc::new(SpaceTimeGrid::build(&d, &mu, 0.01, &GridParams::default()).unwrap());
    let out = picard_solve(&mu, &d, &g, &SolveParams::with_p(4.0)).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    let op = DuhamelOperator::new(g.clone());
    let k1 = g.nearest_level(0.005);
    let r = restart_residual(&out, &op, k1, g.n_levels() - 1).unwrap();
    assert!(r.max_rel_residual <= 0.05, "{r:?}");
    assert!(r.checked_nodes > 20);
}

#[test]
fn picard_iterates_increase_and_solutions_order_with_the_data() {
    let d = Domain::half_space(1);
    let fam = |kappa| {
        make_family(
            &SingularFamily::new(FamilyId::Mu1, Point::x1(1.0), 4.0, kappa),
            &d,
        )
        .unwrap()
    };
    let g = Arc::new(SpaceTimeGrid::build(&d, &fam(1.0), 0.01, &GridParams::default()).unwrap());
    let prm = SolveParams::with_p(4.0);
    let lo = picard_solve(&fam(0.05), &d, &g, &prm).unwrap();
    let hi = picard_solve(&fam(0.1), &d, &g, &prm).unwrap();
    for out in [&lo, &hi] {
        assert_eq!(out.status, SolveStatus::Converged);
        assert!(out.monotonicity_defect() <= 1e-12 * out.field.sup());
        let sups: Vec<f64> = out.history.iter().map(|h| h.sup).collect();
        assert!(sups.windows(2).all(|w| w[1] >= w[0]));
    }
    assert!(lo
        .field
        .values
        .iter()
        .zip(&hi.field.values)
        .all(|(a, b)| a <= b));
}

#[test]
fn large_data_diverge_and_small_data_converge() {
    let d = Domain::half_space(1);
    let atom = |m| MeasureSpec::atom(Point::x1(1.0), m);
    let g = Arc::new(SpaceTimeGrid::build(&d, &atom(1.0), 0.5, &GridParams::default()).unwrap());
    let prm = SolveParams::with_p(3.0);
    assert_eq!(
        picard_solve(&atom(0.1), &d, &g, &prm).unwrap().status,
        SolveStatus::Converged
    );
    assert_eq!(
        picard_solve(&atom(100.0), &d, &g, &prm).unwrap().status,
        SolveStatus::Diverged
    );
}
