//! The five commands.

use std::sync::Arc;

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use heattrace_core::criteria::{
    boundary_mass_check, cond_1_16, default_sigmas, far_lattice, prop52_moments, prop53_orlicz,
    prop54_orlicz_boundary, sufficient_5_7, thm12_ball_bound, thm12_log_bounds, thm13_weighted,
    z_lattice, CriterionReport, StripSource,
};
use heattrace_core::kernel::{
    certify_gaussian_bounds, heat_kernel, k_kernel, survival_mass, verify_semigroup, KernelKind,
    ResidualReport,
};
use heattrace_core::measure::Window;
use heattrace_core::solver::{
    picard_solve, write_field_csv, write_history_csv, SolveStatus, SpaceTimeGrid,
};
use heattrace_core::trace::{default_trace_levels, measure_pairing, recover_trace};
use heattrace_core::{Domain, DomainKind, Error, Point, QuadOptions};

use crate::config::{CheckSpec, Command, KernelCheckConfig, RunConfig};
use crate::dichotomy::{dichotomy_sweep, SweepControls, DEFAULT_HORIZON};
use crate::output::{point_cell, Output};

/// Largest relative asymmetry `|G(x,y) − G(y,x)|/G(x,y)`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Largest relative residual of the semigroup identity for `G`.
pub const G_SEMIGROUP_TOL: f64 = 1e-6;
/// Largest relative residual of the semigroup identity for `K`.
pub const K_SEMIGROUP_TOL: f64 = 1e-5;
/// Horizon of the two-sided bound certification when none is configured.
pub const BOUND_HORIZON: f64 = 1.0;

/// What a run produced, for the exit status and the console.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub command: Command,
    pub ok: bool,
    pub message: String,
}

/// Execute `cfg` and write its artifacts under `out`.
pub fn run(cfg: &RunConfig, out: &std::path::Path) -> anyhow::Result<RunSummary> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let mut o = Output::create(out)?;
    o.record("config", cfg)?;
    o.record(
        "versions",
        &serde_json::json!({ "heattrace": env!("CARGO_PKG_VERSION"), "threads": rayon::current_num_threads() }),
    )?;
    let summary = match cfg.command {
        Command::KernelCheck => run_kernel_check(cfg, &mut o),
        Command::Solve => run_solve(cfg, &mut o),
        Command::Trace => run_trace(cfg, &mut o),
        Command::Criteria => run_criteria(cfg, &mut o),
        Command::Dichotomy => run_dichotomy(cfg, &mut o),
    };
    let summary = match summary {
        Ok(s) => s,
        Err(e) => RunSummary {
            command: cfg.command,
            ok: false,
            message: format!("{e:#}"),
        },
    };
    o.record("summary", &summary)?;
    o.record(
        "timing",
        &serde_json::json!({ "seconds": start.elapsed().as_secs_f64() }),
    )?;
    o.finish()?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelRow {
    pub check: String,
    pub x: String,
    pub y: String,
    pub t: f64,
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Quadrature error bound of `rhs` (zero for pointwise checks).
    pub quad_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelCheckReport {
    pub rows: Vec<KernelRow>,
    pub c1_hat: Option<f64>,
    pub c2_hat: Option<f64>,
    pub bound_violation: Option<f64>,
    pub survival_mass: Option<f64>,
}

impl KernelCheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass) && self.bound_violation.is_none_or(|v| v <= 0.0)
    }

    pub fn worst(&self, check: &str) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.check == check)
            .map(|r| r.residual)
            .fold(0.0, f64::max)
    }
}

/// A point drawn uniformly from a bounded piece of the domain.
fn draw_point(domain: &Domain, rng: &mut ChaCha8Rng) -> Point {
    let n = domain.dim();
    let mut c = [0.0; 3];
    for v in c.iter_mut().take(n) {
        *v = rng.gen_range(-1.0..1.0);
    }
    match domain.kind {
        DomainKind::WholeSpace { .. } => {}
        DomainKind::HalfSpace { .. } => c[n - 1] = rng.gen_range(0.0..1.5),
        DomainKind::Interval { length } => c[0] = rng.gen_range(0.0..length),
    }
    Point::new(&c[..n])
}

/// A point within about two diffusion lengths `√τ` of `x`, clipped to the domain.
fn draw_near(domain: &Domain, x: &Point, tau: f64, rng: &mut ChaCha8Rng) -> Point {
    let n = domain.dim();
    let mut y = *x;
    for i in 0..n {
        y.set(i, x.get(i) + 2.0 * tau.sqrt() * rng.gen_range(-1.0..1.0));
    }
    match domain.kind {
        DomainKind::WholeSpace { .. } => {}
        DomainKind::HalfSpace { .. } => y.set(n - 1, y.get(n - 1).abs()),
        DomainKind::Interval { length } => y.set(0, y.get(0).clamp(0.0, length)),
    }
    y
}

fn boundary_point(domain: &Domain, near: &Point) -> Option<Point> {
    domain.project_to_boundary(near)
}

/// Symmetry, boundary vanishing, both semigroup identities, the survival
/// mass at distance 1 and the two-sided Gaussian bounds.
pub fn kernel_check(
    domain: &Domain,
    cfg: &KernelCheckConfig,
    seed: u64,
    horizon: f64,
) -> anyhow::Result<KernelCheckReport> {
    domain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(cfg.semigroup_samples);
    for _ in 0..cfg.semigroup_samples {
        let t = rng.gen_range(0.01..0.5);
        let s = rng.gen_range(0.01..0.5);
        let x = draw_point(domain, &mut rng);
        let mut y = draw_near(domain, &x, t + s, &mut rng);
        if domain.has_boundary() && rng.gen_bool(0.5) {
            y = boundary_point(domain, &y).unwrap_or(y);
        }
        draws.push((x, y, t, s));
    }
    let rows: Vec<Vec<KernelRow>> = {
        use rayon::prelude::*;
        draws
            .par_iter()
            .map(|(x, y, t, s)| -> anyhow::Result<Vec<KernelRow>> {
                // A residual passes when both it and the quadrature error of the
                // composed side are within the tolerance relative to `lhs`.
                let row = |check: &str,
                           lhs: f64,
                           rhs: f64,
                           residual: f64,
                           quad_error: f64,
                           tolerance: f64| KernelRow {
                    check: check.to_string(),
                    x: point_cell(x),
                    y: point_cell(y),
                    t: *t,
                    s: *s,
                    lhs,
                    rhs,
                    residual,
                    quad_error,
                    tolerance,
                    pass: residual <= tolerance && quad_error <= tolerance * lhs.abs(),
                };
                let mut out = Vec::new();
                let a = heat_kernel(domain, x, y, *t)?;
                let b = heat_kernel(domain, y, x, *t)?;
                let asym = if a == 0.0 {
                    (a - b).abs()
                } else {
                    (a - b).abs() / a.abs()
                };
                out.push(row("symmetry", a, b, asym, 0.0, SYMMETRY_TOL));
                if let Some(xb) = boundary_point(domain, x) {
                    let g = heat_kernel(domain, &xb, y, *t)?;
                    out.push(row("boundary_vanishing", g, 0.0, g.abs(), 0.0, 0.0));
                }
                let mut semigroup =
                    |check: &str, kind: KernelKind, tol: f64| -> anyhow::Result<()> {
                        // Absolute tolerance well below the expected value, so far tails
                        // are not resolved to relative precision.
                        let scale = match kind {
                            KernelKind::G => heat_kernel(domain, x, y, *t + *s)?,
                            KernelKind::K => k_kernel(domain, x, y, *t + *s)?,
                        };
                        let opts =
                            QuadOptions::new(1e-3 * cfg.quad_rel * scale.abs(), cfg.quad_rel);
                        let r = match verify_semigroup(domain, kind, x, y, *t, *s, &opts) {
                            Ok(r) => r,
                            // The composition missed its internal target; judge the partial
                            // value by its own error bound.
                            Err(Error::Quadrature { partial }) => {
                                ResidualReport::new(scale, partial.value, partial.error_estimate)
                            }
                            Err(e) => return Err(e.into()),
                        };
                        out.push(row(check, r.lhs, r.rhs, r.rel_residual, r.quad_error, tol));
                        Ok(())
                    };
                if domain.distance(y) > 0.0 || !domain.has_boundary() {
                    semigroup("semigroup_g", KernelKind::G, G_SEMIGROUP_TOL)?;
                }
                if domain.has_boundary() {
                    semigroup("semigroup_k", KernelKind::K, K_SEMIGROUP_TOL)?;
                }
                Ok(out)
            })
            .collect::<anyhow::Result<_>>()?
    };
    let rows: Vec<KernelRow> = rows.into_iter().flatten().collect();

    let mut report = KernelCheckReport {
        rows,
        c1_hat: None,
        c2_hat: None,
        bound_violation: None,
        survival_mass: None,
    };
    if domain.has_boundary() {
        let n = domain.dim();
        let mut x1 = Point::origin(n);
        x1.set(n - 1, 1.0);
        if let DomainKind::Interval { length } = domain.kind {
            x1.set(0, length.min(2.0) / 2.0);
        }
        report.survival_mass =
            Some(survival_mass(domain, &x1, 0.25, &QuadOptions::new(1e-14, 1e-11))?.value);
        if n == 1 {
            let m = cfg.bound_grid;
            let extent = match domain.kind {
                DomainKind::Interval { length } => length,
                _ => 2.0,
            };
            let mut samples = Vec::with_capacity(m * m * m);
            for i in 1..=m {
                for j in 1..=m {
                    for k in 1..=m {
                        let x = Point::x1(extent * i as f64 / (m + 1) as f64);
                        let y = Point::x1(extent * j as f64 / (m + 1) as f64);
                        samples.push((x, y, horizon * k as f64 / (m + 1) as f64));
                    }
                }
            }
            let c = certify_gaussian_bounds(domain, &samples, horizon, cfg.c2)?;
            report.c1_hat = Some(c.c1_hat);
            report.c2_hat = Some(c.c2_hat);
            report.bound_violation = Some(c.max_violation);
        }
    }
    Ok(report)
}

fn run_kernel_check(cfg: &RunConfig, o: &mut Output) -> anyhow::Result<RunSummary> {
    let domain = cfg.domain();
    let horizon = cfg.horizon.unwrap_or(BOUND_HORIZON);
    let r = kernel_check(&domain, &cfg.kernel_check, cfg.seed, horizon)?;
    o.csv("kernel_check.csv", &r.rows)?;
    let worst = serde_json::json!({
        "symmetry": r.worst("symmetry"),
        "boundary_vanishing": r.worst("boundary_vanishing"),
        "semigroup_g": r.worst("semigroup_g"),
        "semigroup_k": r.worst("semigroup_k"),
        "c1_hat": r.c1_hat,
        "c2_hat": r.c2_hat,
        "bound_violation": r.bound_violation,
        "survival_mass": r.survival_mass,
    });
    o.record("result", &worst)?;
    let failed = r.rows.iter().filter(|r| !r.pass).count();
    Ok(RunSummary {
        command: Command::KernelCheck,
        ok: r.passed(),
        message: if r.passed() {
            format!("{} identity checks passed", r.rows.len())
        } else {
            format!("{failed} of {} identity checks failed", r.rows.len())
        },
    })
}

fn run_solve(cfg: &RunConfig, o: &mut Output) -> anyhow::Result<RunSummary> {
    let domain = cfg.domain();
    let mu = cfg.measure()?;
    let (p, t) = (cfg.p_or_err()?, cfg.horizon_or_err()?);
    let grid = Arc::new(SpaceTimeGrid::build(&domain, &mu, t, &cfg.grid)?);
    let out = picard_solve(&mu, &domain, &grid, &cfg.solve.params(p))?;
    o.raw("solve_history.csv", |w| {
        Ok(write_history_csv(&out.history, w)?)
    })?;
    o.raw("solve_field.csv", |w| Ok(write_field_csv(&out.field, w)?))?;
    o.record(
        "result",
        &serde_json::json!({
            "status": out.status,
            "iterations": out.iterations,
            "sup": out.field.sup(),
            "monotonicity_defect": out.monotonicity_defect(),
            "nodes": grid.n_nodes(),
            "levels": grid.n_levels(),
            "diagnostic": out.diagnostic,
        }),
    )?;
    Ok(RunSummary {
        command: Command::Solve,
        ok: out.status != SolveStatus::Inconclusive,
        message: format!("{:?} after {} iterations", out.status, out.iterations),
    })
}

#[derive(Debug, Clone, Serialize)]
struct PairingRow {
    function: usize,
    level: usize,
    t: f64,
    pairing: f64,
    error: f64,
}

#[derive(Debug, Clone, Serialize)]
struct TraceRow {
    function: usize,
    center: String,
    limit: f64,
    error: f64,
    status: String,
    reference: f64,
    reference_error: f64,
}

fn run_trace(cfg: &RunConfig, o: &mut Output) -> anyhow::Result<RunSummary> {
    let domain = cfg.domain();
    let mu = cfg.measure()?;
    let (p, t) = (cfg.p_or_err()?, cfg.horizon_or_err()?);
    let grid = Arc::new(SpaceTimeGrid::build(&domain, &mu, t, &cfg.grid)?);
    let out = picard_solve(&mu, &domain, &grid, &cfg.solve.params(p))?;
    if out.status != SolveStatus::Converged {
        bail!(
            "trace recovery needs a converged solve, got {:?}",
            out.status
        );
    }
    let levels = cfg
        .trace
        .levels
        .clone()
        .unwrap_or_else(|| default_trace_levels(&out.field));
    let mut pairings = Vec::new();
    let mut rows = Vec::new();
    for (i, psi) in cfg.trace.test_functions.iter().enumerate() {
        let est = recover_trace(&out.field, psi, &levels)
            .with_context(|| format!("test function {i}"))?;
        for ((k, v), e) in levels.iter().zip(&est.pairings).zip(&est.pairing_errors) {
            pairings.push(PairingRow {
                function: i,
                level: *k,
                t: grid.times[*k],
                pairing: *v,
                error: *e,
            });
        }
        let reference = measure_pairing(&mu, psi, &domain)?;
        rows.push(TraceRow {
            function: i,
            center: point_cell(&psi.center()),
            limit: est.limit,
            error: est.error,
            status: format!("{:?}", est.status).to_lowercase(),
            reference: reference.value,
            reference_error: reference.error_estimate,
        });
    }
    o.csv("trace_pairings.csv", &pairings)?;
    o.csv("trace_summary.csv", &rows)?;
    o.record("result", &serde_json::json!({ "status": out.status, "iterations": out.iterations, "functions": rows.len() }))?;
    Ok(RunSummary {
        command: Command::Trace,
        ok: true,
        message: format!("{} trace pairings recovered", rows.len()),
    })
}

#[derive(Debug, Clone, Serialize)]
struct CriterionSampleRow {
    check: usize,
    criterion: String,
    z: String,
    sigma: f64,
    lhs: f64,
    bound: Option<f64>,
    ratio: Option<f64>,
    error: f64,
}

#[derive(Debug, Clone, Serialize)]
struct CriterionSummaryRow {
    check: usize,
    criterion: String,
    verdict: String,
    fitted: Option<f64>,
    band: Option<f64>,
    predicted: Option<f64>,
    value: Option<f64>,
    sup_ratio: Option<f64>,
    trend: Option<f64>,
    note: String,
}

/// Reports for one configured check.
pub fn evaluate_check(cfg: &RunConfig, check: &CheckSpec) -> anyhow::Result<Vec<CriterionReport>> {
    let domain = cfg.domain();
    let mu = cfg.measure()?;
    let (p, t) = (cfg.p_or_err()?, cfg.horizon_or_err()?);
    let z = z_lattice(&mu, &domain);
    let sig = |s: &Option<Vec<f64>>| s.clone().unwrap_or_else(|| default_sigmas(t));
    Ok(match check {
        CheckSpec::BallBound { sigmas } => {
            vec![thm12_ball_bound(&mu, &domain, p, t, &z, &sig(sigmas))?]
        }
        CheckSpec::LogBound { variant, sigmas } => {
            let zs: Vec<Point> = match variant {
                heattrace_core::criteria::LogVariant::PnInterior => z,
                heattrace_core::criteria::LogVariant::Pn1Boundary => z
                    .into_iter()
                    .filter(|q| domain.distance(q) == 0.0)
                    .collect(),
            };
            vec![thm12_log_bounds(
                &mu,
                &domain,
                t,
                *variant,
                &zs,
                &sig(sigmas),
            )?]
        }
        CheckSpec::BoundaryMass { center, radius } => {
            vec![boundary_mass_check(
                &mu,
                &domain,
                p,
                &Window::ball(*center, *radius),
            )?]
        }
        CheckSpec::Subcritical => vec![cond_1_16(&mu, &domain, &far_lattice(&domain))?],
        CheckSpec::Sufficient => vec![sufficient_5_7(&mu, &domain, p, t, &z)?],
        CheckSpec::Moments { alpha, sigmas } => {
            prop52_moments(&mu, &domain, *alpha, p, t, &z, &sig(sigmas))?
        }
        CheckSpec::Orlicz { beta, ell, sigmas } => vec![prop53_orlicz(
            &mu,
            &domain,
            *beta,
            p,
            *ell,
            t,
            &z,
            &sig(sigmas),
        )?],
        CheckSpec::OrliczBoundary { beta, sigmas } => vec![prop54_orlicz_boundary(
            &mu,
            &domain,
            *beta,
            t,
            &z,
            &sig(sigmas),
        )?],
        CheckSpec::Strip { sigmas } => {
            thm13_weighted(StripSource::Measure(&mu), &domain, p, t, &sig(sigmas))?
        }
    })
}

fn run_criteria(cfg: &RunConfig, o: &mut Output) -> anyhow::Result<RunSummary> {
    let mut samples = Vec::new();
    let mut summary = Vec::new();
    for (i, check) in cfg.criteria.checks.iter().enumerate() {
        for rep in evaluate_check(cfg, check).with_context(|| format!("criteria.checks[{i}]"))? {
            for s in &rep.samples {
                samples.push(CriterionSampleRow {
                    check: i,
                    criterion: rep.id.clone(),
                    z: s.z.as_ref().map(point_cell).unwrap_or_default(),
                    sigma: s.sigma,
                    lhs: s.lhs,
                    bound: s.bound.filter(|b| b.is_finite()),
                    ratio: s.ratio,
                    error: s.error,
                });
            }
            summary.push(CriterionSummaryRow {
                check: i,
                criterion: rep.id.clone(),
                verdict: serde_json::to_value(rep.verdict)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                fitted: rep.fitted.map(|f| f.slope),
                band: rep.fitted.map(|f| f.band),
                predicted: rep.predicted,
                value: rep.value,
                sup_ratio: rep.sup_ratio,
                trend: rep.trend,
                note: rep.note.clone(),
            });
            o.record("criterion", &rep)?;
        }
    }
    o.csv("criteria_samples.csv", &samples)?;
    o.csv("criteria_summary.csv", &summary)?;
    let verdicts: Vec<String> = summary
        .iter()
        .map(|s| format!("{}: {}", s.criterion, s.verdict))
        .collect();
    Ok(RunSummary {
        command: Command::Criteria,
        ok: true,
        message: verdicts.join("; "),
    })
}

fn run_dichotomy(cfg: &RunConfig, o: &mut Output) -> anyhow::Result<RunSummary> {
    let domain = cfg.domain();
    let fam = cfg
        .measure
        .family
        .context("the dichotomy sweep needs measure.family")?;
    let p = cfg.p_or_err()?;
    let t = cfg.horizon.unwrap_or(DEFAULT_HORIZON);
    let d = &cfg.dichotomy;
    let controls = SweepControls {
        kappa_bracket: (d.kappa_low, d.kappa_high),
        max_bisection: d.max_bisection,
        target_ratio: d.target_ratio,
        widen_cap: d.widen_cap,
    };
    let r = dichotomy_sweep(
        fam.id,
        fam.anchor,
        p,
        &domain,
        t,
        &cfg.grid,
        &controls,
        &cfg.solve.params(p),
    )?;
    o.csv("dichotomy_history.csv", &r.history)?;
    o.record("result", &r)?;
    Ok(RunSummary {
        command: Command::Dichotomy,
        ok: r.stopped_early.is_none(),
        message: format!(
            "κ in ({:.6}, {:.6}), ratio {:.4}, {} solves on grid {}",
            r.kappa_low,
            r.kappa_high,
            r.ratio(),
            r.history.len(),
            r.grid_id
        ),
    })
}
