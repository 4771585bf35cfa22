//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use heattrace_core::criteria::LogVariant;
use heattrace_core::measure::{make_family, FamilyId, MeasureSpec, SingularFamily};
use heattrace_core::solver::{GridParams, SolveParams};
use heattrace_core::trace::TestFunction;
use heattrace_core::{Domain, DomainKind, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    KernelCheck,
    Solve,
    Trace,
    Criteria,
    Dichotomy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::KernelCheck => "kernel-check",
            Command::Solve => "solve",
            Command::Trace => "trace",
            Command::Criteria => "criteria",
            Command::Dichotomy => "dichotomy",
        }
    }
}

/// One of the singular families, scaled by `kappa`; `p` is the run's exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyRef {
    pub id: FamilyId,
    pub anchor: Point,
    #[serde(default = "one")]
    pub kappa: f64,
}

fn one() -> f64 {
    1.0
}

/// Initial data: an explicit measure or a family, not both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub family: Option<FamilyRef>,
    pub spec: Option<MeasureSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub nonlinearity: f64,
    pub max_iter: usize,
    pub conv_tol: f64,
    pub blowup_ceiling: f64,
    pub d_min: f64,
    pub quad_rel: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let d = SolveParams::default();
        Self {
            nonlinearity: d.nonlinearity,
            max_iter: d.max_iter,
            conv_tol: d.conv_tol,
            blowup_ceiling: d.blowup_ceiling,
            d_min: d.d_min,
            quad_rel: d.quad_rel,
        }
    }
}

impl SolveConfig {
    pub fn params(&self, p: f64) -> SolveParams {
        SolveParams {
            p,
            nonlinearity: self.nonlinearity,
            max_iter: self.max_iter,
            conv_tol: self.conv_tol,
            blowup_ceiling: self.blowup_ceiling,
            d_min: self.d_min,
            quad_rel: self.quad_rel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelCheckConfig {
    /// Random `(x, y, t, s)` draws per domain for the semigroup identities.
    pub semigroup_samples: usize,
    /// Points per axis of the two-sided bound grid (`n³` samples in all).
    pub bound_grid: usize,
    /// Exponent constant of the Gaussian envelopes.
    pub c2: f64,
    pub quad_rel: f64,
}

impl Default for KernelCheckConfig {
    fn default() -> Self {
        Self {
            semigroup_samples: 50,
            bound_grid: 22,
            c2: 4.0,
            quad_rel: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub test_functions: Vec<TestFunction>,
    /// Time levels used for extrapolation; the earliest four when absent.
    pub levels: Option<Vec<usize>>,
}

/// One criterion to evaluate; σ sweeps default to 12 points in `[1e−3, √T/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    BallBound {
        sigmas: Option<Vec<f64>>,
    },
    LogBound {
        variant: LogVariant,
        sigmas: Option<Vec<f64>>,
    },
    BoundaryMass {
        center: Point,
        radius: f64,
    },
    Subcritical,
    Sufficient,
    Moments {
        alpha: f64,
        sigmas: Option<Vec<f64>>,
    },
    Orlicz {
        beta: f64,
        ell: u8,
        sigmas: Option<Vec<f64>>,
    },
    OrliczBoundary {
        beta: f64,
        sigmas: Option<Vec<f64>>,
    },
    Strip {
        sigmas: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaConfig {
    pub checks: Vec<CheckSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DichotomyConfig {
    pub kappa_low: f64,
    pub kappa_high: f64,
    pub max_bisection: usize,
    /// Stop once `κ_high/κ_low` falls below this.
    pub target_ratio: f64,
    /// Halvings or doublings allowed to each end when the bracket is wrong.
    pub widen_cap: usize,
}

impl Default for DichotomyConfig {
    fn default() -> Self {
        Self {
            kappa_low: 0.05,
            kappa_high: 0.5,
            max_bisection: 20,
            target_ratio: 1.2,
            widen_cap: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Output directory; `--out` overrides it.
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainKind,
    #[serde(default)]
    pub measure: MeasureConfig,
    pub p: Option<f64>,
    /// Time horizon `T`.
    pub horizon: Option<f64>,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub kernel_check: KernelCheckConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub criteria: CriteriaConfig,
    #[serde(default)]
    pub dichotomy: DichotomyConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn domain(&self) -> Domain {
        match self.domain {
            DomainKind::WholeSpace { dim } => Domain::whole_space(dim),
            DomainKind::HalfSpace { dim } => Domain::half_space(dim),
            DomainKind::Interval { length } => Domain::interval(length),
        }
    }

    pub fn p_or_err(&self) -> anyhow::Result<f64> {
        self.p.context("p is required")
    }

    pub fn horizon_or_err(&self) -> anyhow::Result<f64> {
        self.horizon.context("horizon is required")
    }

    /// The initial measure, built from the family when one is given.
    pub fn measure(&self) -> anyhow::Result<MeasureSpec> {
        let domain = self.domain();
        match (&self.measure.family, &self.measure.spec) {
            (Some(f), None) => {
                let p = self.p_or_err()?;
                Ok(make_family(
                    &SingularFamily::new(f.id, f.anchor, p, f.kappa),
                    &domain,
                )?)
            }
            (None, Some(s)) => Ok(s.clone()),
            (None, None) => Ok(MeasureSpec::zero()),
            (Some(_), Some(_)) => bail!("give measure.family or measure.spec, not both"),
        }
    }

    /// Every violated field, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let domain = self.domain();
        if let Err(e) = domain.validate() {
            v.push(format!("domain: {e}"));
        }
        if let Some(p) = self.p {
            if !(p > 1.0 && p.is_finite()) {
                v.push("p: must exceed 1".into());
            }
        }
        if let Some(t) = self.horizon {
            if !(t > 0.0 && t.is_finite()) {
                v.push("horizon: must be positive".into());
            }
        }
        let needs_p = !matches!(self.command, Command::KernelCheck);
        if needs_p && self.p.is_none() {
            v.push(format!("p: required by {}", self.command.name()));
        }
        let needs_horizon = needs_p && self.command != Command::Dichotomy;
        if needs_horizon && self.horizon.is_none() {
            v.push(format!("horizon: required by {}", self.command.name()));
        }
        if v.is_empty() {
            match self.measure() {
                Ok(mu) => {
                    if let Err(e) = mu.validate(&domain) {
                        v.push(format!("measure: {e}"));
                    }
                }
                Err(e) => v.push(format!("measure: {e:#}")),
            }
        }
        if let Err(e) = self.grid.validate() {
            v.push(format!("grid: {e}"));
        }
        if let Err(e) = self.solve.params(self.p.unwrap_or(2.0)).validate() {
            v.push(format!("solve: {e}"));
        }
        let k = &self.kernel_check;
        if k.semigroup_samples == 0 || k.bound_grid < 2 || !(k.c2 >= 1.0) || !(k.quad_rel > 0.0) {
            v.push(
                "kernel_check: need samples > 0, bound_grid ≥ 2, c2 ≥ 1 and quad_rel > 0".into(),
            );
        }
        for (i, f) in self.trace.test_functions.iter().enumerate() {
            if let Err(e) = f.validate() {
                v.push(format!("trace.test_functions[{i}]: {e}"));
            }
            if f.center().dim() != domain.dim() {
                v.push(format!(
                    "trace.test_functions[{i}]: dimension differs from the domain"
                ));
            }
        }
        if self.command == Command::Trace && self.trace.test_functions.is_empty() {
            v.push("trace.test_functions: at least one is required".into());
        }
        if self.command == Command::Criteria && self.criteria.checks.is_empty() {
            v.push("criteria.checks: at least one is required".into());
        }
        let d = &self.dichotomy;
        if self.command == Command::Dichotomy {
            if self.measure.family.is_none() {
                v.push("measure.family: the dichotomy sweep scales a family".into());
            }
            if !(d.kappa_low > 0.0 && d.kappa_high > d.kappa_low && d.kappa_high.is_finite()) {
                v.push("dichotomy: need 0 < kappa_low < kappa_high".into());
            }
            if !(d.target_ratio > 1.0) {
                v.push("dichotomy.target_ratio: must exceed 1".into());
            }
        }
        v
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            bail!("invalid configuration:\n  {}", v.join("\n  "))
        }
    }
}
