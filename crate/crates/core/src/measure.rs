//! Nonnegative Radon measures on the closed domain: interior densities
//! (against `dx` or `d(x) dx`), boundary densities, atoms, and the
//! singular families with the optimal local singularities.

use std::f64::consts::E;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, DomainKind, Point};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{
    integrate, integrate_1d, QuadOptions, QuadResult, Region, SingularPoint, SingularityHint,
};

/// `p_k = 1 + 2/k`.
pub fn critical_exponent(k: usize) -> f64 {
    1.0 + 2.0 / k as f64
}

/// Exponents closer than this count as equal to a critical value.
pub const CRITICAL_EPS: f64 = 1e-12;

/// Interior density weight: `dμ = f dx` or `dμ = f d(x) dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Lebesgue,
    DistanceWeighted,
}

/// Pointwise density profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    Constant {
        value: f64,
    },
    /// `|x−c|^{-power} [log(e + 1/|x−c|)]^{-log_power}` on the closed ball `B(c, radius)`.
    Radial {
        center: Point,
        power: f64,
        log_power: f64,
        radius: f64,
    },
    /// `height · exp(1 − 1/(1 − |x−c|²/R²))` for `|x−c| < R`.
    Bump {
        center: Point,
        radius: f64,
        height: f64,
    },
    /// `amplitude · sin(π x₁ / length)` for `0 ≤ x₁ ≤ length`.
    Sine {
        length: f64,
        amplitude: f64,
    },
    /// `d(x)^power`.
    DistancePower {
        power: f64,
    },
    Tabulated(Tabulated),
}

impl Density {
    pub fn eval(&self, x: &Point, domain: &Domain) -> f64 {
        match self {
            Density::Constant { value } => *value,
            Density::Radial {
                center,
                power,
                log_power,
                radius,
            } => {
                let r = x.dist(center);
                if r > *radius {
                    return 0.0;
                }
                radial_profile(r, *power, *log_power)
            }
            Density::Bump {
                center,
                radius,
                height,
            } => height * bump(x.dist(center) / radius),
            Density::Sine { length, amplitude } => {
                let v = x.get(0);
                if (0.0..=*length).contains(&v) {
                    amplitude * (std::f64::consts::PI * v / length).sin()
                } else {
                    0.0
                }
            }
            Density::DistancePower { power } => domain.distance(x).powf(*power),
            Density::Tabulated(t) => t.eval(x),
        }
    }

    /// Points where the density is singular, with their log powers.
    pub fn singular_points(&self) -> Option<(Point, f64, f64)> {
        match self {
            Density::Radial {
                center,
                power,
                log_power,
                ..
            } if *power > 0.0 => Some((*center, -power, *log_power)),
            _ => None,
        }
    }

    /// One-dimensional kinks and jumps.
    fn breakpoints_1d(&self) -> Vec<f64> {
        match self {
            Density::Radial { center, radius, .. } | Density::Bump { center, radius, .. } => {
                vec![center.get(0) - radius, center.get(0) + radius]
            }
            Density::Sine { length, .. } => vec![0.0, *length],
            Density::Tabulated(t) if t.dim == 1 => t.cell_edges_1d(),
            _ => Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = match self {
            Density::Constant { value } => !(*value >= 0.0 && value.is_finite()),
            Density::Radial {
                radius, log_power, ..
            } => !(*radius > 0.0) || *log_power < 0.0,
            Density::Bump { radius, height, .. } => !(*radius > 0.0 && *height >= 0.0),
            Density::Sine { length, amplitude } => !(*length > 0.0 && *amplitude >= 0.0),
            Density::DistancePower { power } => !power.is_finite(),
            Density::Tabulated(t) => t.values.iter().any(|v| !(*v >= 0.0 && v.is_finite())),
        };
        if bad {
            return Err(invalid(format!(
                "density parameters out of range: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `r^{-a} [log(e + 1/r)]^{-b}`.
pub fn radial_profile(r: f64, a: f64, b: f64) -> f64 {
    if r == 0.0 {
        return if a > 0.0 || (a == 0.0 && b < 0.0) {
            f64::INFINITY
        } else if a == 0.0 && b == 0.0 {
            1.0
        } else {
            0.0
        };
    }
    let mut v = r.powf(-a);
    if b != 0.0 {
        v *= (E + 1.0 / r).ln().powf(-b);
    }
    v
}

/// Smooth compactly supported bump in the normalised radius.
pub fn bump(rho: f64) -> f64 {
    if rho >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - rho * rho)).exp()
    }
}

/// Density sampled at nodes and interpolated piecewise-constantly.
///
/// In one dimension node `i` owns the cell between the midpoints to its
/// neighbours; in higher dimension the nearest node within the largest
/// nearest-neighbour spacing supplies the value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    pub dim: usize,
    pub nodes: Vec<Point>,
    pub values: Vec<f64>,
    reach: f64,
}

impl Tabulated {
    pub fn new(nodes: Vec<Point>, values: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != values.len() {
            return Err(invalid(
                "tabulated density needs matching, nonempty nodes and values",
            ));
        }
        let dim = nodes[0].dim();
        if nodes.iter().any(|n| n.dim() != dim) {
            return Err(invalid("tabulated nodes have mixed dimensions"));
        }
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        if dim == 1 {
            order.sort_by(|&a, &b| nodes[a].get(0).total_cmp(&nodes[b].get(0)));
        }
        let nodes: Vec<Point> = order.iter().map(|&i| nodes[i]).collect();
        let values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        if dim == 1 && nodes.windows(2).any(|w| w[1].get(0) <= w[0].get(0)) {
            return Err(invalid("tabulated 1-D nodes must be distinct"));
        }
        let reach = if nodes.len() == 1 {
            0.0
        } else {
            nodes
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    nodes
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, b)| a.dist(b))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        };
        let t = Self {
            dim,
            nodes,
            values,
            reach,
        };
        Density::Tabulated(t.clone()).validate()?;
        Ok(t)
    }

    /// Read `coord…,density` rows with a header line.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| invalid(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if !(2..=4).contains(&nums.len()) {
                return Err(invalid(
                    "tabulated rows need 1..=3 coordinates and a density",
                ));
            }
            let (v, c) = nums.split_last().expect("nonempty row");
            nodes.push(Point::new(c));
            values.push(*v);
        }
        Self::new(nodes, values)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    fn cell_edges_1d(&self) -> Vec<f64> {
        let xs: Vec<f64> = self.nodes.iter().map(|n| n.get(0)).collect();
        let mut e = Vec::with_capacity(xs.len() + 1);
        let h0 = if xs.len() > 1 { xs[1] - xs[0] } else { 0.0 };
        e.push(xs[0] - 0.5 * h0);
        for w in xs.windows(2) {
            e.push(0.5 * (w[0] + w[1]));
        }
        let hn = if xs.len() > 1 {
            xs[xs.len() - 1] - xs[xs.len() - 2]
        } else {
            0.0
        };
        e.push(xs[xs.len() - 1] + 0.5 * hn);
        e
    }

    pub fn eval(&self, x: &Point) -> f64 {
        if self.dim == 1 {
            let edges = self.cell_edges_1d();
            let v = x.get(0);
            if v < edges[0] || v >= edges[edges.len() - 1] {
                return 0.0;
            }
            let i = edges.partition_point(|&e| e <= v) - 1;
            return self.values[i.min(self.values.len() - 1)];
        }
        let (mut best, mut bd) = (0, f64::INFINITY);
        for (i, n) in self.nodes.iter().enumerate() {
            let d = n.dist2(x);
            if d < bd {
                bd = d;
                best = i;
            }
        }
        if bd.sqrt() <= self.reach {
            self.values[best]
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorPart {
    pub density: Density,
    pub weight: WeightMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Point,
    pub mass: f64,
}

/// Closed ball outside which the measure vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyId {
    Mu1,
    Mu2,
    Mu3,
}

/// One of the three singular families, before scaling by `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularFamily {
    pub id: FamilyId,
    pub anchor: Point,
    pub p: f64,
    pub kappa: f64,
}

impl SingularFamily {
    pub fn new(id: FamilyId, anchor: Point, p: f64, kappa: f64) -> Self {
        Self {
            id,
            anchor,
            p,
            kappa,
        }
    }

    /// Whether `p` sits on the family's critical exponent.
    pub fn is_log_critical(&self) -> bool {
        let n = self.anchor.dim();
        let pc = match self.id {
            FamilyId::Mu1 => critical_exponent(n),
            FamilyId::Mu2 | FamilyId::Mu3 => critical_exponent(n + 1),
        };
        (self.p - pc).abs() < CRITICAL_EPS
    }

    /// Predicted exponent of `σ ↦ μ(B(anchor, σ))` for the power cases.
    pub fn mass_exponent(&self) -> f64 {
        let n = self.anchor.dim() as f64;
        match self.id {
            FamilyId::Mu1 => n - 2.0 / (self.p - 1.0),
            FamilyId::Mu2 | FamilyId::Mu3 => n + 1.0 - 2.0 / (self.p - 1.0),
        }
    }
}

/// A nonnegative Radon measure on the closed domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSpec {
    pub interior: Option<InteriorPart>,
    /// Density against surface measure; counting measure on boundary points when `N = 1`.
    pub boundary: Option<Density>,
    pub atoms: Vec<Atom>,
    pub support: Option<Support>,
    pub family: Option<SingularFamily>,
    /// Overall multiplier of every component.
    pub scale: f64,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        Self::zero()
    }
}

impl MeasureSpec {
    pub fn zero() -> Self {
        Self {
            interior: None,
            boundary: None,
            atoms: Vec::new(),
            support: None,
            family: None,
            scale: 1.0,
        }
    }

    pub fn atom(point: Point, mass: f64) -> Self {
        Self {
            atoms: vec![Atom { point, mass }],
            ..Self::zero()
        }
    }

    pub fn interior(density: Density, weight: WeightMode) -> Self {
        Self {
            interior: Some(InteriorPart { density, weight }),
            ..Self::zero()
        }
    }

    pub fn boundary(density: Density) -> Self {
        Self {
            boundary: Some(density),
            ..Self::zero()
        }
    }

    pub fn with_atom(mut self, point: Point, mass: f64) -> Self {
        self.atoms.push(Atom { point, mass });
        self
    }

    pub fn with_support(mut self, center: Point, radius: f64) -> Self {
        self.support = Some(Support { center, radius });
        self
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0
            || (self.interior.is_none()
                && self.boundary.is_none()
                && self.atoms.iter().all(|a| a.mass == 0.0))
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(invalid("measure scale must be finite and nonnegative"));
        }
        if let Some(i) = &self.interior {
            i.density.validate()?;
        }
        if let Some(b) = &self.boundary {
            if !domain.has_boundary() {
                return Err(Error::UnsupportedDomain(
                    "boundary density without a boundary".into(),
                ));
            }
            b.validate()?;
        }
        for a in &self.atoms {
            if !(a.mass >= 0.0 && a.mass.is_finite()) {
                return Err(invalid("atom masses must be finite and nonnegative"));
            }
            domain.check_point(&a.point, "atom")?;
        }
        if let Some(s) = &self.support {
            if !(s.radius > 0.0) {
                return Err(invalid("support radius must be positive"));
            }
        }
        Ok(())
    }

    fn in_support(&self, x: &Point) -> bool {
        self.support.is_none_or(|s| x.dist(&s.center) <= s.radius)
    }

    /// Density of the interior part against `dx` (weight and scale included).
    pub fn interior_density(&self, x: &Point, domain: &Domain) -> f64 {
        match &self.interior {
            Some(part) if self.in_support(x) => {
                let f = part.density.eval(x, domain);
                if f == 0.0 {
                    return 0.0;
                }
                let w = match part.weight {
                    WeightMode::Lebesgue => 1.0,
                    WeightMode::DistanceWeighted => domain.distance(x),
                };
                self.scale * f * w
            }
            _ => 0.0,
        }
    }

    /// Interior density before the weight, scale included.
    pub fn raw_interior_density(&self, x: &Point, domain: &Domain) -> f64 {
        match &self.interior {
            Some(part) if self.in_support(x) => self.scale * part.density.eval(x, domain),
            _ => 0.0,
        }
    }

    /// Boundary density against `dS` (scale included).
    pub fn boundary_density(&self, y: &Point, domain: &Domain) -> f64 {
        match &self.boundary {
            Some(h) if self.in_support(y) => self.scale * h.eval(y, domain),
            _ => 0.0,
        }
    }

    /// Singular point of the interior or boundary density, if any.
    pub fn singular_hint(&self) -> Option<SingularityHint> {
        let from = |d: &Density| {
            d.singular_points()
                .map(|(c, a, b)| SingularityHint::new(c, a).with_log_power(b))
        };
        self.interior
            .as_ref()
            .and_then(|i| from(&i.density))
            .or_else(|| self.boundary.as_ref().and_then(from))
    }

    /// Singular centres and atoms, where solutions concentrate.
    pub fn anchors(&self) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::new();
        let dens = self
            .interior
            .iter()
            .map(|i| &i.density)
            .chain(self.boundary.iter());
        for d in dens {
            if let Density::Radial { center, .. } = d {
                out.push(*center);
            }
        }
        out.extend(self.atoms.iter().filter(|a| a.mass > 0.0).map(|a| a.point));
        out
    }

    /// Smallest interval of the first coordinate holding the measure, or
    /// `None` when a component has unbounded support and no support ball.
    pub fn extent_1d(&self) -> Option<(f64, f64)> {
        if let Some(s) = &self.support {
            return Some((s.center.get(0) - s.radius, s.center.get(0) + s.radius));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut grow = |a: f64, b: f64| {
            lo = lo.min(a);
            hi = hi.max(b);
        };
        let dens = self
            .interior
            .iter()
            .map(|i| &i.density)
            .chain(self.boundary.iter());
        for d in dens {
            match d {
                Density::Radial { center, radius, .. } | Density::Bump { center, radius, .. } => {
                    grow(center.get(0) - radius, center.get(0) + radius)
                }
                Density::Sine { length, .. } => grow(0.0, *length),
                Density::Tabulated(t) => {
                    let e = if t.dim == 1 {
                        t.cell_edges_1d()
                    } else {
                        t.nodes.iter().map(|n| n.get(0)).collect()
                    };
                    grow(e[0], e[e.len() - 1] + t.reach)
                }
                Density::Constant { value } if *value == 0.0 => {}
                Density::Constant { .. } | Density::DistancePower { .. } => return None,
            }
        }
        if self.boundary.is_some() {
            grow(0.0, 0.0);
        }
        for a in &self.atoms {
            grow(a.point.get(0), a.point.get(0));
        }
        if lo > hi {
            return Some((0.0, 0.0));
        }
        Some((lo, hi))
    }

    fn breakpoints_1d(&self) -> Vec<f64> {
        let mut b = Vec::new();
        if let Some(i) = &self.interior {
            b.extend(i.density.breakpoints_1d());
        }
        if let Some(s) = &self.support {
            b.push(s.center.get(0) - s.radius);
            b.push(s.center.get(0) + s.radius);
        }
        b
    }

    /// `∫_{W ∩ Ω} g(y, d(y)) dμ_int(y)` where `dμ_int` includes the weight.
    ///
    /// A log-critical family integrand `g·f·w ~ r^{-1}[log]^{-b}` near the
    /// anchor is closed analytically below the sampling floor.
    pub fn integrate_interior<G: Fn(&Point, f64) -> f64>(
        &self,
        domain: &Domain,
        window: &Window,
        g: G,
        opts: &QuadOptions,
    ) -> Result<QuadResult> {
        let Some(part) = &self.interior else {
            return Ok(QuadResult::zero());
        };
        let weight = part.weight;
        self.integrate_density(
            domain,
            window,
            |y, f, d| {
                let w = match weight {
                    WeightMode::Lebesgue => 1.0,
                    WeightMode::DistanceWeighted => d,
                };
                let v = g(y, d);
                if v == 0.0 || w == 0.0 {
                    0.0
                } else {
                    v * f * w
                }
            },
            None,
            opts,
        )
    }

    /// `∫_{W ∩ Ω} h(y, f(y), d(y)) dy` for the interior density `f` (scale
    /// included, weight excluded); `h` is only called where `f > 0`.
    ///
    /// `local` gives the power and log power of `h` near the density's
    /// singular point when they differ from those of `f`.
    pub fn integrate_density<H: Fn(&Point, f64, f64) -> f64>(
        &self,
        domain: &Domain,
        window: &Window,
        h: H,
        local: Option<(f64, f64)>,
        opts: &QuadOptions,
    ) -> Result<QuadResult> {
        if self.interior.is_none() || self.scale == 0.0 {
            return Ok(QuadResult::zero());
        }
        let integrand = |y: &Point| {
            let f = self.raw_interior_density(y, domain);
            if f == 0.0 {
                return 0.0;
            }
            h(y, f, domain.distance(y))
        };
        let hint = self
            .interior
            .as_ref()
            .and_then(|i| i.density.singular_points())
            .map(|(c, a, b)| {
                let (a, b) = local.unwrap_or((a, b));
                SingularityHint::new(c, a).with_log_power(b)
            });
        if domain.dim() == 1 {
            let Some((a, b)) = window.interval_in(domain, self.support.as_ref()) else {
                return Ok(QuadResult::zero());
            };
            let mut sing = Vec::new();
            if let Some(h) = &hint {
                // The density's power is the local power of the integrand
                // only away from the boundary, where weights and kernels are smooth.
                let known = (h.log_power == 0.0 && domain.distance(&h.location) > 0.0)
                    .then_some(h.exponent);
                sing.push(
                    SingularPoint::new(h.location.get(0))
                        .with_log_power(h.log_power)
                        .with_exponent(known),
                );
            }
            let mut bps = self.breakpoints_1d();
            bps.extend(window.breakpoints_1d());
            return integrate_1d(|x| integrand(&Point::x1(x)), a, b, opts, &bps, &sing);
        }
        let Window::Ball { center, radius } = window else {
            return Err(invalid("interval windows are one-dimensional"));
        };
        let region = match domain.kind {
            DomainKind::WholeSpace { .. } => Region::ball(*center, *radius),
            DomainKind::HalfSpace { .. } => Region::half_ball(*center, *radius),
            DomainKind::Interval { .. } => unreachable!("interval domains are one-dimensional"),
        };
        let near = hint.filter(|h| h.location.dist(center) <= 2.0 * radius);
        integrate(integrand, &region, opts, near.as_ref())
    }

    /// `∫_{W ∩ ∂Ω} g dμ_bdry`.
    pub fn integrate_boundary<G: Fn(&Point) -> f64>(
        &self,
        domain: &Domain,
        window: &Window,
        g: G,
        opts: &QuadOptions,
    ) -> Result<QuadResult> {
        self.integrate_boundary_density(domain, window, |y, hv| hv * g(y), None, opts)
    }

    /// `∫_{W ∩ ∂Ω} k(y, h(y)) dS(y)` for the boundary density `h` (scale
    /// included); `k` is only called where `h > 0`. `local` overrides the
    /// power and log power near the singular point as in
    /// [`MeasureSpec::integrate_density`].
    pub fn integrate_boundary_density<K: Fn(&Point, f64) -> f64>(
        &self,
        domain: &Domain,
        window: &Window,
        k: K,
        local: Option<(f64, f64)>,
        opts: &QuadOptions,
    ) -> Result<QuadResult> {
        let Some(h) = &self.boundary else {
            return Ok(QuadResult::zero());
        };
        if self.scale == 0.0 {
            return Ok(QuadResult::zero());
        }
        let integrand = |y: &Point| {
            if !self.in_support(y) {
                return 0.0;
            }
            let hv = h.eval(y, domain);
            if hv == 0.0 {
                0.0
            } else {
                k(y, self.scale * hv)
            }
        };
        match domain.kind {
            DomainKind::WholeSpace { .. } => Ok(QuadResult::zero()),
            DomainKind::HalfSpace { dim: 1 } | DomainKind::Interval { .. } => {
                let mut pts = vec![Point::x1(0.0)];
                if let DomainKind::Interval { length } = domain.kind {
                    pts.push(Point::x1(length));
                }
                let value = pts
                    .iter()
                    .filter(|p| window.contains(p))
                    .map(integrand)
                    .sum();
                Ok(QuadResult {
                    value,
                    error_estimate: 0.0,
                    evaluations: 2,
                })
            }
            DomainKind::HalfSpace { dim } => {
                let Window::Ball { center, radius } = window else {
                    return Err(invalid("interval windows are one-dimensional"));
                };
                let cn = center.last();
                if cn.abs() > *radius {
                    return Ok(QuadResult::zero());
                }
                let mut c = *center;
                c.set(dim - 1, 0.0);
                let r = (radius * radius - cn * cn).sqrt();
                if r == 0.0 {
                    return Ok(QuadResult::zero());
                }
                let hint = h
                    .singular_points()
                    .map(|(p, a, b)| {
                        let (a, b) = local.unwrap_or((a, b));
                        SingularityHint::new(p, a).with_log_power(b)
                    })
                    .filter(|hh| hh.location.last() == 0.0 && hh.location.dist(&c) <= 2.0 * r);
                integrate(
                    integrand,
                    &Region::BoundaryPatch {
                        center: c,
                        radius: r,
                    },
                    opts,
                    hint.as_ref(),
                )
            }
        }
    }

    /// `Σ g(a)·m_a` over atoms in the window.
    pub fn sum_atoms<G: Fn(&Point) -> f64>(&self, window: &Window, g: G) -> f64 {
        self.atoms
            .iter()
            .filter(|a| window.contains(&a.point) && self.in_support(&a.point))
            .map(|a| self.scale * a.mass * g(&a.point))
            .sum()
    }

    /// `∫_W g dμ` over all components, `g` receiving the point and `d`.
    pub fn integrate<G: Fn(&Point, f64) -> f64>(
        &self,
        domain: &Domain,
        window: &Window,
        g: G,
        opts: &QuadOptions,
    ) -> Result<QuadResult> {
        let i = self.integrate_interior(domain, window, &g, opts)?;
        let b = self.integrate_boundary(domain, window, |y| g(y, 0.0), opts)?;
        let a = self.sum_atoms(window, |y| g(y, domain.distance(y)));
        Ok(QuadResult {
            value: i.value + b.value + a,
            error_estimate: i.error_estimate + b.error_estimate,
            evaluations: i.evaluations + b.evaluations + self.atoms.len(),
        })
    }
}

/// Closed integration windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    Ball {
        center: Point,
        radius: f64,
    },
    /// `[a, b]` in one dimension.
    Interval {
        a: f64,
        b: f64,
    },
}

impl Window {
    pub fn ball(center: Point, radius: f64) -> Self {
        Window::Ball { center, radius }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Window::Ball { center, radius } => x.dist(center) <= *radius,
            Window::Interval { a, b } => (*a..=*b).contains(&x.get(0)),
        }
    }

    fn breakpoints_1d(&self) -> Vec<f64> {
        match self {
            Window::Ball { center, .. } => vec![center.get(0)],
            Window::Interval { .. } => Vec::new(),
        }
    }

    /// The window intersected with the closed domain (and support) in 1-D.
    fn interval_in(&self, domain: &Domain, support: Option<&Support>) -> Option<(f64, f64)> {
        let (mut a, mut b) = match self {
            Window::Ball { center, radius } => (center.get(0) - radius, center.get(0) + radius),
            Window::Interval { a, b } => (*a, *b),
        };
        match domain.kind {
            DomainKind::WholeSpace { .. } => {}
            DomainKind::HalfSpace { .. } => a = a.max(0.0),
            DomainKind::Interval { length } => {
                a = a.max(0.0);
                b = b.min(length);
            }
        }
        if let Some(s) = support {
            a = a.max(s.center.get(0) - s.radius);
            b = b.min(s.center.get(0) + s.radius);
        }
        if !(a.is_finite() && b.is_finite()) {
            return None;
        }
        (a < b).then_some((a, b))
    }
}

/// Build `κ·μ_i` for the given domain.
pub fn make_family(family: &SingularFamily, domain: &Domain) -> Result<MeasureSpec> {
    domain.validate()?;
    let n = domain.dim();
    let z = family.anchor;
    let p = family.p;
    if z.dim() != n {
        return Err(Error::InvalidFamily(format!(
            "anchor has dimension {}, domain {n}",
            z.dim()
        )));
    }
    if !domain.has_boundary() {
        return Err(Error::InvalidFamily(
            "the families need a domain with boundary".into(),
        ));
    }
    if !domain.contains(&z) {
        return Err(Error::InvalidFamily(
            "anchor outside the closed domain".into(),
        ));
    }
    if !(family.kappa >= 0.0 && family.kappa.is_finite()) {
        return Err(Error::InvalidFamily(
            "kappa must be finite and nonnegative".into(),
        ));
    }
    let pn = critical_exponent(n);
    let pn1 = critical_exponent(n + 1);
    let on_boundary = domain.is_boundary(&z);
    let nf = n as f64;
    let (density, boundary) = match family.id {
        FamilyId::Mu1 => {
            if on_boundary {
                return Err(Error::InvalidFamily("mu1 needs an interior anchor".into()));
            }
            if p < pn - CRITICAL_EPS {
                return Err(Error::InvalidFamily(format!("mu1 needs p ≥ p_N = {pn}")));
            }
            let (a, b) = if (p - pn).abs() < CRITICAL_EPS {
                (nf, 0.5 * nf + 1.0)
            } else {
                (2.0 / (p - 1.0), 0.0)
            };
            (Some(a_radial(z, a, b)), None)
        }
        FamilyId::Mu2 => {
            if !on_boundary {
                return Err(Error::InvalidFamily("mu2 needs a boundary anchor".into()));
            }
            if p < pn1 - CRITICAL_EPS {
                return Err(Error::InvalidFamily(format!(
                    "mu2 needs p ≥ p_(N+1) = {pn1}"
                )));
            }
            let (a, b) = if (p - pn1).abs() < CRITICAL_EPS {
                (nf + 1.0, 0.5 * (nf + 1.0) + 1.0)
            } else {
                (2.0 / (p - 1.0), 0.0)
            };
            (Some(a_radial(z, a, b)), None)
        }
        FamilyId::Mu3 => {
            if !on_boundary {
                return Err(Error::InvalidFamily("mu3 needs a boundary anchor".into()));
            }
            if !(p >= pn1 - CRITICAL_EPS && p < 2.0) {
                return Err(Error::InvalidFamily(format!(
                    "mu3 needs p_(N+1) = {pn1} ≤ p < 2, which is empty unless N ≥ 2"
                )));
            }
            let (a, b) = if (p - pn1).abs() < CRITICAL_EPS {
                (nf - 1.0, 0.5 * (nf + 1.0) + 1.0)
            } else {
                (2.0 * (2.0 - p) / (p - 1.0), 0.0)
            };
            (None, Some(a_radial(z, a, b)))
        }
    };
    Ok(MeasureSpec {
        interior: density.map(|d| InteriorPart {
            density: d,
            weight: WeightMode::DistanceWeighted,
        }),
        boundary,
        atoms: Vec::new(),
        support: None,
        family: Some(*family),
        scale: family.kappa,
    })
}

fn a_radial(center: Point, power: f64, log_power: f64) -> Density {
    Density::Radial {
        center,
        power,
        log_power,
        radius: 1.0,
    }
}

/// `μ(B_Ω(z, σ))` for the closed ball.
pub fn ball_mass(
    mu: &MeasureSpec,
    domain: &Domain,
    z: &Point,
    sigma: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if !(sigma > 0.0) {
        return Err(invalid("ball radius must be positive"));
    }
    mu.integrate(domain, &Window::ball(*z, sigma), |_, _| 1.0, opts)
}

/// `∫_{B_Ω(z,√s)} dμ(y) / (d(y) + √s)`.
pub fn weighted_ball_integral(
    mu: &MeasureSpec,
    domain: &Domain,
    z: &Point,
    s: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if !(s > 0.0) {
        return Err(invalid("s must be positive"));
    }
    let rs = s.sqrt();
    mu.integrate(domain, &Window::ball(*z, rs), |_, d| 1.0 / (d + rs), opts)
}

/// `κ·μ`.
pub fn scale(mu: &MeasureSpec, kappa: f64) -> MeasureSpec {
    assert!(
        kappa >= 0.0 && kappa.is_finite(),
        "scale factor must be finite and nonnegative"
    );
    let mut m = mu.clone();
    m.scale *= kappa;
    if let Some(f) = &mut m.family {
        f.kappa *= kappa;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> QuadOptions {
        QuadOptions::new(1e-12, 1e-10)
    }

    #[test]
    fn mu1_density_value() {
        let d = Domain::half_space(1);
        let mu = make_family(
            &SingularFamily::new(FamilyId::Mu1, Point::x1(1.0), 4.0, 1.0),
            &d,
        )
        .unwrap();
        let v = mu.interior_density(&Point::x1(1.1), &d);
        let want = 1.1 * 0.1f64.powf(-2.0 / 3.0);
        assert!((v - want).abs() < 1e-12 * want);
    }

    #[test]
    fn mu2_log_critical_carries_power_two() {
        // For N = 1 the critical exponent of the boundary family is p = 2.
        let d = Domain::half_space(1);
        let mu = make_family(
            &SingularFamily::new(FamilyId::Mu2, Point::x1(0.0), 2.0, 1.0),
            &d,
        )
        .unwrap();
        let x = 0.05f64;
        let want = x * x.powi(-2) * (E + 1.0 / x).ln().powi(-2);
        assert!((mu.interior_density(&Point::x1(x), &d) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn family_constraints() {
        let d1 = Domain::half_space(1);
        let mu3 = SingularFamily::new(FamilyId::Mu3, Point::x1(0.0), 1.9, 1.0);
        assert!(matches!(
            make_family(&mu3, &d1),
            Err(Error::InvalidFamily(_))
        ));
        let mu1 = SingularFamily::new(FamilyId::Mu1, Point::x1(1.0), 2.5, 1.0);
        assert!(make_family(&mu1, &d1).is_err());
        let mu2 = SingularFamily::new(FamilyId::Mu2, Point::x1(0.5), 4.0, 1.0);
        assert!(make_family(&mu2, &d1).is_err());
    }

    #[test]
    fn zero_kappa_is_the_zero_measure() {
        let d = Domain::half_space(1);
        let mu = make_family(
            &SingularFamily::new(FamilyId::Mu1, Point::x1(1.0), 4.0, 0.0),
            &d,
        )
        .unwrap();
        assert!(mu.is_zero());
        assert_eq!(
            ball_mass(&mu, &d, &Point::x1(1.0), 0.5, &opts())
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn mu1_ball_mass_closed_form() {
        // ∫_{|u|<σ} (1+u)|u|^{-2/3} du = 6σ^{1/3}.
        let d = Domain::half_space(1);
        let mu = make_family(
            &SingularFamily::new(FamilyId::Mu1, Point::x1(1.0), 4.0, 1.0),
            &d,
        )
        .unwrap();
        // Sampling stops where `x − 1` loses resolution, which limits the
        // relative accuracy to about 1e-10.
        for s in [1e-3, 0.1, 0.5] {
            let m = ball_mass(&mu, &d, &Point::x1(1.0), s, &QuadOptions::new(1e-12, 1e-9)).unwrap();
            let want = 6.0 * s.powf(1.0 / 3.0);
            assert!(
                (m.value - want).abs() < 1e-8 * want,
                "σ={s}: {m:?} vs {want}"
            );
        }
    }

    #[test]
    fn mu2_ball_mass_closed_form() {
        let d = Domain::half_space(1);
        let mu = make_family(
            &SingularFamily::new(FamilyId::Mu2, Point::x1(0.0), 4.0, 1.0),
            &d,
        )
        .unwrap();
        let m = ball_mass(&mu, &d, &Point::x1(0.0), 0.2, &opts()).unwrap();
        let want = 0.75 * 0.2f64.powf(4.0 / 3.0);
        assert!((m.value - want).abs() < 1e-9 * want, "{m:?}");
    }

    #[test]
    fn mu3_surface_mass_closed_form() {
        let d = Domain::half_space(2);
        let mu = make_family(
            &SingularFamily::new(FamilyId::Mu3, Point::new(&[0.0, 0.0]), 1.8, 1.0),
            &d,
        )
        .unwrap();
        let m = ball_mass(&mu, &d, &Point::new(&[0.0, 0.0]), 0.04, &opts()).unwrap();
        assert!((m.value - 4.0 * 0.2).abs() < 1e-9, "{m:?}");
        // A ball that misses the boundary carries nothing.
        let off = ball_mass(&mu, &d, &Point::new(&[0.0, 0.5]), 0.2, &opts()).unwrap();
        assert_eq!(off.value, 0.0);
    }

    #[test]
    fn log_critical_mu1_mass_against_antiderivative() {
        // ∫_{|u|<σ} (1+u)|u|^{-1}[log(e+1/|u|)]^{-3/2} du: the odd part cancels and
        // d/dr 2L^{-1/2} = r^{-1}L^{-3/2}/(1+er), so compare to a direct u-integral.
        let d = Domain::half_space(1);
        let mu = make_family(
            &SingularFamily::new(FamilyId::Mu1, Point::x1(1.0), 3.0, 1.0),
            &d,
        )
        .unwrap();
        let s = 1e-3f64;
        let m = ball_mass(&mu, &d, &Point::x1(1.0), s, &QuadOptions::new(1e-10, 1e-8)).unwrap();
        let g = |u: f64| (E + u.exp()).ln().powf(-1.5);
        let body = integrate_1d(g, -s.ln(), 600.0, &QuadOptions::abs(1e-13), &[], &[])
            .unwrap()
            .value;
        let want = 2.0 * (body + 2.0 * (E + 600f64.exp()).ln().powf(-0.5));
        assert!((m.value - want).abs() < 1e-7 * want, "{m:?} vs {want}");
    }

    #[test]
    fn atoms_count_on_the_closed_ball() {
        let d = Domain::half_space(1);
        let mu = MeasureSpec::atom(Point::x1(1.0), 3.0).with_atom(Point::x1(2.0), 1.0);
        assert_eq!(
            ball_mass(&mu, &d, &Point::x1(1.5), 0.5, &opts())
                .unwrap()
                .value,
            4.0
        );
        assert_eq!(
            ball_mass(&mu, &d, &Point::x1(1.0), 0.1, &opts())
                .unwrap()
                .value,
            3.0
        );
    }

    #[test]
    fn weighted_integral_of_an_atom() {
        let d = Domain::half_space(1);
        let mu = MeasureSpec::atom(Point::x1(1.0), 2.0);
        let v = weighted_ball_integral(&mu, &d, &Point::x1(1.0), 1.0, &opts()).unwrap();
        assert_eq!(v.value, 1.0);
    }

    #[test]
    fn boundary_measure_weight_is_inverse_root() {
        let d = Domain::half_space(2);
        let mu = MeasureSpec::boundary(Density::Constant { value: 1.0 });
        let s = 0.04;
        let v = weighted_ball_integral(&mu, &d, &Point::new(&[0.0, 0.0]), s, &opts()).unwrap();
        let surface = 2.0 * s.sqrt();
        assert!((v.value - surface / s.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn tabulated_density_is_piecewise_constant() {
        let csv = "x,density\n0.0,1.0\n1.0,2.0\n2.0,4.0\n";
        let t = Tabulated::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.eval(&Point::x1(0.4)), 1.0);
        assert_eq!(t.eval(&Point::x1(0.6)), 2.0);
        assert_eq!(t.eval(&Point::x1(2.4)), 4.0);
        assert_eq!(t.eval(&Point::x1(2.6)), 0.0);
        let mu = MeasureSpec::interior(Density::Tabulated(t), WeightMode::Lebesgue);
        let d = Domain::whole_space(1);
        let m = ball_mass(&mu, &d, &Point::x1(1.0), 5.0, &opts()).unwrap();
        assert!(
            (m.value - (0.5 * 1.0 + 1.0 * 2.0 + 1.0 * 4.0 + 0.5)).abs() < 1e-10,
            "{m:?}"
        );
    }

    #[test]
    fn scaling_is_linear_and_associative() {
        let d = Domain::half_space(1);
        let mu = make_family(
            &SingularFamily::new(FamilyId::Mu1, Point::x1(1.0), 4.0, 1.0),
            &d,
        )
        .unwrap();
        let z = Point::x1(1.2);
        let m1 = ball_mass(&mu, &d, &z, 0.3, &opts()).unwrap().value;
        let m2 = ball_mass(&scale(&mu, 2.0), &d, &z, 0.3, &opts())
            .unwrap()
            .value;
        assert!((m2 - 2.0 * m1).abs() <= 1e-12 * m2);
        let a = ball_mass(&scale(&scale(&mu, 3.0), 0.5), &d, &z, 0.3, &opts())
            .unwrap()
            .value;
        let b = ball_mass(&scale(&mu, 1.5), &d, &z, 0.3, &opts())
            .unwrap()
            .value;
        assert!((a - b).abs() <= 1e-12 * a);
        assert_eq!(
            ball_mass(&scale(&mu, 1.0), &d, &z, 0.3, &opts())
                .unwrap()
                .value,
            m1
        );
    }
}
