//! Spatial domains with explicit Dirichlet heat kernels and their distance
//! functions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Smallest time accepted by any kernel evaluation.
pub const MIN_TIME: f64 = 1e-12;

/// A point in `R^N`, `N ≤ 3`. Unused trailing coordinates are zero.
/// Serialized as the list of its `N` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct Point {
    coords: [f64; 3],
    dim: usize,
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.coords().to_vec()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = String;

    fn try_from(v: Vec<f64>) -> std::result::Result<Self, String> {
        if (1..=3).contains(&v.len()) {
            Ok(Point::new(&v))
        } else {
            Err(format!("a point needs 1 to 3 coordinates, got {}", v.len()))
        }
    }
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            (1..=3).contains(&coords.len()),
            "points live in dimension 1..=3"
        );
        let mut c = [0.0; 3];
        c[..coords.len()].copy_from_slice(coords);
        Self {
            coords: c,
            dim: coords.len(),
        }
    }

    pub fn x1(x: f64) -> Self {
        Self::new(&[x])
    }

    pub fn origin(dim: usize) -> Self {
        Self::new(&vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.coords[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        self.coords[i] = v;
    }

    /// Last coordinate, the normal direction of the half-space.
    pub fn last(&self) -> f64 {
        self.coords[self.dim - 1]
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Euclidean distance, safe against underflow of the squares.
    pub fn dist(&self, other: &Point) -> f64 {
        let mut d = [0.0; 3];
        for ((di, a), b) in d
            .iter_mut()
            .zip(&self.coords)
            .zip(&other.coords)
            .take(self.dim)
        {
            *di = a - b;
        }
        scaled_norm(&d[..self.dim])
    }

    pub fn norm(&self) -> f64 {
        scaled_norm(self.coords())
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }

    /// `self + s * dir`.
    pub fn offset(&self, dir: &[f64], s: f64) -> Point {
        let mut p = *self;
        for (i, d) in dir.iter().enumerate().take(self.dim) {
            p.coords[i] += s * d;
        }
        p
    }
}

fn scaled_norm(v: &[f64]) -> f64 {
    let m = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * v.iter().map(|a| (a / m) * (a / m)).sum::<f64>().sqrt()
}

/// Domain variants with explicitly known Dirichlet heat kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    WholeSpace { dim: usize },
    HalfSpace { dim: usize },
    Interval { length: f64 },
}

/// A spatial domain together with its series/tail truncation tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    /// Relative tolerance `τ` used for Gaussian tails and kernel series.
    pub series_tol: f64,
    /// Maximal number of terms any kernel series may use.
    pub max_terms: usize,
}

impl Domain {
    pub fn whole_space(dim: usize) -> Self {
        Self::with_kind(DomainKind::WholeSpace { dim })
    }

    pub fn half_space(dim: usize) -> Self {
        Self::with_kind(DomainKind::HalfSpace { dim })
    }

    pub fn interval(length: f64) -> Self {
        Self::with_kind(DomainKind::Interval { length })
    }

    fn with_kind(kind: DomainKind) -> Self {
        Self {
            kind,
            series_tol: 1e-16,
            max_terms: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DomainKind::WholeSpace { dim } | DomainKind::HalfSpace { dim } => {
                if !(1..=3).contains(&dim) {
                    return Err(invalid(format!("dimension {dim} outside 1..=3")));
                }
            }
            DomainKind::Interval { length } => {
                if !(length > 0.0 && length.is_finite()) {
                    return Err(invalid(format!(
                        "interval length {length} must be positive"
                    )));
                }
            }
        }
        if !(self.series_tol > 0.0 && self.series_tol < 1.0) {
            return Err(invalid("series tolerance must lie in (0,1)"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::WholeSpace { dim } | DomainKind::HalfSpace { dim } => dim,
            DomainKind::Interval { .. } => 1,
        }
    }

    pub fn has_boundary(&self) -> bool {
        !matches!(self.kind, DomainKind::WholeSpace { .. })
    }

    /// Distance to the boundary; `+∞` in the whole space.
    pub fn distance(&self, x: &Point) -> f64 {
        match self.kind {
            DomainKind::WholeSpace { .. } => f64::INFINITY,
            DomainKind::HalfSpace { .. } => x.last().max(0.0),
            DomainKind::Interval { length } => x.get(0).min(length - x.get(0)).max(0.0),
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        if x.dim() != self.dim() || !x.is_finite() {
            return false;
        }
        match self.kind {
            DomainKind::WholeSpace { .. } => true,
            DomainKind::HalfSpace { .. } => x.last() >= 0.0,
            DomainKind::Interval { length } => (0.0..=length).contains(&x.get(0)),
        }
    }

    pub fn is_boundary(&self, x: &Point) -> bool {
        self.has_boundary() && self.distance(x) == 0.0
    }

    pub(crate) fn check_point(&self, x: &Point, what: &str) -> Result<()> {
        if !self.contains(x) {
            return Err(invalid(format!(
                "{what} {:?} is not in the closed domain {:?}",
                x.coords(),
                self.kind
            )));
        }
        Ok(())
    }

    /// Nearest boundary point; `None` for the whole space.
    pub fn project_to_boundary(&self, x: &Point) -> Option<Point> {
        match self.kind {
            DomainKind::WholeSpace { .. } => None,
            DomainKind::HalfSpace { dim } => {
                let mut p = *x;
                p.set(dim - 1, 0.0);
                Some(p)
            }
            DomainKind::Interval { length } => {
                let v = x.get(0);
                Some(Point::x1(if v <= length - v { 0.0 } else { length }))
            }
        }
    }

    /// Inner unit normal at a boundary point.
    pub fn inner_normal(&self, y: &Point) -> Option<Vec<f64>> {
        match self.kind {
            DomainKind::WholeSpace { .. } => None,
            DomainKind::HalfSpace { dim } => {
                let mut n = vec![0.0; dim];
                n[dim - 1] = 1.0;
                Some(n)
            }
            DomainKind::Interval { length } => {
                Some(vec![if y.get(0) <= 0.5 * length { 1.0 } else { -1.0 }])
            }
        }
    }

    /// Radius beyond which a Gaussian factor `exp(-r²/4t)` drops below `tol`.
    pub fn gaussian_radius(t: f64, tol: f64) -> f64 {
        (4.0 * t * (1.0 / tol).ln()).sqrt()
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !(t >= MIN_TIME) || !t.is_finite() {
        return Err(invalid(format!(
            "time {t} must be finite and ≥ {MIN_TIME:e}"
        )));
    }
    Ok(())
}
