//! Numerical laboratory for the Dirichlet semilinear heat equation
//! `∂ₜu = Δu + uᵖ` with nonnegative measure initial data.

// Guards are written as `!(x > a)` so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod criteria;
pub mod domain;
pub mod error;
pub mod kernel;
pub mod measure;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod trace;

pub use domain::{Domain, DomainKind, Point};
pub use error::{Error, Result};
pub use measure::{Density, FamilyId, MeasureSpec, SingularFamily, WeightMode, Window};
pub use quadrature::{QuadOptions, QuadResult, Region, SingularityHint, Tol};
