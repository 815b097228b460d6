//! Semigroups of rational maps: exact composition algebra, relation finding,
//! measure estimates and transfer-operator experiments.

pub mod algebra;
pub mod entropy;
pub mod error;
pub mod orbits;
pub mod relations;
pub mod ruelle;
pub mod semigroup;

pub use algebra::{GaussianRational, Poly, RatMap};
pub use error::{Error, Result};
