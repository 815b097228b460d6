//! Exact arithmetic over Q(i) and rational maps of the Riemann sphere.

pub mod gaussian;
pub mod literal;
pub mod poly;
pub mod probe;
pub mod ratmap;

pub use gaussian::GaussianRational;
pub use poly::Poly;
pub use ratmap::{
    compose, conjugate, derivative, iterate, maps_equal, normalize_centered, AffineMap, Budget, ExtPoint, MobiusMap,
    NumericMap, RatMap, Twist,
};
