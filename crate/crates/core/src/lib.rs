//! Reduced order quadratures for fast weighted inner products of parameterized
//! functions.

// `!(x > tol)` is used on purpose so NaN fails the test too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eim;
pub mod error;
pub mod experiments;
pub mod families;
pub mod greedy;
pub mod hashing;
pub mod linalg;
pub mod quadrature;
pub mod roq;

pub use error::{Result, RoqError};
pub use linalg::{ComplexMatrix, C64};
pub use quadrature::QuadratureRule;
