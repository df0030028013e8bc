//! Vector fields: expression trees, evaluation, Jacobians and the
//! quasi-homogeneous decomposition.

pub mod expr;
pub mod field;

pub use expr::{Expr, Params};
pub use field::{auto_split, Certificates, QhType, VectorField};
