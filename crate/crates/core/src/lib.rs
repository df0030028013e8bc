//! Multi-order asymptotic expansions of type-I blow-up solutions for
//! asymptotically quasi-homogeneous autonomous ODEs.
//!
//! A solution blowing up at `t_max` is written as
//! `y_i(t) = theta^(-alpha_i/k) Y_i(theta)`, `theta = t_max - t`, where `Y` is a
//! generalized power series in `theta` and `ln(theta)`. The pipeline is
//! parse ([`dsl`]) -> balance law and spectrum ([`spectral`]) -> inductive
//! expansion ([`expansion`]) -> symbolic and numeric checks ([`validate`]).

pub mod builtins;
pub mod dsl;
pub mod error;
pub mod expansion;
pub mod report;
pub mod series;
pub mod spectral;
pub mod validate;
pub mod vf;

pub use error::Error;
