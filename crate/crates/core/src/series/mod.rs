//! Generalized power series in `theta = t_max - t` with `ln(theta)` powers.

pub mod param_poly;
pub mod substitute;
pub mod theta;

pub use param_poly::{param_name, MonomialJson, ParamPoly, EPS_CLEAN};
pub use substitute::substitute;
pub use theta::{primitive, TermJson, ThetaSeries, ThetaTerm, GAMMA_TOL};
