use serde::Serialize;

use crate::error::ValidationError;
use crate::expansion::BlowupExpansion;
use crate::series::{substitute, ThetaSeries, GAMMA_TOL};
use crate::vf::{Params, VectorField};

/// Outcome of substituting an expansion into the original ODE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualCheck {
    /// Lowest exponent of `y_i' - f_i(y)` whose coefficient survives cancellation.
    pub deg: Vec<f64>,
    /// Exponent below which every term must cancel: `final_below - 1 - alpha_i/k`.
    pub expected: Vec<f64>,
    /// Largest surviving coefficient below `expected`, relative to the size of the inputs.
    pub max_unmatched: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

/// `r_i = d/dt y_i - f_i(y)` with `y_i = theta^(-alpha_i/k) Y_i`, computed
/// in series arithmetic after binding the free parameters.
pub fn symbolic_residual(
    field: &VectorField,
    expansion: &BlowupExpansion,
    bindings: &Params,
) -> Result<Vec<ThetaSeries>, ValidationError> {
    Ok(residual_parts(field, expansion, bindings)?.into_iter().map(|(d, f)| d.sub(&f)).collect())
}

fn residual_parts(
    field: &VectorField,
    expansion: &BlowupExpansion,
    bindings: &Params,
) -> Result<Vec<(ThetaSeries, ThetaSeries)>, ValidationError> {
    let ys: Vec<ThetaSeries> = (0..expansion.n()).map(|i| expansion.y_series(i).bind(bindings)).collect();
    if ys.iter().any(|s| s.n_params() > 0) {
        return Err(ValidationError::UnboundParameter(
            expansion.free_params.iter().find(|p| !bindings.contains_key(*p)).cloned().unwrap_or_default(),
        ));
    }
    let mut out = Vec::with_capacity(ys.len());
    for (i, y) in ys.iter().enumerate() {
        let cap = y.trunc() - 1.0;
        let q = substitute(&field.quasi[i], &ys, &field.params, cap)?;
        let f = if field.residual[i].is_zero() {
            q
        } else {
            q.add(&substitute(&field.residual[i], &ys, &field.params, cap)?)
        };
        out.push((y.differentiate(), f));
    }
    Ok(out)
}

pub fn residual_check(
    field: &VectorField,
    expansion: &BlowupExpansion,
    bindings: &Params,
    tol: f64,
) -> Result<ResidualCheck, ValidationError> {
    let parts = residual_parts(field, expansion, bindings)?;
    let mut deg = Vec::new();
    let mut expected = Vec::new();
    let mut max_unmatched = Vec::new();
    for (i, (d, f)) in parts.iter().enumerate() {
        let scale = d
            .terms()
            .iter()
            .chain(f.terms())
            .map(|t| t.coeff.max_abs())
            .fold(1.0, f64::max);
        let r = d.sub(f);
        let exp_i = if expansion.exact {
            r.trunc()
        } else {
            expansion.final_below - 1.0 - field.qh.rate(i)
        };
        let mut first = f64::INFINITY;
        let mut worst: f64 = 0.0;
        for t in r.terms() {
            let c = t.coeff.max_abs() / scale;
            if t.gamma < exp_i - GAMMA_TOL {
                worst = worst.max(c);
            }
            if c > tol && first.is_infinite() {
                first = t.gamma;
            }
        }
        deg.push(first);
        expected.push(exp_i);
        max_unmatched.push(worst);
    }
    let pass = max_unmatched.iter().all(|w| *w <= tol)
        && deg.iter().zip(&expected).all(|(d, e)| *d >= e - GAMMA_TOL);
    Ok(ResidualCheck { deg, expected, max_unmatched, tol, pass })
}
