//! Evaluation of expression trees on series arguments.

use super::theta::ThetaSeries;
use crate::error::{EvalError, SeriesError};
use crate::vf::{Expr, Params};

/// Substitutes `args` for the state variables of `e`, keeping terms up to `cap`.
///
/// Each subtree is evaluated with its own cap, widened by a degree estimate
/// of the sibling it is multiplied with, so that the result is exact up to
/// `cap` whenever those estimates are sharp. The returned `trunc` is honest
/// either way.
pub fn substitute(e: &Expr, args: &[ThetaSeries], params: &Params, cap: f64) -> Result<ThetaSeries, SeriesError> {
    let out = match e {
        Expr::Const(c) => ThetaSeries::constant(*c),
        Expr::Param(p) => ThetaSeries::constant(
            *params.get(p).ok_or_else(|| EvalError::UnboundParameter(p.clone()))?,
        ),
        Expr::Var(i) => args
            .get(*i)
            .ok_or(EvalError::DimensionMismatch { expected: i + 1, got: args.len() })?
            .clone(),
        Expr::Add(a, b) => substitute(a, args, params, cap)?.add(&substitute(b, args, params, cap)?),
        Expr::Neg(a) => substitute(a, args, params, cap)?.scale(-1.0),
        Expr::Mul(a, b) => {
            let sb = substitute(b, args, params, cap - lo_est(a, args))?;
            if sb.is_empty() && sb.trunc().is_infinite() {
                return Ok(ThetaSeries::zero());
            }
            let sa = substitute(a, args, params, cap - sb.lo())?;
            sa.mul(&sb)
        }
        Expr::Div(a, b) => {
            let la = lo_est(a, args);
            let lb = lo_est(b, args);
            let sb = substitute(b, args, params, cap - la + 2.0 * lb)?;
            let inv = sb.inverse(cap - la)?;
            let sa = substitute(a, args, params, cap - inv.lo())?;
            sa.mul(&inv)
        }
        Expr::Pow(a, r) => {
            let la = lo_est(a, args);
            let sa = substitute(a, args, params, cap - (r - 1.0) * la)?;
            power(&sa, *r, cap)?
        }
    };
    Ok(out.truncate(cap))
}

fn power(s: &ThetaSeries, r: f64, cap: f64) -> Result<ThetaSeries, SeriesError> {
    if r.fract() == 0.0 && r.abs() <= 64.0 {
        let n = r.abs() as u32;
        if r >= 0.0 {
            return Ok(s.powi(n, cap));
        }
        let g0 = s.deg();
        let inv = s.inverse(cap - (n as f64 - 1.0) * (-g0))?;
        return Ok(inv.powi(n, cap));
    }
    s.pow_real(r, cap)
}

/// Cheap estimate of the degree of `e` evaluated on `args`.
fn lo_est(e: &Expr, args: &[ThetaSeries]) -> f64 {
    match e {
        Expr::Const(c) => {
            if *c == 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        }
        Expr::Param(_) => 0.0,
        Expr::Var(i) => args.get(*i).map_or(0.0, ThetaSeries::lo),
        Expr::Add(a, b) => lo_est(a, args).min(lo_est(b, args)),
        Expr::Neg(a) => lo_est(a, args),
        Expr::Mul(a, b) => lo_est(a, args) + lo_est(b, args),
        Expr::Div(a, b) => {
            let la = lo_est(a, args);
            let lb = lo_est(b, args);
            if la.is_infinite() {
                la
            } else if lb.is_infinite() {
                0.0
            } else {
                la - lb
            }
        }
        Expr::Pow(a, r) => {
            let la = lo_est(a, args);
            if la.is_infinite() {
                if *r > 0.0 {
                    la
                } else {
                    0.0
                }
            } else {
                r * la
            }
        }
    }
}
