//! Expression trees for vector-field components.
//!
//! Exponents of [`Expr::Pow`] are always real literals; parameters that appear
//! in exponents are folded to numbers before a tree is built.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::EvalError;

/// Real-valued parameter bindings, keyed by name.
pub type Params = BTreeMap<String, f64>;

/// Denominators smaller than this in magnitude are rejected during evaluation.
pub const TOL_DIV: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based index into the state vector.
    Var(usize),
    Param(String),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Neg(Box<Expr>),
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn param(name: impl Into<String>) -> Self {
        Expr::Param(name.into())
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(Expr::Neg(Box::new(b))))
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Self {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: Expr, r: f64) -> Self {
        Expr::Pow(Box::new(a), r)
    }

    pub fn neg(a: Expr) -> Self {
        Expr::Neg(Box::new(a))
    }

    /// Sum of a list of expressions; the empty sum is the zero constant.
    pub fn sum(terms: Vec<Expr>) -> Self {
        let mut it = terms.into_iter();
        match it.next() {
            None => Expr::zero(),
            Some(first) => it.fold(first, Expr::add),
        }
    }

    pub fn eval(&self, point: &[f64], params: &Params) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(i) => point
                .get(*i)
                .copied()
                .ok_or(EvalError::DimensionMismatch { expected: *i + 1, got: point.len() }),
            Expr::Param(name) => params
                .get(name)
                .copied()
                .ok_or_else(|| EvalError::UnboundParameter(name.clone())),
            Expr::Add(a, b) => Ok(a.eval(point, params)? + b.eval(point, params)?),
            Expr::Mul(a, b) => Ok(a.eval(point, params)? * b.eval(point, params)?),
            Expr::Div(a, b) => {
                let den = b.eval(point, params)?;
                if den.abs() < TOL_DIV {
                    return Err(EvalError::DivisionNearZero(den));
                }
                Ok(a.eval(point, params)? / den)
            }
            Expr::Pow(a, r) => real_pow(a.eval(point, params)?, *r),
            Expr::Neg(a) => Ok(-a.eval(point, params)?),
        }
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) | Expr::Param(_) => Expr::zero(),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => simp_add(a.diff(var), b.diff(var)),
            Expr::Neg(a) => simp_neg(a.diff(var)),
            Expr::Mul(a, b) => simp_add(
                simp_mul(a.diff(var), (**b).clone()),
                simp_mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let da = a.diff(var);
                let db = b.diff(var);
                if db.is_zero() {
                    return simp_div(da, (**b).clone());
                }
                let num = simp_add(
                    simp_mul(da, (**b).clone()),
                    simp_neg(simp_mul((**a).clone(), db)),
                );
                simp_div(num, Expr::pow((**b).clone(), 2.0))
            }
            Expr::Pow(a, r) => {
                let da = a.diff(var);
                if da.is_zero() || *r == 0.0 {
                    return Expr::zero();
                }
                let outer = if *r == 1.0 {
                    Expr::Const(1.0)
                } else if *r - 1.0 == 1.0 {
                    simp_mul(Expr::Const(*r), (**a).clone())
                } else {
                    simp_mul(Expr::Const(*r), Expr::pow((**a).clone(), *r - 1.0))
                };
                simp_mul(outer, da)
            }
        }
    }

    pub fn has_vars(&self) -> bool {
        match self {
            Expr::Var(_) => true,
            Expr::Const(_) | Expr::Param(_) => false,
            Expr::Add(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.has_vars() || b.has_vars(),
            Expr::Pow(a, _) | Expr::Neg(a) => a.has_vars(),
        }
    }

    pub fn max_var_index(&self) -> Option<usize> {
        match self {
            Expr::Var(i) => Some(*i),
            Expr::Const(_) | Expr::Param(_) => None,
            Expr::Add(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var_index().max(b.max_var_index())
            }
            Expr::Pow(a, _) | Expr::Neg(a) => a.max_var_index(),
        }
    }

    pub fn params_used(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param(p) => {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Add(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.params_used(out);
                b.params_used(out);
            }
            Expr::Pow(a, _) | Expr::Neg(a) => a.params_used(out),
        }
    }

    /// True when the tree contains no quotient with a state-dependent denominator
    /// and no non-integer power of a state-dependent base.
    pub fn is_polynomial(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => true,
            Expr::Add(a, b) | Expr::Mul(a, b) => a.is_polynomial() && b.is_polynomial(),
            Expr::Div(a, b) => a.is_polynomial() && !b.has_vars(),
            Expr::Pow(a, r) => {
                !a.has_vars() || (a.is_polynomial() && r.fract() == 0.0 && *r >= 0.0)
            }
            Expr::Neg(a) => a.is_polynomial(),
        }
    }

    /// Splits a top-level sum into its signed terms.
    pub fn terms(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        collect_terms(self, false, &mut out);
        out
    }

    /// Exponent vector of a monomial `c * prod y_l^beta_l`, or `None` if the
    /// expression is not a single monomial. Coefficients may involve parameters.
    pub fn monomial_exponents(&self, n: usize) -> Option<Vec<f64>> {
        if !self.has_vars() {
            return Some(vec![0.0; n]);
        }
        match self {
            Expr::Var(i) => {
                let mut e = vec![0.0; n];
                *e.get_mut(*i)? = 1.0;
                Some(e)
            }
            Expr::Mul(a, b) => {
                let ea = a.monomial_exponents(n)?;
                let eb = b.monomial_exponents(n)?;
                Some(ea.iter().zip(&eb).map(|(x, y)| x + y).collect())
            }
            Expr::Div(a, b) => {
                let ea = a.monomial_exponents(n)?;
                let eb = b.monomial_exponents(n)?;
                Some(ea.iter().zip(&eb).map(|(x, y)| x - y).collect())
            }
            Expr::Pow(a, r) => Some(a.monomial_exponents(n)?.iter().map(|x| x * r).collect()),
            Expr::Neg(a) => a.monomial_exponents(n),
            _ => None,
        }
    }

    /// Pretty-printer using variable names; the output reparses to the same tree.
    pub fn display<'a>(&'a self, vars: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, vars }
    }
}

fn collect_terms(e: &Expr, negated: bool, out: &mut Vec<Expr>) {
    match e {
        Expr::Add(a, b) => {
            collect_terms(a, negated, out);
            collect_terms(b, negated, out);
        }
        Expr::Neg(a) if matches!(**a, Expr::Add(..)) => collect_terms(a, !negated, out),
        _ if e.is_zero() => {}
        _ => out.push(if negated { Expr::neg(e.clone()) } else { e.clone() }),
    }
}

/// `base^r` with the convention that non-integer exponents require a
/// nonnegative base.
pub fn real_pow(base: f64, r: f64) -> Result<f64, EvalError> {
    if r.fract() == 0.0 && r.abs() < 1e9 {
        if base == 0.0 && r < 0.0 {
            return Err(EvalError::DivisionNearZero(base));
        }
        return Ok(base.powi(r as i32));
    }
    if base < 0.0 {
        return Err(EvalError::NegativeBaseRealPower(base));
    }
    if base == 0.0 && r < 0.0 {
        return Err(EvalError::DivisionNearZero(base));
    }
    Ok(base.powf(r))
}

fn simp_add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if a.is_zero() => b,
        _ if b.is_zero() => a,
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        _ => Expr::add(a, b),
    }
}

fn simp_neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::neg(other),
    }
}

fn simp_mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if a.is_zero() || b.is_zero() => Expr::zero(),
        (Expr::Const(x), _) if *x == 1.0 => b,
        (_, Expr::Const(y)) if *y == 1.0 => a,
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        _ => Expr::mul(a, b),
    }
}

fn simp_div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if a.is_zero() => Expr::zero(),
        (_, Expr::Const(y)) if *y == 1.0 => a,
        _ => Expr::div(a, b),
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    vars: &'a [String],
}

// Precedence levels: 1 sum, 2 product, 3 unary minus, 4 power, 5 atom.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(c) if *c < 0.0 => 3,
        _ => 5,
    }
}

impl ExprDisplay<'_> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |e: &Expr, f: &mut fmt::Formatter<'_>, min: u8| -> fmt::Result {
            if prec(e) < min {
                write!(f, "(")?;
                self.write(e, f)?;
                write!(f, ")")
            } else {
                self.write(e, f)
            }
        };
        match e {
            Expr::Const(c) => write!(f, "{}", fmt_num(*c)),
            Expr::Var(i) => match self.vars.get(*i) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "y{}", i + 1),
            },
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Add(a, b) => {
                child(a, f, 1)?;
                match &**b {
                    Expr::Neg(inner) => {
                        write!(f, " - ")?;
                        child(inner, f, 2)
                    }
                    _ => {
                        write!(f, " + ")?;
                        child(b, f, 2)
                    }
                }
            }
            Expr::Mul(a, b) => {
                child(a, f, 2)?;
                write!(f, "*")?;
                child(b, f, 3)
            }
            Expr::Div(a, b) => {
                child(a, f, 2)?;
                write!(f, "/")?;
                child(b, f, 3)
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                child(a, f, 3)
            }
            Expr::Pow(a, r) => {
                child(a, f, 5)?;
                if *r < 0.0 {
                    write!(f, "^({})", fmt_num(*r))
                } else {
                    write!(f, "^{}", fmt_num(*r))
                }
            }
        }
    }
}

fn fmt_num(c: f64) -> String {
    let s = format!("{c}");
    if c < 0.0 {
        format!("({s})")
    } else {
        s
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kk_v() -> Expr {
        // (1/3)*u^3 - u
        Expr::sub(
            Expr::mul(Expr::div(Expr::Const(1.0), Expr::Const(3.0)), Expr::pow(Expr::var(0), 3.0)),
            Expr::var(0),
        )
    }

    #[test]
    fn evaluates_keyfitz_kranser_component() {
        let v = kk_v();
        let got = v.eval(&[1.0, 1.0], &Params::new()).unwrap();
        assert!((got - (1.0 / 3.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_quotient() {
        // d/dx x/(x+2) = 2/(x+2)^2
        let e = Expr::div(Expr::var(0), Expr::add(Expr::var(0), Expr::Const(2.0)));
        let d = e.diff(0);
        let x = 0.7;
        let got = d.eval(&[x], &Params::new()).unwrap();
        assert!((got - 2.0 / (x + 2.0_f64).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn real_power_rejects_negative_base() {
        let e = Expr::pow(Expr::var(0), 1.5);
        assert!(matches!(
            e.eval(&[-1.0], &Params::new()),
            Err(EvalError::NegativeBaseRealPower(_))
        ));
        assert_eq!(Expr::pow(Expr::var(0), 3.0).eval(&[-2.0], &Params::new()).unwrap(), -8.0);
    }

    #[test]
    fn division_near_zero_is_an_error() {
        let e = Expr::div(Expr::Const(1.0), Expr::var(0));
        assert!(matches!(e.eval(&[1e-13], &Params::new()), Err(EvalError::DivisionNearZero(_))));
    }

    #[test]
    fn unbound_parameter() {
        let e = Expr::param("a");
        assert!(matches!(e.eval(&[], &Params::new()), Err(EvalError::UnboundParameter(_))));
    }

    #[test]
    fn monomial_exponents_and_terms() {
        let v = kk_v();
        let terms = v.terms();
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[0].monomial_exponents(2), Some(vec![3.0, 0.0]));
        assert_eq!(terms[1].monomial_exponents(2), Some(vec![1.0, 0.0]));
        let q = Expr::div(Expr::var(0), Expr::add(Expr::var(1), Expr::var(0)));
        assert_eq!(q.monomial_exponents(2), None);
    }

    #[test]
    fn negated_sums_distribute_over_terms() {
        // u - (v - w)  ->  u, -v, --w
        let e = Expr::sub(Expr::var(0), Expr::sub(Expr::var(1), Expr::var(2)));
        let t = e.terms();
        assert_eq!(t.len(), 3);
        let p = Params::new();
        let x = [1.0, 2.0, 3.0];
        let total: f64 = t.iter().map(|t| t.eval(&x, &p).unwrap()).sum();
        assert_eq!(total, e.eval(&x, &p).unwrap());
    }
}
