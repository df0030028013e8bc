//! Real polynomials in the free parameters `C1, C2, ...`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::vf::Params;

/// Coefficients below this magnitude are dropped.
pub const EPS_CLEAN: f64 = 1e-13;

/// Name of the free parameter with zero-based index `i`.
pub fn param_name(i: usize) -> String {
    format!("C{}", i + 1)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamPoly {
    // Exponent vectors have trailing zeros trimmed, so the constant monomial is `[]`.
    terms: BTreeMap<Vec<u32>, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonomialJson {
    pub params: Vec<u32>,
    pub c: f64,
}

fn trim(mut e: Vec<u32>) -> Vec<u32> {
    while e.last() == Some(&0) {
        e.pop();
    }
    e
}

impl ParamPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_monomial(Vec::new(), c);
        p.cleanup();
        p
    }

    /// `c * C_{i+1}`.
    pub fn param(i: usize, c: f64) -> Self {
        let mut e = vec![0; i + 1];
        e[i] = 1;
        let mut p = Self::zero();
        p.add_monomial(e, c);
        p.cleanup();
        p
    }

    pub fn from_monomials(monos: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Self {
        let mut p = Self::zero();
        for (e, c) in monos {
            p.add_monomial(trim(e), c);
        }
        p.cleanup();
        p
    }

    fn add_monomial(&mut self, e: Vec<u32>, c: f64) {
        *self.terms.entry(e).or_insert(0.0) += c;
    }

    pub fn cleanup(&mut self) {
        self.terms.retain(|_, c| c.abs() >= EPS_CLEAN);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value if the polynomial is parameter-free.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&Vec::new()).copied(),
            _ => None,
        }
    }

    /// Coefficient of the constant monomial.
    pub fn constant_part(&self) -> f64 {
        self.terms.get(&Vec::new()).copied().unwrap_or(0.0)
    }

    pub fn coefficient(&self, exps: &[u32]) -> f64 {
        self.terms.get(&trim(exps.to_vec())).copied().unwrap_or(0.0)
    }

    pub fn monomials(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    /// Number of parameters the polynomial mentions (highest index + 1).
    pub fn n_params(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_monomial(e.clone(), *c);
        }
        out.cleanup();
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        };
        out.cleanup();
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let len = ea.len().max(eb.len());
                let e: Vec<u32> = (0..len)
                    .map(|i| ea.get(i).copied().unwrap_or(0) + eb.get(i).copied().unwrap_or(0))
                    .collect();
                out.add_monomial(e, ca * cb);
            }
        }
        out.cleanup();
        out
    }

    /// Evaluates with parameters looked up by name (`C1`, `C2`, ...).
    pub fn eval(&self, bindings: &Params) -> Result<f64, String> {
        let mut total = 0.0;
        for (e, c) in &self.terms {
            let mut v = *c;
            for (i, p) in e.iter().enumerate() {
                if *p > 0 {
                    let name = param_name(i);
                    let x = bindings.get(&name).ok_or(name)?;
                    v *= x.powi(*p as i32);
                }
            }
            total += v;
        }
        Ok(total)
    }

    /// Substitutes numeric values for all parameters with a binding and
    /// leaves the others symbolic.
    pub fn bind(&self, bindings: &Params) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            let mut v = *c;
            let mut rest = e.clone();
            for (i, p) in e.iter().enumerate() {
                if *p > 0 {
                    if let Some(x) = bindings.get(&param_name(i)) {
                        v *= x.powi(*p as i32);
                        rest[i] = 0;
                    }
                }
            }
            out.add_monomial(trim(rest), v);
        }
        out.cleanup();
        out
    }

    pub fn to_json(&self) -> Vec<MonomialJson> {
        self.terms.iter().map(|(e, c)| MonomialJson { params: e.clone(), c: *c }).collect()
    }
}

impl fmt::Display for ParamPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (e, c)) in self.terms.iter().enumerate() {
            let mono: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0)
                .map(|(i, p)| if *p == 1 { param_name(i) } else { format!("{}^{}", param_name(i), p) })
                .collect();
            let (sign, mag) = if *c < 0.0 { ("-", -c) } else { ("+", *c) };
            if idx == 0 {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mono.is_empty() {
                write!(f, "{mag}")?;
            } else if mag == 1.0 {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{mag}*{}", mono.join("*"))?;
            }
        }
        Ok(())
    }
}
