//! Finite sums of `c * theta^gamma * ln(theta)^m`.
//!
//! Every series carries a truncation exponent `trunc`: its terms are exact for
//! `gamma <= trunc` and whatever was dropped has degree above it. Exact
//! series use `trunc = +inf`. Products track precision through degrees, so
//! `trunc(a*b) = min(trunc a + deg b, trunc b + deg a)`.

use std::fmt;

use serde::Serialize;

use super::param_poly::{MonomialJson, ParamPoly};
use crate::error::{EvalError, SeriesError};
use crate::vf::Params;

/// Exponents closer than this are the same lattice point.
pub const GAMMA_TOL: f64 = 1e-10;

const MAX_BINOMIAL_TERMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTerm {
    pub coeff: ParamPoly,
    pub gamma: f64,
    pub m: u32,
}

impl ThetaTerm {
    pub fn new(coeff: ParamPoly, gamma: f64, m: u32) -> Self {
        Self { coeff, gamma, m }
    }

    pub fn constant(c: f64, gamma: f64, m: u32) -> Self {
        Self { coeff: ParamPoly::constant(c), gamma, m }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSeries {
    terms: Vec<ThetaTerm>,
    trunc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermJson {
    pub gamma: f64,
    pub logpow: u32,
    pub coeff: Vec<MonomialJson>,
}

impl ThetaSeries {
    pub fn zero() -> Self {
        Self { terms: Vec::new(), trunc: f64::INFINITY }
    }

    /// Empty series known only up to `trunc`.
    pub fn zero_to(trunc: f64) -> Self {
        Self { terms: Vec::new(), trunc }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms(vec![ThetaTerm::constant(c, 0.0, 0)], f64::INFINITY)
    }

    pub fn monomial(c: f64, gamma: f64, m: u32) -> Self {
        Self::from_terms(vec![ThetaTerm::constant(c, gamma, m)], f64::INFINITY)
    }

    pub fn from_terms(terms: Vec<ThetaTerm>, trunc: f64) -> Self {
        let mut s = Self { terms, trunc };
        s.normalize();
        s
    }

    pub fn terms(&self) -> &[ThetaTerm] {
        &self.terms
    }

    pub fn trunc(&self) -> f64 {
        self.trunc
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Minimal exponent, `+inf` for the empty series.
    pub fn deg(&self) -> f64 {
        self.terms.first().map_or(f64::INFINITY, |t| t.gamma)
    }

    /// Lower bound on the degree of the represented function, counting the
    /// unknown remainder.
    pub fn lo(&self) -> f64 {
        self.deg().min(self.trunc)
    }

    pub fn max_log_power(&self) -> u32 {
        self.terms.iter().map(|t| t.m).max().unwrap_or(0)
    }

    /// Coefficient of `theta^gamma ln(theta)^m` (zero if absent).
    pub fn coeff(&self, gamma: f64, m: u32) -> ParamPoly {
        self.terms
            .iter()
            .find(|t| t.m == m && (t.gamma - gamma).abs() < 1e-9)
            .map(|t| t.coeff.clone())
            .unwrap_or_default()
    }

    /// Parameter-free coefficient at `(gamma, m)`; panics on symbolic coefficients.
    pub fn coeff_value(&self, gamma: f64, m: u32) -> f64 {
        self.coeff(gamma, m).as_constant().expect("coefficient depends on free parameters")
    }

    fn normalize(&mut self) {
        let mut raw = std::mem::take(&mut self.terms);
        raw.retain(|t| !t.coeff.is_zero());
        raw.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
        let mut out: Vec<ThetaTerm> = Vec::with_capacity(raw.len());
        let mut start = 0;
        while start < raw.len() {
            let rep = raw[start].gamma;
            let mut end = start;
            while end < raw.len() && raw[end].gamma - rep < GAMMA_TOL {
                end += 1;
            }
            let mut cluster: Vec<ThetaTerm> = Vec::new();
            for t in &raw[start..end] {
                match cluster.iter_mut().find(|c| c.m == t.m) {
                    Some(c) => c.coeff = c.coeff.add(&t.coeff),
                    None => cluster.push(ThetaTerm { coeff: t.coeff.clone(), gamma: rep, m: t.m }),
                }
            }
            cluster.retain(|t| !t.coeff.is_zero());
            cluster.sort_by_key(|t| std::cmp::Reverse(t.m));
            out.extend(cluster);
            start = end;
        }
        let trunc = self.trunc;
        out.retain(|t| t.gamma <= trunc + GAMMA_TOL);
        self.terms = out;
    }

    /// Lowers the truncation to `t` (never raises it).
    pub fn truncate(&self, t: f64) -> Self {
        let trunc = self.trunc.min(t);
        let terms = self.terms.iter().filter(|x| x.gamma <= trunc + GAMMA_TOL).cloned().collect();
        Self { terms, trunc }
    }

    /// Drops every term with `gamma >= below` while leaving `trunc` untouched;
    /// used to extract the finalized part of an expansion.
    pub fn terms_below(&self, below: f64) -> Self {
        let terms = self.terms.iter().filter(|x| x.gamma < below - GAMMA_TOL).cloned().collect();
        Self { terms, trunc: self.trunc }
    }

    pub fn with_trunc(mut self, trunc: f64) -> Self {
        self.trunc = trunc;
        self.normalize();
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(terms, self.trunc.min(other.trunc))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| ThetaTerm { coeff: t.coeff.scale(c), gamma: t.gamma, m: t.m })
            .collect();
        Self::from_terms(terms, self.trunc)
    }

    pub fn scale_poly(&self, p: &ParamPoly) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| ThetaTerm { coeff: t.coeff.mul(p), gamma: t.gamma, m: t.m })
            .collect();
        Self::from_terms(terms, self.trunc)
    }

    /// Multiplies by `theta^g`.
    pub fn shift(&self, g: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| ThetaTerm { coeff: t.coeff.clone(), gamma: t.gamma + g, m: t.m })
            .collect();
        Self { terms, trunc: self.trunc + g }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let trunc = (self.trunc + other.lo()).min(other.trunc + self.lo());
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let gamma = a.gamma + b.gamma;
                if gamma > trunc + GAMMA_TOL {
                    continue;
                }
                terms.push(ThetaTerm { coeff: a.coeff.mul(&b.coeff), gamma, m: a.m + b.m });
            }
        }
        Self::from_terms(terms, trunc)
    }

    /// Nonnegative integer power truncated at `cap`. Intermediate products
    /// keep enough terms for the factors still to come.
    pub fn powi(&self, n: u32, cap: f64) -> Self {
        let d = self.lo();
        let mut result = Self::constant(1.0);
        for j in 1..=n {
            let remaining = (n - j) as f64;
            let keep = if d.is_finite() { cap - remaining * d } else { cap };
            result = result.mul(self).truncate(keep);
        }
        result
    }

    fn split_leading(&self) -> Result<(f64, f64, Self), SeriesError> {
        let lead = self.terms.first().ok_or(SeriesError::Empty)?;
        if lead.m != 0 {
            return Err(SeriesError::LeadingTermNotInvertible(format!(
                "leading term carries ln(theta)^{}",
                lead.m
            )));
        }
        let c0 = lead.coeff.as_constant().ok_or_else(|| {
            SeriesError::LeadingTermNotInvertible(format!("leading coefficient {} is symbolic", lead.coeff))
        })?;
        let g0 = lead.gamma;
        // tail = s / (c0 theta^g0) - 1
        let tail = Self {
            terms: self.terms[1..]
                .iter()
                .map(|t| ThetaTerm { coeff: t.coeff.scale(1.0 / c0), gamma: t.gamma - g0, m: t.m })
                .collect(),
            trunc: self.trunc - g0,
        };
        Ok((c0, g0, tail))
    }

    /// `c0^r theta^(r g0) (1 + tail)^r` expanded binomially up to `trunc`.
    fn binomial(c0r: f64, g0: f64, r: f64, tail: &Self, trunc: f64) -> Result<Self, SeriesError> {
        let rel = trunc - r * g0;
        let mut total = Self::constant(1.0).truncate(rel);
        let dt = tail.deg();
        if dt.is_finite() || tail.trunc.is_finite() {
            let mut power = Self::constant(1.0);
            let mut binom = 1.0;
            let mut j = 0usize;
            loop {
                j += 1;
                binom *= (r - (j as f64 - 1.0)) / j as f64;
                if binom == 0.0 || j as f64 * dt > rel + GAMMA_TOL || j > MAX_BINOMIAL_TERMS {
                    break;
                }
                power = power.mul(tail).truncate(rel);
                total = total.add(&power.scale(binom));
            }
            if j > MAX_BINOMIAL_TERMS {
                return Err(SeriesError::LeadingTermNotInvertible(
                    "binomial expansion does not terminate below the truncation".into(),
                ));
            }
        }
        Ok(total.scale(c0r).shift(r * g0).truncate(trunc))
    }

    /// `1/s`, expanded up to `min(trunc - 2 deg s, cap)`.
    pub fn inverse(&self, cap: f64) -> Result<Self, SeriesError> {
        let (c0, g0, tail) = self.split_leading()?;
        if c0 == 0.0 {
            return Err(SeriesError::LeadingTermNotInvertible("zero leading coefficient".into()));
        }
        let trunc = (self.trunc - 2.0 * g0).min(cap);
        Self::binomial(1.0 / c0, g0, -1.0, &tail, trunc)
    }

    /// `s^r` for a series with positive pure-real leading coefficient.
    pub fn pow_real(&self, r: f64, cap: f64) -> Result<Self, SeriesError> {
        let (c0, g0, tail) = self.split_leading()?;
        if c0 <= 0.0 {
            return Err(SeriesError::NonPositiveLeadingCoefficient(c0));
        }
        let trunc = (self.trunc + (r - 1.0) * g0).min(cap);
        Self::binomial(c0.powf(r), g0, r, &tail, trunc)
    }

    /// Termwise derivative in `t`, where `d theta / dt = -1`.
    pub fn differentiate(&self) -> Self {
        let mut terms = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            if t.gamma != 0.0 {
                terms.push(ThetaTerm { coeff: t.coeff.scale(-t.gamma), gamma: t.gamma - 1.0, m: t.m });
            }
            if t.m > 0 {
                terms.push(ThetaTerm { coeff: t.coeff.scale(-(t.m as f64)), gamma: t.gamma - 1.0, m: t.m - 1 });
            }
        }
        Self::from_terms(terms, self.trunc - 1.0)
    }

    pub fn eval_numeric(&self, theta: f64, bindings: &Params) -> Result<f64, EvalError> {
        let l = theta.ln();
        let mut total = 0.0;
        for t in &self.terms {
            let c = t.coeff.eval(bindings).map_err(EvalError::UnboundParameter)?;
            total += c * theta.powf(t.gamma) * l.powi(t.m as i32);
        }
        Ok(total)
    }

    /// Binds the named free parameters numerically.
    pub fn bind(&self, bindings: &Params) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| ThetaTerm { coeff: t.coeff.bind(bindings), gamma: t.gamma, m: t.m })
            .collect();
        Self::from_terms(terms, self.trunc)
    }

    pub fn n_params(&self) -> usize {
        self.terms.iter().map(|t| t.coeff.n_params()).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> Vec<TermJson> {
        self.terms
            .iter()
            .map(|t| TermJson { gamma: t.gamma, logpow: t.m, coeff: t.coeff.to_json() })
            .collect()
    }
}

/// The constant-free primitive in `t` of a single term.
pub fn primitive(t: &ThetaTerm) -> ThetaSeries {
    let m = t.m;
    if (t.gamma + 1.0).abs() < GAMMA_TOL {
        let c = t.coeff.scale(-1.0 / (m as f64 + 1.0));
        return ThetaSeries::from_terms(vec![ThetaTerm::new(c, 0.0, m + 1)], f64::INFINITY);
    }
    let g1 = t.gamma + 1.0;
    let mut a = t.coeff.scale(-1.0 / g1);
    let mut terms = vec![ThetaTerm::new(a.clone(), g1, m)];
    for l in 1..=m {
        a = a.scale(-((m - l + 1) as f64) / g1);
        terms.push(ThetaTerm::new(a.clone(), g1, m - l));
    }
    ThetaSeries::from_terms(terms, f64::INFINITY)
}

impl fmt::Display for ThetaSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            write!(f, "0")?;
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            match t.coeff.as_constant() {
                Some(c) => write!(f, "{c}")?,
                None => write!(f, "({})", t.coeff)?,
            }
            if t.gamma != 0.0 {
                write!(f, " * theta^{}", t.gamma)?;
            }
            if t.m > 0 {
                write!(f, " * ln(theta)^{}", t.m)?;
            }
        }
        if self.trunc.is_finite() {
            write!(f, " + O(theta^>{})", self.trunc)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn degree_conventions() {
        assert_eq!(ThetaSeries::monomial(1.0, -0.5, 0).deg(), -0.5);
        assert_eq!(ThetaSeries::zero().deg(), f64::INFINITY);
        let s = ThetaSeries::monomial(2.0, 0.0, 3).add(&ThetaSeries::monomial(5.0, 2.0, 0));
        assert_eq!(s.deg(), 0.0);
    }

    #[test]
    fn distributive_products() {
        let a = ThetaSeries::monomial(1.0, -1.0, 0).add(&ThetaSeries::monomial(1.0, 1.0, 0));
        let p = a.mul(&ThetaSeries::monomial(1.0, 1.0, 0));
        assert_eq!(p.len(), 2);
        assert_eq!(p.coeff_value(0.0, 0), 1.0);
        assert_eq!(p.coeff_value(2.0, 0), 1.0);
        let l = ThetaSeries::monomial(1.0, 0.5, 1);
        let q = l.mul(&l);
        assert_eq!(q.terms(), &[ThetaTerm::constant(1.0, 1.0, 2)]);
    }

    #[test]
    fn exponents_within_tolerance_merge() {
        let r = 2.0 * 3f64.sqrt() - 2.0;
        let a = ThetaSeries::monomial(1.0, r, 0).mul(&ThetaSeries::monomial(1.0, r, 0));
        let b = ThetaSeries::monomial(1.0, 2.0 * r + 1e-12, 0);
        assert_eq!(a.add(&b).len(), 1);
    }

    #[test]
    fn ordering_puts_logs_first() {
        let s = ThetaSeries::monomial(1.0, 1.0, 0)
            .add(&ThetaSeries::monomial(1.0, 1.0, 2))
            .add(&ThetaSeries::monomial(1.0, 0.0, 0));
        let keys: Vec<(f64, u32)> = s.terms().iter().map(|t| (t.gamma, t.m)).collect();
        assert_eq!(keys, vec![(0.0, 0), (1.0, 2), (1.0, 0)]);
    }

    #[test]
    fn inverse_geometric() {
        let s = ThetaSeries::constant(1.0).add(&ThetaSeries::monomial(1.0, 1.0, 0));
        let inv = s.inverse(3.0).unwrap();
        let coeffs: Vec<f64> = (0..4).map(|j| inv.coeff_value(j as f64, 0)).collect();
        assert_eq!(coeffs, vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(inv.len(), 4);
        let inv = ThetaSeries::monomial(2.0, -1.0, 0).inverse(10.0).unwrap();
        assert_eq!(inv.terms(), &[ThetaTerm::constant(0.5, 1.0, 0)]);
    }

    #[test]
    fn inverse_with_parameter_tail() {
        let s = ThetaSeries::from_terms(
            vec![ThetaTerm::constant(1.0, 0.0, 0), ThetaTerm::new(ParamPoly::param(0, 1.0), 1.0, 0)],
            f64::INFINITY,
        );
        let inv = s.inverse(4.0).unwrap();
        assert_eq!(inv.coeff(2.0, 0), ParamPoly::param(0, 1.0).mul(&ParamPoly::param(0, 1.0)));
        let one = s.mul(&inv);
        assert_eq!(one.truncate(4.0).terms(), &[ThetaTerm::constant(1.0, 0.0, 0)]);
    }

    #[test]
    fn inverse_rejects_bad_leading_terms() {
        let log = ThetaSeries::monomial(1.0, 0.0, 1);
        assert!(matches!(log.inverse(1.0), Err(SeriesError::LeadingTermNotInvertible(_))));
        let sym = ThetaSeries::from_terms(vec![ThetaTerm::new(ParamPoly::param(0, 1.0), 0.0, 0)], 1.0);
        assert!(matches!(sym.inverse(1.0), Err(SeriesError::LeadingTermNotInvertible(_))));
        assert!(matches!(ThetaSeries::zero().inverse(1.0), Err(SeriesError::Empty)));
    }

    #[test]
    fn real_powers() {
        let s = ThetaSeries::monomial(1.0, -2.0, 0).pow_real(0.5, 10.0).unwrap();
        assert_eq!(s.terms(), &[ThetaTerm::constant(1.0, -1.0, 0)]);
        let s = ThetaSeries::constant(1.0).add(&ThetaSeries::monomial(1.0, 1.0, 0));
        let r = s.pow_real(0.5, 2.0).unwrap();
        assert!(close(r.coeff_value(0.0, 0), 1.0, 1e-15));
        assert!(close(r.coeff_value(1.0, 0), 0.5, 1e-15));
        assert!(close(r.coeff_value(2.0, 0), -0.125, 1e-15));
        assert_eq!(r.len(), 3);
        let neg = ThetaSeries::constant(-1.0);
        assert!(matches!(neg.pow_real(0.5, 1.0), Err(SeriesError::NonPositiveLeadingCoefficient(_))));
    }

    #[test]
    fn pow_real_matches_numeric_evaluation() {
        // (1 + theta^(1/2))^(-1) against direct evaluation
        let s = ThetaSeries::constant(1.0).add(&ThetaSeries::monomial(1.0, 0.5, 0));
        let p = s.pow_real(-1.0, 6.0).unwrap();
        for theta in [1e-4f64, 1e-3, 1e-2] {
            let exact: f64 = 1.0 / (1.0 + theta.sqrt());
            let approx = p.eval_numeric(theta, &Params::new()).unwrap();
            assert!((exact - approx).abs() < 10.0 * theta.powf(6.5));
        }
    }

    #[test]
    fn precision_tracking() {
        let a = ThetaSeries::monomial(1.0, -0.5, 0).add(&ThetaSeries::monomial(1.0, 0.5, 0)).truncate(2.0);
        let sq = a.mul(&a);
        assert!(close(sq.trunc(), 1.5, 1e-15));
        assert_eq!(sq.deg(), -1.0);
        let inv = a.inverse(100.0).unwrap();
        assert!(close(inv.trunc(), 3.0, 1e-15));
    }

    #[test]
    fn primitives() {
        let p = primitive(&ThetaTerm::constant(1.0, 1.0, 0));
        assert_eq!(p.terms(), &[ThetaTerm::constant(-0.5, 2.0, 0)]);
        let p = primitive(&ThetaTerm::constant(1.0, -1.0, 0));
        assert_eq!(p.terms(), &[ThetaTerm::constant(-1.0, 0.0, 1)]);
        let p = primitive(&ThetaTerm::constant(1.0, -2.0, 1));
        assert_eq!(p.coeff_value(-1.0, 1), 1.0);
        assert_eq!(p.coeff_value(-1.0, 0), 1.0);
        assert_eq!(p.differentiate().terms(), &[ThetaTerm::constant(1.0, -2.0, 1)]);
    }

    #[test]
    fn primitive_vanishes_at_blowup_time() {
        let p = primitive(&ThetaTerm::constant(1.0, -0.5, 2));
        let mags: Vec<f64> = [1e-3, 1e-6, 1e-9]
            .iter()
            .map(|th| p.eval_numeric(*th, &Params::new()).unwrap().abs())
            .collect();
        assert!(mags[0] > mags[1] && mags[1] > mags[2]);
    }

    #[test]
    fn derivatives() {
        let d = ThetaSeries::monomial(1.0, -0.5, 0).differentiate();
        assert_eq!(d.terms(), &[ThetaTerm::constant(0.5, -1.5, 0)]);
        let d = ThetaSeries::monomial(1.0, 0.0, 1).differentiate();
        assert_eq!(d.terms(), &[ThetaTerm::constant(-1.0, -1.0, 0)]);
    }

    #[test]
    fn numeric_evaluation() {
        let s = ThetaSeries::from_terms(
            vec![ThetaTerm::constant(2.0, 1.0, 0), ThetaTerm::new(ParamPoly::param(0, 1.0), 0.0, 1)],
            f64::INFINITY,
        );
        let b = Params::from([("C1".to_string(), 3.0)]);
        let th = 0.5f64;
        assert!(close(s.eval_numeric(th, &b).unwrap(), 1.0 + 3.0 * th.ln(), 1e-15));
        assert_eq!(ThetaSeries::constant(4.0).eval_numeric(0.1, &b).unwrap(), 4.0);
        assert_eq!(ThetaSeries::monomial(1.0, 2.0, 0).eval_numeric(3.0, &b).unwrap(), 9.0);
        assert!(matches!(s.eval_numeric(th, &Params::new()), Err(EvalError::UnboundParameter(_))));
    }
}
