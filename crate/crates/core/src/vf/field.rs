use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::expr::{Expr, Params};
use crate::error::{EvalError, FieldError};

/// Tolerance for matching a monomial weight against `k + alpha_i`.
pub const TOL_WEIGHT: f64 = 1e-9;

const CERT_SAMPLES: usize = 20;
const CERT_SCALES: [f64; 3] = [10.0, 100.0, 1000.0];
const CERT_SEED: u64 = 0x005e_ed0f_b10e;

/// Type `alpha` and order `k + 1` of a quasi-homogeneous field.
#[derive(Debug, Clone, PartialEq)]
pub struct QhType {
    pub alpha: Vec<f64>,
    pub k: f64,
}

impl QhType {
    pub fn new(alpha: Vec<f64>, k: f64) -> Result<Self, FieldError> {
        if alpha.is_empty() {
            return Err(FieldError::InvalidType("alpha is empty".into()));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(FieldError::InvalidType("alpha entries must be nonnegative".into()));
        }
        if alpha.iter().all(|a| *a == 0.0) {
            return Err(FieldError::InvalidType("alpha must not vanish identically".into()));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(FieldError::InvalidType(format!("k = {k} must be positive")));
        }
        Ok(Self { alpha, k })
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// `alpha_i / k`, the blow-up rate of component `i`.
    pub fn rate(&self, i: usize) -> f64 {
        self.alpha[i] / self.k
    }

    pub fn max_rate(&self) -> f64 {
        self.alpha.iter().fold(0.0_f64, |m, a| m.max(a / self.k))
    }

    pub fn lambda(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.alpha))
    }

    /// `s^Lambda x`.
    pub fn scale(&self, s: f64, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.alpha).map(|(xi, a)| s.powf(*a) * xi).collect()
    }

    pub fn weight(&self, beta: &[f64]) -> f64 {
        self.alpha.iter().zip(beta).map(|(a, b)| a * b).sum()
    }
}

/// Outcome of the two sampled certificates.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Certificates {
    pub samples: usize,
    pub max_scaling_error: f64,
    pub residual_decay: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub names: Vec<String>,
    pub qh: QhType,
    pub quasi: Vec<Expr>,
    pub residual: Vec<Expr>,
    pub params: Params,
    jac: Vec<Vec<Expr>>,
}

impl VectorField {
    pub fn new(
        names: Vec<String>,
        qh: QhType,
        quasi: Vec<Expr>,
        residual: Vec<Expr>,
        params: Params,
    ) -> Result<Self, FieldError> {
        let n = qh.n();
        if names.len() != n || quasi.len() != n || residual.len() != n {
            return Err(FieldError::InvalidType(format!(
                "dimension mismatch: {} names, {} alpha entries, {} quasi, {} residual",
                names.len(),
                n,
                quasi.len(),
                residual.len()
            )));
        }
        for e in quasi.iter().chain(&residual) {
            if let Some(i) = e.max_var_index() {
                if i >= n {
                    return Err(FieldError::InvalidType(format!("variable index {i} out of range")));
                }
            }
            let mut used = Vec::new();
            e.params_used(&mut used);
            if let Some(p) = used.into_iter().find(|p| !params.contains_key(p)) {
                return Err(FieldError::Eval(EvalError::UnboundParameter(p)));
            }
        }
        let jac = quasi.iter().map(|f| (0..n).map(|j| f.diff(j)).collect()).collect();
        Ok(Self { names, qh, quasi, residual, params, jac })
    }

    /// Builds a field from monomial sums, splitting each component by weight.
    pub fn from_monomial_sums(
        names: Vec<String>,
        qh: QhType,
        exprs: Vec<Expr>,
        params: Params,
    ) -> Result<Self, FieldError> {
        let (quasi, residual) = auto_split(&exprs, &qh)?;
        Self::new(names, qh, quasi, residual, params)
    }

    pub fn n(&self) -> usize {
        self.qh.n()
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.check_dim(point)?;
        self.quasi
            .iter()
            .zip(&self.residual)
            .map(|(q, r)| Ok(q.eval(point, &self.params)? + r.eval(point, &self.params)?))
            .collect()
    }

    pub fn eval_quasi(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.check_dim(point)?;
        self.quasi.iter().map(|q| q.eval(point, &self.params)).collect()
    }

    pub fn eval_residual(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.check_dim(point)?;
        self.residual.iter().map(|r| r.eval(point, &self.params)).collect()
    }

    /// `Df_qh(point)` from the symbolic derivatives.
    pub fn jacobian_quasi(&self, point: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        self.check_dim(point)?;
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.jac[i][j].eval(point, &self.params)?;
            }
        }
        Ok(m)
    }

    /// `Df_qh(x) Lambda x - (k I + Lambda) f_qh(x)`, zero for quasi-homogeneous parts.
    pub fn euler_residual(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let jac = self.jacobian_quasi(point)?;
        let f = self.eval_quasi(point)?;
        let lx = DVector::from_iterator(
            self.n(),
            point.iter().zip(&self.qh.alpha).map(|(x, a)| a * x),
        );
        let d = jac * lx;
        Ok((0..self.n()).map(|i| d[i] - (self.qh.k + self.qh.alpha[i]) * f[i]).collect())
    }

    pub fn is_polynomial(&self) -> bool {
        self.quasi.iter().chain(&self.residual).all(Expr::is_polynomial)
    }

    pub fn has_residual(&self) -> bool {
        self.residual.iter().any(|r| !r.is_zero())
    }

    /// Checks the scaling identity on the quasi part and the decay of the
    /// rescaled residual on sampled unit-sphere points.
    pub fn certify(&self) -> Result<Certificates, FieldError> {
        let n = self.n();
        let mut rng = ChaCha8Rng::seed_from_u64(CERT_SEED);
        let mut samples = 0;
        let mut attempts = 0;
        let mut max_scaling_error = 0.0_f64;
        let mut residual_decay = vec![0.0_f64; n];
        while samples < CERT_SAMPLES && attempts < 100 * CERT_SAMPLES {
            attempts += 1;
            let x = unit_sphere_point(&mut rng, n);
            let Some(sample) = self.sample_certificates(&x) else { continue };
            samples += 1;
            for (i, (scaling, decay)) in sample.into_iter().enumerate() {
                if let Some((err, limit)) = scaling {
                    max_scaling_error = max_scaling_error.max(err / limit.max(f64::MIN_POSITIVE));
                    if err > limit {
                        return Err(FieldError::CertificateFailed {
                            kind: "quasi-homogeneity",
                            component: i,
                            detail: format!("scaling defect {err:e} exceeds {limit:e} at x = {x:?}"),
                        });
                    }
                }
                let [m0, _, m2] = decay;
                let ratio = if m0 < 1e-12 { 0.0 } else { m2 / m0 };
                residual_decay[i] = residual_decay[i].max(ratio);
                if m2 > 1e-12 && m2 > 0.5 * m0 {
                    return Err(FieldError::CertificateFailed {
                        kind: "residual lower-order",
                        component: i,
                        detail: format!(
                            "s^-(k+alpha_i) |f_res(s^Lambda x)| = {decay:?} does not decay at x = {x:?}"
                        ),
                    });
                }
            }
        }
        if samples == 0 {
            return Err(FieldError::CertificateFailed {
                kind: "sampling",
                component: 0,
                detail: "no unit-sphere sample lies in the field's domain".into(),
            });
        }
        Ok(Certificates { samples, max_scaling_error, residual_decay })
    }

    #[allow(clippy::type_complexity)]
    fn sample_certificates(&self, x: &[f64]) -> Option<Vec<(Option<(f64, f64)>, [f64; 3])>> {
        let n = self.n();
        let fx = self.eval_quasi(x).ok()?;
        let mut out = vec![(None, [0.0; 3]); n];
        for (si, &s) in CERT_SCALES.iter().enumerate() {
            let sx = self.qh.scale(s, x);
            let fq = self.eval_quasi(&sx).ok()?;
            let fr = self.eval_residual(&sx).ok()?;
            for i in 0..n {
                let w = s.powf(self.qh.k + self.qh.alpha[i]);
                let err = (fq[i] - w * fx[i]).abs();
                let limit = 1e-9 * w * (1.0 + fx[i].abs());
                let prev = out[i].0.map_or(0.0, |(e, l): (f64, f64)| e / l);
                if err / limit >= prev {
                    out[i].0 = Some((err, limit));
                }
                out[i].1[si] = (fr[i] / w).abs();
            }
        }
        Some(out)
    }

    fn check_dim(&self, point: &[f64]) -> Result<(), EvalError> {
        if point.len() != self.n() {
            return Err(EvalError::DimensionMismatch { expected: self.n(), got: point.len() });
        }
        Ok(())
    }
}

fn unit_sphere_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Splits monomial sums into quasi-homogeneous and lower-order parts by weight.
pub fn auto_split(exprs: &[Expr], qh: &QhType) -> Result<(Vec<Expr>, Vec<Expr>), FieldError> {
    let n = qh.n();
    let mut quasi = Vec::with_capacity(exprs.len());
    let mut residual = Vec::with_capacity(exprs.len());
    for (i, e) in exprs.iter().enumerate() {
        let limit = qh.k + qh.alpha[i];
        let mut q = Vec::new();
        let mut r = Vec::new();
        for term in e.terms() {
            let beta = term
                .monomial_exponents(n)
                .ok_or(FieldError::NotMonomialSum { component: i })?;
            let weight = qh.weight(&beta);
            if (weight - limit).abs() <= TOL_WEIGHT {
                q.push(term);
            } else if weight < limit {
                r.push(term);
            } else {
                return Err(FieldError::WeightTooHigh { component: i, weight, limit });
            }
        }
        quasi.push(Expr::sum(q));
        residual.push(Expr::sum(r));
    }
    Ok((quasi, residual))
}
