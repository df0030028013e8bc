//! Inductive construction of `Y = Y0 + Y1 + ... + YN`.
//!
//! With `y_i = theta^(-alpha_i/k) Y_i` the system becomes
//! `Y' = theta^-1 F(Y) + R(theta, Y)`, `F(Y) = f_qh(Y) - (1/k) Lambda Y`,
//! `R = theta^(Lambda/k) f_res(theta^(-Lambda/k) Y)`. Each `Y_j` solves
//! `Y_j' = theta^-1 A Y_j + g_j` in the Jordan basis of `A`.

use nalgebra::DMatrix;

use crate::error::ExpansionError;
use crate::series::{param_name, substitute, ParamPoly, ThetaSeries, ThetaTerm, GAMMA_TOL};
use crate::spectral::{BalanceRoot, DeltaGap, RootAnalysis, SpectralData};
use crate::vf::{Expr, VectorField};

/// `|gamma + 1 + lambda|` at or below this is a resonance.
pub const RESONANCE_EXACT: f64 = 1e-12;
/// Between the two tolerances the resonance test is ambiguous.
pub const RESONANCE_BAND: f64 = 1e-10;

const MAX_LATTICE_POINTS: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupExpansion {
    pub names: Vec<String>,
    pub root: BalanceRoot,
    pub spectral: SpectralData,
    pub gap: DeltaGap,
    pub order: usize,
    /// `y_terms[j][i]` is component `i` of `Y_j`.
    pub y_terms: Vec<Vec<ThetaSeries>>,
    pub sum: Vec<ThetaSeries>,
    /// Exponents `-alpha_i/k` of the factors in `y_i = theta^(-alpha_i/k) Y_i`.
    pub prefactors: Vec<f64>,
    pub free_params: Vec<String>,
    /// Terms of `Y` with exponent strictly below this cannot change at higher orders.
    pub final_below: f64,
    pub working_trunc: f64,
    pub lattice: Vec<f64>,
    /// The truncated series is an exact solution.
    pub exact: bool,
    pub derived: Vec<(String, ThetaSeries)>,
}

impl BlowupExpansion {
    pub fn n(&self) -> usize {
        self.sum.len()
    }

    pub fn is_final(&self, gamma: f64) -> bool {
        self.exact || gamma < self.final_below - GAMMA_TOL
    }

    /// The finalized part of `Y_i`, exact up to (but excluding) `final_below`.
    pub fn final_sum(&self) -> Vec<ThetaSeries> {
        if self.exact {
            return self.sum.clone();
        }
        self.sum
            .iter()
            .map(|s| s.terms_below(self.final_below).with_trunc(self.final_below - 2.0 * GAMMA_TOL))
            .collect()
    }

    /// `y_i` as a series including the prefactor.
    pub fn y_series(&self, i: usize) -> ThetaSeries {
        self.sum[i].shift(self.prefactors[i])
    }
}

/// Splits `g` into its quasi-homogeneous and residual evaluations on a partial sum.
struct Evaluator<'a> {
    field: &'a VectorField,
    trunc: f64,
}

impl Evaluator<'_> {
    fn quasi(&self, s: &[ThetaSeries]) -> Result<Vec<ThetaSeries>, ExpansionError> {
        self.field
            .quasi
            .iter()
            .map(|q| Ok(substitute(q, s, &self.field.params, self.trunc)?))
            .collect()
    }

    /// `R(theta, S) = theta^(Lambda/k) f_res(theta^(-Lambda/k) S)` up to `trunc - 1`.
    fn residual(&self, s: &[ThetaSeries]) -> Result<Vec<ThetaSeries>, ExpansionError> {
        let qh = &self.field.qh;
        let args: Vec<ThetaSeries> = s.iter().enumerate().map(|(l, x)| x.shift(-qh.rate(l))).collect();
        self.field
            .residual
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if r.is_zero() {
                    return Ok(ThetaSeries::zero());
                }
                let cap = self.trunc - 1.0 - qh.rate(i);
                Ok(substitute(r, &args, &self.field.params, cap)?.shift(qh.rate(i)))
            })
            .collect()
    }
}

fn add_vec(a: &[ThetaSeries], b: &[ThetaSeries]) -> Vec<ThetaSeries> {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

fn sub_vec(a: &[ThetaSeries], b: &[ThetaSeries]) -> Vec<ThetaSeries> {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

/// `M x` for a constant matrix and a vector of series.
pub fn mat_apply(m: &DMatrix<f64>, x: &[ThetaSeries]) -> Vec<ThetaSeries> {
    (0..m.nrows())
        .map(|r| {
            let mut acc = ThetaSeries::zero();
            for (c, xc) in x.iter().enumerate() {
                let w = m[(r, c)];
                if w != 0.0 {
                    acc = acc.add(&xc.scale(w));
                }
            }
            acc
        })
        .collect()
}

/// `g_1 = R(theta, Y0)`.
pub fn compute_g1(field: &VectorField, y0: &[f64], trunc: f64) -> Result<Vec<ThetaSeries>, ExpansionError> {
    let s0: Vec<ThetaSeries> = y0.iter().map(|c| ThetaSeries::constant(*c)).collect();
    let ev = Evaluator { field, trunc };
    Ok(ev.residual(&s0)?.into_iter().map(|s| s.truncate(trunc - 1.0)).collect())
}

/// `g_j` from the partial sums `S_{j-1}`, `S_{j-2}` and `Y_{j-1}`.
pub fn compute_gj(
    field: &VectorField,
    df0: &DMatrix<f64>,
    s_prev: &[ThetaSeries],
    s_prev2: &[ThetaSeries],
    y_prev: &[ThetaSeries],
    trunc: f64,
) -> Result<Vec<ThetaSeries>, ExpansionError> {
    let ev = Evaluator { field, trunc };
    let q = sub_vec(&sub_vec(&ev.quasi(s_prev)?, &ev.quasi(s_prev2)?), &mat_apply(df0, y_prev));
    let r = sub_vec(&ev.residual(s_prev)?, &ev.residual(s_prev2)?);
    Ok(q.iter().zip(&r).map(|(a, b)| a.shift(-1.0).add(b).truncate(trunc - 1.0)).collect())
}

/// Particular solution of `v' = theta^-1 lambda v + rhs`.
pub fn scalar_solve(rhs: &ThetaSeries, lambda: f64) -> Result<ThetaSeries, ExpansionError> {
    let mut out = Vec::new();
    for t in rhs.terms() {
        let d = t.gamma + 1.0 + lambda;
        if d.abs() <= RESONANCE_EXACT {
            let c = t.coeff.scale(-1.0 / (t.m as f64 + 1.0));
            out.push(ThetaTerm::new(c, -lambda, t.m + 1));
        } else if d.abs() < RESONANCE_BAND {
            return Err(ExpansionError::ResonanceToleranceAmbiguous {
                gamma: t.gamma,
                lambda,
                distance: d.abs(),
            });
        } else {
            let mut b = t.coeff.scale(-1.0 / d);
            out.push(ThetaTerm::new(b.clone(), t.gamma + 1.0, t.m));
            for l in 1..=t.m {
                b = b.scale(-((t.m - l + 1) as f64) / d);
                out.push(ThetaTerm::new(b.clone(), t.gamma + 1.0, t.m - l));
            }
        }
    }
    Ok(ThetaSeries::from_terms(out, rhs.trunc() + 1.0))
}

/// Solves `Y_j' = theta^-1 A Y_j + g` block by block. At `j = 1` each stable
/// Jordan level receives a free homogeneous term `C theta^-lambda`; parameters
/// are numbered from `first_param`.
pub fn solve_linear_step(
    spectral: &SpectralData,
    g: &[ThetaSeries],
    j: usize,
    first_param: usize,
) -> Result<Vec<ThetaSeries>, ExpansionError> {
    if spectral.has_complex {
        return Err(ExpansionError::ComplexSpectrumUnsupported);
    }
    if !spectral.hyperbolic {
        return Err(ExpansionError::NonHyperbolic(spectral.min_abs_re));
    }
    let n = g.len();
    let h = mat_apply(&spectral.p_inv, g);
    let mut v = vec![ThetaSeries::zero(); n];
    let mut param = first_param;
    for block in &spectral.blocks {
        let lam = block.lambda;
        let stable = j == 1 && lam < -spectral.tau_hyp;
        let base = param;
        if stable {
            param += block.size;
        }
        for p in (0..block.size).rev() {
            let col = block.start + p;
            let mut rhs = h[col].clone();
            if p + 1 < block.size {
                rhs = rhs.add(&v[col + 1].shift(-1.0));
            }
            let mut sol = scalar_solve(&rhs, lam)?;
            if stable {
                let c = ThetaTerm::new(ParamPoly::param(base + p, 1.0), -lam, 0);
                sol = sol.add(&ThetaSeries::from_terms(vec![c], f64::INFINITY));
            }
            v[col] = sol;
        }
    }
    Ok(mat_apply(&spectral.p, &v))
}

/// Exponents `sum beta_l g_l` over nonnegative integers `beta`, up to `bound`.
pub fn lattice_from_generators(generators: &[f64], bound: f64) -> Vec<f64> {
    let mut gens: Vec<f64> = generators.iter().copied().filter(|g| *g > GAMMA_TOL && g.is_finite()).collect();
    gens.sort_by(f64::total_cmp);
    gens.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut points = vec![0.0];
    let mut frontier = vec![0.0];
    while let Some(x) = frontier.pop() {
        for g in &gens {
            let y = x + g;
            if y > bound + 1e-9 || points.len() >= MAX_LATTICE_POINTS {
                continue;
            }
            if !points.iter().any(|p: &f64| (p - y).abs() < 1e-9) {
                points.push(y);
                frontier.push(y);
            }
        }
    }
    points.sort_by(f64::total_cmp);
    points
}

/// Generators of the exponent lattice: `-lambda` for stable eigenvalues and
/// `1 + alpha_i/k - <alpha, beta>/k` for every residual monomial. A residual
/// that is not a monomial sum contributes the exponents of `g_1` plus one.
pub fn lattice_generators(field: &VectorField, spectral: &SpectralData, g1: Option<&[ThetaSeries]>) -> Vec<f64> {
    let qh = &field.qh;
    let n = field.n();
    let mut gens: Vec<f64> = spectral
        .eigenvalues
        .iter()
        .filter(|e| e.re < -spectral.tau_hyp)
        .map(|e| -e.re)
        .collect();
    let mut monomial = true;
    for (i, r) in field.residual.iter().enumerate() {
        for term in r.terms() {
            if term.eval(&vec![1.0; n], &field.params).is_ok_and(|c| c == 0.0) {
                continue;
            }
            match term.monomial_exponents(n) {
                Some(beta) => gens.push(1.0 + qh.rate(i) - qh.weight(&beta) / qh.k),
                None => monomial = false,
            }
        }
    }
    if !monomial {
        if let Some(g1) = g1 {
            gens.extend(g1.iter().flat_map(|s| s.terms().iter().map(|t| t.gamma + 1.0)));
        }
    }
    gens
}

pub fn predict_exponent_lattice(field: &VectorField, spectral: &SpectralData, bound: f64) -> Vec<f64> {
    let g1 = if field.has_residual() {
        let y0 = vec![1.0; field.n()];
        compute_g1(field, &y0, bound).ok()
    } else {
        None
    };
    lattice_from_generators(&lattice_generators(field, spectral, g1.as_deref()), bound)
}

fn lattice_for(field: &VectorField, spectral: &SpectralData, g1: &[ThetaSeries], bound: f64) -> Vec<f64> {
    lattice_from_generators(&lattice_generators(field, spectral, Some(g1)), bound)
}

/// Runs the expansion to order `order` at one analyzed root.
pub fn run_expansion(
    field: &VectorField,
    analysis: &RootAnalysis,
    order: usize,
    derived: &[(String, Expr)],
) -> Result<BlowupExpansion, ExpansionError> {
    if order == 0 {
        return Err(ExpansionError::InvalidOrder);
    }
    let spectral = &analysis.spectral;
    if spectral.has_complex {
        return Err(ExpansionError::ComplexSpectrumUnsupported);
    }
    if !spectral.hyperbolic {
        return Err(ExpansionError::NonHyperbolic(spectral.min_abs_re));
    }
    let delta = analysis.gap.delta;
    if delta.is_nan() || delta <= 0.0 {
        return Err(ExpansionError::NonPositiveGap(delta));
    }
    let n = field.n();
    let y0 = &analysis.root.y0;
    let s0: Vec<ThetaSeries> = y0.iter().map(|c| ThetaSeries::constant(*c)).collect();
    let prefactors: Vec<f64> = (0..n).map(|i| -field.qh.rate(i)).collect();

    let mut expansion = BlowupExpansion {
        names: field.names.clone(),
        root: analysis.root.clone(),
        spectral: spectral.clone(),
        gap: analysis.gap.clone(),
        order,
        y_terms: vec![s0.clone()],
        sum: s0.clone(),
        prefactors,
        free_params: (0..spectral.m_a).map(param_name).collect(),
        final_below: f64::INFINITY,
        working_trunc: f64::INFINITY,
        lattice: vec![0.0],
        exact: false,
        derived: Vec::new(),
    };

    if delta.is_infinite() {
        // No residual and no stable modes: Y0 alone solves the system.
        expansion.exact = true;
        expansion.y_terms.extend((1..=order).map(|_| vec![ThetaSeries::zero(); n]));
        expansion.derived = expand_derived(field, &expansion, derived)?;
        return Ok(expansion);
    }

    let final_below = (order as f64 + 1.0) * delta;
    let trunc = final_below + field.qh.max_rate() + 1.0;
    let df0 = field.jacobian_quasi(y0).map_err(|e| ExpansionError::Series(e.into()))?;

    let g1 = compute_g1(field, y0, trunc)?;
    let mut partial = vec![s0.clone()];
    let mut y_terms = vec![s0];
    let mut g = g1.clone();
    for j in 1..=order {
        if j > 1 {
            g = compute_gj(field, &df0, &partial[j - 1], &partial[j - 2], &y_terms[j - 1], trunc)?;
        }
        let yj = solve_linear_step(spectral, &g, j, 0)?;
        log::debug!("Y_{j}: deg = {:?}", yj.iter().map(ThetaSeries::deg).collect::<Vec<_>>());
        partial.push(add_vec(&partial[j - 1], &yj));
        y_terms.push(yj);
    }

    let sum = partial.pop().expect("partial sums");
    let sum_trunc = sum.iter().map(ThetaSeries::trunc).fold(f64::INFINITY, f64::min);
    if sum_trunc < final_below - GAMMA_TOL {
        return Err(ExpansionError::OrderTooDeepForTruncation { order, trunc: sum_trunc });
    }
    expansion.y_terms = y_terms;
    expansion.sum = sum;
    expansion.final_below = final_below;
    expansion.working_trunc = trunc;
    expansion.lattice = lattice_for(field, spectral, &g1, trunc);
    expansion.derived = expand_derived(field, &expansion, derived)?;
    Ok(expansion)
}

/// Expands auxiliary expressions `h(y)` on the finalized part of `y`.
pub fn expand_derived(
    field: &VectorField,
    expansion: &BlowupExpansion,
    derived: &[(String, Expr)],
) -> Result<Vec<(String, ThetaSeries)>, ExpansionError> {
    let fin = expansion.final_sum();
    let args: Vec<ThetaSeries> = fin.iter().enumerate().map(|(i, s)| s.shift(expansion.prefactors[i])).collect();
    let cap = if expansion.exact { 16.0 } else { expansion.final_below };
    derived
        .iter()
        .map(|(name, e)| Ok((name.clone(), substitute(e, &args, &field.params, cap)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_resonant_scalar_solve() {
        // v' = v/theta - 1/sqrt 2, lambda = 1
        let g = ThetaSeries::constant(-0.5f64.sqrt());
        let v = scalar_solve(&g, 1.0).unwrap();
        assert!((v.coeff_value(1.0, 0) - 0.5f64.sqrt() / 2.0).abs() < 1e-16);
    }

    #[test]
    fn resonant_scalar_solve_generates_log() {
        let g = ThetaSeries::monomial(2.0, -2.0, 1);
        let v = scalar_solve(&g, 1.0).unwrap();
        assert_eq!(v.terms(), &[ThetaTerm::constant(-1.0, -1.0, 2)]);
        let check = v.differentiate().sub(&v.shift(-1.0));
        assert_eq!(check.terms(), g.terms());
    }

    #[test]
    fn log_chain_particular_solution_satisfies_ode() {
        let g = ThetaSeries::monomial(1.5, 0.5, 2);
        let lam = -0.25;
        let v = scalar_solve(&g, lam).unwrap();
        let lhs = v.differentiate();
        let rhs = v.shift(-1.0).scale(lam).add(&g);
        let diff = lhs.sub(&rhs);
        assert!(diff.terms().iter().all(|t| t.coeff.max_abs() < 1e-14), "{diff}");
    }

    #[test]
    fn ambiguous_resonance_is_reported() {
        let g = ThetaSeries::monomial(1.0, -2.0 + 5e-11, 0);
        assert!(matches!(scalar_solve(&g, 1.0), Err(ExpansionError::ResonanceToleranceAmbiguous { .. })));
    }

    #[test]
    fn lattice_generation() {
        let r = 2.0 * 3f64.sqrt() - 2.0;
        let l = lattice_from_generators(&[r, 2.0], 4.0);
        let expect = [0.0, r, 2.0, 2.0 * r, r + 2.0, 4.0];
        assert_eq!(l.len(), expect.len());
        for (a, b) in l.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(lattice_from_generators(&[], 10.0), vec![0.0]);
    }
}
