//! Eigenvalues and real Jordan structure of the power-determining matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::SpectralError;

pub const DEFAULT_TAU_HYP: f64 = 1e-8;
/// Relative clustering tolerance; the absolute value is this times `|A|`.
pub const TAU_CLUSTER_REL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenInfo {
    pub re: f64,
    pub im: f64,
    pub alg_mult: usize,
    pub block_sizes: Vec<usize>,
}

/// A real Jordan block occupying columns `start..start + size` of `P`.
///
/// Real blocks are `lambda I + N` with ones on the superdiagonal; a complex
/// pair `re +- i im` gives a 2x2 block `[[re, im], [-im, re]]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JordanBlock {
    pub lambda: f64,
    pub im: f64,
    pub size: usize,
    pub start: usize,
}

impl JordanBlock {
    pub fn is_complex(&self) -> bool {
        self.im != 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub a: DMatrix<f64>,
    pub eigenvalues: Vec<EigenInfo>,
    pub blocks: Vec<JordanBlock>,
    pub p: DMatrix<f64>,
    pub p_inv: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub m_a: usize,
    pub hyperbolic: bool,
    pub has_complex: bool,
    pub min_abs_re: f64,
    pub tau_hyp: f64,
    pub tau_cluster: f64,
    pub reconstruction_error: f64,
}

impl SpectralData {
    pub fn stable_blocks(&self) -> impl Iterator<Item = &JordanBlock> {
        let tau = self.tau_hyp;
        self.blocks.iter().filter(move |b| b.lambda < -tau)
    }

    /// `min(-Re lambda)` over stable eigenvalues, `+inf` when there are none.
    pub fn stable_gap(&self) -> f64 {
        self.eigenvalues
            .iter()
            .filter(|e| e.re < -self.tau_hyp)
            .fold(f64::INFINITY, |m, e| m.min(-e.re))
    }

    /// Real eigenvalues with multiplicity, largest first.
    pub fn real_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .filter(|e| e.im == 0.0)
            .flat_map(|e| std::iter::repeat_n(e.re, e.alg_mult))
            .collect()
    }
}

fn rank_with_gap(m: &DMatrix<f64>, tol: f64) -> (usize, f64) {
    let sv = m.clone().svd(false, false).singular_values;
    let rank = sv.iter().filter(|s| **s > tol).count();
    // Closest singular value to the threshold, as a ratio (>= 1 is safe).
    let margin = sv
        .iter()
        .map(|s| if *s > tol { s / tol } else { tol / s.max(f64::MIN_POSITIVE) })
        .fold(f64::INFINITY, f64::min);
    (rank, margin)
}

fn null_space(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut out = Vec::new();
    for i in 0..n {
        let s = if i < svd.singular_values.len() { svd.singular_values[i] } else { 0.0 };
        if s <= tol {
            out.push(v_t.row(i).transpose());
        }
    }
    out
}

fn independent(cols: &[DVector<f64>]) -> bool {
    if cols.is_empty() {
        return true;
    }
    let n = cols[0].len();
    if cols.len() > n {
        return false;
    }
    let normalized: Vec<DVector<f64>> = cols.iter().map(|c| c / c.norm().max(f64::MIN_POSITIVE)).collect();
    let m = DMatrix::from_columns(&normalized);
    let sv = m.svd(false, false).singular_values;
    sv.iter().fold(f64::INFINITY, |a, b| a.min(*b)) > 1e-8
}

fn normalize_first(chain: &mut [DVector<f64>]) {
    let lead = &chain[0];
    let big = lead.amax();
    if let Some(idx) = lead.iter().position(|x| x.abs() > 1e-8 * big) {
        let f = 1.0 / lead[idx];
        for v in chain.iter_mut() {
            *v *= f;
        }
    }
}

struct Cluster {
    re: f64,
    im: f64,
    mult: usize,
}

fn cluster_eigenvalues(eigs: &[Complex64], tau: f64) -> Vec<Cluster> {
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    for z in sorted {
        match groups.iter_mut().find(|g| (g[0] - z).norm() <= tau) {
            Some(g) => g.push(z),
            None => groups.push(vec![z]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let mult = g.len();
            let mean = g.iter().sum::<Complex64>() / mult as f64;
            let im = if mean.im.abs() <= tau { 0.0 } else { mean.im };
            Cluster { re: mean.re, im, mult }
        })
        .collect()
}

/// Eigenvalues, real Jordan form and transform `P` with `P^-1 A P = J`.
pub fn spectral_decompose(a: &DMatrix<f64>, tau_hyp: f64) -> Result<SpectralData, SpectralError> {
    let n = a.nrows();
    let norm_a = a.norm();
    let tau_cluster = TAU_CLUSTER_REL * norm_a.max(f64::MIN_POSITIVE);
    let eigs: Vec<Complex64> = a.clone().complex_eigenvalues().iter().copied().collect();
    let clusters = cluster_eigenvalues(&eigs, tau_cluster);
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut blocks = Vec::new();
    let mut eigenvalues = Vec::new();
    let mut has_complex = false;
    for c in &clusters {
        if c.im < 0.0 {
            continue;
        }
        if c.im > 0.0 {
            has_complex = true;
            if c.mult != 1 {
                return Err(SpectralError::IllConditionedJordan { eigenvalue: c.re, gap: c.im });
            }
            let lam = Complex64::new(c.re, c.im);
            let nc = a.map(|x| Complex64::new(x, 0.0)) - DMatrix::<Complex64>::identity(n, n) * lam;
            let svd = nc.svd(false, true);
            let v_t = svd.v_t.expect("requested V^T");
            let imin = (0..n)
                .min_by(|i, j| svd.singular_values[*i].total_cmp(&svd.singular_values[*j]))
                .unwrap_or(0);
            let v: Vec<Complex64> = v_t.row(imin).iter().map(|z| z.conj()).collect();
            blocks.push(JordanBlock { lambda: c.re, im: c.im, size: 2, start: columns.len() });
            columns.push(DVector::from_iterator(n, v.iter().map(|z| z.re)));
            columns.push(DVector::from_iterator(n, v.iter().map(|z| z.im)));
            eigenvalues.push(EigenInfo { re: c.re, im: c.im, alg_mult: 1, block_sizes: vec![1] });
            eigenvalues.push(EigenInfo { re: c.re, im: -c.im, alg_mult: 1, block_sizes: vec![1] });
            continue;
        }

        let lam = c.re;
        let m = c.mult;
        let nmat = a - DMatrix::identity(n, n) * lam;
        let scale = norm_a.max(1.0);
        let mut kdim = vec![0usize; m + 1];
        let mut powers = vec![DMatrix::identity(n, n)];
        for p in 1..=m {
            let np = &powers[p - 1] * &nmat;
            let tol = TAU_CLUSTER_REL * scale.powi(p as i32);
            let (rank, margin) = rank_with_gap(&np, tol);
            if margin < 100.0 {
                return Err(SpectralError::IllConditionedJordan { eigenvalue: lam, gap: margin });
            }
            kdim[p] = n - rank;
            powers.push(np);
        }
        if kdim[m] != m {
            return Err(SpectralError::IllConditionedJordan { eigenvalue: lam, gap: kdim[m] as f64 });
        }
        // at_least[p] = number of blocks of size >= p
        let at_least: Vec<usize> = (0..=m + 1)
            .map(|p| if p == 0 || p > m { 0 } else { kdim[p] - kdim[p - 1] })
            .collect();
        let mut sizes = Vec::new();
        let start_cols = columns.len();
        for s in (1..=m).rev() {
            let count = at_least[s] - at_least[s + 1];
            if count == 0 {
                continue;
            }
            let tol = TAU_CLUSTER_REL * scale.powi(s as i32);
            let basis = null_space(&powers[s], tol);
            let mut found = 0;
            let mut attempt = 0;
            while found < count {
                let x: DVector<f64> = if attempt < basis.len() {
                    basis[attempt].clone()
                } else if attempt < basis.len() + 200 && !basis.is_empty() {
                    basis.iter().fold(DVector::zeros(n), |acc, b| acc + b * rng.random_range(-1.0..1.0))
                } else {
                    return Err(SpectralError::IllConditionedJordan { eigenvalue: lam, gap: 0.0 });
                };
                attempt += 1;
                let mut chain: Vec<DVector<f64>> = (0..s).map(|q| &powers[s - 1 - q] * &x).collect();
                let mut all = columns[start_cols..].to_vec();
                all.extend(chain.iter().cloned());
                if !independent(&all) {
                    continue;
                }
                normalize_first(&mut chain);
                blocks.push(JordanBlock { lambda: lam, im: 0.0, size: s, start: columns.len() });
                columns.extend(chain);
                sizes.push(s);
                found += 1;
            }
        }
        eigenvalues.push(EigenInfo { re: lam, im: 0.0, alg_mult: m, block_sizes: sizes });
    }

    if columns.len() != n {
        return Err(SpectralError::IllConditionedJordan { eigenvalue: f64::NAN, gap: columns.len() as f64 });
    }
    let p = DMatrix::from_columns(&columns);
    let p_inv = p.clone().try_inverse().ok_or(SpectralError::IllConditionedJordan {
        eigenvalue: f64::NAN,
        gap: 0.0,
    })?;
    let mut j = DMatrix::zeros(n, n);
    for b in &blocks {
        let s = b.start;
        if b.is_complex() {
            j[(s, s)] = b.lambda;
            j[(s + 1, s + 1)] = b.lambda;
            j[(s, s + 1)] = b.im;
            j[(s + 1, s)] = -b.im;
        } else {
            for q in 0..b.size {
                j[(s + q, s + q)] = b.lambda;
                if q + 1 < b.size {
                    j[(s + q, s + q + 1)] = 1.0;
                }
            }
        }
    }
    let reconstruction_error = (a - &p * &j * &p_inv).norm() / norm_a.max(f64::MIN_POSITIVE);
    let min_abs_re = eigenvalues.iter().fold(f64::INFINITY, |m, e| m.min(e.re.abs()));
    let m_a = eigenvalues.iter().filter(|e| e.re < -tau_hyp).map(|e| e.alg_mult).sum();
    Ok(SpectralData {
        a: a.clone(),
        eigenvalues,
        blocks,
        p,
        p_inv,
        j,
        m_a,
        hyperbolic: min_abs_re > tau_hyp,
        has_complex,
        min_abs_re,
        tau_hyp,
        tau_cluster,
        reconstruction_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyfitz_kranser_case_one() {
        let s3 = 3f64.sqrt();
        let a = DMatrix::from_row_slice(2, 2, &[5.0 - 2.0 * s3, -1.0, 12.0 - 6.0 * s3, -2.0]);
        let sd = spectral_decompose(&a, DEFAULT_TAU_HYP).unwrap();
        let ev = sd.real_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - (2.0 - 2.0 * s3)).abs() < 1e-12);
        assert_eq!(sd.m_a, 1);
        assert!(sd.hyperbolic && !sd.has_complex);
        // columns: eigenvector for 1, then for 2 - 2 sqrt 3
        assert!((sd.p[(1, 0)] - (4.0 - 2.0 * s3)).abs() < 1e-12);
        assert!((sd.p[(1, 1)] - 3.0).abs() < 1e-12);
        assert!(sd.reconstruction_error < 1e-12);
    }

    #[test]
    fn jordan_block_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let sd = spectral_decompose(&a, DEFAULT_TAU_HYP).unwrap();
        assert_eq!(sd.eigenvalues.len(), 1);
        assert_eq!(sd.eigenvalues[0].alg_mult, 2);
        assert_eq!(sd.eigenvalues[0].block_sizes, vec![2]);
        assert_eq!(sd.blocks.len(), 1);
        assert!(sd.reconstruction_error < 1e-12);
        assert_eq!(sd.m_a, 0);
    }

    #[test]
    fn semisimple_double_eigenvalue() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 1.0]);
        let sd = spectral_decompose(&a, DEFAULT_TAU_HYP).unwrap();
        assert_eq!(sd.eigenvalues[1].block_sizes, vec![1, 1]);
        assert_eq!(sd.m_a, 2);
        assert!(sd.reconstruction_error < 1e-12);
    }

    #[test]
    fn perturbed_jordan_block() {
        // similarity transform of a 2x2 Jordan block plus a simple eigenvalue
        let j = DMatrix::from_row_slice(3, 3, &[-0.5, 1.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 1.0]);
        let t = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, 0.0, 1.0, -1.0, 0.3, 0.0, 1.0]);
        let a = &t * j * t.clone().try_inverse().unwrap();
        let sd = spectral_decompose(&a, DEFAULT_TAU_HYP).unwrap();
        assert_eq!(sd.m_a, 2);
        let stable: Vec<_> = sd.stable_blocks().collect();
        assert_eq!(stable.len(), 1);
        assert_eq!(stable[0].size, 2);
        assert!(sd.reconstruction_error < 1e-9, "{}", sd.reconstruction_error);
    }

    #[test]
    fn complex_pair_is_flagged() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -1.0]);
        let sd = spectral_decompose(&a, DEFAULT_TAU_HYP).unwrap();
        assert!(sd.has_complex);
        assert_eq!(sd.m_a, 2);
        assert!(sd.reconstruction_error < 1e-12);
    }

    #[test]
    fn non_hyperbolic() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let sd = spectral_decompose(&a, DEFAULT_TAU_HYP).unwrap();
        assert!(!sd.hyperbolic);
    }
}
