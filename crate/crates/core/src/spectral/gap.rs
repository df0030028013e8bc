use serde::Serialize;

use super::eigen::SpectralData;
use crate::error::SpectralError;
use crate::series::{substitute, ThetaSeries};
use crate::vf::VectorField;

// Generic positive placeholder values for x in f_res(theta^(-Lambda/k) x).
const PLACEHOLDERS: [[f64; 8]; 2] = [
    [0.618_033_988_7, 1.324_717_957_2, 0.883_264_711_1, 1.171_092_832_6, 0.741_337_201_4, 1.498_765_301_2, 0.933_711_845_3, 1.053_901_772_8],
    [1.417_933_256_1, 0.572_643_118_9, 1.263_402_971_5, 0.698_251_430_7, 1.736_114_492_3, 0.362_907_815_6, 1.114_386_260_2, 0.804_552_617_3],
];

const GAMMA_CAP: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaGap {
    /// Degree of `f_res,i(theta^(-Lambda/k) x)` for generic `x`; `+inf` for a zero residual.
    pub gamma_res: Vec<f64>,
    /// `min_l(alpha_l/k + gamma_l) + 1`.
    pub residual_gap: f64,
    /// `min(-Re lambda)` over stable eigenvalues.
    pub stable_gap: f64,
    pub delta: f64,
}

/// Evaluates `f_res(theta^(-Lambda/k) x)` for a numeric `x`.
pub fn residual_on_ray(field: &VectorField, x: &[f64], cap: f64) -> Result<Vec<ThetaSeries>, SpectralError> {
    let args: Vec<ThetaSeries> = (0..field.n())
        .map(|l| ThetaSeries::monomial(x[l], -field.qh.rate(l), 0))
        .collect();
    field
        .residual
        .iter()
        .map(|r| {
            substitute(r, &args, &field.params, cap)
                .map_err(|e| SpectralError::ResidualNotSeriesRepresentable(e.to_string()))
        })
        .collect()
}

pub fn delta_gap(field: &VectorField, spectral: &SpectralData) -> Result<DeltaGap, SpectralError> {
    let n = field.n();
    if n > PLACEHOLDERS[0].len() {
        return Err(SpectralError::ResidualNotSeriesRepresentable(format!("dimension {n} exceeds 8")));
    }
    let mut gamma_res = vec![f64::INFINITY; n];
    for sample in &PLACEHOLDERS {
        let series = residual_on_ray(field, &sample[..n], GAMMA_CAP)?;
        for (g, s) in gamma_res.iter_mut().zip(&series) {
            *g = g.min(s.deg());
        }
    }
    let residual_gap = (0..n)
        .map(|l| field.qh.rate(l) + gamma_res[l])
        .fold(f64::INFINITY, f64::min)
        + 1.0;
    let stable_gap = spectral.stable_gap();
    Ok(DeltaGap { gamma_res, residual_gap, stable_gap, delta: residual_gap.min(stable_gap) })
}
