//! Balance law, blow-up power-determining matrix and its spectrum.

pub mod balance;
pub mod eigen;
pub mod gap;

pub use balance::{balance_residual, power_matrix, solve_balance, BalanceRoot, NewtonOptions};
pub use eigen::{spectral_decompose, EigenInfo, JordanBlock, SpectralData, DEFAULT_TAU_HYP};
pub use gap::{delta_gap, residual_on_ray, DeltaGap};

use crate::error::SpectralError;
use crate::vf::VectorField;

/// Everything known about one balance root before expanding.
#[derive(Debug, Clone, PartialEq)]
pub struct RootAnalysis {
    pub root: BalanceRoot,
    pub spectral: SpectralData,
    pub gap: DeltaGap,
}

pub fn analyze_root(field: &VectorField, root: BalanceRoot, tau_hyp: f64) -> Result<RootAnalysis, SpectralError> {
    let a = power_matrix(field, &root.y0).map_err(|e| SpectralError::Field(e.into()))?;
    let spectral = spectral_decompose(&a, tau_hyp)?;
    let gap = delta_gap(field, &spectral)?;
    Ok(RootAnalysis { root, spectral, gap })
}

/// Solves the balance law and analyzes every root found.
pub fn analyze(
    field: &VectorField,
    seeds: &[Vec<f64>],
    newton: &NewtonOptions,
    tau_hyp: f64,
) -> Result<Vec<RootAnalysis>, SpectralError> {
    solve_balance(field, seeds, newton)?
        .into_iter()
        .map(|r| analyze_root(field, r, tau_hyp))
        .collect()
}
