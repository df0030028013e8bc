//! Symbolic and numerical checks of a computed expansion.

pub mod numeric;
pub mod residual;
pub mod rk;
pub mod stime;

pub use numeric::{fit_slope, log_grid, numeric_compare, predicted_slopes, NumericComparison, NumericOptions, SamplePoint, SlopeFit};
pub use residual::{residual_check, symbolic_residual, ResidualCheck};
pub use rk::{DormandPrince, RkOptions, RkStats};
pub use stime::{s_time_diagnostic, STimeOptions, STimeRecord};

use serde::Serialize;

use crate::error::{Error, ValidationError};
use crate::expansion::{run_expansion, BlowupExpansion};
use crate::series::param_name;
use crate::spectral::RootAnalysis;
use crate::vf::{Params, VectorField};

/// Value given to free parameters the caller leaves unbound.
pub const DEFAULT_BINDING: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateOptions {
    pub residual_tol: f64,
    pub numeric: NumericOptions,
    pub s_time: Option<STimeOptions>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { residual_tol: 1e-9, numeric: NumericOptions::default(), s_time: Some(STimeOptions::default()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationPass {
    pub residual: bool,
    pub numeric: bool,
    /// Every slope fit either had enough points or sat at the floor.
    pub conclusive: bool,
    /// Informational; never part of `all`.
    pub s_time: Option<bool>,
    pub all: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub order: usize,
    pub bindings: Params,
    pub residual_deg: Vec<f64>,
    pub residual_expected: Vec<f64>,
    pub residual: ResidualCheck,
    pub slope_fits: Vec<SlopeFit>,
    #[serde(skip)]
    pub samples: Vec<SamplePoint>,
    pub s_time: Option<STimeRecord>,
    /// Set when the s-time diagnostic could not run or was inconclusive.
    pub s_time_note: Option<String>,
    pub pass: ValidationPass,
    pub options: ValidateOptions,
}

/// Completes `bind` with [`DEFAULT_BINDING`] for every free parameter of `expansion`.
pub fn complete_bindings(expansion: &BlowupExpansion, bind: &Params) -> Params {
    let mut out = bind.clone();
    for i in 0..expansion.spectral.m_a {
        out.entry(param_name(i)).or_insert(DEFAULT_BINDING);
    }
    out
}

/// Runs the symbolic residual and the numeric comparison on an expansion,
/// plus the s-time diagnostic when the root has stable modes.
pub fn validate_expansion(
    field: &VectorField,
    analysis: &RootAnalysis,
    expansion: &BlowupExpansion,
    reference: Option<&BlowupExpansion>,
    bind: &Params,
    opts: &ValidateOptions,
) -> Result<ValidationReport, ValidationError> {
    let bindings = complete_bindings(expansion, bind);
    let residual = residual_check(field, expansion, &bindings, opts.residual_tol)?;
    let predicted = predicted_slopes(expansion, reference, &bindings);
    let cmp = numeric_compare(field, expansion, &bindings, &predicted, &opts.numeric)?;

    let (s_time, s_time_note) = match &opts.s_time {
        Some(so) if analysis.spectral.m_a > 0 => match s_time_diagnostic(field, &analysis.root, &analysis.spectral, so) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        Some(_) => (None, Some(ValidationError::NoStableModes.to_string())),
        None => (None, None),
    };
    let numeric_ok = cmp.fits.iter().all(|f| f.pass);
    let pass = ValidationPass {
        residual: residual.pass,
        numeric: numeric_ok,
        conclusive: cmp.fits.iter().all(|f| f.conclusive),
        s_time: s_time.as_ref().map(|s| s.pass),
        all: residual.pass && numeric_ok,
    };
    Ok(ValidationReport {
        order: expansion.order,
        bindings,
        residual_deg: residual.deg.clone(),
        residual_expected: residual.expected.clone(),
        residual,
        slope_fits: cmp.fits,
        samples: cmp.samples,
        s_time,
        s_time_note,
        pass,
        options: opts.clone(),
    })
}

/// Expands at `order` (and `order + 1` as the slope reference) and validates.
pub fn validate_root(
    field: &VectorField,
    analysis: &RootAnalysis,
    order: usize,
    bind: &Params,
    opts: &ValidateOptions,
) -> Result<ValidationReport, Error> {
    let expansion = run_expansion(field, analysis, order, &[])?;
    let reference = run_expansion(field, analysis, order + 1, &[]).ok();
    Ok(validate_expansion(field, analysis, &expansion, reference.as_ref(), bind, opts)?)
}

/// Validates at orders `1, 2, ..., max_order`, stopping at the first order
/// whose numeric comparison is conclusive (or that fails outright). Returns
/// every attempt; the last one decides.
pub fn validate_root_adaptive(
    field: &VectorField,
    analysis: &RootAnalysis,
    max_order: usize,
    bind: &Params,
    opts: &ValidateOptions,
) -> Result<Vec<ValidationReport>, Error> {
    let mut attempts = Vec::new();
    let mut expansion = run_expansion(field, analysis, 1, &[])?;
    for order in 1..=max_order.max(1) {
        let reference = run_expansion(field, analysis, order + 1, &[]).ok();
        let report = validate_expansion(field, analysis, &expansion, reference.as_ref(), bind, opts)?;
        let failed = !report.pass.residual || report.slope_fits.iter().any(|f| f.conclusive && !f.pass);
        let done = report.pass.conclusive || failed;
        attempts.push(report);
        match reference {
            Some(r) if !done => expansion = r,
            _ => break,
        }
    }
    Ok(attempts)
}
