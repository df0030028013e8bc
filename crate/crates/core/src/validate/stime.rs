use serde::Serialize;

use super::rk::{DormandPrince, RkOptions};
use crate::error::{EvalError, ValidationError};
use crate::spectral::{delta_gap, BalanceRoot, SpectralData};
use crate::vf::VectorField;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct STimeOptions {
    /// Earliest start; pushed later until the residual forcing is far below `epsilon`.
    pub s0: f64,
    pub span: f64,
    pub samples: usize,
    pub epsilon: f64,
    /// Accepted relative deviation of the measured rate.
    pub rel_tol: f64,
    pub rk: RkOptions,
}

impl Default for STimeOptions {
    fn default() -> Self {
        Self { s0: 12.0, span: 30.0, samples: 301, epsilon: 1e-6, rel_tol: 0.1, rk: RkOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct STimeRecord {
    pub decay_rate_measured: f64,
    pub min_stable_rate: f64,
    pub s0: f64,
    /// `s` range (relative to `s0`) used by the fit.
    pub window: (f64, f64),
    pub pass: bool,
}

/// Perturbs `Y0` along the slowest stable eigenvector and integrates
/// `dY/ds = F(Y) + e^(-s(I + Lambda/k)) f_res(e^(s Lambda/k) Y)`,
/// fitting the exponential decay of `|Y - Y0|` before the unstable
/// direction takes over.
pub fn s_time_diagnostic(
    field: &VectorField,
    root: &BalanceRoot,
    spectral: &SpectralData,
    opts: &STimeOptions,
) -> Result<STimeRecord, ValidationError> {
    let slow = spectral
        .stable_blocks()
        .max_by(|a, b| a.lambda.total_cmp(&b.lambda))
        .ok_or(ValidationError::NoStableModes)?;
    let n = field.n();
    let v: Vec<f64> = (0..n).map(|r| spectral.p[(r, slow.start)]).collect();
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let y0 = &root.y0;
    let start: Vec<f64> = (0..n).map(|i| y0[i] + opts.epsilon * v[i] / vn).collect();
    let rates: Vec<f64> = (0..n).map(|i| field.qh.rate(i)).collect();

    let rhs = |s: f64, y: &[f64]| -> Result<Vec<f64>, EvalError> {
        let mut out = field.eval_quasi(y)?;
        for i in 0..n {
            out[i] -= rates[i] * y[i];
        }
        if field.has_residual() {
            let x: Vec<f64> = (0..n).map(|i| (s * rates[i]).exp() * y[i]).collect();
            let r = field.eval_residual(&x)?;
            for i in 0..n {
                out[i] += (-s * (1.0 + rates[i])).exp() * r[i];
            }
        }
        Ok(out)
    };
    let gap = delta_gap(field, spectral).map_err(|e| ValidationError::IntegratorStepFailure {
        theta: opts.s0,
        reason: e.to_string(),
    })?;
    let s0 = if gap.residual_gap.is_finite() {
        opts.s0.max((1e-4 * opts.epsilon).ln().abs() / gap.residual_gap)
    } else {
        opts.s0
    };
    let mut rk = DormandPrince::new(rhs, s0, start, opts.rk)?;
    let mut trace = Vec::with_capacity(opts.samples);
    let ds = opts.span / (opts.samples - 1) as f64;
    for k in 0..opts.samples {
        let s = s0 + k as f64 * ds;
        if let Err(e) = rk.integrate_to(s) {
            log::debug!("s-time integration stopped: {e}");
            break;
        }
        let dist = rk.y().iter().zip(y0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        trace.push((k as f64 * ds, dist));
    }
    let i_min = trace
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    // Fit on the first half of the descent, well before the minimum.
    let window: Vec<(f64, f64)> = trace[..=i_min / 2].to_vec();
    if window.len() < 3 {
        return Err(ValidationError::UnstableTakeoverImmediate);
    }
    let n_w = window.len() as f64;
    let ms = window.iter().map(|p| p.0).sum::<f64>() / n_w;
    let ml = window.iter().map(|p| p.1.ln()).sum::<f64>() / n_w;
    let sxx: f64 = window.iter().map(|p| (p.0 - ms).powi(2)).sum();
    let sxy: f64 = window.iter().map(|p| (p.0 - ms) * (p.1.ln() - ml)).sum();
    let rate = -sxy / sxx;
    let expected = -slow.lambda;
    Ok(STimeRecord {
        decay_rate_measured: rate,
        s0,
        min_stable_rate: expected,
        window: (window[0].0, window[window.len() - 1].0),
        pass: (rate - expected).abs() <= opts.rel_tol * expected,
    })
}
