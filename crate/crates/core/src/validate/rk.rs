//! Dormand-Prince 5(4) with PI step-size control.

use serde::Serialize;

use crate::error::{EvalError, ValidationError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for RkOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, h_init: None, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RkStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

/// Adaptive integrator state for `y' = f(t, y)`. The direction of
/// integration is set by the sign of `t_end - t` at each call.
pub struct DormandPrince<F> {
    f: F,
    opts: RkOptions,
    t: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    h: Option<f64>,
    err_prev: f64,
    pub stats: RkStats,
}

impl<F> DormandPrince<F>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, EvalError>,
{
    pub fn new(mut f: F, t0: f64, y0: Vec<f64>, opts: RkOptions) -> Result<Self, ValidationError> {
        let k1 = f(t0, &y0).map_err(|e| failure(t0, e))?;
        Ok(Self { f, opts, t: t0, y: y0, k1, h: opts.h_init, err_prev: 1e-4, stats: RkStats::default() })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    fn error_norm(&self, y_new: &[f64], err: &[f64]) -> f64 {
        let n = err.len() as f64;
        let s: f64 = err
            .iter()
            .zip(self.y.iter().zip(y_new))
            .map(|(e, (a, b))| {
                let sc = self.opts.atol + self.opts.rtol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum();
        (s / n).sqrt()
    }

    fn initial_step(&self, span: f64) -> f64 {
        let scale = |v: &[f64]| {
            let s: f64 = v
                .iter()
                .zip(&self.y)
                .map(|(a, y)| (a / (self.opts.atol + self.opts.rtol * y.abs())).powi(2))
                .sum();
            (s / v.len().max(1) as f64).sqrt()
        };
        let d0 = scale(&self.y);
        let d1 = scale(&self.k1);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span.abs())
    }

    /// Advances exactly to `t_end`.
    pub fn integrate_to(&mut self, t_end: f64) -> Result<(), ValidationError> {
        let dir = (t_end - self.t).signum();
        if dir == 0.0 {
            return Ok(());
        }
        let mut h = self.h.unwrap_or_else(|| self.initial_step(t_end - self.t)).abs();
        let n = self.y.len();
        let mut k = vec![vec![0.0; n]; 7];
        let mut steps = 0;
        while (t_end - self.t) * dir > 0.0 {
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(ValidationError::IntegratorStepFailure { theta: self.t, reason: "step budget exhausted".into() });
            }
            let remaining = (t_end - self.t).abs();
            if remaining <= 64.0 * f64::EPSILON * t_end.abs() {
                // Rounding leftover from the previous step.
                self.t = t_end;
                break;
            }
            let last = h >= remaining;
            let hs = if last { remaining } else { h };
            if hs <= 16.0 * f64::EPSILON * self.t.abs().max(1e-300) {
                return Err(ValidationError::IntegratorStepFailure { theta: self.t, reason: "step size underflow".into() });
            }
            let hd = hs * dir;
            k[0].copy_from_slice(&self.k1);
            let mut stage_ok = true;
            let mut y_new = vec![0.0; n];
            for s in 1..7 {
                let ys: Vec<f64> = (0..n)
                    .map(|i| self.y[i] + hd * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>())
                    .collect();
                match (self.f)(self.t + C[s] * hd, &ys) {
                    Ok(v) if v.iter().all(|x| x.is_finite()) => k[s] = v,
                    _ => {
                        stage_ok = false;
                        break;
                    }
                }
                if s == 6 {
                    y_new = ys;
                }
            }
            if !stage_ok {
                self.stats.rejected += 1;
                h = hs * 0.25;
                continue;
            }
            let err: Vec<f64> = (0..n).map(|i| hd * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>()).collect();
            let en = self.error_norm(&y_new, &err);
            if en <= 1.0 {
                let factor = if en == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * en.powf(-ALPHA) * self.err_prev.powf(BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                self.err_prev = en.max(1e-4);
                self.t = if last { t_end } else { self.t + hd };
                self.y = y_new;
                self.k1 = k[6].clone();
                self.stats.accepted += 1;
                if !last {
                    h = hs * factor;
                } else {
                    self.h = Some(h);
                }
            } else {
                self.stats.rejected += 1;
                h = hs * (SAFETY * en.powf(-ALPHA)).max(MIN_FACTOR);
            }
        }
        Ok(())
    }
}

fn failure(t: f64, e: EvalError) -> ValidationError {
    ValidationError::IntegratorStepFailure { theta: t, reason: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut rk = DormandPrince::new(|_t, y: &[f64]| Ok(vec![-y[0]]), 0.0, vec![1.0], RkOptions::default()).unwrap();
        rk.integrate_to(5.0).unwrap();
        assert!((rk.y()[0] - (-5f64).exp()).abs() < 1e-13);
        rk.integrate_to(0.0).unwrap();
        assert!((rk.y()[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_keeps_energy() {
        let mut rk =
            DormandPrince::new(|_t, y: &[f64]| Ok(vec![y[1], -y[0]]), 0.0, vec![1.0, 0.0], RkOptions::default()).unwrap();
        rk.integrate_to(10.0).unwrap();
        assert!((rk.y()[0] - 10f64.cos()).abs() < 1e-10);
        assert!((rk.y()[1] + 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn blowup_is_reported() {
        let mut rk = DormandPrince::new(|_t, y: &[f64]| Ok(vec![y[0] * y[0]]), 0.0, vec![1.0], RkOptions::default()).unwrap();
        assert!(rk.integrate_to(2.0).is_err());
    }
}
