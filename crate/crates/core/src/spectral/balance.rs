use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{EvalError, SpectralError};
use crate::vf::VectorField;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Half-width of the seed grid used when no seeds are given.
    pub grid_half_width: f64,
    pub grid_points: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100, grid_half_width: 10.0, grid_points: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceRoot {
    #[serde(rename = "Y0")]
    pub y0: Vec<f64>,
    #[serde(rename = "residual")]
    pub residual_norm: f64,
    pub seed: Vec<f64>,
    pub iterations: usize,
}

/// `f_qh(Y) - (1/k) Lambda Y`.
pub fn balance_residual(field: &VectorField, y: &[f64]) -> Result<Vec<f64>, EvalError> {
    let f = field.eval_quasi(y)?;
    Ok((0..field.n()).map(|i| f[i] - field.qh.rate(i) * y[i]).collect())
}

/// `A = -(1/k) Lambda + Df_qh(Y0)`.
pub fn power_matrix(field: &VectorField, y0: &[f64]) -> Result<DMatrix<f64>, EvalError> {
    let mut a = field.jacobian_quasi(y0)?;
    for i in 0..field.n() {
        a[(i, i)] -= field.qh.rate(i);
    }
    Ok(a)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

enum Outcome {
    Root(BalanceRoot),
    Singular,
    Diverged,
}

fn newton(field: &VectorField, seed: &[f64], opts: &NewtonOptions) -> Outcome {
    let n = field.n();
    let mut y = seed.to_vec();
    let Ok(mut g) = balance_residual(field, &y) else { return Outcome::Diverged };
    let mut gn = inf_norm(&g);
    for iter in 0..=opts.max_iter {
        if gn <= opts.tol * inf_norm(&y).max(1.0) {
            // A couple of extra steps polish the last digits.
            for _ in 0..2 {
                match newton_step(field, &y, &g) {
                    Some(step) => {
                        let cand: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + b).collect();
                        match balance_residual(field, &cand) {
                            Ok(gc) if inf_norm(&gc) <= gn => {
                                y = cand;
                                g = gc;
                                gn = inf_norm(&g);
                            }
                            _ => break,
                        }
                    }
                    None => break,
                }
            }
            return Outcome::Root(BalanceRoot { y0: y, residual_norm: gn, seed: seed.to_vec(), iterations: iter });
        }
        let Some(step) = newton_step(field, &y, &g) else { return Outcome::Singular };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = (0..n).map(|i| y[i] + lambda * step[i]).collect();
            if let Ok(gc) = balance_residual(field, &cand) {
                let gcn = inf_norm(&gc);
                if gcn.is_finite() && gcn < gn {
                    y = cand;
                    g = gc;
                    gn = gcn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Outcome::Diverged;
        }
    }
    Outcome::Diverged
}

fn newton_step(field: &VectorField, y: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let j = power_matrix(field, y).ok()?;
    let scale = j.amax().max(1.0);
    let lu = j.lu();
    let det_scale = lu.u().diagonal().iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
    if det_scale < 1e-14 * scale {
        return None;
    }
    let rhs = DVector::from_iterator(g.len(), g.iter().map(|x| -x));
    let step = lu.solve(&rhs)?;
    step.iter().all(|x| x.is_finite()).then(|| step.iter().copied().collect())
}

fn grid(n: usize, opts: &NewtonOptions) -> Vec<Vec<f64>> {
    let p = opts.grid_points.max(2);
    let axis: Vec<f64> = (0..p)
        .map(|i| -opts.grid_half_width + 2.0 * opts.grid_half_width * i as f64 / (p - 1) as f64)
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |x| {
                    let mut v = prefix.clone();
                    v.push(*x);
                    v
                })
            })
            .collect();
    }
    out
}

/// Nonzero roots of the balance law, from the given seeds or from a grid.
pub fn solve_balance(
    field: &VectorField,
    seeds: &[Vec<f64>],
    opts: &NewtonOptions,
) -> Result<Vec<BalanceRoot>, SpectralError> {
    let n = field.n();
    let starts = if seeds.is_empty() { grid(n, opts) } else { seeds.to_vec() };
    let mut roots: Vec<BalanceRoot> = Vec::new();
    let mut singular = None;
    for seed in &starts {
        if seed.len() != n {
            continue;
        }
        match newton(field, seed, opts) {
            Outcome::Root(r) => {
                if inf_norm(&r.y0) < 1e-8 {
                    continue;
                }
                let dup = roots.iter().any(|q| {
                    q.y0.iter().zip(&r.y0).all(|(a, b)| (a - b).abs() <= 1e-8 * (1.0 + a.abs()))
                });
                if !dup {
                    roots.push(r);
                }
            }
            Outcome::Singular => {
                log::debug!("Jacobian singular along Newton path from seed {seed:?}");
                singular.get_or_insert_with(|| seed.clone());
            }
            Outcome::Diverged => log::debug!("Newton diverged from seed {seed:?}"),
        }
    }
    if roots.is_empty() {
        return Err(match singular {
            Some(seed) if !seeds.is_empty() => SpectralError::JacobianSingularAtIterate(seed),
            _ => SpectralError::NoRootFound,
        });
    }
    roots.sort_by(|a, b| {
        a.y0.iter()
            .zip(&b.y0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_problem;

    fn cubic() -> VectorField {
        parse_problem(
            r#"
[problem]
name = "c"
vars = ["y"]
alpha = [1]
k = 2
[field]
y = "-y + y^3"
"#,
        )
        .unwrap()
        .field
    }

    #[test]
    fn cubic_root_from_grid() {
        let roots = solve_balance(&cubic(), &[], &NewtonOptions::default()).unwrap();
        let y0 = 0.5f64.sqrt();
        assert_eq!(roots.len(), 2);
        assert!((roots[0].y0[0] + y0).abs() < 1e-14);
        assert!((roots[1].y0[0] - y0).abs() < 1e-14);
        assert!(roots.iter().all(|r| r.residual_norm <= 1e-12));
        let a = power_matrix(&cubic(), &roots[1].y0).unwrap();
        assert!((a[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_root_only_is_an_error() {
        let f = cubic();
        let err = solve_balance(&f, &[vec![0.0]], &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, SpectralError::NoRootFound | SpectralError::JacobianSingularAtIterate(_)));
    }

    #[test]
    fn grid_has_expected_size() {
        let g = grid(2, &NewtonOptions::default());
        assert_eq!(g.len(), 25);
        assert!(g.contains(&vec![-10.0, 10.0]));
    }
}
