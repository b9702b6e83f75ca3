//! L1-penalized least squares by cyclic coordinate descent.
//!
//! Minimizes `(1/2n)‖y − ȳ − Zβ‖² + λ‖β‖₁` where `Z` is the column-standardized
//! design (zero mean, unit population variance). Constant columns are dropped.
//! The fitted model is reported in the original column scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-7;
const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    /// Coefficients in the original column scale.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Indices with a nonzero coefficient, ascending.
    pub selected: Vec<usize>,
    /// Coefficients in standardized coordinates.
    pub standardized: Vec<f64>,
    /// Unthresholded coordinate update from the final sweep, per column.
    pub pre_threshold: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

struct Standardized {
    n: usize,
    /// Column-major standardized values; `None` for constant columns.
    columns: Vec<Option<Vec<f64>>>,
    means: Vec<f64>,
    scales: Vec<f64>,
    y_mean: f64,
    y_centered: Vec<f64>,
}

fn standardize(x: &[Vec<f64>], y: &[f64]) -> Result<Standardized> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Dimension("lasso needs at least two rows".into()));
    }
    if y.len() != n {
        return Err(Error::Dimension(format!("{} targets for {n} rows", y.len())));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::Dimension("rows have unequal lengths".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in lasso input".into()));
    }
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let y_centered = y.iter().map(|v| v - y_mean).collect();
    let mut columns = Vec::with_capacity(p);
    let mut means = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for j in 0..p {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / nf;
        let var = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / nf;
        let scale = var.sqrt();
        means.push(mean);
        scales.push(scale);
        if scale > 1e-12 * mean.abs().max(1.0) {
            columns.push(Some(x.iter().map(|r| (r[j] - mean) / scale).collect()));
        } else {
            columns.push(None);
        }
    }
    Ok(Standardized {
        n,
        columns,
        means,
        scales,
        y_mean,
        y_centered,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Smallest λ at which every coefficient is zero.
pub fn lambda_max(x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let s = standardize(x, y)?;
    Ok(s.columns
        .iter()
        .flatten()
        .map(|c| dot(c, &s.y_centered).abs() / s.n as f64)
        .fold(0.0, f64::max))
}

pub fn fit_lasso(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LassoModel> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Numeric(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let s = standardize(x, y)?;
    let p = s.columns.len();
    let nf = s.n as f64;
    let mut beta = vec![0.0; p];
    let mut pre = vec![0.0; p];
    let mut residual = s.y_centered.clone();
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for (j, col) in s.columns.iter().enumerate() {
            let Some(col) = col else { continue };
            let z = dot(col, &residual) / nf + beta[j];
            let updated = soft_threshold(z, lambda);
            let delta = updated - beta[j];
            if delta != 0.0 {
                for (r, c) in residual.iter_mut().zip(col) {
                    *r -= delta * c;
                }
                beta[j] = updated;
            }
            pre[j] = z;
            max_change = max_change.max(delta.abs());
        }
        if max_change < TOLERANCE {
            converged = true;
            break;
        }
    }

    let coefficients: Vec<f64> = beta
        .iter()
        .zip(&s.scales)
        .map(|(b, sc)| if *b == 0.0 { 0.0 } else { b / sc })
        .collect();
    let intercept = s.y_mean - coefficients.iter().zip(&s.means).map(|(c, m)| c * m).sum::<f64>();
    let selected = (0..p).filter(|&j| coefficients[j].abs() > 0.0).collect();
    Ok(LassoModel {
        coefficients,
        intercept,
        lambda,
        selected,
        standardized: beta,
        pre_threshold: pre,
        sweeps,
        converged,
    })
}

impl LassoModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + dot(&self.coefficients, row)
    }

    /// Columns kept by [`select_features`].
    pub fn kept_columns(&self) -> Vec<usize> {
        if !self.selected.is_empty() {
            return self.selected.clone();
        }
        let mut best = 0;
        for j in 1..self.pre_threshold.len() {
            if self.pre_threshold[j].abs() > self.pre_threshold[best].abs() {
                best = j;
            }
        }
        vec![best]
    }
}

/// Keeps the selected columns in order. With nothing selected, keeps the
/// single column whose unthresholded update was largest in magnitude.
pub fn select_features(x: &[Vec<f64>], model: &LassoModel) -> Result<Vec<Vec<f64>>> {
    let p = model.coefficients.len();
    if let Some(r) = x.iter().find(|r| r.len() != p) {
        return Err(Error::Dimension(format!(
            "row has {} columns, model expects {p}",
            r.len()
        )));
    }
    let keep = model.kept_columns();
    Ok(x.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn soft_threshold_kernel() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn two_point_least_squares() {
        let m = fit_lasso(&[vec![0.0], vec![1.0]], &[-1.0, 1.0], 0.0).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((m.intercept + 1.0).abs() < 1e-9);
    }

    #[test]
    fn null_model_at_lambda_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Vec<f64>> = (0..30).map(|_| (0..6).map(|_| rng.gen()).collect()).collect();
        let y: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let lmax = lambda_max(&x, &y).unwrap();
        for lambda in [lmax, lmax * 1.5] {
            let m = fit_lasso(&x, &y, lambda).unwrap();
            assert!(m.selected.is_empty());
            assert!(m.coefficients.iter().all(|&c| c == 0.0));
        }
        assert!(!fit_lasso(&x, &y, lmax * 0.5).unwrap().selected.is_empty());
    }

    #[test]
    fn selection_and_fallback() {
        let model = LassoModel {
            coefficients: vec![1.0, 0.0, -2.0, 0.0],
            intercept: 0.0,
            lambda: 0.1,
            selected: vec![0, 2],
            standardized: vec![1.0, 0.0, -2.0, 0.0],
            pre_threshold: vec![1.2, 0.0, -2.1, 0.05],
            sweeps: 1,
            converged: true,
        };
        let x = vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]];
        assert_eq!(select_features(&x, &model).unwrap(), vec![vec![1.0, 3.0], vec![5.0, 7.0]]);
        let empty = LassoModel {
            selected: vec![],
            ..model.clone()
        };
        assert_eq!(select_features(&x, &empty).unwrap(), vec![vec![3.0], vec![7.0]]);
        let all = LassoModel {
            selected: vec![0, 1, 2, 3],
            ..model.clone()
        };
        assert_eq!(select_features(&x, &all).unwrap(), x);
        assert!(matches!(select_features(&[vec![1.0]], &model), Err(Error::Dimension(_))));
    }

    #[test]
    fn constant_columns_are_dropped() {
        let x = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]];
        let m = fit_lasso(&x, &[0.0, 1.0, 2.0], 0.0).unwrap();
        assert_eq!(m.coefficients[0], 0.0);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(fit_lasso(&[vec![1.0]], &[1.0], 0.1), Err(Error::Dimension(_))));
        assert!(matches!(
            fit_lasso(&[vec![f64::NAN], vec![1.0]], &[1.0, -1.0], 0.1),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            fit_lasso(&[vec![0.0], vec![1.0]], &[1.0, -1.0], -1.0),
            Err(Error::Numeric(_))
        ));
    }
}
