//! Ridge least squares with an unpenalized intercept.
//!
//! The intercept is removed by centring rows and targets, the penalized Gram
//! system `(XcᵀXc + λI) w = Xcᵀyc` is solved by Cholesky, and the intercept is
//! recovered as `ȳ − x̄·w`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeConfig {
    pub lambda: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self { lambda: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::LengthMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }
}

/// Minimise `Σ(w·x + b − y)² + λ‖w‖²`.
pub fn fit_ridge(rows: &[FeatureVector], targets: &[f64], cfg: RidgeConfig) -> Result<LinearModel> {
    let slices: Vec<&[f64]> = rows.iter().map(FeatureVector::as_slice).collect();
    fit_ridge_slices(&slices, targets, cfg)
}

pub fn fit_ridge_slices(rows: &[&[f64]], targets: &[f64], cfg: RidgeConfig) -> Result<LinearModel> {
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::Config(format!("ridge lambda must be a finite non-negative number, got {}", cfg.lambda)));
    }
    if rows.is_empty() {
        return Err(Error::Empty("regression rows"));
    }
    if rows.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: rows.len(),
            got: targets.len(),
        });
    }
    let d = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::LengthMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let n = rows.len() as f64;

    let mut x_mean = vec![0.0; d];
    for r in rows {
        for (m, v) in x_mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n);
    let y_mean = targets.iter().sum::<f64>() / n;

    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut xc = vec![0.0; d];
    for (r, &y) in rows.iter().zip(targets) {
        for k in 0..d {
            xc[k] = r[k] - x_mean[k];
        }
        let yc = y - y_mean;
        for a in 0..d {
            let xa = xc[a];
            if xa == 0.0 {
                continue;
            }
            rhs[a] += xa * yc;
            for b in a..d {
                gram[(a, b)] += xa * xc[b];
            }
        }
    }
    for a in 0..d {
        gram[(a, a)] += cfg.lambda;
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let weights = if d == 0 {
        Vec::new()
    } else {
        let scale = gram.diagonal().max();
        let chol = gram.cholesky().ok_or(Error::SingularSystem { lambda: cfg.lambda })?;
        // a positive but negligible pivot means rank deficiency lost in rounding
        let tol = d as f64 * f64::EPSILON * scale;
        if chol.l_dirty().diagonal().iter().any(|p| p * p <= tol) {
            return Err(Error::SingularSystem { lambda: cfg.lambda });
        }
        chol.solve(&rhs).iter().copied().collect::<Vec<f64>>()
    };
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    if !intercept.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::SingularSystem { lambda: cfg.lambda });
    }
    Ok(LinearModel { weights, intercept })
}

pub fn predict_linear(model: &LinearModel, x: &FeatureVector) -> Result<f64> {
    model.predict(x.as_slice())
}
