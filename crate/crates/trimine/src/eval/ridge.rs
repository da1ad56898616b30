//! Closed-form ridge regression via the normal equations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One linear head: weights plus intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Fit one ridge head per target column, sharing the factorization.
///
/// Solves `(Xc' Xc + l2 I) w = Xc' yc` on mean-centered data, which leaves
/// the intercept unpenalized; always solvable for `l2 > 0`.
pub fn fit_ridge_multi(
    features: &[Vec<f64>],
    targets: &[Vec<f64>],
    l2: f64,
) -> Result<Vec<RidgeModel>> {
    let n = features.len();
    if n < 2 {
        return Err(Error::Validation(format!(
            "ridge regression needs at least 2 samples, got {n}"
        )));
    }
    if targets.len() != n {
        return Err(Error::Shape(format!(
            "{} feature rows but {} target rows",
            n,
            targets.len()
        )));
    }
    if l2 <= 0.0 || !l2.is_finite() {
        return Err(Error::Config(format!(
            "ridge penalty must be positive, got {l2}"
        )));
    }
    let dim = features[0].len();
    let num_targets = targets[0].len();

    let mut x_mean = vec![0.0; dim];
    for row in features {
        if row.len() != dim {
            return Err(Error::Shape("ragged feature matrix".into()));
        }
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut x_mean {
        *m /= n as f64;
    }
    let mut y_mean = vec![0.0; num_targets];
    for row in targets {
        if row.len() != num_targets {
            return Err(Error::Shape("ragged target matrix".into()));
        }
        for (m, v) in y_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut y_mean {
        *m /= n as f64;
    }

    let centered = DMatrix::from_fn(n, dim, |i, j| features[i][j] - x_mean[j]);
    let mut gram = centered.transpose() * &centered;
    for d in 0..dim {
        gram[(d, d)] += l2;
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Validation("ridge normal equations are not positive definite".into())
    })?;

    let mut models = Vec::with_capacity(num_targets);
    for t in 0..num_targets {
        let yc = DVector::from_fn(n, |i, _| targets[i][t] - y_mean[t]);
        let rhs = centered.transpose() * yc;
        let w = chol.solve(&rhs);
        let intercept = y_mean[t] - w.iter().zip(&x_mean).map(|(wi, xi)| wi * xi).sum::<f64>();
        models.push(RidgeModel {
            weights: w.iter().cloned().collect(),
            intercept,
        });
    }
    Ok(models)
}

/// Single-target convenience wrapper.
pub fn fit_ridge(features: &[Vec<f64>], target: &[f64], l2: f64) -> Result<RidgeModel> {
    let targets: Vec<Vec<f64>> = target.iter().map(|&y| vec![y]).collect();
    Ok(fit_ridge_multi(features, &targets, l2)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_targets_are_recovered_as_l2_vanishes() {
        let features: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64 * 0.3, (i as f64 * 0.7).sin()])
            .collect();
        let target: Vec<f64> = features.iter().map(|r| 2.0 * r[0] - 3.0 * r[1] + 1.5).collect();
        let model = fit_ridge(&features, &target, 1e-10).unwrap();
        assert!((model.weights[0] - 2.0).abs() < 1e-6);
        assert!((model.weights[1] + 3.0).abs() < 1e-6);
        assert!((model.intercept - 1.5).abs() < 1e-6);
    }

    #[test]
    fn one_dimensional_fit_matches_hand_solved_normal_equations() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.1, 2.2, 3.9, 6.1, 8.0];
        let l2 = 0.5;
        // Centered closed form: w = sum(xc*yc) / (sum(xc^2) + l2).
        let x_mean: f64 = x.iter().sum::<f64>() / 5.0;
        let y_mean: f64 = y.iter().sum::<f64>() / 5.0;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - x_mean) * (b - y_mean)).sum();
        let sxx: f64 = x.iter().map(|a| (a - x_mean) * (a - x_mean)).sum();
        let expected_w = sxy / (sxx + l2);
        let expected_b = y_mean - expected_w * x_mean;

        let features: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
        let model = fit_ridge(&features, &y, l2).unwrap();
        assert!((model.weights[0] - expected_w).abs() < 1e-12);
        assert!((model.intercept - expected_b).abs() < 1e-12);
    }

    #[test]
    fn constant_target_predicts_its_mean() {
        let features: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let model = fit_ridge(&features, &[4.0; 6], 1e-3).unwrap();
        assert!((model.predict(&[2.5]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(fit_ridge(&[vec![1.0]], &[1.0], 1e-3).is_err());
    }

    #[test]
    fn non_positive_penalty_is_an_error() {
        let features: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        assert!(fit_ridge(&features, &[0.0; 4], 0.0).is_err());
    }
}
