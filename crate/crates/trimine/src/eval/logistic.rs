//! Multinomial logistic regression fit by damped Newton iterations.
//!
//! The last class is the reference (its scores are pinned at zero), which
//! keeps the softmax identifiable; weights carry an L2 penalty, intercepts
//! do not. Assembly and solves are fully deterministic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub l2: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-3,
            max_iter: 100,
            grad_tol: 1e-6,
        }
    }
}

/// A trained multinomial logistic head.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    /// One weight row per non-reference class: `dim` weights then a bias.
    theta: Vec<Vec<f64>>,
    num_classes: usize,
    dim: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl LinearClassifier {
    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut scores: Vec<f64> = self
            .theta
            .iter()
            .map(|row| row[self.dim] + row[..self.dim].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        scores.push(0.0);
        scores
    }

    /// Predicted class label in `1..=C`; ties resolve to the lower label.
    pub fn predict(&self, x: &[f64]) -> usize {
        let scores = self.scores(x);
        let mut best = 0usize;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        best + 1
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[usize]) -> f64 {
        let hits = features
            .iter()
            .zip(labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        hits as f64 / labels.len().max(1) as f64
    }
}

fn softmax_from_scores(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

struct Problem<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [usize],
    num_classes: usize,
    dim: usize,
    l2: f64,
}

impl Problem<'_> {
    fn blocks(&self) -> usize {
        self.num_classes - 1
    }

    fn width(&self) -> usize {
        self.dim + 1
    }

    fn scores(&self, theta: &DVector<f64>, x: &[f64]) -> Vec<f64> {
        let w = self.width();
        let mut scores = Vec::with_capacity(self.num_classes);
        for c in 0..self.blocks() {
            let row = theta.as_slice();
            let base = c * w;
            let mut s = row[base + self.dim];
            for (j, &v) in x.iter().enumerate() {
                s += row[base + j] * v;
            }
            scores.push(s);
        }
        scores.push(0.0);
        scores
    }

    fn objective(&self, theta: &DVector<f64>) -> f64 {
        let n = self.features.len() as f64;
        let mut nll = 0.0;
        for (x, &y) in self.features.iter().zip(self.labels) {
            let scores = self.scores(theta, x);
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = max
                + scores
                    .iter()
                    .map(|&s| (s - max).exp())
                    .sum::<f64>()
                    .ln();
            nll += log_sum - scores[y - 1];
        }
        let mut penalty = 0.0;
        let w = self.width();
        for c in 0..self.blocks() {
            for j in 0..self.dim {
                let v = theta[c * w + j];
                penalty += v * v;
            }
        }
        nll / n + 0.5 * self.l2 * penalty
    }

    #[allow(clippy::needless_range_loop)]
    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let n = self.features.len() as f64;
        let w = self.width();
        let mut grad = DVector::zeros(self.blocks() * w);
        for (x, &y) in self.features.iter().zip(self.labels) {
            let probs = softmax_from_scores(&self.scores(theta, x));
            for c in 0..self.blocks() {
                let resid = probs[c] - f64::from(y - 1 == c);
                let base = c * w;
                for (j, &v) in x.iter().enumerate() {
                    grad[base + j] += resid * v;
                }
                grad[base + self.dim] += resid;
            }
        }
        grad /= n;
        for c in 0..self.blocks() {
            for j in 0..self.dim {
                grad[c * w + j] += self.l2 * theta[c * w + j];
            }
        }
        grad
    }

    fn hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let n = self.features.len() as f64;
        let w = self.width();
        let size = self.blocks() * w;
        let mut hess = DMatrix::zeros(size, size);
        let mut outer = vec![0.0; w * w];
        for x in self.features {
            let probs = softmax_from_scores(&self.scores(theta, x));
            for a in 0..w {
                let xa = if a == self.dim { 1.0 } else { x[a] };
                for b in 0..w {
                    let xb = if b == self.dim { 1.0 } else { x[b] };
                    outer[a * w + b] = xa * xb;
                }
            }
            for c in 0..self.blocks() {
                for d in 0..self.blocks() {
                    let coef = probs[c] * (f64::from(c == d) - probs[d]) / n;
                    if coef == 0.0 {
                        continue;
                    }
                    for a in 0..w {
                        for b in 0..w {
                            hess[(c * w + a, d * w + b)] += coef * outer[a * w + b];
                        }
                    }
                }
            }
        }
        for c in 0..self.blocks() {
            for j in 0..self.dim {
                hess[(c * w + j, c * w + j)] += self.l2;
            }
        }
        hess
    }
}

/// Fit a multinomial logistic classifier on `1..=C` labels.
///
/// Runs damped Newton from zero until the gradient norm falls under
/// `grad_tol` or the iteration cap; the cap sets `converged = false` on the
/// returned model instead of failing.
pub fn fit_classifier(
    features: &[Vec<f64>],
    labels: &[usize],
    config: &LogisticConfig,
) -> Result<LinearClassifier> {
    let n = features.len();
    if n == 0 || labels.len() != n {
        return Err(Error::Shape(format!(
            "{n} feature rows but {} labels",
            labels.len()
        )));
    }
    let num_classes = *labels.iter().max().unwrap();
    if num_classes < 2 {
        return Err(Error::Validation(
            "classifier needs at least 2 classes in the training split".into(),
        ));
    }
    if labels.contains(&0) {
        return Err(Error::Validation("labels must start at 1".into()));
    }
    let dim = features[0].len();
    if features.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape("ragged feature matrix".into()));
    }

    let problem = Problem {
        features,
        labels,
        num_classes,
        dim,
        l2: config.l2,
    };
    let size = problem.blocks() * problem.width();
    let mut theta = DVector::zeros(size);
    let mut converged = false;
    let mut iterations = 0usize;
    for _ in 0..config.max_iter {
        iterations += 1;
        let grad = problem.gradient(&theta);
        if grad.norm() <= config.grad_tol {
            converged = true;
            iterations -= 1;
            break;
        }
        let hess = problem.hessian(&theta);
        let direction = solve_spd(&hess, &grad)?;
        // Backtracking on the Armijo condition keeps Newton safe on
        // separable data where a full step can overshoot.
        let slope: f64 = grad.dot(&direction);
        let current = problem.objective(&theta);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &theta - step * &direction;
            if problem.objective(&candidate) <= current - 1e-4 * step * slope {
                theta = candidate;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No further progress is possible in this direction.
            break;
        }
    }
    if !converged && problem.gradient(&theta).norm() <= config.grad_tol {
        converged = true;
    }
    if !converged {
        log::warn!(
            "logistic fit stopped after {iterations} iterations above the gradient tolerance"
        );
    }

    let w = problem.width();
    let theta_rows = (0..problem.blocks())
        .map(|c| theta.as_slice()[c * w..(c + 1) * w].to_vec())
        .collect();
    Ok(LinearClassifier {
        theta: theta_rows,
        num_classes,
        dim,
        converged,
        iterations,
    })
}

fn solve_spd(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let mut jitter = 0.0;
    for _ in 0..6 {
        let mut attempt = matrix.clone();
        if jitter > 0.0 {
            for d in 0..attempt.nrows() {
                attempt[(d, d)] += jitter;
            }
        }
        if let Some(chol) = attempt.cholesky() {
            return Ok(chol.solve(rhs));
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 100.0 };
    }
    Err(Error::Validation(
        "logistic Hessian is numerically singular".into(),
    ))
}
