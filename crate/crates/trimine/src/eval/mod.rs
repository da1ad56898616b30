//! Linear-probe evaluation of a latent space.
//!
//! Probes never touch the projection: a stratified split is drawn, a
//! logistic head and per-feature ridge heads are fit on the train portion,
//! and accuracy plus box-feature R-squared are measured on the test portion.

pub mod logistic;
pub mod ridge;

pub use logistic::{fit_classifier, LinearClassifier, LogisticConfig};
pub use ridge::{fit_ridge, fit_ridge_multi, RidgeModel};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::BoxFeatureMatrix;
use crate::error::{Error, Result};
use crate::seeds;

/// Stratified train/test split over class labels.
///
/// Per class the test share is `floor(fraction * n_c)`, clamped so both
/// sides keep at least one sample. Index lists come back sorted ascending;
/// the draw is deterministic in the seed.
pub fn stratified_split(
    class_labels: &[usize],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if class_labels.is_empty() {
        return Err(Error::Validation("nothing to split".into()));
    }
    let num_classes = *class_labels.iter().max().unwrap();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 1..=num_classes {
        let mut members: Vec<usize> = (0..class_labels.len())
            .filter(|&i| class_labels[i] == c)
            .collect();
        if members.len() < 2 {
            return Err(Error::Validation(format!(
                "class {c} has {} sample(s), too few to stratify",
                members.len()
            )));
        }
        let n_test = ((test_fraction * members.len() as f64).floor() as usize)
            .clamp(1, members.len() - 1);
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[seeds::TAG_SPLIT, c as u64]));
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Coefficient of determination with its degenerate-variance flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct R2 {
    pub value: f64,
    /// Set when the targets had zero variance and the value was pinned to 0.
    pub zero_variance: bool,
}

/// `1 - SS_res / SS_tot` about the target mean; can be negative.
pub fn r_squared(predictions: &[f64], targets: &[f64]) -> Result<R2> {
    if predictions.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if targets.len() < 2 {
        return Err(Error::Validation(
            "r-squared needs at least 2 observations".into(),
        ));
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Ok(R2 {
            value: 0.0,
            zero_variance: true,
        });
    }
    let ss_res: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok(R2 {
        value: 1.0 - ss_res / ss_tot,
        zero_variance: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// L2 penalty of the logistic head.
    pub classifier_l2: f64,
    /// Ridge penalty of the regression heads.
    pub regressor_l2: f64,
    pub classifier_max_iter: usize,
    pub classifier_grad_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            classifier_l2: 1e-3,
            regressor_l2: 1e-3,
            classifier_max_iter: 100,
            classifier_grad_tol: 1e-6,
        }
    }
}

/// Metrics of one probe run on one latent space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub accuracy: f64,
    pub r2_per_feature: Vec<f64>,
    pub r2_mean: f64,
    pub split_seed: u64,
    pub classifier_converged: bool,
}

/// Fit both probes on the train split and score them on the test split.
pub fn run_probe(
    projected: &[Vec<f64>],
    class_labels: &[usize],
    box_features: &BoxFeatureMatrix,
    train: &[usize],
    test: &[usize],
    config: &ProbeConfig,
    split_seed: u64,
) -> Result<ProbeResult> {
    let n = projected.len();
    if class_labels.len() != n || box_features.len() != n {
        return Err(Error::Shape(
            "projected embeddings, labels, and box features disagree on N".into(),
        ));
    }
    let gather = |idx: &[usize]| -> Vec<Vec<f64>> {
        idx.iter().map(|&i| projected[i].clone()).collect()
    };
    let train_x = gather(train);
    let test_x = gather(test);
    let train_y: Vec<usize> = train.iter().map(|&i| class_labels[i]).collect();
    let test_y: Vec<usize> = test.iter().map(|&i| class_labels[i]).collect();

    let classifier = fit_classifier(
        &train_x,
        &train_y,
        &LogisticConfig {
            l2: config.classifier_l2,
            max_iter: config.classifier_max_iter,
            grad_tol: config.classifier_grad_tol,
        },
    )?;
    let accuracy = classifier.accuracy(&test_x, &test_y);

    let normalized = box_features.normalized();
    let train_targets: Vec<Vec<f64>> = train.iter().map(|&i| normalized[i].clone()).collect();
    let heads = fit_ridge_multi(&train_x, &train_targets, config.regressor_l2)?;
    let mut r2_per_feature = Vec::with_capacity(heads.len());
    for (f, head) in heads.iter().enumerate() {
        let predictions: Vec<f64> = test_x.iter().map(|x| head.predict(x)).collect();
        let targets: Vec<f64> = test.iter().map(|&i| normalized[i][f]).collect();
        r2_per_feature.push(r_squared(&predictions, &targets)?.value);
    }
    let r2_mean = r2_per_feature.iter().sum::<f64>() / r2_per_feature.len().max(1) as f64;

    Ok(ProbeResult {
        accuracy,
        r2_per_feature,
        r2_mean,
        split_seed,
        classifier_converged: classifier.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        var.sqrt()
    };
    MetricSummary { mean, std }
}

/// Mean and sample standard deviation of accuracy and mean R-squared over
/// a set of runs. A single run reports zero deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateResult {
    pub runs: usize,
    pub accuracy: MetricSummary,
    pub r2: MetricSummary,
}

pub fn aggregate(results: &[ProbeResult]) -> Result<AggregateResult> {
    if results.is_empty() {
        return Err(Error::Validation("no probe results to aggregate".into()));
    }
    let accuracies: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
    let r2s: Vec<f64> = results.iter().map(|r| r.r2_mean).collect();
    Ok(AggregateResult {
        runs: results.len(),
        accuracy: summarize(&accuracies),
        r2: summarize(&r2s),
    })
}
