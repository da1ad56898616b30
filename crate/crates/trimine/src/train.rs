//! The epoch/batch training loop for the projection head.
//!
//! All randomness is derived from the run seed with purpose tags, so two
//! runs with the same inputs and seed produce bit-identical trajectories
//! regardless of which strategy other runs used.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::losses::Objective;
use crate::model::{ModelConfig, ProjectionModel};
use crate::optim::{Adam, AdamConfig};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub optimizer: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            hidden_dims: vec![256],
            output_dim: 128,
            optimizer: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epoch count must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        if self.output_dim == 0 {
            return Err(Error::Config("output dimension must be positive".into()));
        }
        Ok(())
    }
}

/// A trained projection (or none for the untrained baseline) plus the
/// per-epoch mean batch loss.
#[derive(Debug, Clone)]
pub struct TrainedProjection {
    pub model: Option<ProjectionModel>,
    pub epoch_losses: Vec<f64>,
}

/// Train the projection head for one run.
///
/// Batches are drawn from `train_indices` only; the baseline strategy
/// returns no model and performs zero parameter updates.
pub fn train_projection(
    dataset: &Dataset,
    objective: &Objective,
    train_indices: &[usize],
    config: &TrainConfig,
    run_seed: u64,
) -> Result<TrainedProjection> {
    if !objective.needs_training() {
        return Ok(TrainedProjection {
            model: None,
            epoch_losses: Vec::new(),
        });
    }
    config.validate()?;
    if train_indices.is_empty() {
        return Err(Error::Validation("no training indices".into()));
    }

    let model_config = ModelConfig::new(
        dataset.embedding_dim(),
        config.hidden_dims.clone(),
        config.output_dim,
    );
    let mut model =
        ProjectionModel::new(model_config, seeds::derive(run_seed, &[seeds::TAG_INIT]))?;
    let mut adam = Adam::new(config.optimizer, model.param_count());
    let inputs = dataset.embedding_rows();

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut order = train_indices.to_vec();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seeds::derive(
            run_seed,
            &[seeds::TAG_SHUFFLE, epoch as u64],
        ));
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            if batch.len() < 2 {
                // A remainder batch of one can never form a triplet.
                batches += 1;
                continue;
            }
            let projections: Option<Vec<Vec<f64>>> = if objective.needs_projections() {
                let mut rows = Vec::with_capacity(batch.len());
                for &i in batch {
                    rows.push(model.forward(inputs[i])?);
                }
                Some(rows)
            } else {
                None
            };
            let class_seed = seeds::derive(
                run_seed,
                &[seeds::TAG_MINE_CLASS, epoch as u64, batch_index as u64],
            );
            let box_seed = seeds::derive(
                run_seed,
                &[seeds::TAG_MINE_BOX, epoch as u64, batch_index as u64],
            );
            let triplets =
                objective.mine_batch(batch, projections.as_deref(), class_seed, box_seed)?;
            batches += 1;
            if triplets.is_empty() {
                continue;
            }
            let (loss, grads) = objective.evaluate(&model, &inputs, &triplets)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "{} loss diverged at epoch {epoch}: {loss}",
                    objective.strategy()
                )));
            }
            adam.step(model.params_mut(), &grads).map_err(|e| {
                Error::NonFinite(format!(
                    "{} training aborted at epoch {epoch}: {e}",
                    objective.strategy()
                ))
            })?;
            epoch_loss += loss;
        }
        epoch_losses.push(epoch_loss / batches.max(1) as f64);
    }

    Ok(TrainedProjection {
        model: Some(model),
        epoch_losses,
    })
}

/// Project every sample, or hand back the raw embeddings when there is no
/// trained model.
pub fn project_all(model: Option<&ProjectionModel>, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
    match model {
        None => Ok(dataset
            .samples()
            .iter()
            .map(|s| s.embedding.clone())
            .collect()),
        Some(m) => dataset
            .samples()
            .iter()
            .map(|s| m.forward(&s.embedding))
            .collect(),
    }
}
