//! The five training setups and the objective they induce.
//!
//! An [`Objective`] owns everything the trainer needs per epoch: which
//! branches to mine, the branch weights, the margin, and (for the
//! task-guided setup) the selection mask built once up front.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DiscreteBoxLabels};
use crate::error::{Error, Result};
use crate::mi::RelevanceScores;
use crate::model::ProjectionModel;
use crate::selection::{
    build_mask, mine_box_triplets, mine_class_triplets, mine_hard_class_triplets, SelectionConfig,
    SelectionMask, Triplet,
};

/// The training setups under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// No triplet training; probes consume the raw embeddings.
    Wtl,
    /// Class-label triplet loss.
    Cltl,
    /// Class-label triplet loss with batch-hard selection.
    CltlHard,
    /// Multi-annotation triplet loss over class and box branches.
    Matl,
    /// Multi-annotation triplet loss restricted by the relevance mask.
    TgMatl,
}

impl Strategy {
    pub fn all() -> [Strategy; 5] {
        [
            Strategy::Wtl,
            Strategy::Cltl,
            Strategy::CltlHard,
            Strategy::Matl,
            Strategy::TgMatl,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Wtl => "wtl",
            Strategy::Cltl => "cltl",
            Strategy::CltlHard => "cltl-hard",
            Strategy::Matl => "matl",
            Strategy::TgMatl => "tg-matl",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wtl" => Ok(Strategy::Wtl),
            "cltl" => Ok(Strategy::Cltl),
            "cltl-hard" => Ok(Strategy::CltlHard),
            "matl" => Ok(Strategy::Matl),
            "tg-matl" => Ok(Strategy::TgMatl),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected wtl|cltl|cltl-hard|matl|tg-matl)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub strategy: Strategy,
    /// Branch weight in `[0, 1]`; only the multi-annotation setups use it.
    pub lambda: f64,
    pub margin: f64,
    /// Required for `TgMatl`, forbidden otherwise.
    pub selection: Option<SelectionConfig>,
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.margin <= 0.0 || !self.margin.is_finite() {
            return Err(Error::Config(format!(
                "margin must be positive, got {}",
                self.margin
            )));
        }
        match (self.strategy, &self.selection) {
            (Strategy::TgMatl, None) => Err(Error::Config(
                "tg-matl requires a selection configuration".into(),
            )),
            (Strategy::TgMatl, Some(sel)) => sel.validate(),
            (_, Some(_)) => Err(Error::Config(format!(
                "strategy {} does not take a selection configuration",
                self.strategy
            ))),
            (_, None) => Ok(()),
        }
    }
}

/// Per-epoch triplet supplier and loss evaluator for one strategy.
#[derive(Debug, Clone)]
pub struct Objective {
    strategy: Strategy,
    weights: (f64, f64),
    margin: f64,
    class_labels: Vec<usize>,
    box_labels: DiscreteBoxLabels,
    mask: Option<SelectionMask>,
}

/// Assemble the objective for a strategy. Relevance scores are required
/// exactly when the strategy is task guided; the selection mask is built
/// once, before any training.
pub fn build_objective(
    config: &LossConfig,
    dataset: &Dataset,
    box_labels: &DiscreteBoxLabels,
    scores: Option<&RelevanceScores>,
) -> Result<Objective> {
    config.validate()?;
    if box_labels.labels.len() != dataset.len() {
        return Err(Error::Shape(format!(
            "{} box labels for {} samples",
            box_labels.labels.len(),
            dataset.len()
        )));
    }
    let class_labels = dataset.class_labels();
    let mask = match config.strategy {
        Strategy::TgMatl => {
            let scores = scores.ok_or_else(|| {
                Error::Config("tg-matl requires relevance scores".into())
            })?;
            let selection = config.selection.as_ref().unwrap();
            Some(build_mask(scores, &class_labels, selection)?)
        }
        _ => None,
    };
    let weights = match config.strategy {
        Strategy::Wtl => (0.0, 0.0),
        Strategy::Cltl | Strategy::CltlHard => (1.0, 0.0),
        Strategy::Matl | Strategy::TgMatl => (1.0 - config.lambda, config.lambda),
    };
    Ok(Objective {
        strategy: config.strategy,
        weights,
        margin: config.margin,
        class_labels,
        box_labels: box_labels.clone(),
        mask,
    })
}

impl Objective {
    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn weights(&self) -> (f64, f64) {
        self.weights
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn mask(&self) -> Option<&SelectionMask> {
        self.mask.as_ref()
    }

    pub fn needs_training(&self) -> bool {
        self.strategy != Strategy::Wtl
    }

    pub fn needs_projections(&self) -> bool {
        self.strategy == Strategy::CltlHard
    }

    /// Mine this epoch-batch's triplets. `projections` (aligned with the
    /// batch) is consulted only by the batch-hard strategy.
    pub fn mine_batch(
        &self,
        batch: &[usize],
        projections: Option<&[Vec<f64>]>,
        class_seed: u64,
        box_seed: u64,
    ) -> Result<Vec<Triplet>> {
        match self.strategy {
            Strategy::Wtl => Ok(Vec::new()),
            Strategy::Cltl => Ok(mine_class_triplets(
                &self.class_labels,
                None,
                batch,
                class_seed,
            )),
            Strategy::CltlHard => {
                let projections = projections.ok_or_else(|| {
                    Error::Config("batch-hard mining needs current projections".into())
                })?;
                mine_hard_class_triplets(&self.class_labels, projections, batch)
            }
            Strategy::Matl | Strategy::TgMatl => {
                let mask = self.mask.as_ref();
                let mut triplets =
                    mine_class_triplets(&self.class_labels, mask, batch, class_seed);
                triplets.extend(mine_box_triplets(&self.box_labels, mask, batch, box_seed));
                Ok(triplets)
            }
        }
    }

    /// Branch-weighted loss and gradients for a fixed triplet list.
    pub fn evaluate(
        &self,
        model: &ProjectionModel,
        inputs: &[&[f64]],
        triplets: &[Triplet],
    ) -> Result<(f64, Vec<f64>)> {
        crate::model::loss_and_gradients(model, triplets, inputs, self.margin, self.weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{derive_box_features, discretize_box_labels, generate_synthetic, BoxFeature};
    use crate::mi::relevance_scores;

    fn fixture() -> (Dataset, DiscreteBoxLabels, RelevanceScores) {
        let ds = generate_synthetic(&[6, 6, 6], 4, 0.7, 1).unwrap();
        let features = derive_box_features(&ds);
        let box_labels = discretize_box_labels(&features, BoxFeature::Area, 3).unwrap();
        let scores = relevance_scores(&features, &ds.class_labels(), 4).unwrap();
        (ds, box_labels, scores)
    }

    fn config(strategy: Strategy) -> LossConfig {
        LossConfig {
            strategy,
            lambda: 0.5,
            margin: 1.0,
            selection: match strategy {
                Strategy::TgMatl => Some(SelectionConfig {
                    p_top: 0.5,
                    p_rand: 0.2,
                    seed: 3,
                }),
                _ => None,
            },
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::all() {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("nope".parse::<Strategy>().is_err());
    }

    #[test]
    fn tg_matl_without_scores_is_config_error() {
        let (ds, box_labels, _) = fixture();
        let err = build_objective(&config(Strategy::TgMatl), &ds, &box_labels, None);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn selection_on_plain_matl_is_rejected() {
        let (ds, box_labels, scores) = fixture();
        let mut cfg = config(Strategy::Matl);
        cfg.selection = Some(SelectionConfig {
            p_top: 0.5,
            p_rand: 0.0,
            seed: 0,
        });
        assert!(build_objective(&cfg, &ds, &box_labels, Some(&scores)).is_err());
    }

    #[test]
    fn matl_weights_both_branches_equally_at_half_lambda() {
        let (ds, box_labels, _) = fixture();
        let objective = build_objective(&config(Strategy::Matl), &ds, &box_labels, None).unwrap();
        assert_eq!(objective.weights(), (0.5, 0.5));
    }

    #[test]
    fn degenerate_selection_matches_matl_triplet_pool() {
        let (ds, box_labels, scores) = fixture();
        let mut tg = config(Strategy::TgMatl);
        tg.selection = Some(SelectionConfig {
            p_top: 1.0,
            p_rand: 0.0,
            seed: 5,
        });
        let tg_obj = build_objective(&tg, &ds, &box_labels, Some(&scores)).unwrap();
        let matl_obj = build_objective(&config(Strategy::Matl), &ds, &box_labels, None).unwrap();
        let batch: Vec<usize> = (0..ds.len()).collect();
        let a = tg_obj.mine_batch(&batch, None, 11, 12).unwrap();
        let b = matl_obj.mine_batch(&batch, None, 11, 12).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lambda_is_affine_in_the_loss() {
        let (ds, box_labels, _) = fixture();
        let model = ProjectionModel::new(
            crate::model::ModelConfig::new(ds.embedding_dim(), vec![6], 3),
            2,
        )
        .unwrap();
        let inputs = ds.embedding_rows();
        let batch: Vec<usize> = (0..ds.len()).collect();
        let base = build_objective(&config(Strategy::Matl), &ds, &box_labels, None).unwrap();
        let triplets = base.mine_batch(&batch, None, 7, 8).unwrap();
        let loss_at = |lambda: f64| {
            crate::model::loss_and_gradients(&model, &triplets, &inputs, 1.0, (1.0 - lambda, lambda))
                .unwrap()
                .0
        };
        let at0 = loss_at(0.0);
        let at1 = loss_at(1.0);
        for lambda in [0.25, 0.5, 0.75] {
            let expected = (1.0 - lambda) * at0 + lambda * at1;
            assert!((loss_at(lambda) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_endpoints_reproduce_single_branch_losses() {
        let (ds, box_labels, _) = fixture();
        let model = ProjectionModel::new(
            crate::model::ModelConfig::new(ds.embedding_dim(), vec![6], 3),
            2,
        )
        .unwrap();
        let inputs = ds.embedding_rows();
        let batch: Vec<usize> = (0..ds.len()).collect();
        let base = build_objective(&config(Strategy::Matl), &ds, &box_labels, None).unwrap();
        let all = base.mine_batch(&batch, None, 7, 8).unwrap();
        let class_only: Vec<Triplet> = all
            .iter()
            .filter(|t| t.branch == crate::selection::Branch::Class)
            .cloned()
            .collect();
        let box_only: Vec<Triplet> = all
            .iter()
            .filter(|t| t.branch == crate::selection::Branch::Box)
            .cloned()
            .collect();
        let eval = |triplets: &[Triplet], weights: (f64, f64)| {
            crate::model::loss_and_gradients(&model, triplets, &inputs, 1.0, weights)
                .unwrap()
                .0
        };
        assert_eq!(eval(&all, (1.0, 0.0)), eval(&class_only, (1.0, 0.0)));
        assert_eq!(eval(&all, (0.0, 1.0)), eval(&box_only, (0.0, 1.0)));
    }
}
