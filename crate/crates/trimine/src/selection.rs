//! Relevance-ranked sample selection and triplet mining.
//!
//! The selection mask keeps, per class, the top fraction of samples by
//! relevance score plus a random fraction of the remainder, sampled without
//! replacement. Mining pairs each eligible anchor in a batch with one
//! same-label positive and one different-label negative; the mask (when
//! present) restricts anchors and positives but never negatives.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DiscreteBoxLabels};
use crate::error::{Error, Result};
use crate::mi::RelevanceScores;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Top fraction per class, in `(0, 1]`.
    pub p_top: f64,
    /// Random fraction per class, in `[0, 1]`.
    pub p_rand: f64,
    pub seed: u64,
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_top > 0.0 && self.p_top <= 1.0) {
            return Err(Error::Config(format!(
                "p_top must lie in (0, 1], got {}",
                self.p_top
            )));
        }
        if !(0.0..=1.0).contains(&self.p_rand) {
            return Err(Error::Config(format!(
                "p_rand must lie in [0, 1], got {}",
                self.p_rand
            )));
        }
        Ok(())
    }
}

/// Per-class selected index sets and the aggregated binary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMask {
    /// Top-ranked indices per class (class `c` at position `c - 1`), ascending.
    pub per_class_top: Vec<Vec<usize>>,
    /// Randomly drawn indices per class, ascending.
    pub per_class_rand: Vec<Vec<usize>>,
    pub mask: Vec<bool>,
}

impl SelectionMask {
    pub fn selected(&self, index: usize) -> bool {
        self.mask[index]
    }

    pub fn selected_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Build the per-class top/random selection mask from relevance scores.
///
/// Per class: rank by score descending (ties to the lower index), keep
/// `max(1, floor(p_top * n_c))`, then draw `min(floor(p_rand * n_c), rest)`
/// uniformly without replacement from the remainder. Deterministic given
/// the seed.
pub fn build_mask(
    scores: &RelevanceScores,
    class_labels: &[usize],
    config: &SelectionConfig,
) -> Result<SelectionMask> {
    config.validate()?;
    let n = class_labels.len();
    if scores.scores.len() != n {
        return Err(Error::Shape(format!(
            "{} scores but {} labels",
            scores.scores.len(),
            n
        )));
    }
    if n == 0 {
        return Err(Error::Validation("no samples to select from".into()));
    }
    let num_classes = *class_labels.iter().max().unwrap();

    let mut per_class_top = Vec::with_capacity(num_classes);
    let mut per_class_rand = Vec::with_capacity(num_classes);
    let mut mask = vec![false; n];
    for c in 1..=num_classes {
        let members: Vec<usize> = (0..n).filter(|&i| class_labels[i] == c).collect();
        if members.is_empty() {
            return Err(Error::Validation(format!("class {c} has no samples")));
        }

        let mut ranked = members.clone();
        ranked.sort_by(|&a, &b| {
            scores.scores[b]
                .total_cmp(&scores.scores[a])
                .then(a.cmp(&b))
        });
        let n_top = ((config.p_top * members.len() as f64).floor() as usize).max(1);
        let mut top: Vec<usize> = ranked[..n_top.min(ranked.len())].to_vec();
        top.sort_unstable();

        let rest: Vec<usize> = members.iter().cloned().filter(|i| !top.contains(i)).collect();
        let n_rand = (config.p_rand * members.len() as f64).floor() as usize;
        let take = n_rand.min(rest.len());
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeds::derive(config.seed, &[seeds::TAG_SELECTION, c as u64]));
        let mut drawn: Vec<usize> = rand::seq::index::sample(&mut rng, rest.len(), take)
            .into_iter()
            .map(|j| rest[j])
            .collect();
        drawn.sort_unstable();

        for &i in top.iter().chain(&drawn) {
            mask[i] = true;
        }
        per_class_top.push(top);
        per_class_rand.push(drawn);
    }

    Ok(SelectionMask {
        per_class_top,
        per_class_rand,
        mask,
    })
}

/// Audit export: one row per sample with its score and selection kind.
pub fn write_mask_csv(
    dataset: &Dataset,
    scores: &RelevanceScores,
    mask: &SelectionMask,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "id,m_i,selected,selection_kind").map_err(|e| Error::io(path, e))?;
    for (i, sample) in dataset.samples().iter().enumerate() {
        let class = sample.class_label - 1;
        let kind = if mask.per_class_top[class].contains(&i) {
            "top"
        } else if mask.per_class_rand[class].contains(&i) {
            "rand"
        } else {
            "none"
        };
        writeln!(
            w,
            "{},{},{},{}",
            sample.id,
            scores.scores[i],
            u8::from(mask.mask[i]),
            kind
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Which annotation branch a triplet was mined under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Class,
    Box,
}

/// Anchor/positive/negative indices into the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
    pub branch: Branch,
}

fn mine_with_rng(
    labels: &[usize],
    mask: Option<&SelectionMask>,
    batch: &[usize],
    branch: Branch,
    rng: &mut ChaCha8Rng,
) -> Vec<Triplet> {
    let distinct = {
        let mut seen: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    };
    if distinct < 2 {
        log::warn!("batch holds a single label; no triplets can be mined");
        return Vec::new();
    }

    let eligible = |i: usize| mask.is_none_or(|m| m.selected(i));
    let mut triplets = Vec::new();
    let mut skipped = 0usize;
    for &anchor in batch {
        if !eligible(anchor) {
            continue;
        }
        let positives: Vec<usize> = batch
            .iter()
            .cloned()
            .filter(|&i| i != anchor && labels[i] == labels[anchor] && eligible(i))
            .collect();
        if positives.is_empty() {
            skipped += 1;
            continue;
        }
        let negatives: Vec<usize> = batch
            .iter()
            .cloned()
            .filter(|&i| labels[i] != labels[anchor])
            .collect();
        debug_assert!(!negatives.is_empty());
        let positive = positives[rng.gen_range(0..positives.len())];
        let negative = negatives[rng.gen_range(0..negatives.len())];
        triplets.push(Triplet {
            anchor,
            positive,
            negative,
            branch,
        });
    }
    if skipped > 0 {
        log::debug!("skipped {skipped} anchors without an eligible positive");
    }
    triplets
}

/// Mine class-branch triplets: one uniformly drawn positive and negative per
/// eligible anchor in the batch. Deterministic given the seed.
pub fn mine_class_triplets(
    labels: &[usize],
    mask: Option<&SelectionMask>,
    batch: &[usize],
    seed: u64,
) -> Vec<Triplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mine_with_rng(labels, mask, batch, Branch::Class, &mut rng)
}

/// Mine box-branch triplets over the discrete geometric labels.
pub fn mine_box_triplets(
    box_labels: &DiscreteBoxLabels,
    mask: Option<&SelectionMask>,
    batch: &[usize],
    seed: u64,
) -> Vec<Triplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mine_with_rng(&box_labels.labels, mask, batch, Branch::Box, &mut rng)
}

/// Batch-hard mining: per anchor, the farthest same-class positive and the
/// nearest different-class negative under the current projection. Ties go to
/// the lower dataset index.
///
/// `projections[j]` is the current embedding of `batch[j]`.
pub fn mine_hard_class_triplets(
    labels: &[usize],
    projections: &[Vec<f64>],
    batch: &[usize],
) -> Result<Vec<Triplet>> {
    if projections.len() != batch.len() {
        return Err(Error::Shape(format!(
            "{} projections for a batch of {}",
            projections.len(),
            batch.len()
        )));
    }
    let distinct = {
        let mut seen: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    };
    if distinct < 2 {
        log::warn!("batch holds a single label; no triplets can be mined");
        return Ok(Vec::new());
    }

    let mut triplets = Vec::new();
    let mut skipped = 0usize;
    for (aj, &anchor) in batch.iter().enumerate() {
        let mut hardest_positive: Option<(f64, usize)> = None;
        let mut hardest_negative: Option<(f64, usize)> = None;
        for (j, &i) in batch.iter().enumerate() {
            if i == anchor {
                continue;
            }
            let d = crate::model::distance(&projections[aj], &projections[j])?;
            if labels[i] == labels[anchor] {
                let better = match hardest_positive {
                    None => true,
                    Some((best, idx)) => d > best || (d == best && i < idx),
                };
                if better {
                    hardest_positive = Some((d, i));
                }
            } else {
                let better = match hardest_negative {
                    None => true,
                    Some((best, idx)) => d < best || (d == best && i < idx),
                };
                if better {
                    hardest_negative = Some((d, i));
                }
            }
        }
        match (hardest_positive, hardest_negative) {
            (Some((_, p)), Some((_, n))) => triplets.push(Triplet {
                anchor,
                positive: p,
                negative: n,
                branch: Branch::Class,
            }),
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        log::debug!("skipped {skipped} anchors without an eligible positive");
    }
    Ok(triplets)
}
