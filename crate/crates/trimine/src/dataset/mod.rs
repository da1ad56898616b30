//! Samples, datasets, and everything derived from their annotations.
//!
//! A [`Dataset`] couples precomputed embeddings with two annotation kinds:
//! a categorical class label (contiguous `1..=C`) and a bounding box. The
//! upstream encoders that produced the embeddings are out of scope; the
//! pipeline only ever consumes their output from files.

pub mod features;
pub mod io;
pub mod synthetic;

pub use features::{
    derive_box_features, derive_box_features_with, discretize_box_labels, BoxFeature,
    BoxFeatureMatrix, DiscreteBoxLabels, DEFAULT_FEATURES,
};
pub use io::{load_dataset, write_dataset};
pub use synthetic::{generate_synthetic, SyntheticConfig};

use crate::error::{Error, Result};

/// Axis-aligned bounding box in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        for v in [self.x_min, self.y_min, self.x_max, self.y_max] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("box coordinate {v}")));
            }
        }
        if self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::Validation(format!(
                "degenerate box ({}, {}, {}, {})",
                self.x_min, self.y_min, self.x_max, self.y_max
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Aspect descriptor `min(w, h) / max(w, h)`, symmetric under swapping
    /// width and height, in `(0, 1]`.
    pub fn squareness(&self) -> f64 {
        let (w, h) = (self.width(), self.height());
        w.min(h) / w.max(h)
    }
}

/// One annotated sample: id, frozen embedding, class label, bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub embedding: Vec<f64>,
    /// Class label in `1..=C`.
    pub class_label: usize,
    pub bbox: BoundingBox,
}

/// An immutable collection of samples with a shared embedding dimension and
/// a contiguous class-label space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    /// Original class names, indexed by `class_label - 1`.
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, class_names: Vec<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("dataset has no samples".into()));
        }
        if class_names.is_empty() {
            return Err(Error::Validation("dataset has no classes".into()));
        }
        let dim = samples[0].embedding.len();
        if dim == 0 {
            return Err(Error::Validation("embedding dimension is zero".into()));
        }
        let mut seen = vec![false; class_names.len()];
        for s in &samples {
            if s.embedding.len() != dim {
                return Err(Error::Shape(format!(
                    "sample {} has embedding length {}, expected {dim}",
                    s.id,
                    s.embedding.len()
                )));
            }
            if let Some(bad) = s.embedding.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "embedding of sample {} contains {bad}",
                    s.id
                )));
            }
            s.bbox.validate()?;
            if s.class_label == 0 || s.class_label > class_names.len() {
                return Err(Error::Validation(format!(
                    "sample {} has class label {} outside 1..={}",
                    s.id,
                    s.class_label,
                    class_names.len()
                )));
            }
            seen[s.class_label - 1] = true;
        }
        if let Some(empty) = seen.iter().position(|&s| !s) {
            return Err(Error::Validation(format!(
                "class {} ({}) has no samples",
                empty + 1,
                class_names[empty]
            )));
        }
        Ok(Dataset {
            samples,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn embedding_dim(&self) -> usize {
        self.samples[0].embedding.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.class_label).collect()
    }

    /// Per-class sample counts, indexed by `class_label - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes()];
        for s in &self.samples {
            counts[s.class_label - 1] += 1;
        }
        counts
    }

    /// Borrowed rows of the embedding matrix, in sample order.
    pub fn embedding_rows(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.embedding.as_slice()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, class: usize) -> Sample {
        Sample {
            id: id.into(),
            embedding: vec![0.0, 1.0],
            class_label: class,
            bbox: BoundingBox::new(0.0, 0.0, 2.0, 3.0).unwrap(),
        }
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 2.0, 1.0, 2.0).is_err());
        assert!(BoundingBox::new(1.0, 0.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn rejects_inconsistent_embedding_lengths() {
        let mut s2 = sample("b", 1);
        s2.embedding = vec![1.0];
        let err = Dataset::new(vec![sample("a", 1), s2], vec!["c".into()]);
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_empty_class() {
        let err = Dataset::new(vec![sample("a", 1)], vec!["c1".into(), "c2".into()]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn counts_by_class() {
        let ds = Dataset::new(
            vec![sample("a", 1), sample("b", 2), sample("c", 1)],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        assert_eq!(ds.class_counts(), vec![2, 1]);
        assert_eq!(ds.embedding_dim(), 2);
    }
}
