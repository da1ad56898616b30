//! Geometric box features, min-max normalization, and label discretization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binning::quantile_bins;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// A scalar feature derived from a bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxFeature {
    Width,
    Height,
    Area,
    Squareness,
}

/// The default feature set: width, height, area, symmetric squareness.
pub const DEFAULT_FEATURES: [BoxFeature; 4] = [
    BoxFeature::Width,
    BoxFeature::Height,
    BoxFeature::Area,
    BoxFeature::Squareness,
];

impl BoxFeature {
    pub fn name(&self) -> &'static str {
        match self {
            BoxFeature::Width => "width",
            BoxFeature::Height => "height",
            BoxFeature::Area => "area",
            BoxFeature::Squareness => "squareness",
        }
    }
}

impl fmt::Display for BoxFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoxFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "width" => Ok(BoxFeature::Width),
            "height" => Ok(BoxFeature::Height),
            "area" => Ok(BoxFeature::Area),
            "squareness" => Ok(BoxFeature::Squareness),
            other => Err(Error::Config(format!(
                "unknown box feature '{other}' (expected width|height|area|squareness)"
            ))),
        }
    }
}

/// N x F matrix of raw geometric features plus its per-column min-max
/// normalization to `[0, 1]`. Constant columns normalize to all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxFeatureMatrix {
    features: Vec<BoxFeature>,
    raw: Vec<Vec<f64>>,
    normalized: Vec<Vec<f64>>,
}

impl BoxFeatureMatrix {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[BoxFeature] {
        &self.features
    }

    pub fn raw(&self) -> &[Vec<f64>] {
        &self.raw
    }

    pub fn normalized(&self) -> &[Vec<f64>] {
        &self.normalized
    }

    pub fn raw_column(&self, f: usize) -> Vec<f64> {
        self.raw.iter().map(|row| row[f]).collect()
    }

    pub fn normalized_column(&self, f: usize) -> Vec<f64> {
        self.normalized.iter().map(|row| row[f]).collect()
    }

    pub fn feature_index(&self, feature: BoxFeature) -> Option<usize> {
        self.features.iter().position(|&f| f == feature)
    }
}

/// Derive the default four-column geometric feature matrix.
pub fn derive_box_features(dataset: &Dataset) -> BoxFeatureMatrix {
    derive_box_features_with(dataset, &DEFAULT_FEATURES)
}

/// Derive a feature matrix with an explicit column set.
pub fn derive_box_features_with(dataset: &Dataset, features: &[BoxFeature]) -> BoxFeatureMatrix {
    let raw: Vec<Vec<f64>> = dataset
        .samples()
        .iter()
        .map(|s| {
            features
                .iter()
                .map(|f| match f {
                    BoxFeature::Width => s.bbox.width(),
                    BoxFeature::Height => s.bbox.height(),
                    BoxFeature::Area => s.bbox.area(),
                    BoxFeature::Squareness => s.bbox.squareness(),
                })
                .collect()
        })
        .collect();
    let normalized = min_max_normalize(&raw, features.len());
    BoxFeatureMatrix {
        features: features.to_vec(),
        raw,
        normalized,
    }
}

fn min_max_normalize(raw: &[Vec<f64>], num_features: usize) -> Vec<Vec<f64>> {
    let mut mins = vec![f64::INFINITY; num_features];
    let mut maxs = vec![f64::NEG_INFINITY; num_features];
    for row in raw {
        for (f, &v) in row.iter().enumerate() {
            mins[f] = mins[f].min(v);
            maxs[f] = maxs[f].max(v);
        }
    }
    raw.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(f, &v)| {
                    let range = maxs[f] - mins[f];
                    if range == 0.0 {
                        0.0
                    } else {
                        (v - mins[f]) / range
                    }
                })
                .collect()
        })
        .collect()
}

/// Discrete geometric labels obtained by quantile-binning one raw feature.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBoxLabels {
    /// One label in `1..=bins` per sample.
    pub labels: Vec<usize>,
    pub bins: usize,
    pub source: BoxFeature,
    /// The `bins - 1` value thresholds between bins.
    pub bin_edges: Vec<f64>,
}

/// Equal-frequency binning of the chosen raw feature column into `bins`
/// discrete labels. Ties at a bin edge resolve to the lower bin.
pub fn discretize_box_labels(
    features: &BoxFeatureMatrix,
    source: BoxFeature,
    bins: usize,
) -> Result<DiscreteBoxLabels> {
    let col = features.feature_index(source).ok_or_else(|| {
        Error::Config(format!("feature '{source}' is not present in the matrix"))
    })?;
    let binned = quantile_bins(&features.raw_column(col), bins)?;
    Ok(DiscreteBoxLabels {
        labels: binned.labels,
        bins,
        source,
        bin_edges: binned.edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BoundingBox, Sample};

    fn dataset_from_boxes(boxes: &[(f64, f64, f64, f64)]) -> Dataset {
        let samples: Vec<Sample> = boxes
            .iter()
            .enumerate()
            .map(|(i, &(a, b, c, d))| Sample {
                id: format!("s{i}"),
                embedding: vec![i as f64, 0.5],
                class_label: 1,
                bbox: BoundingBox::new(a, b, c, d).unwrap(),
            })
            .collect();
        Dataset::new(samples, vec!["only".into()]).unwrap()
    }

    #[test]
    fn square_box_features() {
        let ds = dataset_from_boxes(&[(0.0, 0.0, 2.0, 2.0), (0.0, 0.0, 1.0, 1.0)]);
        let m = derive_box_features(&ds);
        assert_eq!(m.raw()[0], vec![2.0, 2.0, 4.0, 1.0]);
    }

    #[test]
    fn wide_box_features() {
        let ds = dataset_from_boxes(&[(0.0, 0.0, 4.0, 1.0), (0.0, 0.0, 1.0, 1.0)]);
        let m = derive_box_features(&ds);
        assert_eq!(m.raw()[0], vec![4.0, 1.0, 4.0, 0.25]);
    }

    #[test]
    fn constant_column_normalizes_to_zero() {
        // Same area everywhere, differing aspect.
        let ds = dataset_from_boxes(&[(0.0, 0.0, 2.0, 2.0), (0.0, 0.0, 4.0, 1.0)]);
        let m = derive_box_features(&ds);
        let area = m.feature_index(BoxFeature::Area).unwrap();
        assert_eq!(m.normalized_column(area), vec![0.0, 0.0]);
    }

    #[test]
    fn non_constant_columns_attain_zero_and_one() {
        let ds = dataset_from_boxes(&[
            (0.0, 0.0, 2.0, 2.0),
            (0.0, 0.0, 5.0, 1.0),
            (0.0, 0.0, 3.0, 4.0),
        ]);
        let m = derive_box_features(&ds);
        for f in 0..m.num_features() {
            let col = m.normalized_column(f);
            assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(col.contains(&0.0));
            assert!(col.contains(&1.0));
        }
    }

    #[test]
    fn normalization_is_idempotent() {
        let raw = vec![vec![0.0], vec![0.25], vec![1.0]];
        let once = min_max_normalize(&raw, 1);
        let twice = min_max_normalize(&once, 1);
        assert_eq!(once, twice);
    }

    #[test]
    fn discretize_six_areas_three_bins() {
        let ds = dataset_from_boxes(&[
            (0.0, 0.0, 1.0, 1.0),
            (0.0, 0.0, 1.0, 2.0),
            (0.0, 0.0, 1.0, 3.0),
            (0.0, 0.0, 2.0, 2.0),
            (0.0, 0.0, 1.0, 5.0),
            (0.0, 0.0, 2.0, 3.0),
        ]);
        let m = derive_box_features(&ds);
        let labels = discretize_box_labels(&m, BoxFeature::Area, 3).unwrap();
        assert_eq!(labels.labels, vec![1, 1, 2, 2, 3, 3]);
        assert_eq!(labels.bin_edges.len(), 2);
    }

    #[test]
    fn single_bin_is_config_error() {
        let ds = dataset_from_boxes(&[(0.0, 0.0, 1.0, 1.0), (0.0, 0.0, 2.0, 2.0)]);
        let m = derive_box_features(&ds);
        assert!(matches!(
            discretize_box_labels(&m, BoxFeature::Area, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn constant_column_bins_to_one() {
        let ds = dataset_from_boxes(&[(0.0, 0.0, 2.0, 2.0), (0.0, 0.0, 1.0, 4.0)]);
        let m = derive_box_features(&ds);
        let labels = discretize_box_labels(&m, BoxFeature::Area, 2).unwrap();
        assert_eq!(labels.labels, vec![1, 1]);
    }
}
