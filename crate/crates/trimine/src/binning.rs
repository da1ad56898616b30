//! Equal-frequency (quantile) binning of a real-valued column.

use crate::error::{Error, Result};

/// Result of binning a column: one label in `1..=bins` per input value and
/// the `bins - 1` value thresholds that separate the bins.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBins {
    pub labels: Vec<usize>,
    pub edges: Vec<f64>,
    pub bins: usize,
}

/// Assign each value to one of `bins` equal-frequency bins.
///
/// The sorted column is cut into `bins` contiguous chunks whose sizes differ
/// by at most one; the edge of chunk `j` is its largest value. A value lands
/// in bin `1 + #( edges strictly below it )`, so ties at an edge always
/// resolve to the lower bin and a constant column collapses to bin 1.
pub fn quantile_bins(values: &[f64], bins: usize) -> Result<QuantileBins> {
    let n = values.len();
    if bins < 2 {
        return Err(Error::Config(format!("bin count must be >= 2, got {bins}")));
    }
    if bins > n {
        return Err(Error::Config(format!(
            "bin count {bins} exceeds sample count {n}"
        )));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("cannot bin value {bad}")));
    }

    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);

    // Chunk sizes: the first (n mod bins) chunks take one extra element.
    let base = n / bins;
    let rem = n % bins;
    let mut edges = Vec::with_capacity(bins - 1);
    let mut end = 0usize;
    for chunk in 0..bins - 1 {
        end += base + usize::from(chunk < rem);
        edges.push(sorted[end - 1]);
    }

    let labels = values
        .iter()
        .map(|&v| 1 + edges.iter().filter(|&&e| e < v).count())
        .collect();

    Ok(QuantileBins { labels, edges, bins })
}
