//! Relevance-guided triplet learning over frozen embeddings.
//!
//! The pipeline: load embeddings plus class/box annotations, derive and
//! normalize geometric box features, estimate per-feature mutual information
//! with the class labels, score and select samples per class, mine triplets
//! under one of five strategies, train a small projection head, and measure
//! the resulting latent space with linear probes (classification accuracy
//! and box-feature regression R-squared), aggregated over seeded runs.

pub mod binning;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod losses;
pub mod mi;
pub mod model;
pub mod optim;
pub mod report;
pub mod seeds;
pub mod selection;
pub mod train;

pub use error::{Error, Result};
