//! Clustering toolkit for gene-expression matrices.
//!
//! * [`matrix`]: loading, missing-value removal, synthetic blobs
//! * [`preprocess`]: four normalization + discretization pipelines
//! * [`cluster`]: K-Means with random or closest-pair seeding
//! * [`silhouette`]: silhouette widths
//! * [`harness`]: seeded-vs-random comparison runs, tables and charts

pub mod cluster;
pub mod error;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod preprocess;
pub mod silhouette;

pub use error::{Error, Result};
