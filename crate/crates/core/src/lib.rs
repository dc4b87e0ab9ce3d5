//! Gradient-boosted decision trees with four monotone-constraint enforcement
//! modes and a depth-based penalty on monotone splits.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: CSV ingestion, Adult preprocessing, one-hot encoding,
//!   equal-frequency binning and Monte-Carlo train/test splits.
//! - [`objective`]: gradients, hessians and evaluation metrics.
//! - [`tree`]: histograms, split search, leaf-wise growth and export.
//! - [`constraints`]: the `none` / `basic` / `fast` / `slow` engines and the
//!   monotone split penalty.
//! - [`boosting`]: the boosting loop and model (de)serialization.
//! - [`experiments`]: benchmark drivers shared by the CLI and the
//!   acceptance suite.
//!
//! Histogram construction and split evaluation run on rayon when the
//! `parallel` feature is enabled (default); without it every loop runs
//! sequentially and produces identical results.

pub mod boosting;
pub mod constraints;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod objective;
pub mod parallel;
pub mod tree;

pub use boosting::{BoosterConfig, BoosterModel};
pub use constraints::{ConstraintMode, OutputBounds, PenaltyParams};
pub use dataset::{BinnedDataset, FeatureSchema, RawTable};
pub use error::{Error, Result};
pub use objective::ObjectiveKind;
pub use parallel::Execution;
pub use tree::{Tree, TreeConfig};
