//! Experiment drivers shared by the command line and the test suites.

mod benchmark;
mod figure;
mod timing;

use std::fmt::Write as _;
use std::path::Path;

use crate::constraints::penalty;
use crate::dataset::{
    bin_features, load_adult, one_hot_encode, preprocess_adult, BinnedDataset, FeatureSchema,
    RawTable,
};
use crate::error::Result;

pub use benchmark::{
    run_gamma_sweep, run_mc_benchmark, sweep_csv, BenchmarkResult, BenchmarkSpec, RunKey, SweepCell,
    SweepSpec, TrialRun,
};
pub use figure::{
    expected_blue, figure_dataset, figure_report, run_figure_example, run_figure_mode,
    FigureOutcome, CLUSTERS,
};
pub use timing::{run_time_benchmark, timing_csv, SampleSize, TimingRow, TimingSpec};

/// Fraction of rows used for training in each Monte-Carlo trial.
pub const TRAIN_RATIO: f64 = 0.65;

/// Raw Adult files → one-hot encoded table and schema.
pub fn prepare_adult<P: AsRef<Path>>(paths: &[P]) -> Result<(RawTable, FeatureSchema)> {
    let raw = load_adult(paths)?;
    let (table, schema) = preprocess_adult(&raw)?;
    one_hot_encode(&table, &schema)
}

/// Loads `adult.data` and `adult.test` from `dir` and bins them.
pub fn adult_dataset(dir: impl AsRef<Path>, max_bins: usize) -> Result<BinnedDataset> {
    let dir = dir.as_ref();
    let (table, schema) = prepare_adult(&[dir.join("adult.data"), dir.join("adult.test")])?;
    bin_features(&table, &schema, max_bins)
}

/// `penalty(gamma, d)` for every gamma and `d = 0..=max_depth`, as CSV.
pub fn penalty_table(gammas: &[f64], max_depth: usize) -> Result<String> {
    let mut out = String::from("gamma");
    for d in 0..=max_depth {
        let _ = write!(out, ",d{d}");
    }
    out.push('\n');
    for &g in gammas {
        let _ = write!(out, "{g}");
        for d in 0..=max_depth {
            let _ = write!(out, ",{}", penalty(g, d)?);
        }
        out.push('\n');
    }
    Ok(out)
}
