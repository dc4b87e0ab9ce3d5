//! Four-cluster regression example with a prescribed split sequence, on
//! which the constraint modes give visibly different leaf values.

use std::fmt::Write as _;

use crate::constraints::{ConstraintMode, PenaltyParams};
use crate::dataset::BinnedDataset;
use crate::error::{Error, Result};
use crate::objective::{grad_hess, ObjectiveKind};
use crate::parallel::Execution;
use crate::tree::{Tree, TreeBuilder, TreeConfig};

/// `(name, target, count, x range, y range)`.
pub const CLUSTERS: [(&str, f64, usize, (f64, f64), (f64, f64)); 4] = [
    ("blue", 0.7, 10, (0.1, 1.9), (0.1, 1.3)),
    ("black", 0.2, 40, (0.1, 1.9), (2.1, 3.9)),
    ("red", 0.8, 10, (2.1, 3.9), (0.1, 1.9)),
    ("green", 0.5, 20, (2.1, 3.9), (2.1, 3.9)),
];

/// Expected blue-cluster prediction per mode.
pub fn expected_blue(mode: ConstraintMode) -> f64 {
    match mode {
        ConstraintMode::Basic => 0.45,
        ConstraintMode::Fast => 0.5,
        ConstraintMode::Slow | ConstraintMode::None => 0.7,
    }
}

/// Points sit on a deterministic lattice inside each cluster's box.
pub fn figure_dataset() -> Result<BinnedDataset> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut targets = Vec::new();
    for &(_, target, count, (x0, x1), (y0, y1)) in &CLUSTERS {
        for i in 0..count {
            let u = i as f64 / (count - 1) as f64;
            let v = ((i * 7) % count) as f64 / (count - 1) as f64;
            xs.push(x0 + (x1 - x0) * u);
            ys.push(y0 + (y1 - y0) * v);
            targets.push(target);
        }
    }
    BinnedDataset::from_columns(
        vec!["x".into(), "y".into()],
        &[xs, ys],
        targets,
        vec![1, 0],
        255,
    )
}

#[derive(Debug, Clone)]
pub struct FigureOutcome {
    pub mode: ConstraintMode,
    /// Prediction (base + leaf output) per cluster, in [`CLUSTERS`] order.
    pub cluster_values: Vec<f64>,
    pub tree: Tree,
}

impl FigureOutcome {
    pub fn blue(&self) -> f64 {
        self.cluster_values[0]
    }
}

fn threshold(data: &BinnedDataset, feature: usize, value: f64) -> Result<u16> {
    data.mappers()[feature]
        .threshold_bin(value)
        .ok_or_else(|| Error::Parameter(format!("no bin threshold at {value}")))
}

/// Grows the fixed three-split tree under `mode` (l2, lambda 0, learning
/// rate 1, base = mean target).
pub fn run_figure_mode(data: &BinnedDataset, mode: ConstraintMode) -> Result<FigureOutcome> {
    let labels = data.labels();
    let base = labels.iter().sum::<f64>() / labels.len() as f64;
    let gh: Vec<_> = labels
        .iter()
        .map(|&y| grad_hess(ObjectiveKind::L2, base, y))
        .collect();
    let config = TreeConfig {
        num_leaves: 4,
        max_depth: 2,
        min_data_in_leaf: 1,
        lambda: 0.0,
        min_hessian: 0.0,
        mode,
        penalty: PenaltyParams::default(),
        execution: Execution::Sequential,
    };
    let rows = (0..data.row_count() as u32).collect();
    let mut b = TreeBuilder::new(data, rows, &gh, config)?;
    let x2 = threshold(data, 0, 2.0)?;
    let y2 = threshold(data, 1, 2.0)?;
    let y15 = threshold(data, 1, 1.5)?;
    b.force_split(0, 0, x2)?;
    let (left, right) = {
        let s = b.tree().node(0).split().expect("root split");
        (s.left, s.right)
    };
    b.force_split(right, 1, y2)?;
    b.force_split(left, 1, y15)?;
    let tree = b.finish().tree;

    let mut cluster_values = Vec::new();
    let mut row = 0;
    for &(_, _, count, _, _) in &CLUSTERS {
        cluster_values.push(base + tree.predict_row(data, row));
        row += count;
    }
    Ok(FigureOutcome {
        mode,
        cluster_values,
        tree,
    })
}

pub fn run_figure_example() -> Result<Vec<FigureOutcome>> {
    let data = figure_dataset()?;
    ConstraintMode::ALL
        .iter()
        .map(|&m| run_figure_mode(&data, m))
        .collect()
}

pub fn figure_report(outcomes: &[FigureOutcome]) -> String {
    let mut out = String::from("method,blue,expected_blue,abs_error,black,red,green\n");
    for o in outcomes {
        let expected = expected_blue(o.mode);
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.3e},{:.6},{:.6},{:.6}",
            o.mode,
            o.blue(),
            expected,
            (o.blue() - expected).abs(),
            o.cluster_values[1],
            o.cluster_values[2],
            o.cluster_values[3]
        );
    }
    out
}
