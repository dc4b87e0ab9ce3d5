#![allow(dead_code)]

pub mod dot;

use std::collections::BTreeSet;
use std::path::PathBuf;

use monotree::objective::{grad_hess, GradHess, ObjectiveKind};
use monotree::BinnedDataset;
use rand::Rng;

pub fn adult_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Random dataset with `features` columns, of which the first
/// `directions.len()` get the given monotone directions.
/// Targets mix a monotone trend with interactions and noise, so that
/// unconstrained trees do break monotonicity.
pub fn synthetic(
    rng: &mut impl Rng,
    rows: usize,
    features: usize,
    directions: &[i8],
    objective: ObjectiveKind,
    max_bins: usize,
) -> BinnedDataset {
    let mut cols = vec![Vec::with_capacity(rows); features];
    let mut labels = Vec::with_capacity(rows);
    let weights: Vec<f64> = (0..features).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..rows {
        let x: Vec<f64> = (0..features)
            .map(|_| (rng.gen_range(0.0..10.0f64) * 4.0).round() / 4.0)
            .collect();
        let mut t = 0.0;
        for f in 0..features {
            let d = directions.get(f).copied().unwrap_or(0) as f64;
            t += if d != 0.0 { 0.4 * d * x[f] } else { weights[f] * x[f] };
        }
        t += (x[0] * 1.3).sin() * 2.0 + (x[features - 1] - 5.0) * (x[0] - 5.0) * 0.08;
        t += rng.gen_range(-1.5..1.5);
        let y = match objective {
            ObjectiveKind::L2 => t,
            ObjectiveKind::BinaryLogloss => {
                let p = 1.0 / (1.0 + (-(t - 2.0) * 0.5).exp());
                (rng.gen::<f64>() < p) as u8 as f64
            }
        };
        for f in 0..features {
            cols[f].push(x[f]);
        }
        labels.push(y);
    }
    let mut dirs = vec![0i8; features];
    dirs[..directions.len()].copy_from_slice(directions);
    let names = (0..features).map(|f| format!("f{f}")).collect();
    BinnedDataset::from_columns(names, &cols, labels, dirs, max_bins).unwrap()
}

/// 1-2 nonzero directions, at least one of them possibly -1.
pub fn random_directions(rng: &mut impl Rng, features: usize) -> Vec<i8> {
    let k = rng.gen_range(1..=2.min(features));
    let mut dirs = vec![0i8; features];
    let mut picked = BTreeSet::new();
    while picked.len() < k {
        picked.insert(rng.gen_range(0..features));
    }
    for f in picked {
        dirs[f] = if rng.gen_bool(0.5) { 1 } else { -1 };
    }
    dirs
}

pub fn gradients(data: &BinnedDataset, kind: ObjectiveKind, margin: f64) -> Vec<GradHess> {
    data.labels()
        .iter()
        .map(|&y| grad_hess(kind, margin, y))
        .collect()
}

pub fn l2_residual_gradients(data: &BinnedDataset) -> Vec<GradHess> {
    let labels = data.labels();
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    gradients(data, ObjectiveKind::L2, mean)
}
