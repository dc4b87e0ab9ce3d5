//! Monotonicity checks on finished trees and ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tree::Tree;

/// Two leaves whose outputs break the required order along `feature`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub feature: usize,
    /// Leaf lying below the other on `feature`.
    pub low_leaf: usize,
    pub high_leaf: usize,
    pub low_value: f64,
    pub high_value: f64,
}

/// Exhaustive check over leaf pairs. Two points differing only on feature
/// `f` land in leaves that overlap on every other feature, so checking all
/// such leaf pairs covers every pair of points.
pub fn tree_violations(tree: &Tree, directions: &[i8]) -> Vec<Violation> {
    let leaves: Vec<usize> = tree.leaf_ids().collect();
    let mut out = Vec::new();
    for (i, &a) in leaves.iter().enumerate() {
        let ra = &tree.node(a).region;
        for &b in &leaves[i + 1..] {
            let rb = &tree.node(b).region;
            let Some(f) = ra.single_separating_feature(rb) else {
                continue;
            };
            let dir = directions[f];
            if dir == 0 {
                continue;
            }
            let (low, high) = if ra.interval(f).1 < rb.interval(f).0 {
                (a, b)
            } else {
                (b, a)
            };
            let (lv, hv) = (tree.node(low).value, tree.node(high).value);
            if (dir > 0 && lv > hv) || (dir < 0 && lv < hv) {
                out.push(Violation {
                    feature: f,
                    low_leaf: low,
                    high_leaf: high,
                    low_value: lv,
                    high_value: hv,
                });
            }
        }
    }
    out
}

/// Sum of tree outputs at a binned point.
pub fn ensemble_value(trees: &[Tree], point: &[u16]) -> f64 {
    trees.iter().map(|t| t.predict_bins(point)).sum()
}

/// Draws `samples` random points, moves each along one random monotone
/// feature, and counts pairs where the ensemble sum moves the wrong way.
pub fn sampled_violations(
    trees: &[Tree],
    bin_counts: &[u16],
    directions: &[i8],
    samples: usize,
    seed: u64,
) -> usize {
    let monotone: Vec<usize> = (0..directions.len()).filter(|&f| directions[f] != 0).collect();
    if monotone.is_empty() || trees.is_empty() {
        return 0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut point = vec![0u16; bin_counts.len()];
    for _ in 0..samples {
        for (p, &c) in point.iter_mut().zip(bin_counts) {
            *p = rng.gen_range(0..c.max(1));
        }
        let f = monotone[rng.gen_range(0..monotone.len())];
        let a = rng.gen_range(0..bin_counts[f].max(1));
        let b = rng.gen_range(0..bin_counts[f].max(1));
        let (lo, hi) = (a.min(b), a.max(b));
        point[f] = lo;
        let v_lo = ensemble_value(trees, &point);
        point[f] = hi;
        let v_hi = ensemble_value(trees, &point);
        if (directions[f] > 0 && v_lo > v_hi) || (directions[f] < 0 && v_lo < v_hi) {
            violations += 1;
        }
    }
    violations
}
