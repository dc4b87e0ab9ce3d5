use std::collections::BTreeSet;

use super::walk::opposite_leaves;
use super::{
    check_feasible, ConstraintEngine, ConstraintMode, ConstraintUpdateReport, ConstraintView,
    OutputBounds,
};
use crate::error::Result;
use crate::tree::{SplitCandidate, Tree};

/// Mode `fast`: a single `(min, max)` per leaf, tightened by sibling seeding
/// and by propagation across monotone ancestors.
#[derive(Debug, Default, Clone)]
pub struct FastEngine {
    bounds: Vec<OutputBounds>,
}

impl FastEngine {
    pub fn bounds(&self, leaf: usize) -> OutputBounds {
        self.bounds.get(leaf).copied().unwrap_or_default()
    }
}

impl ConstraintEngine for FastEngine {
    fn mode(&self) -> ConstraintMode {
        ConstraintMode::Fast
    }

    fn init(&mut self, tree: &Tree) {
        self.bounds = vec![OutputBounds::UNBOUNDED; tree.node_count()];
    }

    fn view(&self, leaf: usize) -> ConstraintView<'_> {
        ConstraintView::Uniform(self.bounds(leaf))
    }

    fn on_split(
        &mut self,
        tree: &Tree,
        split_leaf: usize,
        candidate: &SplitCandidate,
        directions: &[i8],
    ) -> Result<ConstraintUpdateReport> {
        let split = *tree.node(split_leaf).split().expect("split leaf is internal");
        self.bounds.resize(tree.node_count(), OutputBounds::UNBOUNDED);
        let parent = self.bounds[split_leaf];
        let (mut left, mut right) = (parent, parent);
        let dir = directions[split.feature];
        if dir > 0 {
            left.max = left.max.min(candidate.right_output);
            right.min = right.min.max(candidate.left_output);
        } else if dir < 0 {
            left.min = left.min.max(candidate.right_output);
            right.max = right.max.min(candidate.left_output);
        }
        check_feasible(split.left, &left)?;
        check_feasible(split.right, &right)?;
        self.bounds[split.left] = left;
        self.bounds[split.right] = right;

        let outputs = [candidate.left_output, candidate.right_output];
        let mut changed = BTreeSet::new();
        let mut failure = None;
        opposite_leaves(
            tree,
            split_leaf,
            &[split.left, split.right],
            directions,
            |hit| {
                let relevant = outputs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| hit.overlapping & (1 << i) != 0)
                    .map(|(_, &o)| o);
                let b = &mut self.bounds[hit.leaf];
                let before = *b;
                if hit.targets_low {
                    b.min = relevant.fold(b.min, f64::max);
                } else {
                    b.max = relevant.fold(b.max, f64::min);
                }
                if *b != before {
                    changed.insert(hit.leaf);
                    if failure.is_none() {
                        failure = check_feasible(hit.leaf, b).err();
                    }
                }
            },
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(ConstraintUpdateReport {
            changed,
            recomputed: false,
        })
    }
}
