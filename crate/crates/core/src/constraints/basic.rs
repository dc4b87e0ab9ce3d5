use super::{
    check_feasible, ConstraintEngine, ConstraintMode, ConstraintUpdateReport, ConstraintView,
    OutputBounds,
};
use crate::error::Result;
use crate::tree::{SplitCandidate, Tree};

/// Mode `none`: every leaf is unbounded.
#[derive(Debug, Default, Clone, Copy)]
pub struct UnconstrainedEngine;

impl ConstraintEngine for UnconstrainedEngine {
    fn mode(&self) -> ConstraintMode {
        ConstraintMode::None
    }

    fn init(&mut self, _tree: &Tree) {}

    fn view(&self, _leaf: usize) -> ConstraintView<'_> {
        ConstraintView::Uniform(OutputBounds::UNBOUNDED)
    }

    fn on_split(
        &mut self,
        _tree: &Tree,
        _split_leaf: usize,
        _candidate: &SplitCandidate,
        _directions: &[i8],
    ) -> Result<ConstraintUpdateReport> {
        Ok(ConstraintUpdateReport::default())
    }
}

/// Mode `basic`: midpoint separation at each monotone split, no
/// cross-branch updates.
#[derive(Debug, Default, Clone)]
pub struct BasicEngine {
    bounds: Vec<OutputBounds>,
}

impl BasicEngine {
    pub fn bounds(&self, leaf: usize) -> OutputBounds {
        self.bounds.get(leaf).copied().unwrap_or_default()
    }
}

impl ConstraintEngine for BasicEngine {
    fn mode(&self) -> ConstraintMode {
        ConstraintMode::Basic
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
        let split = tree.node(split_leaf).split().expect("split leaf is internal");
        self.bounds.resize(tree.node_count(), OutputBounds::UNBOUNDED);
        let parent = self.bounds[split_leaf];
        let mut left = parent;
        let mut right = parent;
        let dir = directions[split.feature];
        if dir != 0 {
            let mid = (candidate.left_output + candidate.right_output) / 2.0;
            if dir > 0 {
                left.max = left.max.min(mid);
                right.min = right.min.max(mid);
            } else {
                left.min = left.min.max(mid);
                right.max = right.max.min(mid);
            }
        }
        check_feasible(split.left, &left)?;
        check_feasible(split.right, &right)?;
        self.bounds[split.left] = left;
        self.bounds[split.right] = right;
        Ok(ConstraintUpdateReport::default())
    }
}
