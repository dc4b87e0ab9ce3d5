use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintEngine, ConstraintMode, PenaltyParams};
use crate::dataset::BinnedDataset;
use crate::error::{Error, Result};
use crate::objective::GradHess;
use crate::parallel::Execution;

use super::histogram::{build_histograms, subtract, Histogram};
use super::split::{evaluate_split, find_best_split, leaf_output, score, LeafContext, SplitParams};
use super::{NodeStats, SplitCandidate, SplitRecord, SplitStats, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub num_leaves: usize,
    pub max_depth: usize,
    pub min_data_in_leaf: usize,
    pub lambda: f64,
    pub min_hessian: f64,
    pub mode: ConstraintMode,
    pub penalty: PenaltyParams,
    pub execution: Execution,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            num_leaves: 32,
            max_depth: 5,
            min_data_in_leaf: 100,
            lambda: 0.0,
            min_hessian: 1e-3,
            mode: ConstraintMode::Basic,
            penalty: PenaltyParams::default(),
            execution: Execution::Parallel,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_leaves < 1 {
            return Err(Error::Parameter("num_leaves must be >= 1".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::Parameter("max_depth must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Parameter(format!("lambda {} must be >= 0", self.lambda)));
        }
        if !(self.min_hessian >= 0.0) {
            return Err(Error::Parameter(format!(
                "min_hessian {} must be >= 0",
                self.min_hessian
            )));
        }
        self.penalty.validate()
    }

    pub fn split_params(&self) -> SplitParams {
        SplitParams {
            lambda: self.lambda,
            min_data_in_leaf: self.min_data_in_leaf,
            min_hessian: self.min_hessian,
            penalty: self.penalty,
        }
    }
}

/// A finished tree plus the training rows that ended in each leaf
/// (indexed by node id, empty for internal nodes).
#[derive(Debug, Clone)]
pub struct GrownTree {
    pub tree: Tree,
    pub leaf_rows: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Copy)]
struct QueueEntry {
    gain: f64,
    leaf: usize,
    generation: u32,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // max-heap on gain, lowest leaf id first among equals
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.leaf.cmp(&self.leaf))
    }
}

/// Leaf-wise tree growth with a pluggable constraint engine.
///
/// [`grow`](TreeBuilder::grow) runs the usual best-first loop; the
/// `force_split` / `replay_split` entry points drive the same machinery
/// along a prescribed split sequence.
pub struct TreeBuilder<'a> {
    data: &'a BinnedDataset,
    gh: &'a [GradHess],
    config: TreeConfig,
    params: SplitParams,
    directions: Vec<i8>,
    tree: Tree,
    engine: Box<dyn ConstraintEngine>,
    rows: Vec<Vec<u32>>,
    hists: Vec<Option<Vec<Histogram>>>,
    best: Vec<Option<SplitCandidate>>,
    generation: Vec<u32>,
    heap: BinaryHeap<QueueEntry>,
    splits: usize,
    recomputations: usize,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(
        data: &'a BinnedDataset,
        rows: Vec<u32>,
        gh: &'a [GradHess],
        config: TreeConfig,
    ) -> Result<Self> {
        config.validate()?;
        if rows.is_empty() || data.feature_count() == 0 {
            return Err(Error::EmptyDataset);
        }
        if gh.len() != data.row_count() {
            return Err(Error::LengthMismatch {
                left: gh.len(),
                right: data.row_count(),
            });
        }
        let directions = if config.mode.is_constrained() {
            data.directions().to_vec()
        } else {
            vec![0; data.feature_count()]
        };
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            let x = gh[r as usize];
            (g + x.grad, h + x.hess)
        });
        let stats = NodeStats {
            count: rows.len(),
            sum_grad: g,
            sum_hess: h,
        };
        let tree = Tree::new(data.bin_counts(), leaf_output(g, h, config.lambda), stats);
        let mut engine = config.mode.engine();
        engine.init(&tree);
        let root_hist = build_histograms(data, &rows, gh, config.execution);
        let mut builder = TreeBuilder {
            data,
            gh,
            config,
            params: config.split_params(),
            directions,
            tree,
            engine,
            rows: vec![rows],
            hists: vec![Some(root_hist)],
            best: vec![None],
            generation: vec![0],
            heap: BinaryHeap::new(),
            splits: 0,
            recomputations: 0,
        };
        builder.evaluate(0);
        Ok(builder)
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn engine(&self) -> &dyn ConstraintEngine {
        self.engine.as_ref()
    }

    /// Directions the engine enforces (all zero in mode `none`).
    pub fn directions(&self) -> &[i8] {
        &self.directions
    }

    /// Splits after which the engine rebuilt all constraints from scratch.
    pub fn recomputations(&self) -> usize {
        self.recomputations
    }

    pub fn leaf_rows(&self, leaf: usize) -> &[u32] {
        &self.rows[leaf]
    }

    pub fn best_candidate(&self, leaf: usize) -> Option<&SplitCandidate> {
        self.best.get(leaf)?.as_ref()
    }

    fn context(&self, leaf: usize) -> LeafContext<'_> {
        let node = self.tree.node(leaf);
        LeafContext {
            leaf,
            depth: node.depth,
            output: node.value,
            region: &node.region,
            view: self.engine.view(leaf),
        }
    }

    fn search(&self, leaf: usize) -> Option<SplitCandidate> {
        let node = self.tree.node(leaf);
        if !node.is_leaf()
            || node.depth >= self.config.max_depth
            || node.count < 2 * self.config.min_data_in_leaf.max(1)
        {
            return None;
        }
        let hists = self.hists[leaf].as_ref()?;
        find_best_split(
            self.context(leaf),
            hists,
            &self.directions,
            &self.params,
            self.config.execution,
        )
    }

    fn evaluate(&mut self, leaf: usize) {
        let best = self.search(leaf);
        self.generation[leaf] += 1;
        if let Some(c) = &best {
            self.heap.push(QueueEntry {
                gain: c.gain,
                leaf,
                generation: self.generation[leaf],
            });
        }
        self.best[leaf] = best;
    }

    /// Candidate for a prescribed split under the current constraints.
    pub fn candidate_for(&self, leaf: usize, feature: usize, threshold: u16) -> Option<SplitCandidate> {
        let hists = self.hists.get(leaf)?.as_ref()?;
        if feature >= hists.len() {
            return None;
        }
        evaluate_split(
            self.context(leaf),
            hists,
            &self.directions,
            &self.params,
            feature,
            threshold,
        )
    }

    fn pop_best(&mut self) -> Option<SplitCandidate> {
        while let Some(e) = self.heap.pop() {
            if self.generation[e.leaf] == e.generation {
                if let Some(c) = self.best[e.leaf] {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Executes the best queued split, if any. Returns it.
    pub fn step(&mut self) -> Result<Option<SplitCandidate>> {
        if self.tree.num_leaves() >= self.config.num_leaves {
            return Ok(None);
        }
        match self.pop_best() {
            Some(c) => {
                self.apply(c)?;
                Ok(Some(c))
            }
            None => Ok(None),
        }
    }

    pub fn grow(&mut self) -> Result<()> {
        while self.step()?.is_some() {}
        Ok(())
    }

    /// Splits `leaf` at `(feature, threshold)` with outputs computed under
    /// the current constraints.
    pub fn force_split(&mut self, leaf: usize, feature: usize, threshold: u16) -> Result<SplitCandidate> {
        let c = self.candidate_for(leaf, feature, threshold).ok_or_else(|| {
            Error::Parameter(format!(
                "split of leaf {leaf} on feature {feature} at bin {threshold} is not admissible"
            ))
        })?;
        self.apply(c)?;
        Ok(c)
    }

    /// Splits `leaf` at `(feature, threshold)` with prescribed child
    /// outputs, bypassing the engine's bounds. Used to run several engines
    /// over one identical tree.
    pub fn replay_split(
        &mut self,
        leaf: usize,
        feature: usize,
        threshold: u16,
        left_output: f64,
        right_output: f64,
    ) -> Result<SplitCandidate> {
        let node = self.tree.node(leaf);
        let (lo, hi) = node.region.interval(feature);
        if !node.is_leaf() || threshold < lo || threshold >= hi {
            return Err(Error::Parameter(format!(
                "cannot replay split of node {leaf} on feature {feature} at bin {threshold}"
            )));
        }
        let hist = &self.hists[leaf].as_ref().expect("leaf histograms")[feature].bins;
        let side = |range: std::ops::RangeInclusive<usize>| {
            hist[range].iter().fold(SplitStats::default(), |acc, b| SplitStats {
                grad: acc.grad + b.grad,
                hess: acc.hess + b.hess,
                count: acc.count + b.count as usize,
            })
        };
        let left = side(lo as usize..=threshold as usize);
        let right = side(threshold as usize + 1..=hi as usize);
        let lambda = self.params.lambda;
        let raw_gain = score(left.grad + right.grad, left.hess + right.hess, lambda, node.value)
            - score(left.grad, left.hess, lambda, left_output)
            - score(right.grad, right.hess, lambda, right_output);
        let dir = self.directions[feature];
        let gain = if dir != 0 {
            raw_gain * self.params.penalty.gain_factor(node.depth)
        } else {
            raw_gain
        };
        let c = SplitCandidate {
            leaf,
            feature,
            threshold,
            left_output,
            right_output,
            raw_gain,
            gain,
            left,
            right,
            monotone: dir,
        };
        self.apply(c)?;
        Ok(c)
    }

    fn apply(&mut self, c: SplitCandidate) -> Result<(usize, usize)> {
        let leaf = c.leaf;
        let record = SplitRecord {
            feature: c.feature,
            threshold: c.threshold,
            left: 0,
            right: 0,
            gain: c.gain,
            raw_gain: c.raw_gain,
            order: self.splits,
            monotone: self.directions[c.feature],
        };
        self.splits += 1;
        let stats = |s: &SplitStats| NodeStats {
            count: s.count,
            sum_grad: s.grad,
            sum_hess: s.hess,
        };
        let (l, r) = self.tree.split_leaf(
            leaf,
            record,
            [
                (c.left_output, stats(&c.left)),
                (c.right_output, stats(&c.right)),
            ],
        );

        let parent_rows = std::mem::take(&mut self.rows[leaf]);
        let column = self.data.column(c.feature);
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = parent_rows
            .into_iter()
            .partition(|&row| column[row as usize] <= c.threshold);
        let parent_hist = self.hists[leaf].take().expect("leaf histograms");
        let exec = self.config.execution;
        let (left_hist, right_hist) = if left_rows.len() <= right_rows.len() {
            let small = build_histograms(self.data, &left_rows, self.gh, exec);
            let large = subtract(&parent_hist, &small);
            (small, large)
        } else {
            let small = build_histograms(self.data, &right_rows, self.gh, exec);
            let large = subtract(&parent_hist, &small);
            (large, small)
        };
        self.rows.push(left_rows);
        self.rows.push(right_rows);
        self.hists.push(Some(left_hist));
        self.hists.push(Some(right_hist));
        self.best.extend([None, None]);
        self.generation.extend([0, 0]);

        let report = self.engine.on_split(&self.tree, leaf, &c, &self.directions)?;
        self.recomputations += report.recomputed as usize;
        self.generation[leaf] += 1;
        self.best[leaf] = None;
        self.evaluate(l);
        self.evaluate(r);
        for changed in report.changed {
            if self.tree.node(changed).is_leaf() {
                self.evaluate(changed);
            }
        }
        Ok((l, r))
    }

    pub fn finish(self) -> GrownTree {
        GrownTree {
            tree: self.tree,
            leaf_rows: self.rows,
        }
    }
}

/// Grows one tree leaf-wise over `rows`.
pub fn grow_tree(
    data: &BinnedDataset,
    rows: Vec<u32>,
    gh: &[GradHess],
    config: TreeConfig,
) -> Result<GrownTree> {
    let mut builder = TreeBuilder::new(data, rows, gh, config)?;
    builder.grow()?;
    Ok(builder.finish())
}
