//! Regression trees over binned features: histograms, split search,
//! leaf-wise growth, prediction and export.

mod grower;
mod histogram;
mod split;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{BinMapper, BinnedDataset};
use crate::error::{Error, Result};

pub use grower::{grow_tree, GrownTree, TreeBuilder, TreeConfig};
pub use histogram::{build_histograms, subtract, BinStat, Histogram};
pub use split::{
    constrained_leaf_output, evaluate_split, find_best_split, leaf_output, score, LeafContext,
    SplitCandidate, SplitParams, SplitStats,
};

/// Axis-aligned box of bin intervals covered by a node.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LeafRegion {
    intervals: Vec<(u16, u16)>,
}

impl LeafRegion {
    /// Region of the root: every bin of every feature.
    pub fn full(bin_counts: &[u16]) -> Self {
        LeafRegion {
            intervals: bin_counts.iter().map(|&c| (0, c.max(1) - 1)).collect(),
        }
    }

    pub fn from_intervals(intervals: Vec<(u16, u16)>) -> Self {
        debug_assert!(intervals.iter().all(|(l, h)| l <= h));
        LeafRegion { intervals }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    #[inline]
    pub fn interval(&self, feature: usize) -> (u16, u16) {
        self.intervals[feature]
    }

    pub fn intervals(&self) -> &[(u16, u16)] {
        &self.intervals
    }

    /// Regions of the `<= threshold` and `> threshold` children.
    pub fn split(&self, feature: usize, threshold: u16) -> (LeafRegion, LeafRegion) {
        let (lo, hi) = self.intervals[feature];
        debug_assert!(lo <= threshold && threshold < hi);
        let mut left = self.clone();
        let mut right = self.clone();
        left.intervals[feature] = (lo, threshold);
        right.intervals[feature] = (threshold + 1, hi);
        (left, right)
    }

    /// Whether the two regions intersect on every feature except `skip`.
    pub fn overlaps_except(&self, other: &LeafRegion, skip: usize) -> bool {
        self.intervals
            .iter()
            .zip(&other.intervals)
            .enumerate()
            .all(|(g, (a, b))| g == skip || (a.0 <= b.1 && b.0 <= a.1))
    }

    pub fn overlaps(&self, other: &LeafRegion) -> bool {
        self.overlaps_except(other, usize::MAX)
    }

    /// The only feature on which the regions are disjoint, if exactly one.
    pub fn single_separating_feature(&self, other: &LeafRegion) -> Option<usize> {
        let mut found = None;
        for (g, (a, b)) in self.intervals.iter().zip(&other.intervals).enumerate() {
            if a.1 < b.0 || b.1 < a.0 {
                if found.is_some() {
                    return None;
                }
                found = Some(g);
            }
        }
        found
    }

    pub fn contains_point(&self, point: &[u16]) -> bool {
        self.intervals
            .iter()
            .zip(point)
            .all(|(&(l, h), &p)| l <= p && p <= h)
    }
}

/// Split executed at an internal node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub feature: usize,
    /// Rows with `bin <= threshold` go left.
    pub threshold: u16,
    pub left: usize,
    pub right: usize,
    pub gain: f64,
    pub raw_gain: f64,
    /// 0 for the first split of the tree, then 1, 2, ...
    pub order: usize,
    pub monotone: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeKind {
    Leaf,
    Internal(SplitRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub depth: usize,
    pub parent: Option<usize>,
    /// Output of the node as a leaf; internal nodes keep the output they had
    /// before being split.
    pub value: f64,
    pub count: usize,
    pub sum_grad: f64,
    pub sum_hess: f64,
    #[serde(flatten)]
    pub kind: NodeKind,
    #[serde(skip)]
    pub region: LeafRegion,
}

impl TreeNode {
    pub fn split(&self) -> Option<&SplitRecord> {
        match &self.kind {
            NodeKind::Internal(s) => Some(s),
            NodeKind::Leaf => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }
}

/// Statistics of a node's rows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeStats {
    pub count: usize,
    pub sum_grad: f64,
    pub sum_hess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeDoc")]
pub struct Tree {
    bin_counts: Vec<u16>,
    nodes: Vec<TreeNode>,
}

#[derive(Deserialize)]
struct TreeDoc {
    bin_counts: Vec<u16>,
    nodes: Vec<TreeNode>,
}

impl TryFrom<TreeDoc> for Tree {
    type Error = Error;

    fn try_from(doc: TreeDoc) -> Result<Tree> {
        let bad = |m: String| Error::Model(m);
        if doc.nodes.is_empty() {
            return Err(bad("tree without nodes".into()));
        }
        let mut nodes = doc.nodes;
        let features = doc.bin_counts.len();
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(bad(format!("node {i} carries id {}", n.id)));
            }
            if let NodeKind::Internal(s) = &n.kind {
                if s.feature >= features || s.left >= nodes.len() || s.right >= nodes.len() {
                    return Err(bad(format!("node {i} references out-of-range data")));
                }
                if s.left <= i || s.right <= i {
                    return Err(bad(format!("node {i} children precede it")));
                }
            }
        }
        nodes[0].region = LeafRegion::full(&doc.bin_counts);
        for i in 0..nodes.len() {
            if let NodeKind::Internal(s) = nodes[i].kind.clone() {
                let (lo, hi) = nodes[i].region.interval(s.feature);
                if s.threshold < lo || s.threshold >= hi {
                    return Err(bad(format!("node {i} threshold outside its region")));
                }
                let (l, r) = nodes[i].region.split(s.feature, s.threshold);
                for (child, region) in [(s.left, l), (s.right, r)] {
                    if nodes[child].parent != Some(i) || nodes[child].depth != nodes[i].depth + 1 {
                        return Err(bad(format!("node {child} is not a proper child of {i}")));
                    }
                    nodes[child].region = region;
                }
            }
        }
        if nodes.iter().any(|n| n.is_leaf() && !n.value.is_finite()) {
            return Err(bad("non-finite leaf output".into()));
        }
        Ok(Tree {
            bin_counts: doc.bin_counts,
            nodes,
        })
    }
}

impl Tree {
    /// Single-leaf tree.
    pub fn new(bin_counts: Vec<u16>, value: f64, stats: NodeStats) -> Tree {
        let region = LeafRegion::full(&bin_counts);
        Tree {
            bin_counts,
            nodes: vec![TreeNode {
                id: 0,
                depth: 0,
                parent: None,
                value,
                count: stats.count,
                sum_grad: stats.sum_grad,
                sum_hess: stats.sum_hess,
                kind: NodeKind::Leaf,
                region,
            }],
        }
    }

    /// Turns `leaf` into an internal node and appends its two children.
    /// `record.left` / `record.right` are filled in here.
    pub fn split_leaf(
        &mut self,
        leaf: usize,
        mut record: SplitRecord,
        children: [(f64, NodeStats); 2],
    ) -> (usize, usize) {
        assert!(self.nodes[leaf].is_leaf(), "node {leaf} is already split");
        let (lr, rr) = self.nodes[leaf].region.split(record.feature, record.threshold);
        let depth = self.nodes[leaf].depth + 1;
        let left = self.nodes.len();
        let right = left + 1;
        record.left = left;
        record.right = right;
        for (id, region, (value, stats)) in [(left, lr, children[0]), (right, rr, children[1])] {
            self.nodes.push(TreeNode {
                id,
                depth,
                parent: Some(leaf),
                value,
                count: stats.count,
                sum_grad: stats.sum_grad,
                sum_hess: stats.sum_hess,
                kind: NodeKind::Leaf,
                region,
            });
        }
        self.nodes[leaf].kind = NodeKind::Internal(record);
        (left, right)
    }

    pub fn bin_counts(&self) -> &[u16] {
        &self.bin_counts
    }

    pub fn feature_count(&self) -> usize {
        self.bin_counts.len()
    }

    #[inline]
    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id)
    }

    pub fn num_leaves(&self) -> usize {
        self.leaf_ids().count()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Leaf reached by a vector of bin ordinals.
    pub fn leaf_for(&self, mut bin_of: impl FnMut(usize) -> u16) -> usize {
        let mut id = 0;
        while let NodeKind::Internal(s) = &self.nodes[id].kind {
            id = if bin_of(s.feature) <= s.threshold {
                s.left
            } else {
                s.right
            };
        }
        id
    }

    pub fn predict_bins(&self, point: &[u16]) -> f64 {
        self.nodes[self.leaf_for(|f| point[f])].value
    }

    pub fn predict_row(&self, data: &BinnedDataset, row: usize) -> f64 {
        self.nodes[self.leaf_for(|f| data.bin(f, row))].value
    }

    /// DOT digraph: internal nodes show the split, its gain and split order;
    /// monotone splits are filled green; leaves show their output.
    pub fn export_dot(&self, names: Option<&[String]>, mappers: Option<&[BinMapper]>) -> String {
        let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
        for n in &self.nodes {
            match &n.kind {
                NodeKind::Leaf => {
                    let _ = writeln!(
                        out,
                        "  n{} [label=\"leaf {}\\nvalue = {:.6}\\ncount = {}\", shape=ellipse];",
                        n.id, n.id, n.value, n.count
                    );
                }
                NodeKind::Internal(s) => {
                    let fname = names
                        .and_then(|v| v.get(s.feature))
                        .cloned()
                        .unwrap_or_else(|| format!("f{}", s.feature));
                    let cut = mappers
                        .and_then(|m| m.get(s.feature))
                        .and_then(|m| m.upper_bounds.get(s.threshold as usize))
                        .map_or_else(|| format!("bin {}", s.threshold), |v| format!("{v}"));
                    let style = if s.monotone != 0 {
                        ", style=filled, fillcolor=\"palegreen\""
                    } else {
                        ""
                    };
                    let _ = writeln!(
                        out,
                        "  n{} [label=\"#{} {} <= {}\\ngain = {:.6}\"{}];",
                        n.id,
                        s.order,
                        escape(&fname),
                        escape(&cut),
                        s.gain,
                        style
                    );
                    let _ = writeln!(out, "  n{} -> n{} [label=\"yes\"];", n.id, s.left);
                    let _ = writeln!(out, "  n{} -> n{} [label=\"no\"];", n.id, s.right);
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
