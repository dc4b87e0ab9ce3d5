use std::collections::{BTreeMap, BTreeSet};

use super::walk::opposite_leaves;
use super::{
    check_feasible, ConstraintEngine, ConstraintMode, ConstraintUpdateReport, ConstraintView,
    OutputBounds, SideScan,
};
use crate::error::Result;
use crate::tree::{LeafRegion, SplitCandidate, Tree};

/// One constraint held by a leaf: `bounds` apply to the points of the leaf
/// inside `intervals` (the overlap with the leaf that imposed it). Exactly
/// one side of `bounds` is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBox {
    pub intervals: Vec<(u16, u16)>,
    pub bounds: OutputBounds,
}

impl ConstraintBox {
    /// Constraint on `target` coming from a leaf with region `source`
    /// across monotone feature `feature`: the target's own range on
    /// `feature`, the overlap everywhere else.
    fn between(target: &LeafRegion, source: &LeafRegion, feature: usize, bounds: OutputBounds) -> Self {
        let intervals = (0..target.len())
            .map(|g| {
                let (tl, th) = target.interval(g);
                if g == feature {
                    (tl, th)
                } else {
                    let (sl, sh) = source.interval(g);
                    (tl.max(sl), th.min(sh))
                }
            })
            .collect();
        ConstraintBox { intervals, bounds }
    }

    fn clip(&self, region: &LeafRegion) -> Option<ConstraintBox> {
        let mut intervals = Vec::with_capacity(self.intervals.len());
        for (g, &(l, h)) in self.intervals.iter().enumerate() {
            let (rl, rh) = region.interval(g);
            let (l, h) = (l.max(rl), h.min(rh));
            if l > h {
                return None;
            }
            intervals.push((l, h));
        }
        Some(ConstraintBox {
            intervals,
            bounds: self.bounds,
        })
    }

    pub fn contains(&self, point: &[u16]) -> bool {
        self.intervals
            .iter()
            .zip(point)
            .all(|(&(l, h), &p)| l <= p && p <= h)
    }
}

/// Bounds holding over bins `low..=high` of one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub low: u16,
    pub high: u16,
    pub bounds: OutputBounds,
}

/// Per-feature piecewise-constant bounds of one leaf.
///
/// For each feature the segments are sorted, disjoint, merged when adjacent
/// with equal bounds, and omit unbounded stretches, so two equal constraint
/// states always compare equal segment by segment. A split on feature `g`
/// takes, on each side, the tightest bounds over the segments of `g`
/// touching that side.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PiecewiseConstraint {
    per_feature: Vec<Vec<Segment>>,
    overall: OutputBounds,
}

impl PiecewiseConstraint {
    pub fn from_boxes(region: &LeafRegion, boxes: &[ConstraintBox]) -> Self {
        let mut overall = OutputBounds::UNBOUNDED;
        for b in boxes {
            overall = overall.tighten(&b.bounds);
        }
        if boxes.is_empty() {
            return PiecewiseConstraint {
                per_feature: vec![Vec::new(); region.len()],
                overall,
            };
        }
        let mut cuts = Vec::with_capacity(2 * boxes.len() + 2);
        let per_feature = (0..region.len())
            .map(|g| {
                let (lo, hi) = region.interval(g);
                cuts.clear();
                cuts.push(lo as u32);
                cuts.push(hi as u32 + 1);
                for b in boxes {
                    let (l, h) = b.intervals[g];
                    cuts.push(l as u32);
                    cuts.push(h as u32 + 1);
                }
                cuts.sort_unstable();
                cuts.dedup();
                let mut segs: Vec<Segment> = Vec::new();
                for w in cuts.windows(2) {
                    let (start, end) = (w[0], w[1] - 1);
                    let bounds = boxes
                        .iter()
                        .filter(|b| {
                            let (l, h) = b.intervals[g];
                            l as u32 <= start && end <= h as u32
                        })
                        .fold(OutputBounds::UNBOUNDED, |acc, b| acc.tighten(&b.bounds));
                    if bounds.is_unbounded() {
                        continue;
                    }
                    match segs.last_mut() {
                        Some(last) if last.high as u32 + 1 == start && last.bounds == bounds => {
                            last.high = end as u16;
                        }
                        _ => segs.push(Segment {
                            low: start as u16,
                            high: end as u16,
                            bounds,
                        }),
                    }
                }
                segs
            })
            .collect();
        PiecewiseConstraint {
            per_feature,
            overall,
        }
    }

    pub fn feature_segments(&self, feature: usize) -> &[Segment] {
        self.per_feature.get(feature).map_or(&[], Vec::as_slice)
    }

    /// All segments as `(feature, segment)` pairs.
    pub fn segments(&self) -> impl Iterator<Item = (usize, &Segment)> {
        self.per_feature
            .iter()
            .enumerate()
            .flat_map(|(f, segs)| segs.iter().map(move |s| (f, s)))
    }

    pub fn is_unconstrained(&self) -> bool {
        self.per_feature.iter().all(Vec::is_empty)
    }

    /// Tightest bounds over the whole leaf, i.e. the range its own output
    /// must respect.
    pub fn overall(&self) -> OutputBounds {
        self.overall
    }

    pub fn bounds_at_bin(&self, feature: usize, bin: u16) -> OutputBounds {
        self.feature_segments(feature)
            .iter()
            .find(|s| s.low <= bin && bin <= s.high)
            .map_or(OutputBounds::UNBOUNDED, |s| s.bounds)
    }

    pub fn side_bounds(&self, feature: usize, threshold: u16) -> (OutputBounds, OutputBounds) {
        let mut left = OutputBounds::UNBOUNDED;
        let mut right = OutputBounds::UNBOUNDED;
        for s in self.feature_segments(feature) {
            if s.low <= threshold {
                left = left.tighten(&s.bounds);
            }
            if s.high > threshold {
                right = right.tighten(&s.bounds);
            }
        }
        (left, right)
    }

    pub(crate) fn side_scan(&self, feature: usize, low: u16, high: u16) -> SideScan {
        let segs = self.feature_segments(feature);
        if segs.is_empty() {
            return SideScan::Uniform(OutputBounds::UNBOUNDED);
        }
        if segs.len() == 1 && segs[0].low <= low && segs[0].high >= high {
            return SideScan::Uniform(segs[0].bounds);
        }
        let n = (high - low) as usize;
        let mut left = Vec::with_capacity(n);
        let mut acc = OutputBounds::UNBOUNDED;
        let mut i = 0;
        for t in low..high {
            while i < segs.len() && segs[i].low <= t {
                acc = acc.tighten(&segs[i].bounds);
                i += 1;
            }
            left.push(acc);
        }
        let mut right = vec![OutputBounds::UNBOUNDED; n];
        let mut acc = OutputBounds::UNBOUNDED;
        let mut j = segs.len();
        for t in (low..high).rev() {
            while j > 0 && segs[j - 1].high > t {
                acc = acc.tighten(&segs[j - 1].bounds);
                j -= 1;
            }
            right[(t - low) as usize] = acc;
        }
        SideScan::PerThreshold { low, left, right }
    }
}

#[derive(Debug, Clone, Default)]
struct SlowLeaf {
    boxes: Vec<ConstraintBox>,
    piecewise: PiecewiseConstraint,
}

/// Mode `slow`: exact, side-dependent bounds.
#[derive(Debug, Clone, Default)]
pub struct SlowEngine {
    leaves: Vec<Option<SlowLeaf>>,
    recomputations: usize,
}

impl SlowEngine {
    pub fn piecewise(&self, leaf: usize) -> Option<&PiecewiseConstraint> {
        self.leaves.get(leaf)?.as_ref().map(|l| &l.piecewise)
    }

    pub fn boxes(&self, leaf: usize) -> &[ConstraintBox] {
        self.leaves
            .get(leaf)
            .and_then(Option::as_ref)
            .map_or(&[], |l| l.boxes.as_slice())
    }

    /// Number of from-scratch rebuilds triggered so far.
    pub fn recomputations(&self) -> usize {
        self.recomputations
    }

    fn install(&mut self, tree: &Tree, leaf: usize, boxes: Vec<ConstraintBox>) -> Result<bool> {
        let piecewise = PiecewiseConstraint::from_boxes(&tree.node(leaf).region, &boxes);
        check_feasible(leaf, &piecewise.overall())?;
        let slot = &mut self.leaves[leaf];
        let changed = slot.as_ref().map_or(true, |old| old.piecewise != piecewise);
        *slot = Some(SlowLeaf { boxes, piecewise });
        Ok(changed)
    }
}

static EMPTY: PiecewiseConstraint = PiecewiseConstraint {
    per_feature: Vec::new(),
    overall: OutputBounds::UNBOUNDED,
};

impl ConstraintEngine for SlowEngine {
    fn mode(&self) -> ConstraintMode {
        ConstraintMode::Slow
    }

    fn init(&mut self, tree: &Tree) {
        self.leaves = vec![None; tree.node_count()];
        self.recomputations = 0;
        for leaf in tree.leaf_ids() {
            self.leaves[leaf] = Some(SlowLeaf {
                boxes: Vec::new(),
                piecewise: PiecewiseConstraint::from_boxes(&tree.node(leaf).region, &[]),
            });
        }
    }

    fn view(&self, leaf: usize) -> ConstraintView<'_> {
        ConstraintView::Piecewise(self.piecewise(leaf).unwrap_or(&EMPTY))
    }

    fn bounds_at(&self, leaf: usize, point: &[u16]) -> OutputBounds {
        self.boxes(leaf)
            .iter()
            .filter(|b| b.contains(point))
            .fold(OutputBounds::UNBOUNDED, |acc, b| acc.tighten(&b.bounds))
    }

    fn on_split(
        &mut self,
        tree: &Tree,
        split_leaf: usize,
        candidate: &SplitCandidate,
        directions: &[i8],
    ) -> Result<ConstraintUpdateReport> {
        let split = *tree.node(split_leaf).split().expect("split leaf is internal");
        let former_output = tree.node(split_leaf).value;
        self.leaves.resize(tree.node_count(), None);
        let parent = self.leaves[split_leaf].take().unwrap_or_default();
        let children = [split.left, split.right];
        let outputs = [candidate.left_output, candidate.right_output];

        // children inherit the parent's boxes restricted to their region
        let mut child_boxes: [Vec<ConstraintBox>; 2] = children.map(|c| {
            let region = &tree.node(c).region;
            parent.boxes.iter().filter_map(|b| b.clip(region)).collect()
        });

        // sibling seeding
        let dir = directions[split.feature];
        if dir != 0 {
            let (lr, rr) = (&tree.node(split.left).region, &tree.node(split.right).region);
            let (to_left, to_right) = if dir > 0 {
                (
                    OutputBounds::new(f64::NEG_INFINITY, outputs[1]),
                    OutputBounds::new(outputs[0], f64::INFINITY),
                )
            } else {
                (
                    OutputBounds::new(outputs[1], f64::INFINITY),
                    OutputBounds::new(f64::NEG_INFINITY, outputs[0]),
                )
            };
            child_boxes[0].push(ConstraintBox::between(lr, rr, split.feature, to_left));
            child_boxes[1].push(ConstraintBox::between(rr, lr, split.feature, to_right));
        }

        // propagation to opposite branches; a new output looser than the
        // one the split leaf used to impose means some leaf was unconstrained
        let mut additions: BTreeMap<usize, Vec<ConstraintBox>> = BTreeMap::new();
        let mut unconstrained = false;
        opposite_leaves(tree, split_leaf, &children, directions, |hit| {
            let region = &tree.node(hit.leaf).region;
            for (i, (&c, &o)) in children.iter().zip(&outputs).enumerate() {
                if hit.overlapping & (1 << i) == 0 {
                    continue;
                }
                let bounds = if hit.targets_low {
                    unconstrained |= o < former_output;
                    OutputBounds::new(o, f64::INFINITY)
                } else {
                    unconstrained |= o > former_output;
                    OutputBounds::new(f64::NEG_INFINITY, o)
                };
                additions.entry(hit.leaf).or_default().push(ConstraintBox::between(
                    region,
                    &tree.node(c).region,
                    hit.feature,
                    bounds,
                ));
            }
        });

        let [left_boxes, right_boxes] = child_boxes;
        self.install(tree, split.left, left_boxes)?;
        self.install(tree, split.right, right_boxes)?;

        let mut changed = BTreeSet::new();
        if unconstrained {
            self.recomputations += 1;
            for (leaf, boxes) in recompute_boxes(tree, directions) {
                if self.install(tree, leaf, boxes)? && !children.contains(&leaf) {
                    changed.insert(leaf);
                }
            }
        } else {
            for (leaf, extra) in additions {
                let mut boxes = self.leaves[leaf].take().unwrap_or_default().boxes;
                boxes.extend(extra);
                if self.install(tree, leaf, boxes)? {
                    changed.insert(leaf);
                }
            }
        }
        Ok(ConstraintUpdateReport {
            changed,
            recomputed: unconstrained,
        })
    }
}

/// Pairwise rebuild: every ordered leaf pair separated on exactly one
/// feature, that feature monotone, constrains both leaves over their
/// overlap.
fn recompute_boxes(tree: &Tree, directions: &[i8]) -> BTreeMap<usize, Vec<ConstraintBox>> {
    let leaves: Vec<usize> = tree.leaf_ids().collect();
    let mut out: BTreeMap<usize, Vec<ConstraintBox>> =
        leaves.iter().map(|&l| (l, Vec::new())).collect();
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
            // `low` sits below `high` on feature f
            let (low, high) = if ra.interval(f).1 < rb.interval(f).0 {
                (a, b)
            } else {
                (b, a)
            };
            let (ol, oh) = (tree.node(low).value, tree.node(high).value);
            let (on_low, on_high) = if dir > 0 {
                (
                    OutputBounds::new(f64::NEG_INFINITY, oh),
                    OutputBounds::new(ol, f64::INFINITY),
                )
            } else {
                (
                    OutputBounds::new(oh, f64::INFINITY),
                    OutputBounds::new(f64::NEG_INFINITY, ol),
                )
            };
            let (rl, rh) = (&tree.node(low).region, &tree.node(high).region);
            out.get_mut(&low)
                .unwrap()
                .push(ConstraintBox::between(rl, rh, f, on_low));
            out.get_mut(&high)
                .unwrap()
                .push(ConstraintBox::between(rh, rl, f, on_high));
        }
    }
    out
}

/// From-scratch per-leaf constraints implied by the current leaf outputs.
pub fn recompute_all_constraints(tree: &Tree, directions: &[i8]) -> BTreeMap<usize, PiecewiseConstraint> {
    recompute_boxes(tree, directions)
        .into_iter()
        .map(|(leaf, boxes)| {
            let p = PiecewiseConstraint::from_boxes(&tree.node(leaf).region, &boxes);
            (leaf, p)
        })
        .collect()
}
