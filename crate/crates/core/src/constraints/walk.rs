//! Upward walk over monotone ancestors with pruned descent into the
//! opposite branch.

use crate::tree::Tree;

/// A leaf reached in the opposite branch of a monotone ancestor.
pub(crate) struct OppositeHit {
    pub leaf: usize,
    /// Monotone feature of the ancestor separating `leaf` from the targets.
    pub feature: usize,
    /// True when the targets sit on the side whose outputs must stay lower.
    pub targets_low: bool,
    /// Bit `i` is set when target `i` overlaps `leaf` on every other feature.
    pub overlapping: u8,
}

/// Walks from `start` to the root. At every ancestor split on a monotone
/// feature `f`, descends the branch not containing `start`, skipping any
/// subtree that overlaps none of `targets` on the features other than `f`,
/// and reports each leaf reached.
pub(crate) fn opposite_leaves(
    tree: &Tree,
    start: usize,
    targets: &[usize],
    directions: &[i8],
    mut visit: impl FnMut(OppositeHit),
) {
    debug_assert!(targets.len() <= 8);
    let mut stack = Vec::new();
    let mut child = start;
    while let Some(parent) = tree.node(child).parent {
        let split = tree.node(parent).split().expect("parent is internal");
        let dir = directions[split.feature];
        if dir != 0 {
            let on_left = split.left == child;
            let opposite = if on_left { split.right } else { split.left };
            let targets_low = (dir > 0) == on_left;
            stack.clear();
            stack.push(opposite);
            while let Some(n) = stack.pop() {
                let node = tree.node(n);
                let mut mask = 0u8;
                for (i, &t) in targets.iter().enumerate() {
                    if node.region.overlaps_except(&tree.node(t).region, split.feature) {
                        mask |= 1 << i;
                    }
                }
                if mask == 0 {
                    continue;
                }
                match node.split() {
                    Some(s) => {
                        stack.push(s.right);
                        stack.push(s.left);
                    }
                    None => visit(OppositeHit {
                        leaf: n,
                        feature: split.feature,
                        targets_low,
                        overlapping: mask,
                    }),
                }
            }
        }
        child = parent;
    }
}
