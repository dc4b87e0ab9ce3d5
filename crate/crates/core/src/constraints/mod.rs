//! Monotone constraint engines and the monotone split penalty.
//!
//! Four modes share the [`ConstraintEngine`] interface the tree grower calls:
//!
//! - `none`: monotone directions are ignored entirely.
//! - `basic`: a monotone split bounds both children by the midpoint of their
//!   outputs, so every descendant of the left child stays below every
//!   descendant of the right child.
//! - `fast`: one `(min, max)` pair per leaf. A monotone split seeds each
//!   child with its sibling's output, and every split propagates the new
//!   outputs to the overlapping leaves across each monotone ancestor.
//!   Bounds only ever tighten.
//! - `slow`: per-feature, per-bin-interval bounds per leaf, so the two sides
//!   of a candidate split may see different bounds. When a split loosens a
//!   bound some other leaf was holding, all bounds are rebuilt from scratch.

mod basic;
mod fast;
mod slow;
pub mod verify;
mod walk;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{SplitCandidate, Tree};

pub use basic::{BasicEngine, UnconstrainedEngine};
pub use fast::FastEngine;
pub use slow::{recompute_all_constraints, ConstraintBox, PiecewiseConstraint, Segment, SlowEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    None,
    #[default]
    Basic,
    Fast,
    Slow,
}

impl ConstraintMode {
    pub const ALL: [ConstraintMode; 4] = [
        ConstraintMode::None,
        ConstraintMode::Basic,
        ConstraintMode::Fast,
        ConstraintMode::Slow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintMode::None => "none",
            ConstraintMode::Basic => "basic",
            ConstraintMode::Fast => "fast",
            ConstraintMode::Slow => "slow",
        }
    }

    pub fn is_constrained(self) -> bool {
        self != ConstraintMode::None
    }

    pub fn engine(self) -> Box<dyn ConstraintEngine> {
        match self {
            ConstraintMode::None => Box::new(UnconstrainedEngine),
            ConstraintMode::Basic => Box::<BasicEngine>::default(),
            ConstraintMode::Fast => Box::<FastEngine>::default(),
            ConstraintMode::Slow => Box::<SlowEngine>::default(),
        }
    }
}

impl fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(ConstraintMode::None),
            "basic" => Ok(ConstraintMode::Basic),
            "fast" => Ok(ConstraintMode::Fast),
            "slow" => Ok(ConstraintMode::Slow),
            other => Err(Error::Parameter(format!(
                "unknown monotone method `{other}` (expected none, basic, fast or slow)"
            ))),
        }
    }
}

/// Closed interval of admissible leaf outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for OutputBounds {
    fn default() -> Self {
        Self::UNBOUNDED
    }
}

impl OutputBounds {
    pub const UNBOUNDED: OutputBounds = OutputBounds {
        min: f64::NEG_INFINITY,
        max: f64::INFINITY,
    };

    pub fn new(min: f64, max: f64) -> Self {
        OutputBounds { min, max }
    }

    pub fn is_unbounded(&self) -> bool {
        *self == Self::UNBOUNDED
    }

    pub fn is_feasible(&self) -> bool {
        self.min <= self.max
    }

    /// Intersection with `other`.
    pub fn tighten(&self, other: &OutputBounds) -> OutputBounds {
        OutputBounds {
            min: self.min.max(other.min),
            max: self.max.min(other.max),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }

    /// Whether `self` lies inside `outer`.
    pub fn within(&self, outer: &OutputBounds) -> bool {
        self.min >= outer.min && self.max <= outer.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.min).min(self.max)
    }
}

/// Depth-dependent factor applied to the gain of monotone splits.
///
/// Zero when `gamma >= depth + 1`; otherwise `1 - gamma / 2^depth` for
/// `gamma <= 1` and `1 - 2^(gamma - 1 - depth)` above.
pub fn penalty(gamma: f64, depth: usize) -> Result<f64> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Parameter(format!("monotone penalty {gamma} must be >= 0")));
    }
    Ok(penalty_unchecked(gamma, depth))
}

fn penalty_unchecked(gamma: f64, depth: usize) -> f64 {
    let d = depth as f64;
    if gamma >= d + 1.0 {
        0.0
    } else if gamma <= 1.0 {
        1.0 - gamma / 2f64.powi(depth as i32)
    } else {
        1.0 - (gamma - 1.0 - d).exp2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub gamma: f64,
    pub epsilon: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams {
            gamma: 0.0,
            epsilon: 1e-10,
        }
    }
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        penalty(self.gamma, 0)?;
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "penalty epsilon {} must be > 0",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Multiplier for the gain of a monotone split at `depth`.
    pub fn gain_factor(&self, depth: usize) -> f64 {
        penalty_unchecked(self.gamma, depth) + self.epsilon
    }
}

/// Leaves whose constraints changed after a split (the split's own
/// children are never listed).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintUpdateReport {
    pub changed: BTreeSet<usize>,
    pub recomputed: bool,
}

/// Read-only constraint state of one leaf, as seen by split search.
#[derive(Debug, Clone, Copy)]
pub enum ConstraintView<'a> {
    Uniform(OutputBounds),
    Piecewise(&'a PiecewiseConstraint),
}

/// Bounds for the two sides of every threshold of one feature.
pub(crate) enum SideScan {
    Uniform(OutputBounds),
    /// Indexed by `threshold - low`.
    PerThreshold {
        low: u16,
        left: Vec<OutputBounds>,
        right: Vec<OutputBounds>,
    },
}

impl SideScan {
    #[inline]
    pub(crate) fn at(&self, threshold: u16) -> (OutputBounds, OutputBounds) {
        match self {
            SideScan::Uniform(b) => (*b, *b),
            SideScan::PerThreshold { low, left, right } => {
                let i = (threshold - low) as usize;
                (left[i], right[i])
            }
        }
    }
}

impl ConstraintView<'_> {
    /// Bounds for the `(<= threshold, > threshold)` sides of a split on
    /// `feature` of a leaf covering bins `low..=high`.
    pub fn split_bounds(
        &self,
        feature: usize,
        low: u16,
        high: u16,
        threshold: u16,
    ) -> (OutputBounds, OutputBounds) {
        debug_assert!(low <= threshold && threshold < high);
        match self {
            ConstraintView::Uniform(b) => (*b, *b),
            ConstraintView::Piecewise(p) => p.side_bounds(feature, threshold),
        }
    }

    pub(crate) fn side_scan(&self, feature: usize, low: u16, high: u16) -> SideScan {
        match self {
            ConstraintView::Uniform(b) => SideScan::Uniform(*b),
            ConstraintView::Piecewise(p) => p.side_scan(feature, low, high),
        }
    }

    pub fn leaf_bounds(&self) -> OutputBounds {
        match self {
            ConstraintView::Uniform(b) => *b,
            ConstraintView::Piecewise(p) => p.overall(),
        }
    }
}

/// Per-mode constraint bookkeeping, driven by the tree grower.
///
/// The grower calls [`init`](ConstraintEngine::init) once the root exists,
/// asks for [`view`](ConstraintEngine::view)s while searching splits, and
/// calls [`on_split`](ConstraintEngine::on_split) after every executed split
/// (the tree passed in already contains the two new children).
pub trait ConstraintEngine: Send {
    fn mode(&self) -> ConstraintMode;

    fn init(&mut self, tree: &Tree);

    fn view(&self, leaf: usize) -> ConstraintView<'_>;

    /// Bounds applying at a single point (bin vector) inside `leaf`.
    fn bounds_at(&self, leaf: usize, point: &[u16]) -> OutputBounds {
        let _ = point;
        self.view(leaf).leaf_bounds()
    }

    fn on_split(
        &mut self,
        tree: &Tree,
        split_leaf: usize,
        candidate: &SplitCandidate,
        directions: &[i8],
    ) -> Result<ConstraintUpdateReport>;
}

/// Bounds for the two sides of `(feature, threshold)` on `leaf`, under
/// whatever mode `engine` implements.
pub fn bounds_for_split(
    engine: &dyn ConstraintEngine,
    tree: &Tree,
    leaf: usize,
    feature: usize,
    threshold: u16,
) -> (OutputBounds, OutputBounds) {
    let (low, high) = tree.node(leaf).region.interval(feature);
    engine.view(leaf).split_bounds(feature, low, high, threshold)
}

pub(crate) fn check_feasible(node: usize, b: &OutputBounds) -> Result<()> {
    if b.is_feasible() {
        Ok(())
    } else {
        Err(Error::Infeasible {
            node,
            min: b.min,
            max: b.max,
        })
    }
}
