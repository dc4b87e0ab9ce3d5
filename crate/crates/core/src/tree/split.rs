use crate::constraints::{ConstraintView, OutputBounds, PenaltyParams};
use crate::error::{Error, Result};
use crate::parallel::{map_indices, Execution};

use super::histogram::{BinStat, Histogram};
use super::LeafRegion;

/// Gradient/hessian/count totals of one side of a split.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SplitStats {
    pub grad: f64,
    pub hess: f64,
    pub count: usize,
}

impl SplitStats {
    fn from_bin(b: &BinStat) -> Self {
        SplitStats {
            grad: b.grad,
            hess: b.hess,
            count: b.count as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub leaf: usize,
    pub feature: usize,
    pub threshold: u16,
    pub left_output: f64,
    pub right_output: f64,
    pub raw_gain: f64,
    /// Gain after the monotone penalty; equals `raw_gain` for other splits.
    pub gain: f64,
    pub left: SplitStats,
    pub right: SplitStats,
    pub monotone: i8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams {
    pub lambda: f64,
    pub min_data_in_leaf: usize,
    pub min_hessian: f64,
    pub penalty: PenaltyParams,
}

/// Second-order objective of a leaf with totals `(g, h)` and output `w`.
#[inline]
pub fn score(g: f64, h: f64, lambda: f64, w: f64) -> f64 {
    g * w + 0.5 * (h + lambda) * w * w
}

/// Unconstrained Newton output.
#[inline]
pub fn leaf_output(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        -g / denom
    } else {
        0.0
    }
}

/// Minimiser of [`score`] over `[min, max]`.
pub fn constrained_leaf_output(g: f64, h: f64, lambda: f64, min: f64, max: f64) -> Result<f64> {
    if min > max {
        return Err(Error::Infeasible {
            node: usize::MAX,
            min,
            max,
        });
    }
    Ok(clamped(g, h, lambda, &OutputBounds::new(min, max)))
}

#[inline]
fn clamped(g: f64, h: f64, lambda: f64, b: &OutputBounds) -> f64 {
    b.clamp(leaf_output(g, h, lambda))
}

/// What split search needs to know about the leaf being split.
#[derive(Clone, Copy)]
pub struct LeafContext<'a> {
    pub leaf: usize,
    pub depth: usize,
    /// Current output of the leaf; the parent term of the gain uses it.
    pub output: f64,
    pub region: &'a LeafRegion,
    pub view: ConstraintView<'a>,
}

struct Evaluator<'a> {
    ctx: LeafContext<'a>,
    params: &'a SplitParams,
    parent_score: f64,
    factor: f64,
}

impl Evaluator<'_> {
    fn new<'a>(ctx: LeafContext<'a>, total: &BinStat, params: &'a SplitParams) -> Evaluator<'a> {
        Evaluator {
            parent_score: score(total.grad, total.hess, params.lambda, ctx.output),
            factor: params.penalty.gain_factor(ctx.depth),
            ctx,
            params,
        }
    }

    /// Candidate for one threshold, or `None` when a side is too small or
    /// the outputs break the monotone ordering.
    #[inline]
    fn candidate(
        &self,
        feature: usize,
        threshold: u16,
        dir: i8,
        left: SplitStats,
        right: SplitStats,
        bounds: (OutputBounds, OutputBounds),
    ) -> Option<SplitCandidate> {
        let p = self.params;
        if left.count < p.min_data_in_leaf
            || right.count < p.min_data_in_leaf
            || left.hess < p.min_hessian
            || right.hess < p.min_hessian
        {
            return None;
        }
        let lo = clamped(left.grad, left.hess, p.lambda, &bounds.0);
        let ro = clamped(right.grad, right.hess, p.lambda, &bounds.1);
        if (dir > 0 && lo > ro) || (dir < 0 && lo < ro) {
            return None;
        }
        let raw_gain = self.parent_score
            - score(left.grad, left.hess, p.lambda, lo)
            - score(right.grad, right.hess, p.lambda, ro);
        let gain = if dir != 0 { raw_gain * self.factor } else { raw_gain };
        Some(SplitCandidate {
            leaf: self.ctx.leaf,
            feature,
            threshold,
            left_output: lo,
            right_output: ro,
            raw_gain,
            gain,
            left,
            right,
            monotone: dir,
        })
    }

    fn best_on_feature(&self, feature: usize, hist: &Histogram, dir: i8) -> Option<SplitCandidate> {
        let (lo, hi) = self.ctx.region.interval(feature);
        if lo >= hi {
            return None;
        }
        let bins = &hist.bins[lo as usize..=hi as usize];
        let total = sum(bins);
        if total.count < 2 * self.params.min_data_in_leaf as u32 {
            return None;
        }
        let scan = self.ctx.view.side_scan(feature, lo, hi);
        let mut acc = BinStat::default();
        let mut best: Option<SplitCandidate> = None;
        for (i, b) in bins[..bins.len() - 1].iter().enumerate() {
            acc.grad += b.grad;
            acc.hess += b.hess;
            acc.count += b.count;
            let t = lo + i as u16;
            let left = SplitStats::from_bin(&acc);
            let right = SplitStats {
                grad: total.grad - acc.grad,
                hess: total.hess - acc.hess,
                count: (total.count - acc.count) as usize,
            };
            if let Some(c) = self.candidate(feature, t, dir, left, right, scan.at(t)) {
                if c.gain > best.map_or(0.0, |b| b.gain) {
                    best = Some(c);
                }
            }
        }
        best
    }
}

fn sum(bins: &[BinStat]) -> BinStat {
    bins.iter().fold(BinStat::default(), |acc, b| BinStat {
        grad: acc.grad + b.grad,
        hess: acc.hess + b.hess,
        count: acc.count + b.count,
    })
}

fn leaf_total(hists: &[Histogram], region: &LeafRegion) -> BinStat {
    let (lo, hi) = region.interval(0);
    sum(&hists[0].bins[lo as usize..=hi as usize])
}

/// Best split of a leaf over all features and thresholds, maximising the
/// penalised gain. Ties go to the lowest feature, then the lowest
/// threshold. `None` when no candidate has positive gain.
pub fn find_best_split(
    ctx: LeafContext<'_>,
    hists: &[Histogram],
    directions: &[i8],
    params: &SplitParams,
    exec: Execution,
) -> Option<SplitCandidate> {
    if hists.is_empty() {
        return None;
    }
    let eval = Evaluator::new(ctx, &leaf_total(hists, ctx.region), params);
    let per_feature = map_indices(exec, hists.len(), |f| {
        eval.best_on_feature(f, &hists[f], directions[f])
    });
    per_feature
        .into_iter()
        .flatten()
        .fold(None, |best: Option<SplitCandidate>, c| match best {
            Some(b) if b.gain >= c.gain => Some(b),
            _ => Some(c),
        })
}

/// Candidate for one given `(feature, threshold)`, ignoring the sign of its
/// gain. `None` when the threshold lies outside the leaf or the candidate
/// is invalid.
pub fn evaluate_split(
    ctx: LeafContext<'_>,
    hists: &[Histogram],
    directions: &[i8],
    params: &SplitParams,
    feature: usize,
    threshold: u16,
) -> Option<SplitCandidate> {
    let (lo, hi) = ctx.region.interval(feature);
    if threshold < lo || threshold >= hi {
        return None;
    }
    let bins = &hists[feature].bins;
    let total = sum(&bins[lo as usize..=hi as usize]);
    let left = sum(&bins[lo as usize..=threshold as usize]);
    let right = sum(&bins[threshold as usize + 1..=hi as usize]);
    let eval = Evaluator::new(ctx, &total, params);
    let bounds = ctx.view.split_bounds(feature, lo, hi, threshold);
    eval.candidate(
        feature,
        threshold,
        directions[feature],
        SplitStats::from_bin(&left),
        SplitStats::from_bin(&right),
        bounds,
    )
}
