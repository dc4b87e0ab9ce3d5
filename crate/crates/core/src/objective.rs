//! Objectives (gradient and hessian per row) and evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are kept this far away from exact 0 and 1.
pub const PROB_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    #[default]
    BinaryLogloss,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradHess {
    pub grad: f64,
    pub hess: f64,
}

pub fn sigmoid(margin: f64) -> f64 {
    let p = 1.0 / (1.0 + (-margin).exp());
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

pub fn grad_hess(kind: ObjectiveKind, margin: f64, label: f64) -> GradHess {
    match kind {
        ObjectiveKind::BinaryLogloss => {
            let p = sigmoid(margin);
            GradHess {
                grad: p - label,
                hess: p * (1.0 - p),
            }
        }
        ObjectiveKind::L2 => GradHess {
            grad: margin - label,
            hess: 1.0,
        },
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

pub fn logloss(probabilities: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(probabilities.len(), labels.len())?;
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / labels.len() as f64)
}

pub fn accuracy(probabilities: &[f64], labels: &[f64], threshold: f64) -> Result<f64> {
    check_lengths(probabilities.len(), labels.len())?;
    let hits = probabilities
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= threshold) == (y >= 0.5))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

pub fn mean_squared_error(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(predictions.len(), targets.len())?;
    let total: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok(total / targets.len() as f64)
}

/// Area under the ROC curve via the Mann–Whitney rank-sum statistic, with
/// tied scores sharing their average rank.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let positives = labels.iter().filter(|&&y| y >= 0.5).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the mean rank
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k] >= 0.5).count();
        positive_rank_sum += mean_rank * tied_pos as f64;
        i = j + 1;
    }
    let p = positives as f64;
    let u = positive_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}
