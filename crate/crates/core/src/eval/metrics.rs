//! Classification metrics: confusion counts at a probability threshold,
//! accuracy/sensitivity/specificity/F1 in percent, and AUC.
//!
//! AUC is the probability that a random MS sample outranks a random HC
//! sample with ties counted one half, computed from midranks
//! (Mann-Whitney form); it coincides exactly with trapezoidal ROC
//! integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
    /// Percent.
    pub accuracy: f64,
    /// Percent, TP / (TP + FN).
    pub sensitivity: f64,
    /// Percent, TN / (TN + FP).
    pub specificity: f64,
    /// Percent, 2TP / (2TP + FP + FN).
    pub f1: f64,
    /// None when the labels contain a single class (AUC undefined).
    pub auc: Option<f64>,
}

impl MetricsReport {
    pub fn test_size(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Counts and rates at the given threshold; predicted MS iff
/// `probability >= threshold`.
pub fn compute_metrics(probabilities: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsReport> {
    if probabilities.len() != labels.len() {
        return Err(Error::Integrity("probability/label count mismatch".into()));
    }
    if probabilities.is_empty() {
        return Err(Error::Config("cannot compute metrics on an empty set".into()));
    }
    if labels.iter().any(|v| *v > 1) {
        return Err(Error::Integrity("labels must be 0 (HC) or 1 (MS)".into()));
    }
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (p, y) in probabilities.iter().zip(labels) {
        let predicted_ms = *p >= threshold;
        match (predicted_ms, *y) {
            (true, 1) => tp += 1,
            (true, 0) => fp += 1,
            (false, 0) => tn += 1,
            (false, 1) => fneg += 1,
            _ => unreachable!(),
        }
    }
    let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
    Ok(MetricsReport {
        true_pos: tp,
        false_pos: fp,
        true_neg: tn,
        false_neg: fneg,
        accuracy: pct(tp + tn, tp + fp + tn + fneg),
        sensitivity: pct(tp, tp + fneg),
        specificity: pct(tn, tn + fp),
        f1: pct(2 * tp, 2 * tp + fp + fneg),
        auc: auc_rank(probabilities, labels),
    })
}

/// Mann-Whitney AUC with midranks; None for single-class labels.
pub fn auc_rank(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let pos = labels.iter().filter(|y| **y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based midrank of the tie block [i, j].
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &s in &idx[i..=j] {
            if labels[s] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let p = pos as f64;
    let n = neg as f64;
    Some((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}
