//! Ranking and classification metrics.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("AUC needs at least one positive and one negative score")]
    EmptyScores,
    #[error("prediction and gold label lists differ in length ({pred} vs {gold})")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("macro-F1 needs at least one class")]
    NoClasses,
}

/// Probability that a random positive outscores a random negative, ties
/// counted half. Computed from midranks of the pooled scores.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64, MetricError> {
    if pos.is_empty() || neg.is_empty() {
        return Err(MetricError::EmptyScores);
    }
    let mut pooled: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    // twice the rank sum keeps midranks integral
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j].0.total_cmp(&pooled[i].0).is_eq() {
            j += 1;
        }
        // 1-based ranks i+1..=j share the midrank (i+1+j)/2
        let doubled_midrank = (i + 1 + j) as u128;
        let positives = pooled[i..j].iter().filter(|p| p.1).count() as u128;
        doubled_rank_sum += doubled_midrank * positives;
        i = j;
    }
    let n_pos = pos.len() as u128;
    let n_neg = neg.len() as u128;
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// Unweighted mean of per-class F1 over `classes` classes. A class with
/// zero precision plus recall (including one absent from both lists)
/// contributes 0.
pub fn macro_f1(pred: &[usize], gold: &[usize], classes: usize) -> Result<f64, MetricError> {
    if pred.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if classes == 0 {
        return Err(MetricError::NoClasses);
    }
    let mut tp = vec![0usize; classes];
    let mut predicted = vec![0usize; classes];
    let mut actual = vec![0usize; classes];
    for (&p, &g) in pred.iter().zip(gold) {
        for class in [p, g] {
            if class >= classes {
                return Err(MetricError::ClassOutOfRange { class, classes });
            }
        }
        predicted[p] += 1;
        actual[g] += 1;
        if p == g {
            tp[p] += 1;
        }
    }
    let total: f64 = (0..classes)
        .map(|c| {
            if tp[c] == 0 {
                return 0.0;
            }
            let precision = tp[c] as f64 / predicted[c] as f64;
            let recall = tp[c] as f64 / actual[c] as f64;
            2.0 * precision * recall / (precision + recall)
        })
        .sum();
    Ok(total / classes as f64)
}
