//! ROC-AUC, accuracy and orientation-free leak AUC.

use crate::{Error, Result};

/// Mann–Whitney AUC: the fraction of (positive, negative) pairs ranked in
/// order, tied pairs counting one half. Computed from average ranks.
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            positives.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("score {bad} is not finite")));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "AUC needs both positive and negative samples".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // ranks are doubled so tied groups get integer average ranks
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank2 = (i + 1 + j + 1) as u128;
        let tied_pos = order[i..=j].iter().filter(|&&k| positives[k]).count() as u128;
        pos_rank_sum2 += avg_rank2 * tied_pos;
        i = j + 1;
    }
    let n_pos = n_pos as u128;
    let u2 = pos_rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg as u128) as f64)
}

/// `max(AUC, 1 − AUC)`.
pub fn leak_auc(scores: &[f64], positives: &[bool]) -> Result<f64> {
    let auc = roc_auc(scores, positives)?;
    Ok(auc.max(1.0 - auc))
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}
