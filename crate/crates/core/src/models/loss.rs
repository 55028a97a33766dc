use super::ModelError;
use crate::numerics::{argmax, Matrix};

const TARGET_SUM_TOL: f64 = 1e-9;

/// Mean soft-target cross-entropy over the batch with the softmax folded in.
///
/// Returns the loss and its gradient w.r.t. the logits, `(p - t) / batch`.
/// Target rows must be nonnegative and sum to one.
pub fn cross_entropy_soft(logits: &Matrix, targets: &Matrix) -> Result<(f64, Matrix), ModelError> {
    check_targets(logits, targets)?;
    for (r, row) in targets.row_iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > TARGET_SUM_TOL {
            return Err(ModelError::InvalidTarget(format!(
                "target row {r} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(soft_ce(logits, targets))
}

/// Cross-entropy against targets that need not sum to one, as used when
/// noised targets are kept unnormalized. The gradient is `(s p - t) / batch`
/// where `s` is the row's target mass.
pub fn cross_entropy_unnormalized(
    logits: &Matrix,
    targets: &Matrix,
) -> Result<(f64, Matrix), ModelError> {
    check_targets(logits, targets)?;
    Ok(soft_ce(logits, targets))
}

fn check_targets(logits: &Matrix, targets: &Matrix) -> Result<(), ModelError> {
    if logits.shape() != targets.shape() {
        return Err(ModelError::ShapeMismatch(format!(
            "logits {:?} vs targets {:?}",
            logits.shape(),
            targets.shape()
        )));
    }
    if logits.rows() == 0 {
        return Err(ModelError::ShapeMismatch("empty batch".into()));
    }
    if let Some(pos) = targets.as_slice().iter().position(|&t| t < 0.0 || !t.is_finite()) {
        return Err(ModelError::InvalidTarget(format!(
            "target entry ({}, {}) is {}",
            pos / targets.cols(),
            pos % targets.cols(),
            targets.as_slice()[pos]
        )));
    }
    Ok(())
}

fn soft_ce(logits: &Matrix, targets: &Matrix) -> (f64, Matrix) {
    let batch = logits.rows() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for r in 0..logits.rows() {
        let z = logits.row(r);
        let t = targets.row(r);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let mass: f64 = t.iter().sum();
        let top = argmax(z);
        let g = grad.row_mut(r);
        let mut rest = 0.0;
        for j in 0..z.len() {
            let log_p = z[j] - max - log_norm;
            if t[j] > 0.0 {
                total -= t[j] * log_p;
            }
            if j != top {
                let p = log_p.exp();
                rest += p;
                g[j] = (mass * p - t[j]) / batch;
            }
        }
        // p_top = 1 - rest; expanding keeps the difference accurate when the
        // prediction is confident and p_top rounds to one
        g[top] = ((mass - t[top]) - mass * rest) / batch;
    }
    (total / batch, grad)
}
