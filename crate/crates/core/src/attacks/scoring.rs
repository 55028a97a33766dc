use super::{AttackKind, AttackReport};
use crate::numerics::{dot, l2_norm, top_singular_vector, NumericsError, RngStream, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::splitproto::{EpochWindow, GradientTap, TapSource};
use crate::{Error, Result};

pub const DEFAULT_REFERENCE_SIZE: usize = 512;

fn check_binary(hint: usize) -> Result<()> {
    if hint > 1 {
        return Err(Error::Unsupported(format!(
            "this attack separates two classes; majority hint {hint} is not 0 or 1"
        )));
    }
    Ok(())
}

/// Scores each sample by the ℓ2 norm of its cut-layer gradient.
pub fn norm_attack(tap: &GradientTap, window: EpochWindow) -> Result<AttackReport> {
    let obs = tap.observations(TapSource::Gradients, window)?;
    Ok(AttackReport {
        attack: AttackKind::Norm,
        scores: obs.rows.row_iter().map(l2_norm).collect(),
        sample_ids: obs.sample_ids,
        predicted: None,
        window: Some(window),
    })
}

/// Scores each sample by the fraction of the other reference gradients with
/// which it has positive cosine similarity. Gradients of the majority class
/// point the same way, so a score above one half predicts `majority_hint`.
///
/// Zero gradients have no direction and are left out. The reference set is
/// at most `reference_size` samples drawn from `rng`.
pub fn direction_attack(
    tap: &GradientTap,
    window: EpochWindow,
    majority_hint: usize,
    reference_size: usize,
    rng: &mut RngStream,
) -> Result<AttackReport> {
    check_binary(majority_hint)?;
    let obs = tap.observations(TapSource::Gradients, window)?;
    let mut ids = Vec::new();
    let mut units: Vec<Vec<f64>> = Vec::new();
    for (id, row) in obs.sample_ids.iter().zip(obs.rows.row_iter()) {
        let n = l2_norm(row);
        if n > 0.0 {
            ids.push(*id);
            units.push(row.iter().map(|v| v / n).collect());
        }
    }
    if units.is_empty() {
        return Err(Error::Degenerate("every tapped gradient is zero".into()));
    }
    let mut reference: Vec<usize> = (0..units.len()).collect();
    if reference.len() > reference_size.max(1) {
        rng.shuffle(&mut reference);
        reference.truncate(reference_size.max(1));
        reference.sort_unstable();
    }

    let mut scores = Vec::with_capacity(units.len());
    for (i, u) in units.iter().enumerate() {
        let mut positive = 0usize;
        let mut total = 0usize;
        for &j in reference.iter().filter(|&&j| j != i) {
            total += 1;
            if dot(u, &units[j]) > 0.0 {
                positive += 1;
            }
        }
        scores.push(if total == 0 { 1.0 } else { positive as f64 / total as f64 });
    }
    let minority = 1 - majority_hint;
    let predicted = scores
        .iter()
        .map(|&s| if s > 0.5 { majority_hint } else { minority })
        .collect();
    Ok(AttackReport {
        attack: AttackKind::Direction,
        sample_ids: ids,
        scores,
        predicted: Some(predicted),
        window: Some(window),
    })
}

/// Projects mean-centered rows onto their top right singular vector and
/// splits samples by the sign of the projection; the larger side is taken
/// to be `majority_hint`. Scores are oriented so that the majority side is
/// positive.
pub fn spectral_attack(
    tap: &GradientTap,
    window: EpochWindow,
    source: TapSource,
    majority_hint: usize,
) -> Result<AttackReport> {
    check_binary(majority_hint)?;
    let obs = tap.observations(source, window)?;
    if obs.rows.rows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "spectral attack needs at least 2 samples, got {}",
            obs.rows.rows()
        )));
    }
    let centered = obs.rows.centered();
    let v = match top_singular_vector(&centered, DEFAULT_TOL, DEFAULT_MAX_ITER) {
        Ok(pair) => pair.vector,
        Err(NumericsError::NoConvergence { iterations, last }) => {
            log::warn!("spectral attack: power iteration unconverged after {iterations} steps, using last iterate");
            last
        }
        Err(e) => return Err(e.into()),
    };
    let projections: Vec<f64> = centered.row_iter().map(|r| dot(r, &v)).collect();
    let positive_side = projections.iter().filter(|&&p| p > 0.0).count();
    let positive_is_majority = 2 * positive_side >= projections.len();
    let minority = 1 - majority_hint;
    let mut scores = Vec::with_capacity(projections.len());
    let mut predicted = Vec::with_capacity(projections.len());
    for &p in &projections {
        let on_majority_side = if positive_is_majority { p > 0.0 } else { p <= 0.0 };
        predicted.push(if on_majority_side { majority_hint } else { minority });
        scores.push(if positive_is_majority { p } else { -p });
    }
    Ok(AttackReport {
        attack: AttackKind::Spectral,
        sample_ids: obs.sample_ids,
        scores,
        predicted: Some(predicted),
        window: Some(window),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::leak_auc;
    use crate::numerics::Matrix;
    use crate::splitproto::{CutLayerMessage, GradientMessage};

    fn tap_with(rows: &[Vec<f64>]) -> GradientTap {
        let mut tap = GradientTap::new(EpochWindow::ALL);
        let ids: Vec<u64> = (0..rows.len() as u64).collect();
        let m = Matrix::from_rows(rows).unwrap();
        let e = CutLayerMessage {
            epoch: 0,
            batch_id: 0,
            sample_ids: ids.clone(),
            embeddings: m.clone(),
        };
        tap.record_embedding(&e);
        tap.record_gradient(&GradientMessage {
            epoch: 0,
            batch_id: 0,
            sample_ids: ids,
            gradients: m,
        });
        tap
    }

    #[test]
    fn norm_attack_orders_by_norm() {
        let tap = tap_with(&[vec![0.1, 0.0], vec![0.0, 0.2], vec![3.0, 0.0]]);
        let r = norm_attack(&tap, EpochWindow::ALL).unwrap();
        assert_eq!(leak_auc(&r.scores, &[false, false, true]).unwrap(), 1.0);
        let same = tap_with(&vec![vec![1.0, 1.0]; 4]);
        let r = norm_attack(&same, EpochWindow::ALL).unwrap();
        assert_eq!(leak_auc(&r.scores, &[false, true, false, true]).unwrap(), 0.5);
        assert!(norm_attack(&GradientTap::new(EpochWindow::ALL), EpochWindow::ALL).is_err());
    }

    #[test]
    fn direction_attack_by_hand() {
        let rows = vec![
            vec![1.0, 0.1],
            vec![1.0, -0.1],
            vec![0.9, 0.0],
            vec![1.1, 0.05],
            vec![-1.0, 0.0],
        ];
        let r = direction_attack(&tap_with(&rows), EpochWindow::ALL, 0, 512, &mut RngStream::new(0)).unwrap();
        assert_eq!(r.predicted.as_deref(), Some(&[0, 0, 0, 0, 1][..]));
        assert_eq!(&r.scores[..4], &[0.75; 4]);
        assert_eq!(r.scores[4], 0.0);
        let parallel = tap_with(&vec![vec![1.0, 2.0]; 4]);
        let r = direction_attack(&parallel, EpochWindow::ALL, 0, 512, &mut RngStream::new(0)).unwrap();
        assert!(r.scores.iter().all(|&s| s == 1.0));
        assert!(direction_attack(&parallel, EpochWindow::ALL, 2, 512, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn spectral_attack_separates_axis_clusters() {
        let mut rng = RngStream::new(3);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let center = if i % 4 == 0 { 5.0 } else { -5.0 };
            rows.push(vec![center + 0.1 * rng.gaussian(), 0.1 * rng.gaussian()]);
            labels.push(i % 4 == 0);
        }
        let r = spectral_attack(&tap_with(&rows), EpochWindow::ALL, TapSource::Embeddings, 0).unwrap();
        assert_eq!(leak_auc(&r.scores, &labels).unwrap(), 1.0);
        let predicted: Vec<bool> = r.predicted.unwrap().iter().map(|&c| c == 1).collect();
        assert_eq!(predicted, labels);
        let flat = tap_with(&vec![vec![2.0, 1.0]; 3]);
        assert!(spectral_attack(&flat, EpochWindow::ALL, TapSource::Gradients, 0).is_err());
    }
}
