use serde::{Deserialize, Serialize};

use crate::numerics::{calinski_harabasz, kmeans, RngStream, DEFAULT_RESTARTS};
use crate::splitproto::{EpochWindow, GradientTap, TapSource};
use crate::{Error, Result};

/// Gradients clustered per candidate; larger taps are subsampled.
pub const DEFAULT_MAX_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KInference {
    pub guess: usize,
    /// `(c, Calinski–Harabasz score)`; `None` where the clustering was
    /// degenerate.
    pub scores: Vec<(usize, Option<f64>)>,
}

/// Guesses the guest's label dimension: clusters the tapped gradients into
/// `c` groups for every `c` in `[2, k_max]` and returns the `c` with the
/// highest Calinski–Harabasz score.
pub fn infer_k_attack(
    tap: &GradientTap,
    window: EpochWindow,
    k_max: usize,
    max_points: usize,
    rng: &mut RngStream,
) -> Result<KInference> {
    if k_max < 2 {
        return Err(Error::InvalidArgument(format!("k_max must be at least 2, got {k_max}")));
    }
    let obs = tap.observations(TapSource::Gradients, window)?;
    let mut points = obs.rows;
    if points.rows() > max_points.max(2) {
        let mut keep = rng.child("subsample").permutation(points.rows());
        keep.truncate(max_points.max(2));
        keep.sort_unstable();
        points = points.select_rows(&keep);
    }

    let mut scores = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for c in 2..=k_max.min(points.rows().saturating_sub(1)) {
        let clustering = kmeans(&points, c, &mut rng.child_indexed("kmeans", c as u64), DEFAULT_RESTARTS)?;
        let score = calinski_harabasz(&points, &clustering.assignment).ok();
        if let Some(s) = score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        scores.push((c, score));
    }
    let (guess, _) = best.ok_or_else(|| {
        Error::Degenerate("no candidate dimension gave a valid Calinski–Harabasz score".into())
    })?;
    Ok(KInference { guess, scores })
}
