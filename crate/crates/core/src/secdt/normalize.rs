use serde::{Deserialize, Serialize};

use crate::numerics::{l2_norm, Matrix};

/// Which batch statistic of the row norms becomes the common norm `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormStandard {
    Min,
    #[default]
    Mean,
    Max,
    Off,
}

/// Rescales every nonzero row to norm `φ`, the chosen statistic of the
/// nonzero row norms. Zero rows pass through and do not enter `φ`.
pub fn normalize_gradients(grads: &Matrix, standard: NormStandard) -> Matrix {
    if standard == NormStandard::Off {
        return grads.clone();
    }
    let norms: Vec<f64> = grads.row_iter().map(l2_norm).collect();
    let nonzero: Vec<f64> = norms.iter().copied().filter(|&n| n > 0.0).collect();
    if nonzero.is_empty() {
        log::warn!("gradient normalization skipped: all {} rows are zero", grads.rows());
        return grads.clone();
    }
    let phi = match standard {
        NormStandard::Min => nonzero.iter().copied().fold(f64::INFINITY, f64::min),
        NormStandard::Max => nonzero.iter().copied().fold(0.0, f64::max),
        NormStandard::Mean => nonzero.iter().sum::<f64>() / nonzero.len() as f64,
        NormStandard::Off => unreachable!("handled above"),
    };
    let mut out = grads.clone();
    for (r, &n) in norms.iter().enumerate() {
        if n > 0.0 {
            let row = out.row_mut(r);
            let s = phi / n;
            row.iter_mut().for_each(|v| *v *= s);
            // one refinement pass: rounding leaves norms a few ulps off φ, and
            // anything short of an exact tie is an ordering the host can rank
            let m = l2_norm(row);
            if m != phi && m > 0.0 {
                let s = phi / m;
                row.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    out
}
