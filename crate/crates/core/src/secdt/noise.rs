use crate::numerics::{softmax_in_place, Matrix, RngStream};
use crate::{Error, Result};

fn check(target: &[f64], mu: f64) -> Result<()> {
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::InvalidArgument(format!("noise level must lie in [0, 1), got {mu}")));
    }
    let ones = target.iter().filter(|&&t| t == 1.0).count();
    let zeros = target.iter().filter(|&&t| t == 0.0).count();
    if ones != 1 || ones + zeros != target.len() {
        return Err(Error::InvalidArgument("noise target must be one-hot".into()));
    }
    Ok(())
}

/// `target + μ·softmax(γ)` with `γ ~ N(0, I)`, before renormalization; sums
/// to `1 + μ`.
pub fn sgn_noise_raw(target: &[f64], mu: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    check(target, mu)?;
    let mut out = target.to_vec();
    add_noise(&mut out, mu, rng);
    Ok(out)
}

/// Softmax-normalized Gaussian noise on a one-hot target, rescaled to sum to
/// one. The hot entry stays the unique maximum for every `μ < 1`.
pub fn sgn_noise(target: &[f64], mu: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut out = sgn_noise_raw(target, mu, rng)?;
    let total = 1.0 + mu;
    out.iter_mut().for_each(|v| *v /= total);
    Ok(out)
}

fn add_noise(row: &mut [f64], mu: f64, rng: &mut RngStream) {
    let mut gamma = rng.gaussian_vec(row.len());
    softmax_in_place(&mut gamma);
    row.iter_mut().zip(&gamma).for_each(|(t, g)| *t += mu * g);
}

/// Noised `n × K` targets for samples pinned to `codes`, one row at a time
/// from `rng`.
pub fn noised_targets(codes: &[usize], width: usize, mu: f64, renormalize: bool, rng: &mut RngStream) -> Matrix {
    let mut out = super::pools::one_hot(codes, width);
    let total = 1.0 + mu;
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        add_noise(row, mu, rng);
        if renormalize {
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    out
}
