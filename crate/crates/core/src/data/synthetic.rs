use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Split};
use crate::numerics::{l2_norm, Matrix, RngStream};

/// Gaussian-blob classification task.
///
/// Class `c` is `N(μ_c, I_d)`. When `classes ≤ d` the means are
/// `separation/√2 · u_c` for orthonormal random directions `u_c`, so every
/// pair of class means is exactly `separation` apart; otherwise the
/// directions are independent random unit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub class_weights: Vec<f64>,
    pub separation: f64,
}

impl SyntheticSpec {
    /// Binary task with the given positive (class 1) rate.
    pub fn binary(n: usize, d: usize, positive_rate: f64, separation: f64) -> Self {
        Self {
            n,
            d,
            class_weights: vec![1.0 - positive_rate, positive_rate],
            separation,
        }
    }

    /// Balanced task with `classes` classes.
    pub fn balanced(n: usize, d: usize, classes: usize, separation: f64) -> Self {
        Self {
            n,
            d,
            class_weights: vec![1.0 / classes as f64; classes],
            separation,
        }
    }

    pub fn classes(&self) -> usize {
        self.class_weights.len()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let k = self.class_weights.len();
        if k == 0 {
            return Err(DataError::InvalidArgument("class_weights is empty".into()));
        }
        if self.d == 0 {
            return Err(DataError::InvalidArgument("feature width must be positive".into()));
        }
        if self.class_weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(DataError::InvalidArgument(format!(
                "class weights must be nonnegative, got {:?}",
                self.class_weights
            )));
        }
        let total: f64 = self.class_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidArgument(format!(
                "class weights sum to {total}, expected 1"
            )));
        }
        if !(self.separation >= 0.0) || !self.separation.is_finite() {
            return Err(DataError::InvalidArgument(format!(
                "separation must be nonnegative, got {}",
                self.separation
            )));
        }
        Ok(())
    }
}

/// Draws a dataset. Class means come from `rng.child("directions")`; samples
/// come from `rng.child("samples")` one at a time (label, then features), so
/// a larger `n` with the same seed extends a smaller draw.
pub fn gen_synthetic(spec: &SyntheticSpec, rng: &RngStream) -> Result<Dataset, DataError> {
    spec.validate()?;
    let k = spec.classes();
    let means = class_means(k, spec.d, spec.separation, &mut rng.child("directions"));

    let mut samples = rng.child("samples");
    let mut labels = Vec::with_capacity(spec.n);
    let mut data = Vec::with_capacity(spec.n * spec.d);
    for _ in 0..spec.n {
        let y = samples.categorical(&spec.class_weights);
        labels.push(y);
        for &m in &means[y] {
            data.push(m + samples.gaussian());
        }
    }
    let features = Matrix::from_vec(spec.n, spec.d, data).expect("sized above");
    Dataset::new(features, labels, k, Split::Train)
}

fn class_means(k: usize, d: usize, separation: f64, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let scale = separation / std::f64::consts::SQRT_2;
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        loop {
            let mut v = rng.gaussian_vec(d);
            if k <= d {
                for u in &dirs {
                    let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(u).for_each(|(a, b)| *a -= proj * b);
                }
            }
            let norm = l2_norm(&v);
            if norm > 1e-8 {
                v.iter_mut().for_each(|a| *a /= norm);
                dirs.push(v);
                break;
            }
        }
    }
    dirs.into_iter()
        .map(|u| u.into_iter().map(|a| a * scale).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_count_within_binomial_band() {
        let spec = SyntheticSpec::binary(10_000, 4, 0.05, 2.0);
        let ds = gen_synthetic(&spec, &RngStream::new(77)).unwrap();
        let pos = ds.class_counts()[1];
        // 3σ of Binomial(10⁴, 0.05) is ≈ 65
        assert!((430..=570).contains(&pos), "{pos} positives");
    }

    #[test]
    fn class_means_are_separation_apart() {
        let means = class_means(3, 5, 6.0, &mut RngStream::new(1));
        for i in 0..3 {
            for j in i + 1..3 {
                let d: f64 = means[i].iter().zip(&means[j]).map(|(a, b)| (a - b).powi(2)).sum();
                assert!((d.sqrt() - 6.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn longer_draw_extends_shorter_one() {
        let rng = RngStream::new(5);
        let small = gen_synthetic(&SyntheticSpec::binary(50, 3, 0.3, 1.0), &rng).unwrap();
        let large = gen_synthetic(&SyntheticSpec::binary(100, 3, 0.3, 1.0), &rng).unwrap();
        let first: Vec<usize> = (0..50).collect();
        assert_eq!(large.subset(&first, Split::Train), small);
    }

    #[test]
    fn rejects_bad_weights() {
        let rng = RngStream::new(0);
        let mut spec = SyntheticSpec::binary(10, 2, 0.5, 1.0);
        spec.class_weights = vec![0.7, 0.7];
        assert!(gen_synthetic(&spec, &rng).is_err());
        spec.class_weights = vec![1.2, -0.2];
        assert!(gen_synthetic(&spec, &rng).is_err());
    }
}
