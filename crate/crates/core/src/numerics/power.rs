use super::{l2_norm, Matrix, NumericsError, RngStream};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1000;
const START_SEED: u64 = 0x5eed_0f5d;

/// Dominant right singular vector and its singular value.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPair {
    pub vector: Vec<f64>,
    pub value: f64,
}

/// Power iteration on the Gram matrix `MᵀM`.
///
/// The returned vector has unit norm and its first nonzero component is
/// positive. Iteration stops once successive iterates differ by less than
/// `tol` in Euclidean norm.
///
/// Fails on non-finite entries.
pub fn top_singular_vector(
    m: &Matrix,
    tol: f64,
    max_iter: usize,
) -> Result<SingularPair, NumericsError> {
    if !(tol > 0.0) {
        return Err(NumericsError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if m.rows() == 0 || m.cols() == 0 || m.as_slice().iter().all(|&v| v == 0.0) {
        return Err(NumericsError::Degenerate(
            "power iteration on a zero matrix has no dominant direction".into(),
        ));
    }
    let peak = m.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !peak.is_finite() {
        return Err(NumericsError::InvalidArgument("matrix has non-finite entries".into()));
    }
    // working on M / peak keeps MᵀM finite for very large or small entries
    let scaled = m.scale(1.0 / peak);
    let gram = scaled.transposed_matmul(&scaled)?;
    let n = gram.rows();

    // fixed start so results depend only on the input
    let mut v = RngStream::new(START_SEED).gaussian_vec(n);
    let start_norm = l2_norm(&v);
    v.iter_mut().for_each(|x| *x /= start_norm);

    let mut w = vec![0.0; n];
    for _ in 0..max_iter {
        gram_apply(&gram, &v, &mut w);
        let norm = l2_norm(&w);
        if norm == 0.0 {
            return Err(NumericsError::Degenerate(
                "iterate fell into the null space of MᵀM".into(),
            ));
        }
        w.iter_mut().for_each(|x| *x /= norm);
        let delta = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut v, &mut w);
        if delta < tol {
            gram_apply(&gram, &v, &mut w);
            let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            apply_sign_convention(&mut v);
            return Ok(SingularPair {
                vector: v,
                value: peak * rayleigh.max(0.0).sqrt(),
            });
        }
    }
    apply_sign_convention(&mut v);
    Err(NumericsError::NoConvergence {
        iterations: max_iter,
        last: v,
    })
}


fn gram_apply(gram: &Matrix, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = gram.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

fn apply_sign_convention(v: &mut [f64]) {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cyclic Jacobi eigensolver for small symmetric matrices.
    fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
        let n = a.rows();
        let mut a = a.clone();
        let mut vecs = Matrix::identity(n);
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j).powi(2))
                .sum();
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let vkp = vecs.get(k, p);
                        let vkq = vecs.get(k, q);
                        vecs.set(k, p, c * vkp - s * vkq);
                        vecs.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        ((0..n).map(|i| a.get(i, i)).collect(), vecs)
    }

    #[test]
    fn diagonal_matrix() {
        let m = Matrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let pair = top_singular_vector(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((pair.value - 2.0).abs() < 1e-9);
        assert!((pair.vector[0] - 1.0).abs() < 1e-8 && pair.vector[1].abs() < 1e-4);
    }

    #[test]
    fn rank_one_outer_product() {
        // outer([1, 2], [3, 4])
        let m = Matrix::from_rows(&[[3.0, 4.0], [6.0, 8.0]]).unwrap();
        let pair = top_singular_vector(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((pair.value - 5f64.sqrt() * 5.0).abs() < 1e-9);
        assert!((pair.vector[0] - 0.6).abs() < 1e-9);
        assert!((pair.vector[1] - 0.8).abs() < 1e-9);
    }

    #[test]
    fn random_matrix_matches_jacobi_oracle() {
        let mut rng = RngStream::new(31);
        let m = Matrix::from_vec(20, 5, rng.gaussian_vec(100)).unwrap();
        let gram = m.transposed_matmul(&m).unwrap();
        let (vals, vecs) = jacobi_eigen(&gram);
        let top = crate::numerics::argmax(&vals);
        let pair = top_singular_vector(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((pair.value - vals[top].sqrt()).abs() < 1e-6);
        let oracle: Vec<f64> = (0..5).map(|i| vecs.get(i, top)).collect();
        let align: f64 = oracle.iter().zip(&pair.vector).map(|(a, b)| a * b).sum();
        assert!((align.abs() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn extreme_scales_match_unit_scale() {
        let m = Matrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap();
        let base = top_singular_vector(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for s in [1e200, 1e-200] {
            let p = top_singular_vector(&m.scale(s), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            for (a, b) in p.vector.iter().zip(&base.vector) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!((p.value / s - base.value).abs() < 1e-9 * base.value);
        }
        let bad = Matrix::from_rows(&[vec![f64::INFINITY, 0.0]]).unwrap();
        assert!(top_singular_vector(&bad, DEFAULT_TOL, DEFAULT_MAX_ITER).is_err());
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let m = Matrix::zeros(3, 2);
        assert!(matches!(
            top_singular_vector(&m, DEFAULT_TOL, DEFAULT_MAX_ITER),
            Err(NumericsError::Degenerate(_))
        ));
    }

    #[test]
    fn exhausted_iterations_carry_last_iterate() {
        // the identity leaves any start vector fixed, so it converges at once
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let tilted = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.999_999]]).unwrap();
        assert!(top_singular_vector(&m, DEFAULT_TOL, 5).is_ok());
        match top_singular_vector(&tilted, 1e-14, 3) {
            Err(NumericsError::NoConvergence { iterations, last }) => {
                assert_eq!(iterations, 3);
                assert!((l2_norm(&last) - 1.0).abs() < 1e-12);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }
}
