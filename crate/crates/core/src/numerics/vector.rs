use super::matrix::dot_unchecked;
use super::NumericsError;

/// Max-subtracted softmax.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>, NumericsError> {
    if v.is_empty() {
        return Err(NumericsError::EmptyInput("softmax"));
    }
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// In-place variant of [`softmax`] for hot loops. `v` must be nonempty.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot product of unequal lengths");
    dot_unchecked(a, b)
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot_unchecked(v, v).sqrt()
}

/// Cosine similarity clamped to `[-1, 1]`. Zero-norm inputs are an error so
/// callers can choose how to exclude them.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, NumericsError> {
    if a.len() != b.len() {
        return Err(NumericsError::ShapeMismatch(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(NumericsError::ZeroNorm);
    }
    Ok((dot_unchecked(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
