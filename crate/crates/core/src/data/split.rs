use super::{DataError, Dataset, Split};
use crate::numerics::RngStream;

/// Stratified split. The test part holds `round(test_fraction·n)` samples,
/// allotted to classes by largest remainder with at least one sample of
/// every class on each side. Both parts keep the original row order.
pub fn train_test_split(
    data: &Dataset,
    test_fraction: f64,
    rng: &mut RngStream,
) -> Result<(Dataset, Dataset), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let counts = data.class_counts();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.classes()];
    for (i, &l) in data.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let present: Vec<usize> = (0..data.classes()).filter(|&c| counts[c] > 0).collect();
    if let Some(&c) = present.iter().find(|&&c| counts[c] < 2) {
        return Err(DataError::InvalidArgument(format!(
            "class {c} has {} sample; stratification needs at least 2",
            counts[c]
        )));
    }

    let exact: Vec<f64> = counts.iter().map(|&n| test_fraction * n as f64).collect();
    let mut quota = vec![0usize; counts.len()];
    for &c in &present {
        quota[c] = (exact[c].floor() as usize).clamp(1, counts[c] - 1);
    }
    let target = ((test_fraction * data.len() as f64).round() as usize)
        .clamp(present.len(), data.len() - present.len());
    let mut assigned: usize = quota.iter().sum();
    while assigned < target {
        let c = pick(&present, |c| quota[c] + 1 < counts[c], |c| exact[c] - quota[c] as f64);
        quota[c] += 1;
        assigned += 1;
    }
    while assigned > target {
        let c = pick(&present, |c| quota[c] > 1, |c| quota[c] as f64 - exact[c]);
        quota[c] -= 1;
        assigned -= 1;
    }

    let mut test = Vec::with_capacity(target);
    let mut train = Vec::with_capacity(data.len() - target);
    for &c in &present {
        let mut members = by_class[c].clone();
        rng.shuffle(&mut members);
        test.extend_from_slice(&members[..quota[c]]);
        train.extend_from_slice(&members[quota[c]..]);
    }
    test.sort_unstable();
    train.sort_unstable();
    Ok((data.subset(&train, Split::Train), data.subset(&test, Split::Test)))
}

/// Eligible class with the largest key, lowest index on ties.
fn pick(classes: &[usize], eligible: impl Fn(usize) -> bool, key: impl Fn(usize) -> f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for &c in classes.iter().filter(|&&c| eligible(c)) {
        if best.is_none_or(|(_, k)| key(c) > k) {
            best = Some((c, key(c)));
        }
    }
    best.expect("target was clamped to a feasible total").0
}
