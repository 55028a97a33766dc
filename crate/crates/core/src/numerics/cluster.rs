use std::collections::BTreeMap;

use super::{Matrix, NumericsError, RngStream};

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_LLOYD_ITERATIONS: usize = 100;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Matrix,
    /// Within-cluster sum of squares of the returned clustering.
    pub wcss: f64,
    /// WCSS after every Lloyd iteration of the winning restart.
    pub wcss_history: Vec<f64>,
}

/// Lloyd's algorithm, best of `restarts` seeded k-means++ initializations.
pub fn kmeans(
    points: &Matrix,
    c: usize,
    rng: &mut RngStream,
    restarts: usize,
) -> Result<KMeansResult, NumericsError> {
    kmeans_with_iterations(points, c, rng, restarts, DEFAULT_LLOYD_ITERATIONS)
}

pub fn kmeans_with_iterations(
    points: &Matrix,
    c: usize,
    rng: &mut RngStream,
    restarts: usize,
    max_iter: usize,
) -> Result<KMeansResult, NumericsError> {
    let n = points.rows();
    if c == 0 || c > n {
        return Err(NumericsError::InvalidArgument(format!(
            "cannot form {c} clusters from {n} points"
        )));
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(points, c, rng, max_iter);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd(points: &Matrix, c: usize, rng: &mut RngStream, max_iter: usize) -> KMeansResult {
    let n = points.rows();
    let d = points.cols();
    let mut centroids = points.select_rows(&plus_plus_seeds(points, c, rng));
    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();

    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut dist_to_own = vec![0.0; n];
        for (i, p) in points.row_iter().enumerate() {
            let (j, dist) = nearest(p, &centroids);
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
            dist_to_own[i] = dist;
        }

        let mut counts = vec![0usize; c];
        assignment.iter().for_each(|&a| counts[a] += 1);
        for j in 0..c {
            if counts[j] > 0 {
                continue;
            }
            // some cluster holds two or more points because c <= n
            let far = (0..n)
                .filter(|&i| counts[assignment[i]] > 1)
                .max_by(|&a, &b| dist_to_own[a].total_cmp(&dist_to_own[b]).then(b.cmp(&a)))
                .expect("a cluster with a spare point exists");
            counts[assignment[far]] -= 1;
            counts[j] = 1;
            assignment[far] = j;
            dist_to_own[far] = 0.0;
            changed = true;
        }

        let mut sums = Matrix::zeros(c, d);
        for (i, p) in points.row_iter().enumerate() {
            for (s, &v) in sums.row_mut(assignment[i]).iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..c {
            let inv = 1.0 / counts[j] as f64;
            sums.row_mut(j).iter_mut().for_each(|s| *s *= inv);
        }
        centroids = sums;
        history.push(wcss(points, &assignment, &centroids));
        if !changed {
            break;
        }
    }
    KMeansResult {
        wcss: *history.last().expect("at least one iteration"),
        assignment,
        centroids,
        wcss_history: history,
    }
}

/// k-means++ seeding: the first seed is a uniform random point, each later
/// one a point drawn with probability proportional to its squared distance
/// from the nearest seed so far.
fn plus_plus_seeds(points: &Matrix, c: usize, rng: &mut RngStream) -> Vec<usize> {
    let n = points.rows();
    let mut seeds = vec![rng.below(n)];
    let mut d2: Vec<f64> = points.row_iter().map(|p| sq_dist(p, points.row(seeds[0]))).collect();
    while seeds.len() < c {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            rng.categorical(&d2)
        } else {
            // every point coincides with a seed; fall back to any unused index
            let unused: Vec<usize> = (0..n).filter(|i| !seeds.contains(i)).collect();
            unused[rng.below(unused.len())]
        };
        seeds.push(next);
        for (i, p) in points.row_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, points.row(next)));
        }
    }
    seeds
}

fn nearest(p: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, cen) in centroids.row_iter().enumerate() {
        let d = sq_dist(p, cen);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn wcss(points: &Matrix, assignment: &[usize], centroids: &Matrix) -> f64 {
    points
        .row_iter()
        .zip(assignment)
        .map(|(p, &a)| sq_dist(p, centroids.row(a)))
        .sum()
}

/// Calinski–Harabasz index `(SSB / (c - 1)) / (SSW / (n - c))`.
///
/// Cluster labels may be arbitrary; the number of clusters is the number of
/// distinct labels.
pub fn calinski_harabasz(points: &Matrix, assignment: &[usize]) -> Result<f64, NumericsError> {
    let n = points.rows();
    if assignment.len() != n {
        return Err(NumericsError::ShapeMismatch(format!(
            "{} labels for {n} points",
            assignment.len()
        )));
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &a) in assignment.iter().enumerate() {
        groups.entry(a).or_default().push(i);
    }
    let c = groups.len();
    if c < 2 {
        return Err(NumericsError::Degenerate(format!(
            "Calinski–Harabasz needs at least 2 clusters, got {c}"
        )));
    }
    if n <= c {
        return Err(NumericsError::Degenerate(format!(
            "Calinski–Harabasz needs more points ({n}) than clusters ({c})"
        )));
    }
    let overall = points.column_means();
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for members in groups.values() {
        let centroid = points.select_rows(members).column_means();
        ssb += members.len() as f64 * sq_dist(&centroid, &overall);
        ssw += members
            .iter()
            .map(|&i| sq_dist(points.row(i), &centroid))
            .sum::<f64>();
    }
    if ssw == 0.0 {
        return Err(NumericsError::Degenerate(
            "within-cluster dispersion is zero".into(),
        ));
    }
    Ok((ssb / (c - 1) as f64) / (ssw / (n - c) as f64))
}
