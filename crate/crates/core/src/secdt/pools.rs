use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::numerics::{argmax, Matrix, RngStream};
use crate::{Error, Result};

/// Label codec: `k` classes, `K` codes, one pool of `K/k` codes per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingPools {
    classes: usize,
    dimension: usize,
    pools: Vec<Vec<usize>>,
    code_class: Vec<usize>,
    per_sample_codes: Option<Vec<usize>>,
    seed: u64,
}

/// Shuffles the codes `0..K` and cuts them into `k` consecutive pools.
pub fn build_mapping_pools(classes: usize, dimension: usize, rng: &mut RngStream) -> Result<MappingPools> {
    if classes == 0 || dimension < classes || dimension % classes != 0 {
        return Err(Error::InvalidArgument(format!(
            "dimension {dimension} is not a positive multiple of {classes} classes"
        )));
    }
    let seed = rng.seed();
    let shuffled = rng.permutation(dimension);
    let size = dimension / classes;
    let pools: Vec<Vec<usize>> = shuffled.chunks(size).map(<[usize]>::to_vec).collect();
    let mut code_class = vec![0; dimension];
    for (y, pool) in pools.iter().enumerate() {
        pool.iter().for_each(|&c| code_class[c] = y);
    }
    Ok(MappingPools {
        classes,
        dimension,
        pools,
        code_class,
        per_sample_codes: None,
        seed,
    })
}

/// Pins every sample to a code drawn uniformly from its class's pool and
/// returns the `n × K` one-hot targets. Assignment happens once; a second
/// call on the same pools is an error.
pub fn transform_labels(labels: &[usize], pools: &mut MappingPools, rng: &mut RngStream) -> Result<Matrix> {
    if pools.per_sample_codes.is_some() {
        return Err(Error::InvalidArgument(
            "labels were already transformed with these pools".into(),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= pools.classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside [0, {})",
            pools.classes
        )));
    }
    let codes: Vec<usize> = labels
        .iter()
        .map(|&y| pools.pools[y][rng.below(pools.pool_size())])
        .collect();
    let targets = one_hot(&codes, pools.dimension);
    pools.per_sample_codes = Some(codes);
    Ok(targets)
}

pub(crate) fn one_hot(codes: &[usize], width: usize) -> Matrix {
    let mut m = Matrix::zeros(codes.len(), width);
    for (i, &c) in codes.iter().enumerate() {
        m.set(i, c, 1.0);
    }
    m
}

/// Class whose pool holds the largest entry of `p` (lowest code on ties).
pub fn maximum_mapping(p: &[f64], pools: &MappingPools) -> usize {
    assert_eq!(p.len(), pools.dimension, "prediction width must equal K");
    pools.code_class[argmax(p)]
}

/// Class `y` maximizing `w_y · p` (lowest class on ties).
pub fn weighted_mapping(p: &[f64], pools: &MappingPools) -> usize {
    argmax(&pools.pool_scores(p))
}

impl MappingPools {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn pool_size(&self) -> usize {
        self.dimension / self.classes
    }

    pub fn pool(&self, class: usize) -> &[usize] {
        &self.pools[class]
    }

    pub fn pools(&self) -> &[Vec<usize>] {
        &self.pools
    }

    pub fn class_of(&self, code: usize) -> usize {
        self.code_class[code]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn per_sample_codes(&self) -> Option<&[usize]> {
        self.per_sample_codes.as_deref()
    }

    /// `w_y`: ones at the codes of pool `y`.
    pub fn weights(&self, class: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.dimension];
        self.pools[class].iter().for_each(|&c| w[c] = 1.0);
        w
    }

    /// `w_y · p` for every class.
    pub fn pool_scores(&self, p: &[f64]) -> Vec<f64> {
        assert_eq!(p.len(), self.dimension, "prediction width must equal K");
        self.pools
            .iter()
            .map(|pool| pool.iter().map(|&c| p[c]).sum())
            .collect()
    }

    /// Text sidecar: `seed`, `k` and `K` lines, then one `class: codes` line
    /// per pool.
    pub fn to_sidecar(&self) -> String {
        let mut out = format!("seed: {}\nk: {}\nK: {}\n", self.seed, self.classes, self.dimension);
        for (y, pool) in self.pools.iter().enumerate() {
            let codes: Vec<String> = pool.iter().map(usize::to_string).collect();
            writeln!(out, "{y}: {}", codes.join(" ")).expect("writing to a String");
        }
        out
    }

    pub fn from_sidecar(text: &str) -> Result<MappingPools> {
        let bad = |msg: &str| Error::InvalidArgument(format!("pools sidecar: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut field = |name: &str| -> Result<u64> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing {name}")))?;
            let (key, value) = line.split_once(':').ok_or_else(|| bad(line))?;
            if key.trim() != name {
                return Err(bad(&format!("expected {name}, found {key}")));
            }
            value.trim().parse().map_err(|_| bad(line))
        };
        let seed = field("seed")?;
        let classes = field("k")? as usize;
        let dimension = field("K")? as usize;
        let mut pools = vec![Vec::new(); classes];
        for line in lines {
            let (key, codes) = line.split_once(':').ok_or_else(|| bad(line))?;
            let y: usize = key.trim().parse().map_err(|_| bad(line))?;
            let slot = pools.get_mut(y).ok_or_else(|| bad(line))?;
            for c in codes.split_whitespace() {
                slot.push(c.parse().map_err(|_| bad(line))?);
            }
        }
        let mut code_class = vec![usize::MAX; dimension];
        for (y, pool) in pools.iter().enumerate() {
            if classes == 0 || pool.len() * classes != dimension {
                return Err(bad(&format!("pool {y} has {} codes", pool.len())));
            }
            for &c in pool {
                match code_class.get_mut(c) {
                    Some(slot) if *slot == usize::MAX => *slot = y,
                    _ => return Err(bad(&format!("code {c} is out of range or repeated"))),
                }
            }
        }
        Ok(MappingPools {
            classes,
            dimension,
            pools,
            code_class,
            per_sample_codes: None,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_pools() -> MappingPools {
        MappingPools::from_sidecar("seed: 0\nk: 2\nK: 4\n0: 0 1\n1: 2 3\n").unwrap()
    }

    #[test]
    fn pools_partition_codes() {
        let pools = build_mapping_pools(2, 4, &mut RngStream::new(3)).unwrap();
        let mut all: Vec<usize> = pools.pools().concat();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert!(pools.pools().iter().all(|p| p.len() == 2));
        assert!(build_mapping_pools(2, 3, &mut RngStream::new(3)).is_err());
        for ratio in [2, 5, 10] {
            let p = build_mapping_pools(2, 2 * ratio, &mut RngStream::new(1)).unwrap();
            assert_eq!(p.pool_size(), ratio);
        }
    }

    #[test]
    fn mappings_disagree_on_motivating_case() {
        let pools = fixed_pools();
        let p = [0.3, 0.3, 0.39, 0.01];
        assert_eq!(maximum_mapping(&p, &pools), 1);
        assert_eq!(weighted_mapping(&p, &pools), 0);
        assert_eq!(maximum_mapping(&[0.25; 4], &pools), 0);
        assert_eq!(weighted_mapping(&[0.25; 4], &pools), 0);
    }

    #[test]
    fn transform_assigns_once_within_pool() {
        let mut pools = build_mapping_pools(3, 12, &mut RngStream::new(8)).unwrap();
        let labels = vec![0, 1, 2, 2, 1, 0, 0];
        let targets = transform_labels(&labels, &mut pools, &mut RngStream::new(9)).unwrap();
        for (i, &y) in labels.iter().enumerate() {
            let row = targets.row(i);
            assert_eq!(row.iter().sum::<f64>(), 1.0);
            let code = argmax(row);
            assert!(pools.pool(y).contains(&code));
            assert_eq!(weighted_mapping(row, &pools), y);
        }
        assert!(transform_labels(&labels, &mut pools, &mut RngStream::new(9)).is_err());
    }

    #[test]
    fn singleton_pools_permute_classes() {
        let mut pools = build_mapping_pools(4, 4, &mut RngStream::new(2)).unwrap();
        let labels = vec![0, 1, 2, 3, 0, 1];
        let a = transform_labels(&labels, &mut pools.clone(), &mut RngStream::new(5)).unwrap();
        let b = transform_labels(&labels, &mut pools, &mut RngStream::new(6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sidecar_round_trip() {
        let pools = build_mapping_pools(3, 9, &mut RngStream::new(44)).unwrap();
        let back = MappingPools::from_sidecar(&pools.to_sidecar()).unwrap();
        assert_eq!(back, pools);
        assert!(MappingPools::from_sidecar("seed: 0\nk: 2\nK: 4\n0: 0 1\n1: 1 3\n").is_err());
    }
}
