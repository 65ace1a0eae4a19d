use serde::{Deserialize, Serialize};

use super::RatingDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Disjoint index partitions produced from a seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub partitions: Vec<Vec<usize>>,
}

impl SplitPlan {
    /// For a fold plan: the held-out fold `f` and the union of the others.
    pub fn fold(&self, f: usize) -> (Vec<usize>, &[usize]) {
        let train = self
            .partitions
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, p)| p.iter().copied())
            .collect();
        (train, &self.partitions[f])
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }
}

pub fn random_split(ds: &RatingDataset, fractions: &[f64], seed: u64) -> Result<SplitPlan> {
    random_split_indices(ds.len(), fractions, seed)
}

/// Shuffle `0..n` and cut it at the cumulative fraction boundaries. Every
/// partition but the last gets `floor(fraction * n)` indices; the last takes
/// the remainder.
pub fn random_split_indices(n: usize, fractions: &[f64], seed: u64) -> Result<SplitPlan> {
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    let sum: f64 = fractions.iter().sum();
    if fractions.is_empty() || fractions.iter().any(|&f| f.is_nan() || f <= 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidFractions(fractions.to_vec()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut rng::stream(seed, rng::SPLIT_STREAM), &mut order);

    let mut partitions = Vec::with_capacity(fractions.len());
    let mut start = 0;
    for (k, &f) in fractions.iter().enumerate() {
        let end = if k + 1 == fractions.len() {
            n
        } else {
            (start + (f * n as f64 + 1e-9).floor() as usize).min(n)
        };
        partitions.push(order[start..end].to_vec());
        start = end;
    }
    Ok(SplitPlan { seed, partitions })
}

/// Shuffle `indices` and deal them into `k` folds whose sizes differ by at
/// most one (the first `len % k` folds get the extra element).
pub fn kfold(indices: &[usize], k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 || indices.len() < k {
        return Err(Error::InvalidFoldCount { k, n: indices.len() });
    }
    let mut order = indices.to_vec();
    rng::shuffle(&mut rng::stream(seed, rng::FOLD_STREAM), &mut order);
    let base = order.len() / k;
    let extra = order.len() % k;
    let mut partitions = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        partitions.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(SplitPlan { seed, partitions })
}
