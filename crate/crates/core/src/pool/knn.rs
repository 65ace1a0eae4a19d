use std::cmp::Ordering;

use super::{
    compute_similarity, estimate_baselines, AlgorithmId, BaselineConfig, BaselineEstimates, Estimate, Estimator,
    KnnConfig, Params, RatingMatrix, SimilarityMatrix, SimilarityMeasure,
};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    Basic,
    WithMeans,
    Baseline,
}

/// User-based neighbourhood model.
///
/// The `k` raters of the target item most similar to the target user are
/// taken (ties broken towards the lower user id); only those with positive
/// similarity contribute.
///
/// - basic: `sum(sim * r_vi) / sum(sim)`
/// - with means: `mean_u + sum(sim * (r_vi - mean_v)) / sum(sim)`
/// - baseline: `b_ui + sum(sim * (r_vi - b_vi)) / sum(sim)`
#[derive(Debug)]
pub(crate) struct Knn {
    variant: Variant,
    k: usize,
    min_k: usize,
    sim: SimilarityMatrix,
    user_means: Vec<f64>,
    baselines: Option<BaselineEstimates>,
}

fn variant_of(id: AlgorithmId) -> Variant {
    match id {
        AlgorithmId::KnnBasic => Variant::Basic,
        AlgorithmId::KnnWithMeans => Variant::WithMeans,
        AlgorithmId::KnnBaseline => Variant::Baseline,
        other => unreachable!("{other} is not a neighbourhood model"),
    }
}

impl Knn {
    pub fn fit(id: AlgorithmId, m: &RatingMatrix, cfg: &KnnConfig, bsl_cfg: &BaselineConfig) -> Result<Self> {
        let variant = variant_of(id);
        let (sim, baselines) = match variant {
            Variant::Baseline => {
                let b = estimate_baselines(m, bsl_cfg.reg_user, bsl_cfg.reg_item, bsl_cfg.epochs)?;
                let s = compute_similarity(m, SimilarityMeasure::PearsonBaseline, cfg.min_support, cfg.shrinkage, Some(&b))?;
                (s, Some(b))
            }
            _ => (compute_similarity(m, SimilarityMeasure::Msd, cfg.min_support, 0.0, None)?, None),
        };
        Ok(Self {
            variant,
            k: cfg.k,
            min_k: cfg.min_k,
            sim,
            user_means: (0..m.n_users()).map(|u| m.user_mean(u)).collect(),
            baselines,
        })
    }

    pub fn from_params(id: AlgorithmId, cfg: &KnnConfig, m: &RatingMatrix, p: &mut Params) -> Result<Self> {
        let variant = variant_of(id);
        let n = m.n_users();
        let values = p.take_len("similarity", n * n)?;
        let support = p.take_len("support", n * n)?.into_iter().map(|s| s as u32).collect();
        let baselines = if variant == Variant::Baseline {
            Some(BaselineEstimates {
                mu: m.global_mean(),
                user_bias: p.take_len("user_bias", n)?,
                item_bias: p.take_len("item_bias", m.n_items())?,
            })
        } else {
            None
        };
        Ok(Self {
            variant,
            k: cfg.k,
            min_k: cfg.min_k,
            sim: SimilarityMatrix::from_raw(n, values, support)?,
            user_means: (0..n).map(|u| m.user_mean(u)).collect(),
            baselines,
        })
    }

    fn bsl(&self) -> &BaselineEstimates {
        self.baselines.as_ref().expect("baseline variant carries estimates")
    }

    /// Weighted neighbour sum and total weight over positive-similarity
    /// members of the top-k, or `None` if fewer than `min_k` qualify.
    fn aggregate(&self, m: &RatingMatrix, u: usize, i: usize) -> Option<f64> {
        let mut neighbours: Vec<(f64, usize, f64)> = m
            .item_ratings(i)
            .iter()
            .map(|&(v, r)| (self.sim.get(u, v), v, r))
            .collect();
        let by_rank = |a: &(f64, usize, f64), b: &(f64, usize, f64)| {
            b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
        };
        if neighbours.len() > self.k {
            neighbours.select_nth_unstable_by(self.k, by_rank);
            neighbours.truncate(self.k);
        }
        neighbours.sort_unstable_by(by_rank);

        let (mut weighted, mut total, mut used) = (0.0, 0.0, 0usize);
        for &(s, v, r) in &neighbours {
            if s <= 0.0 {
                continue;
            }
            let term = match self.variant {
                Variant::Basic => r,
                Variant::WithMeans => r - self.user_means[v],
                Variant::Baseline => r - self.bsl().baseline(Some(v), Some(i)),
            };
            weighted += s * term;
            total += s;
            used += 1;
        }
        (used >= self.min_k.max(1) && total > 0.0).then(|| weighted / total)
    }
}

impl Estimator for Knn {
    fn estimate(&self, m: &RatingMatrix, user: Option<usize>, item: Option<usize>) -> Estimate {
        let base = match self.variant {
            Variant::Basic => m.global_mean(),
            Variant::WithMeans => user.map_or(m.global_mean(), |u| self.user_means[u]),
            Variant::Baseline => self.bsl().baseline(user, item),
        };
        let (Some(u), Some(i)) = (user, item) else {
            return Estimate::fallback(base);
        };
        match (self.variant, self.aggregate(m, u, i)) {
            (Variant::Basic, Some(avg)) => Estimate::full(avg),
            (_, Some(offset)) => Estimate::full(base + offset),
            (_, None) => Estimate::fallback(base),
        }
    }

    fn params(&self) -> Params {
        let (values, support) = self.sim.raw();
        let mut p = Params::default();
        p.push("similarity", values.to_vec());
        p.push("support", support.iter().map(|&s| f64::from(s)).collect());
        if let Some(b) = &self.baselines {
            p.push("user_bias", b.user_bias.clone());
            p.push("item_bias", b.item_bias.clone());
        }
        p
    }
}
