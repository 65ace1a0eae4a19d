use super::{ensure_finite, AlgorithmId, CoClusteringConfig, Estimate, Estimator, Params, RatingMatrix};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Co-clustering predictor:
/// `avg(cocluster) + (mean_u - avg(user cluster)) + (mean_i - avg(item cluster))`.
///
/// Users and items start in uniformly random clusters. Each epoch recomputes
/// the cluster averages, then reassigns every user to the cluster minimising
/// its squared training error, then every item likewise (items see the new
/// user assignments, both passes use the epoch's averages).
#[derive(Debug)]
pub(crate) struct CoClustering {
    user_cluster: Vec<usize>,
    item_cluster: Vec<usize>,
    user_means: Vec<f64>,
    item_means: Vec<f64>,
    averages: Averages,
}

#[derive(Debug, Clone, PartialEq)]
struct Averages {
    user: Vec<f64>,
    item: Vec<f64>,
    /// Row-major `[user cluster][item cluster]`.
    co: Vec<f64>,
    item_clusters: usize,
}

impl Averages {
    fn compute(m: &RatingMatrix, uc: &[usize], ic: &[usize], n_u: usize, n_i: usize) -> Self {
        let (mut su, mut cu) = (vec![0.0; n_u], vec![0usize; n_u]);
        let (mut si, mut ci) = (vec![0.0; n_i], vec![0usize; n_i]);
        let (mut sc, mut cc) = (vec![0.0; n_u * n_i], vec![0usize; n_u * n_i]);
        for &(u, i, r) in m.entries() {
            let (a, b) = (uc[u], ic[i]);
            su[a] += r;
            cu[a] += 1;
            si[b] += r;
            ci[b] += 1;
            sc[a * n_i + b] += r;
            cc[a * n_i + b] += 1;
        }
        let mu = m.global_mean();
        let avg = |s: Vec<f64>, c: Vec<usize>| -> Vec<f64> {
            s.into_iter().zip(c).map(|(s, c)| if c > 0 { s / c as f64 } else { mu }).collect()
        };
        Self {
            user: avg(su, cu),
            item: avg(si, ci),
            co: avg(sc, cc),
            item_clusters: n_i,
        }
    }

    #[inline]
    fn predict(&self, a: usize, b: usize, mean_u: f64, mean_i: f64) -> f64 {
        self.co[a * self.item_clusters + b] + (mean_u - self.user[a]) + (mean_i - self.item[b])
    }
}

/// Index of the smallest value; the first one on ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = k;
        }
    }
    best
}

impl CoClustering {
    pub fn fit(m: &RatingMatrix, cfg: &CoClusteringConfig, rng: &mut StreamRng) -> Result<Self> {
        let (n_u, n_i) = (cfg.user_clusters, cfg.item_clusters);
        if n_u == 0 || n_i == 0 {
            return Err(Error::Config("co-clustering needs at least one cluster per side".into()));
        }
        let mut uc: Vec<usize> = (0..m.n_users()).map(|_| rng::below(rng, n_u as u64) as usize).collect();
        let mut ic: Vec<usize> = (0..m.n_items()).map(|_| rng::below(rng, n_i as u64) as usize).collect();
        let user_means: Vec<f64> = (0..m.n_users()).map(|u| m.user_mean(u)).collect();
        let item_means: Vec<f64> = (0..m.n_items()).map(|i| m.item_mean(i)).collect();

        let mut errors_u = vec![0.0; n_u];
        let mut errors_i = vec![0.0; n_i];
        for epoch in 0..cfg.epochs {
            let avg = Averages::compute(m, &uc, &ic, n_u, n_i);
            ensure_finite(AlgorithmId::CoClustering, epoch, &avg.co)?;
            for u in 0..m.n_users() {
                errors_u.fill(0.0);
                for (a, err) in errors_u.iter_mut().enumerate() {
                    for &(i, r) in m.user_ratings(u) {
                        let est = avg.predict(a, ic[i], user_means[u], item_means[i]);
                        *err += (r - est) * (r - est);
                    }
                }
                uc[u] = argmin(&errors_u);
            }
            for i in 0..m.n_items() {
                errors_i.fill(0.0);
                for (b, err) in errors_i.iter_mut().enumerate() {
                    for &(u, r) in m.item_ratings(i) {
                        let est = avg.predict(uc[u], b, user_means[u], item_means[i]);
                        *err += (r - est) * (r - est);
                    }
                }
                ic[i] = argmin(&errors_i);
            }
        }
        let averages = Averages::compute(m, &uc, &ic, n_u, n_i);
        Ok(Self {
            user_cluster: uc,
            item_cluster: ic,
            user_means,
            item_means,
            averages,
        })
    }

    pub fn from_params(cfg: &CoClusteringConfig, m: &RatingMatrix, p: &mut Params) -> Result<Self> {
        let as_index = |v: Vec<f64>, bound: usize| -> Result<Vec<usize>> {
            v.into_iter()
                .map(|x| {
                    let k = x as usize;
                    if x >= 0.0 && x.fract() == 0.0 && k < bound {
                        Ok(k)
                    } else {
                        Err(Error::Cache(format!("invalid cluster label {x}")))
                    }
                })
                .collect()
        };
        let uc = as_index(p.take_len("user_cluster", m.n_users())?, cfg.user_clusters)?;
        let ic = as_index(p.take_len("item_cluster", m.n_items())?, cfg.item_clusters)?;
        let averages = Averages::compute(m, &uc, &ic, cfg.user_clusters, cfg.item_clusters);
        Ok(Self {
            user_cluster: uc,
            item_cluster: ic,
            user_means: (0..m.n_users()).map(|u| m.user_mean(u)).collect(),
            item_means: (0..m.n_items()).map(|i| m.item_mean(i)).collect(),
            averages,
        })
    }
}

impl Estimator for CoClustering {
    fn estimate(&self, m: &RatingMatrix, user: Option<usize>, item: Option<usize>) -> Estimate {
        match (user, item) {
            (Some(u), Some(i)) => Estimate::full(self.averages.predict(
                self.user_cluster[u],
                self.item_cluster[i],
                self.user_means[u],
                self.item_means[i],
            )),
            (Some(u), None) => Estimate::fallback(self.user_means[u]),
            (None, Some(i)) => Estimate::fallback(self.item_means[i]),
            (None, None) => Estimate::fallback(m.global_mean()),
        }
    }

    fn params(&self) -> Params {
        let mut p = Params::default();
        p.push("user_cluster", self.user_cluster.iter().map(|&c| c as f64).collect());
        p.push("item_cluster", self.item_cluster.iter().map(|&c| c as f64).collect());
        p
    }
}
