use super::{Estimate, Estimator, Params, RatingMatrix};
use crate::error::Result;

/// Weighted-free Slope One: `mean_u + avg_{j in R_i(u)} dev(i, j)`, where
/// `dev(i, j)` is the mean of `r_ui - r_uj` over users who rated both and
/// `R_i(u)` are the items `u` rated that share at least one rater with `i`.
#[derive(Debug)]
pub(crate) struct SlopeOne {
    n_items: usize,
    /// Row-major `dev[i * n + j]`.
    dev: Vec<f64>,
    freq: Vec<u32>,
    user_means: Vec<f64>,
}

impl SlopeOne {
    pub fn fit(m: &RatingMatrix) -> Self {
        let n = m.n_items();
        let mut dev = vec![0.0; n * n];
        let mut freq = vec![0u32; n * n];
        for u in 0..m.n_users() {
            let rated = m.user_ratings(u);
            for &(i, ri) in rated {
                let row = i * n;
                for &(j, rj) in rated {
                    freq[row + j] += 1;
                    dev[row + j] += ri - rj;
                }
            }
        }
        for (d, &c) in dev.iter_mut().zip(&freq) {
            if c > 0 {
                *d /= f64::from(c);
            }
        }
        Self {
            n_items: n,
            dev,
            freq,
            user_means: (0..m.n_users()).map(|u| m.user_mean(u)).collect(),
        }
    }

    pub fn from_params(m: &RatingMatrix, p: &mut Params) -> Result<Self> {
        let n = m.n_items();
        Ok(Self {
            n_items: n,
            dev: p.take_len("dev", n * n)?,
            freq: p.take_len("freq", n * n)?.into_iter().map(|c| c as u32).collect(),
            user_means: (0..m.n_users()).map(|u| m.user_mean(u)).collect(),
        })
    }
}

impl Estimator for SlopeOne {
    fn estimate(&self, m: &RatingMatrix, user: Option<usize>, item: Option<usize>) -> Estimate {
        let Some(u) = user else {
            return Estimate::fallback(m.global_mean());
        };
        let mean_u = self.user_means[u];
        let Some(i) = item else {
            return Estimate::fallback(mean_u);
        };
        let row = i * self.n_items;
        let (mut sum, mut count) = (0.0, 0usize);
        for &(j, _) in m.user_ratings(u) {
            if self.freq[row + j] > 0 {
                sum += self.dev[row + j];
                count += 1;
            }
        }
        if count == 0 {
            Estimate::fallback(mean_u)
        } else {
            Estimate::full(mean_u + sum / count as f64)
        }
    }

    fn params(&self) -> Params {
        let mut p = Params::default();
        p.push("dev", self.dev.clone());
        p.push("freq", self.freq.iter().map(|&c| f64::from(c)).collect());
        p
    }
}
