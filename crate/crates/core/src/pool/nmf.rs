use super::{ensure_finite, AlgorithmId, Estimate, Estimator, NmfConfig, Params, RatingMatrix};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Non-negative factorisation `q_i . p_u` fitted with regularized
/// multiplicative updates. Factors start uniform in `[init_low, init_high)`
/// and stay non-negative because every update multiplies by a ratio of
/// non-negative sums.
#[derive(Debug)]
pub(crate) struct Nmf {
    factors: usize,
    pu: Vec<f64>,
    qi: Vec<f64>,
}

impl Nmf {
    pub fn fit(m: &RatingMatrix, cfg: &NmfConfig, rng: &mut StreamRng) -> Result<Self> {
        if cfg.init_low < 0.0 || cfg.init_high < cfg.init_low {
            return Err(Error::Config("nmf initialisation range must be non-negative".into()));
        }
        let f = cfg.factors;
        let span = cfg.init_high - cfg.init_low;
        let mut init = |n: usize| -> Vec<f64> { (0..n).map(|_| cfg.init_low + span * rng::unit(rng)).collect() };
        let mut pu = init(m.n_users() * f);
        let mut qi = init(m.n_items() * f);

        let mut user_num = vec![0.0; pu.len()];
        let mut user_den = vec![0.0; pu.len()];
        let mut item_num = vec![0.0; qi.len()];
        let mut item_den = vec![0.0; qi.len()];

        for epoch in 0..cfg.epochs {
            user_num.fill(0.0);
            user_den.fill(0.0);
            item_num.fill(0.0);
            item_den.fill(0.0);
            for &(u, i, r) in m.entries() {
                let (p, q) = (&pu[u * f..(u + 1) * f], &qi[i * f..(i + 1) * f]);
                let est: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
                for k in 0..f {
                    user_num[u * f + k] += q[k] * r;
                    user_den[u * f + k] += q[k] * est;
                    item_num[i * f + k] += p[k] * r;
                    item_den[i * f + k] += p[k] * est;
                }
            }
            for u in 0..m.n_users() {
                let n = m.user_ratings(u).len() as f64;
                for k in u * f..(u + 1) * f {
                    let den = user_den[k] + n * cfg.reg_user * pu[k];
                    if den > 0.0 {
                        pu[k] *= user_num[k] / den;
                    }
                }
            }
            for i in 0..m.n_items() {
                let n = m.item_ratings(i).len() as f64;
                for k in i * f..(i + 1) * f {
                    let den = item_den[k] + n * cfg.reg_item * qi[k];
                    if den > 0.0 {
                        qi[k] *= item_num[k] / den;
                    }
                }
            }
            ensure_finite(AlgorithmId::Nmf, epoch, &pu)?;
            ensure_finite(AlgorithmId::Nmf, epoch, &qi)?;
        }
        Ok(Self { factors: f, pu, qi })
    }

    pub fn from_params(factors: usize, m: &RatingMatrix, p: &mut Params) -> Result<Self> {
        Ok(Self {
            factors,
            pu: p.take_len("pu", m.n_users() * factors)?,
            qi: p.take_len("qi", m.n_items() * factors)?,
        })
    }
}

impl Estimator for Nmf {
    fn estimate(&self, m: &RatingMatrix, user: Option<usize>, item: Option<usize>) -> Estimate {
        let f = self.factors;
        match (user, item) {
            (Some(u), Some(i)) => Estimate::full(
                self.pu[u * f..(u + 1) * f]
                    .iter()
                    .zip(&self.qi[i * f..(i + 1) * f])
                    .map(|(a, b)| a * b)
                    .sum(),
            ),
            _ => Estimate::fallback(m.global_mean()),
        }
    }

    fn params(&self) -> Params {
        let mut p = Params::default();
        p.push("pu", self.pu.clone());
        p.push("qi", self.qi.clone());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factors_stay_non_negative() {
        let mut rng = rng::stream(2, 0);
        let mut t = Vec::new();
        for u in 0..20u32 {
            for i in 0..15u32 {
                if rng::below(&mut rng, 2) == 0 {
                    t.push((u, i, 1.0 + rng::below(&mut rng, 5) as f64));
                }
            }
        }
        let m = RatingMatrix::from_triples(t).unwrap();
        let model = Nmf::fit(&m, &NmfConfig::default(), &mut rng::stream(1, 1)).unwrap();
        assert!(model.pu.iter().chain(&model.qi).all(|&x| x >= 0.0 && x.is_finite()));
    }

    #[test]
    fn negative_init_range_rejected() {
        let m = RatingMatrix::from_triples([(1, 1, 3.0)]).unwrap();
        let cfg = NmfConfig {
            init_low: -1.0,
            ..NmfConfig::default()
        };
        assert!(Nmf::fit(&m, &cfg, &mut rng::stream(1, 1)).is_err());
    }
}
