//! Biased matrix factorisation trained by stochastic gradient descent.

use rand_distr::{Distribution, Normal};

use super::{ensure_finite, AlgorithmId, Estimate, Estimator, FactorConfig, Params, RatingMatrix};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

fn normal_init(len: usize, cfg: &FactorConfig, rng: &mut StreamRng) -> Result<Vec<f64>> {
    let dist = Normal::new(cfg.init_mean, cfg.init_std).map_err(|e| Error::Config(format!("factor init: {e}")))?;
    Ok((0..len).map(|_| dist.sample(rng)).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Visiting order for one epoch: a fresh Fisher-Yates permutation of the
/// training entries.
fn epoch_order(order: &mut [usize], rng: &mut StreamRng) {
    rng::shuffle(rng, order);
}

/// `mu + b_u + b_i + q_i . p_u`
#[derive(Debug)]
pub(crate) struct Svd {
    factors: usize,
    mu: f64,
    bu: Vec<f64>,
    bi: Vec<f64>,
    pu: Vec<f64>,
    qi: Vec<f64>,
}

impl Svd {
    pub fn fit(m: &RatingMatrix, cfg: &FactorConfig, rng: &mut StreamRng) -> Result<Self> {
        let f = cfg.factors;
        let mut pu = normal_init(m.n_users() * f, cfg, rng)?;
        let mut qi = normal_init(m.n_items() * f, cfg, rng)?;
        let mut bu = vec![0.0; m.n_users()];
        let mut bi = vec![0.0; m.n_items()];
        let mu = m.global_mean();
        let (lr, reg) = (cfg.learning_rate, cfg.regularization);
        let entries = m.entries();
        let mut order: Vec<usize> = (0..entries.len()).collect();

        for epoch in 0..cfg.epochs {
            epoch_order(&mut order, rng);
            for &k in &order {
                let (u, i, r) = entries[k];
                let (p, q) = (&mut pu[u * f..(u + 1) * f], &mut qi[i * f..(i + 1) * f]);
                let err = r - (mu + bu[u] + bi[i] + dot(p, q));
                bu[u] += lr * (err - reg * bu[u]);
                bi[i] += lr * (err - reg * bi[i]);
                for (pf, qf) in p.iter_mut().zip(q.iter_mut()) {
                    let (p0, q0) = (*pf, *qf);
                    *pf += lr * (err * q0 - reg * p0);
                    *qf += lr * (err * p0 - reg * q0);
                }
            }
            for params in [&bu, &bi, &pu, &qi] {
                ensure_finite(AlgorithmId::Svd, epoch, params)?;
            }
        }
        Ok(Self {
            factors: f,
            mu,
            bu,
            bi,
            pu,
            qi,
        })
    }

    pub fn from_params(factors: usize, m: &RatingMatrix, p: &mut Params) -> Result<Self> {
        Ok(Self {
            factors,
            mu: m.global_mean(),
            bu: p.take_len("bu", m.n_users())?,
            bi: p.take_len("bi", m.n_items())?,
            pu: p.take_len("pu", m.n_users() * factors)?,
            qi: p.take_len("qi", m.n_items() * factors)?,
        })
    }
}

impl Estimator for Svd {
    fn estimate(&self, _m: &RatingMatrix, user: Option<usize>, item: Option<usize>) -> Estimate {
        let f = self.factors;
        let mut score = self.mu;
        if let Some(u) = user {
            score += self.bu[u];
        }
        if let Some(i) = item {
            score += self.bi[i];
        }
        match (user, item) {
            (Some(u), Some(i)) => Estimate::full(score + dot(&self.pu[u * f..(u + 1) * f], &self.qi[i * f..(i + 1) * f])),
            _ => Estimate::fallback(score),
        }
    }

    fn params(&self) -> Params {
        let mut p = Params::default();
        p.push("bu", self.bu.clone());
        p.push("bi", self.bi.clone());
        p.push("pu", self.pu.clone());
        p.push("qi", self.qi.clone());
        p
    }
}

/// SVD with implicit feedback:
/// `mu + b_u + b_i + q_i . (p_u + |I_u|^-1/2 * sum_{j in I_u} y_j)`
#[derive(Debug)]
pub(crate) struct SvdPp {
    factors: usize,
    mu: f64,
    bu: Vec<f64>,
    bi: Vec<f64>,
    pu: Vec<f64>,
    qi: Vec<f64>,
    yj: Vec<f64>,
}

impl SvdPp {
    pub fn fit(m: &RatingMatrix, cfg: &FactorConfig, rng: &mut StreamRng) -> Result<Self> {
        let f = cfg.factors;
        let mut pu = normal_init(m.n_users() * f, cfg, rng)?;
        let mut qi = normal_init(m.n_items() * f, cfg, rng)?;
        let mut yj = normal_init(m.n_items() * f, cfg, rng)?;
        let mut bu = vec![0.0; m.n_users()];
        let mut bi = vec![0.0; m.n_items()];
        let mu = m.global_mean();
        let (lr, reg) = (cfg.learning_rate, cfg.regularization);
        let entries = m.entries();
        let mut order: Vec<usize> = (0..entries.len()).collect();
        let mut implicit = vec![0.0; f];

        for epoch in 0..cfg.epochs {
            epoch_order(&mut order, rng);
            for &k in &order {
                let (u, i, r) = entries[k];
                let rated = m.user_ratings(u);
                let norm = (rated.len() as f64).sqrt().recip();
                implicit.fill(0.0);
                for &(j, _) in rated {
                    for (acc, y) in implicit.iter_mut().zip(&yj[j * f..(j + 1) * f]) {
                        *acc += y;
                    }
                }
                implicit.iter_mut().for_each(|x| *x *= norm);

                let p = &mut pu[u * f..(u + 1) * f];
                let q = &mut qi[i * f..(i + 1) * f];
                let interaction: f64 = q.iter().zip(p.iter()).zip(&implicit).map(|((q, p), y)| q * (p + y)).sum();
                let err = r - (mu + bu[u] + bi[i] + interaction);
                bu[u] += lr * (err - reg * bu[u]);
                bi[i] += lr * (err - reg * bi[i]);

                // y_j steps use q_i before this step's update.
                for &(j, _) in rated {
                    for (y, q0) in yj[j * f..(j + 1) * f].iter_mut().zip(q.iter()) {
                        *y += lr * (err * q0 * norm - reg * *y);
                    }
                }
                for ((pf, qf), y) in p.iter_mut().zip(q.iter_mut()).zip(&implicit) {
                    let (p0, q0) = (*pf, *qf);
                    *pf += lr * (err * q0 - reg * p0);
                    *qf += lr * (err * (p0 + y) - reg * q0);
                }
            }
            for params in [&bu, &bi, &pu, &qi, &yj] {
                ensure_finite(AlgorithmId::Svdpp, epoch, params)?;
            }
        }
        Ok(Self {
            factors: f,
            mu,
            bu,
            bi,
            pu,
            qi,
            yj,
        })
    }

    pub fn from_params(factors: usize, m: &RatingMatrix, p: &mut Params) -> Result<Self> {
        Ok(Self {
            factors,
            mu: m.global_mean(),
            bu: p.take_len("bu", m.n_users())?,
            bi: p.take_len("bi", m.n_items())?,
            pu: p.take_len("pu", m.n_users() * factors)?,
            qi: p.take_len("qi", m.n_items() * factors)?,
            yj: p.take_len("yj", m.n_items() * factors)?,
        })
    }
}

impl Estimator for SvdPp {
    fn estimate(&self, m: &RatingMatrix, user: Option<usize>, item: Option<usize>) -> Estimate {
        let f = self.factors;
        let mut score = self.mu;
        if let Some(u) = user {
            score += self.bu[u];
        }
        if let Some(i) = item {
            score += self.bi[i];
        }
        let (Some(u), Some(i)) = (user, item) else {
            return Estimate::fallback(score);
        };
        let rated = m.user_ratings(u);
        let norm = (rated.len() as f64).sqrt().recip();
        let mut latent = self.pu[u * f..(u + 1) * f].to_vec();
        for &(j, _) in rated {
            for (l, y) in latent.iter_mut().zip(&self.yj[j * f..(j + 1) * f]) {
                *l += norm * y;
            }
        }
        Estimate::full(score + dot(&latent, &self.qi[i * f..(i + 1) * f]))
    }

    fn params(&self) -> Params {
        let mut p = Params::default();
        p.push("bu", self.bu.clone());
        p.push("bi", self.bi.clone());
        p.push("pu", self.pu.clone());
        p.push("qi", self.qi.clone());
        p.push("yj", self.yj.clone());
        p
    }
}
