use super::{BaselineConfig, Estimate, Estimator, Params, RatingMatrix};
use crate::error::{Error, Result};

/// Global mean plus regularized user and item offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEstimates {
    pub mu: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
}

impl BaselineEstimates {
    /// `mu + b_u + b_i`, using zero for an unknown side.
    pub fn baseline(&self, user: Option<usize>, item: Option<usize>) -> f64 {
        self.mu + user.map_or(0.0, |u| self.user_bias[u]) + item.map_or(0.0, |i| self.item_bias[i])
    }
}

/// Alternating least squares on the biases, starting from zero. Each epoch
/// updates every item bias from the current user biases, then every user
/// bias from the new item biases.
pub fn estimate_baselines(
    train: &RatingMatrix,
    reg_user: f64,
    reg_item: f64,
    epochs: usize,
) -> Result<BaselineEstimates> {
    if train.n_ratings() == 0 {
        return Err(Error::Empty("training ratings"));
    }
    let mu = train.global_mean();
    let mut user_bias = vec![0.0; train.n_users()];
    let mut item_bias = vec![0.0; train.n_items()];
    for _ in 0..epochs {
        for (i, bi) in item_bias.iter_mut().enumerate() {
            let ratings = train.item_ratings(i);
            let dev: f64 = ratings.iter().map(|&(u, r)| r - mu - user_bias[u]).sum();
            *bi = dev / (reg_item + ratings.len() as f64);
        }
        for (u, bu) in user_bias.iter_mut().enumerate() {
            let ratings = train.user_ratings(u);
            let dev: f64 = ratings.iter().map(|&(i, r)| r - mu - item_bias[i]).sum();
            *bu = dev / (reg_user + ratings.len() as f64);
        }
    }
    Ok(BaselineEstimates {
        mu,
        user_bias,
        item_bias,
    })
}

#[derive(Debug)]
pub(crate) struct BaselineOnly {
    biases: BaselineEstimates,
}

impl BaselineOnly {
    pub fn fit(m: &RatingMatrix, cfg: &BaselineConfig) -> Result<Self> {
        let biases = estimate_baselines(m, cfg.reg_user, cfg.reg_item, cfg.epochs)?;
        Ok(Self { biases })
    }

    pub fn from_params(m: &RatingMatrix, p: &mut Params) -> Result<Self> {
        Ok(Self {
            biases: BaselineEstimates {
                mu: m.global_mean(),
                user_bias: p.take_len("user_bias", m.n_users())?,
                item_bias: p.take_len("item_bias", m.n_items())?,
            },
        })
    }
}

impl Estimator for BaselineOnly {
    fn estimate(&self, _m: &RatingMatrix, user: Option<usize>, item: Option<usize>) -> Estimate {
        Estimate {
            score: self.biases.baseline(user, item),
            fallback: user.is_none() || item.is_none(),
        }
    }

    fn params(&self) -> Params {
        let mut p = Params::default();
        p.push("user_bias", self.biases.user_bias.clone());
        p.push("item_bias", self.biases.item_bias.clone());
        p
    }
}
