use serde::{Deserialize, Serialize};

use super::{BaselineEstimates, RatingMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMeasure {
    /// `1 / (msd + 1)`, msd the mean squared rating difference over co-rated items.
    Msd,
    /// Pearson correlation of baseline residuals, shrunk towards zero by
    /// `(n - 1) / (n - 1 + shrinkage)` for `n` co-rated items.
    PearsonBaseline,
}

/// Dense, exactly symmetric user-user similarities with co-rating support
/// counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    support: Vec<u32>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n + b]
    }

    #[inline]
    pub fn support(&self, a: usize, b: usize) -> u32 {
        self.support[a * self.n + b]
    }

    pub(crate) fn raw(&self) -> (&[f64], &[u32]) {
        (&self.values, &self.support)
    }

    pub(crate) fn from_raw(n: usize, values: Vec<f64>, support: Vec<u32>) -> Result<Self> {
        if values.len() != n * n || support.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        Ok(Self { n, values, support })
    }
}

/// User-based similarities over the training matrix.
///
/// Each row is accumulated by walking the row user's items and their raters;
/// only the upper triangle of each row is kept and mirrored, so the result is
/// symmetric bit for bit. The diagonal is 1 and pairs with fewer than
/// `min_support` co-rated items get 0.
pub fn compute_similarity(
    train: &RatingMatrix,
    measure: SimilarityMeasure,
    min_support: usize,
    shrinkage: f64,
    baselines: Option<&BaselineEstimates>,
) -> Result<SimilarityMatrix> {
    let n = train.n_users();
    let bsl = match (measure, baselines) {
        (SimilarityMeasure::PearsonBaseline, None) => {
            return Err(Error::Config("pearson_baseline similarity needs baseline estimates".into()))
        }
        (_, b) => b,
    };
    let mut values = vec![0.0; n * n];
    let mut support = vec![0u32; n * n];

    let mut freq = vec![0u32; n];
    let mut acc = vec![0.0f64; n];
    let mut sq_a = vec![0.0f64; n];
    let mut sq_b = vec![0.0f64; n];

    for a in 0..n {
        freq.fill(0);
        acc.fill(0.0);
        sq_a.fill(0.0);
        sq_b.fill(0.0);
        for &(item, ra) in train.user_ratings(a) {
            match measure {
                SimilarityMeasure::Msd => {
                    for &(b, rb) in train.item_ratings(item) {
                        if b < a {
                            continue;
                        }
                        freq[b] += 1;
                        acc[b] += (ra - rb) * (ra - rb);
                    }
                }
                SimilarityMeasure::PearsonBaseline => {
                    let bsl = bsl.expect("checked above");
                    let item_part = bsl.mu + bsl.item_bias[item];
                    let da = ra - item_part - bsl.user_bias[a];
                    for &(b, rb) in train.item_ratings(item) {
                        if b < a {
                            continue;
                        }
                        let db = rb - item_part - bsl.user_bias[b];
                        freq[b] += 1;
                        acc[b] += da * db;
                        sq_a[b] += da * da;
                        sq_b[b] += db * db;
                    }
                }
            }
        }
        for b in a..n {
            let f = freq[b];
            let sim = if a == b {
                1.0
            } else if (f as usize) < min_support || f == 0 {
                0.0
            } else {
                match measure {
                    SimilarityMeasure::Msd => 1.0 / (acc[b] / f64::from(f) + 1.0),
                    SimilarityMeasure::PearsonBaseline => {
                        let denom = (sq_a[b] * sq_b[b]).sqrt();
                        if denom > 0.0 {
                            let fm1 = f64::from(f) - 1.0;
                            acc[b] / denom * fm1 / (fm1 + shrinkage)
                        } else {
                            0.0
                        }
                    }
                }
            };
            values[a * n + b] = sim;
            values[b * n + a] = sim;
            support[a * n + b] = f;
            support[b * n + a] = f;
        }
    }
    Ok(SimilarityMatrix { n, values, support })
}
