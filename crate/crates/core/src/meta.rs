//! Error tables, per-algorithm error models, and per-pair selection.
//!
//! Errors are signed, `predicted - true`, computed from clipped predictions.
//! Each algorithm gets a linear model of its signed error; at selection time
//! the algorithm with the smallest absolute predicted error is asked for the
//! rating. Ties always go to the algorithm earliest in canonical order.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Rating, RatingDataset};
use crate::error::{Error, Result};
use crate::eval::rmse;
use crate::features::{encode_pair, FeatureSchema, FeatureVector, MetaFeatureStats, Standardizer};
use crate::linmodel::{fit_ridge, LinearModel, RidgeConfig};
use crate::pool::{AlgorithmId, Pool};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub user: u32,
    pub item: u32,
    pub truth: f64,
    /// One signed error per table algorithm, in table order.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    /// Column order, always canonical.
    pub algorithms: Vec<AlgorithmId>,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn new(algorithms: Vec<AlgorithmId>, rows: Vec<ErrorRow>) -> Result<Self> {
        if algorithms.is_empty() {
            return Err(Error::Empty("error table algorithms"));
        }
        if algorithms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("error table columns must be distinct and in canonical order".into()));
        }
        for r in &rows {
            if r.errors.len() != algorithms.len() {
                return Err(Error::LengthMismatch {
                    expected: algorithms.len(),
                    got: r.errors.len(),
                });
            }
            if r.errors.iter().any(|e| !e.is_finite()) {
                return Err(Error::Config(format!("non-finite error for user {}, item {}", r.user, r.item)));
            }
        }
        Ok(Self { algorithms, rows })
    }

    /// Build from per-row clipped predictions (table order).
    pub fn from_predictions(algorithms: Vec<AlgorithmId>, instances: &[Rating], predictions: &[Vec<f64>]) -> Result<Self> {
        let rows = instances
            .iter()
            .zip(predictions)
            .map(|(r, p)| ErrorRow {
                user: r.user,
                item: r.item,
                truth: r.value_f64(),
                errors: p.iter().map(|v| v - r.value_f64()).collect(),
            })
            .collect();
        Self::new(algorithms, rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows at the given positions, in that order.
    pub fn select(&self, positions: &[usize]) -> Self {
        Self {
            algorithms: self.algorithms.clone(),
            rows: positions.iter().map(|&k| self.rows[k].clone()).collect(),
        }
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors[k]).collect()
    }

    pub fn column_rmse(&self, k: usize) -> Result<f64> {
        rmse(&self.column(k))
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["user".to_string(), "item".into(), "true".into()];
        header.extend(self.algorithms.iter().map(|a| a.as_str().to_string()));
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.user.to_string(), r.item.to_string(), r.truth.to_string()];
            rec.extend(r.errors.iter().map(f64::to_string));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut input = csv::Reader::from_reader(r);
        let header = input.headers()?.clone();
        let fields: Vec<&str> = header.iter().collect();
        if fields.len() < 4 || fields[..3] != ["user", "item", "true"] {
            return Err(Error::Config(format!("not an error table header: {fields:?}")));
        }
        let algorithms = fields[3..].iter().map(|s| s.parse()).collect::<Result<Vec<AlgorithmId>>>()?;
        let mut rows = Vec::new();
        for (line, rec) in input.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Config(format!("error table row {}: bad {what}", line + 2));
            if rec.len() != fields.len() {
                return Err(bad("field count"));
            }
            let user = rec[0].parse().map_err(|_| bad("user"))?;
            let item = rec[1].parse().map_err(|_| bad("item"))?;
            let truth = rec[2].parse().map_err(|_| bad("rating"))?;
            let errors = rec
                .iter()
                .skip(3)
                .map(|s| s.parse::<f64>().map_err(|_| bad("error value")))
                .collect::<Result<Vec<_>>>()?;
            rows.push(ErrorRow { user, item, truth, errors });
        }
        Self::new(algorithms, rows)
    }
}

/// Clipped predictions of every pool member for every instance.
pub fn prediction_matrix(pool: &Pool, instances: &[Rating]) -> Vec<Vec<f64>> {
    instances.par_iter().map(|r| pool.predict_all(r.user, r.item)).collect()
}

pub fn compute_error_table(pool: &Pool, instances: &[Rating]) -> Result<ErrorTable> {
    if instances.is_empty() {
        return Err(Error::Empty("evaluation instances"));
    }
    ErrorTable::from_predictions(pool.algorithms(), instances, &prediction_matrix(pool, instances))
}

/// Position of the smallest `|v|`; the first one wins ties.
pub fn argmin_abs(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if v.abs() < values[best].abs() {
            best = k;
        }
    }
    best
}

/// Position of the largest `|v|`; the first one wins ties.
pub fn argmax_abs(values: &[f64]) -> usize {
    let mut worst = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if v.abs() > values[worst].abs() {
            worst = k;
        }
    }
    worst
}

pub fn oracle_best(table: &ErrorTable, row: &ErrorRow) -> AlgorithmId {
    table.algorithms[argmin_abs(&row.errors)]
}

/// RMSE of the per-row smallest absolute error.
pub fn oracle_rmse(table: &ErrorTable) -> Result<f64> {
    let best: Vec<f64> = table.rows.iter().map(|r| r.errors[argmin_abs(&r.errors)]).collect();
    rmse(&best)
}

/// Percentage of rows on which each algorithm has the smallest absolute error.
pub fn best_frequency(table: &ErrorTable) -> Result<Vec<(AlgorithmId, f64)>> {
    if table.is_empty() {
        return Err(Error::Empty("error table"));
    }
    let mut counts = vec![0usize; table.algorithms.len()];
    for r in &table.rows {
        counts[argmin_abs(&r.errors)] += 1;
    }
    let n = table.len() as f64;
    Ok(table
        .algorithms
        .iter()
        .zip(counts)
        .map(|(&a, c)| (a, 100.0 * c as f64 / n))
        .collect())
}

/// Mean of the clipped predictions, clipped.
pub fn ensemble_of(predictions: &[f64]) -> f64 {
    crate::clip_rating(predictions.iter().sum::<f64>() / predictions.len() as f64)
}

pub fn ensemble_average(pool: &Pool, user: u32, item: u32) -> f64 {
    ensemble_of(&pool.predict_all(user, item))
}

/// One linear error model per algorithm, plus everything needed to encode a
/// new pair the same way the training rows were encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub algorithms: Vec<AlgorithmId>,
    pub models: Vec<LinearModel>,
    pub schema: FeatureSchema,
    pub stats: MetaFeatureStats,
    pub standardizer: Standardizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: AlgorithmId,
    pub predicted_errors: Vec<f64>,
    pub final_rating: f64,
}

/// Fit the standardizer on `features` (unstandardized, aligned with the
/// table rows) and regress every error column on the standardized rows.
pub fn train_meta(
    table: &ErrorTable,
    features: &[FeatureVector],
    schema: &FeatureSchema,
    stats: &MetaFeatureStats,
    cfg: RidgeConfig,
) -> Result<MetaModel> {
    if table.len() != features.len() {
        return Err(Error::LengthMismatch {
            expected: table.len(),
            got: features.len(),
        });
    }
    let standardizer = Standardizer::fit(features, schema)?;
    let rows: Vec<FeatureVector> = features.iter().map(|x| standardizer.apply(x)).collect();
    let models = (0..table.algorithms.len())
        .into_par_iter()
        .map(|k| {
            fit_ridge(&rows, &table.column(k), cfg).map_err(|e| Error::Algorithm {
                algorithm: table.algorithms[k],
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetaModel {
        algorithms: table.algorithms.clone(),
        models,
        schema: schema.clone(),
        stats: stats.clone(),
        standardizer,
    })
}

impl MetaModel {
    /// Signed error predictions for an unstandardized feature vector.
    pub fn predict_errors(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        let z = self.standardizer.apply(x);
        self.models.iter().map(|m| m.predict(z.as_slice())).collect()
    }

    pub fn encode(&self, ds: &RatingDataset, user: u32, item: u32) -> Result<FeatureVector> {
        let u = ds.user(user).ok_or_else(|| Error::OutOfVocabulary {
            field: "user",
            value: user.to_string(),
        })?;
        let i = ds.item(item).ok_or_else(|| Error::OutOfVocabulary {
            field: "item",
            value: item.to_string(),
        })?;
        encode_pair(u, i, &self.stats, &self.schema)
    }

    /// Choose an algorithm for the pair and return its rating. Only the
    /// chosen predictor is evaluated.
    pub fn select_and_predict(&self, pool: &Pool, ds: &RatingDataset, user: u32, item: u32) -> Result<SelectionResult> {
        let predicted_errors = self.predict_errors(&self.encode(ds, user, item)?)?;
        let chosen = self.algorithms[argmin_abs(&predicted_errors)];
        let predictor = pool
            .get(chosen)
            .ok_or_else(|| Error::Config(format!("pool has no {chosen} predictor")))?;
        Ok(SelectionResult {
            chosen,
            predicted_errors,
            final_rating: predictor.predict(user, item).value,
        })
    }
}
