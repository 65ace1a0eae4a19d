//! Metrics and the two experiment protocols.
//!
//! `oracle_70_30`: fit the pool on 70% of the ratings, build the error table
//! over the other 30%, report per-algorithm RMSE, the oracle RMSE and how often
//! each algorithm is best.
//!
//! `meta_50_50_5fold`: fit the pool once on 50% of the ratings. The other half
//! is the evaluation set, cross-validated in k folds. Per fold the meta-model
//! is trained on the other k-1 folds and scored on the held-out fold next to
//! the single best algorithm, the ensemble average and the oracle.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{kfold, random_split};
use crate::dataset::{DatasetName, Rating, RatingDataset};
use crate::error::{Error, Result};
use crate::features::{build_schema, compute_meta_stats, encode_pairs, FeatureVector, MetaFeatureStats};
use crate::linmodel::RidgeConfig;
use crate::meta::{
    argmax_abs, argmin_abs, best_frequency, ensemble_of, oracle_rmse, prediction_matrix, train_meta, ErrorTable,
    MetaModel,
};
use crate::pool::{fit_pool_with, AlgorithmId, Pool, PoolConfig, RatingMatrix};

/// Root mean squared error of signed errors.
pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("error list"));
    }
    Ok((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "oracle_70_30")]
    Oracle7030,
    #[serde(rename = "meta_50_50_5fold")]
    Meta50505Fold,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Oracle7030 => "oracle_70_30",
            ExperimentKind::Meta50505Fold => "meta_50_50_5fold",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" | "oracle_70_30" => Ok(ExperimentKind::Oracle7030),
            "meta" | "meta_50_50_5fold" => Ok(ExperimentKind::Meta50505Fold),
            _ => Err(Error::Config(format!("unknown experiment {s:?} (expected oracle or meta)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetName,
    pub seed: u64,
    pub kind: ExperimentKind,
    pub pool: PoolConfig,
    pub ridge: RidgeConfig,
    pub folds: usize,
    pub algorithms: Vec<AlgorithmId>,
}

impl ExperimentConfig {
    /// All nine algorithms, default hyperparameters, pool seeded with `seed`.
    pub fn new(dataset: DatasetName, kind: ExperimentKind, seed: u64) -> Self {
        Self {
            dataset,
            seed,
            kind,
            pool: PoolConfig::with_seed(seed),
            ridge: RidgeConfig::default(),
            folds: 5,
            algorithms: AlgorithmId::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if self.kind == ExperimentKind::Meta50505Fold && self.folds < 2 {
            return Err(Error::InvalidFoldCount { k: self.folds, n: 0 });
        }
        if !(self.ridge.lambda >= 0.0 && self.ridge.lambda.is_finite()) {
            return Err(Error::Config(format!("ridge lambda must be non-negative, got {}", self.ridge.lambda)));
        }
        Ok(())
    }
}

/// Source of fitted pools: fit from scratch, or load from a cache.
pub trait PoolProvider: Sync {
    /// Returns the pool and how many of its members were loaded rather than fitted.
    fn provide(&self, train: &Arc<RatingMatrix>, cfg: &PoolConfig, ids: &[AlgorithmId]) -> Result<(Pool, usize)>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FreshFit;

impl PoolProvider for FreshFit {
    fn provide(&self, train: &Arc<RatingMatrix>, cfg: &PoolConfig, ids: &[AlgorithmId]) -> Result<(Pool, usize)> {
        Ok((fit_pool_with(train, cfg, ids, true)?, 0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmRmse {
    pub algorithm: AlgorithmId,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestFrequency {
    pub algorithm: AlgorithmId,
    pub pct_best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub ratings: usize,
    pub pool_training: usize,
    pub evaluation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub meta_training_rows: usize,
    pub test_rows: usize,
    /// Lowest-RMSE algorithm on this fold's meta-training rows.
    pub single_best: AlgorithmId,
    pub meta_rmse: f64,
    pub single_best_rmse: f64,
    pub ensemble_rmse: f64,
    pub oracle_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaResults {
    pub folds: usize,
    /// Over the concatenated test folds.
    pub meta_rmse: f64,
    pub single_best_rmse: f64,
    pub ensemble_rmse: f64,
    pub oracle_rmse: f64,
    pub meta_rmse_fold_mean: f64,
    pub per_fold: Vec<FoldResult>,
    pub best_acc: f64,
    pub worst_acc: f64,
    /// How often the meta-learner chose each algorithm, in percent.
    pub selection_frequency: Vec<BestFrequency>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub pool_seconds: f64,
    pub total_seconds: f64,
    pub predictors_from_cache: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: DatasetName,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub counts: Counts,
    /// Per-algorithm RMSE over the evaluation instances.
    pub algorithm_rmse: Vec<AlgorithmRmse>,
    pub oracle_rmse: f64,
    pub best_frequency: Vec<BestFrequency>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub meta: Option<MetaResults>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Timings>,
}

impl EvaluationReport {
    pub fn rmse_of(&self, id: AlgorithmId) -> Option<f64> {
        self.algorithm_rmse.iter().find(|a| a.algorithm == id).map(|a| a.rmse)
    }

    pub fn pct_best(&self, id: AlgorithmId) -> Option<f64> {
        self.best_frequency.iter().find(|a| a.algorithm == id).map(|a| a.pct_best)
    }

    /// Lowest-RMSE algorithm; canonical order breaks ties.
    pub fn best_algorithm(&self) -> AlgorithmRmse {
        self.algorithm_rmse
            .iter()
            .fold(None::<&AlgorithmRmse>, |best, a| match best {
                Some(b) if b.rmse <= a.rmse => Some(b),
                _ => Some(a),
            })
            .expect("report has at least one algorithm")
            .clone()
    }

    /// Relative RMSE reduction of the oracle over the best single algorithm.
    pub fn oracle_improvement(&self) -> f64 {
        1.0 - self.oracle_rmse / self.best_algorithm().rmse
    }

    /// The report without timing metadata; identical configurations give
    /// identical strings.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut r = self.clone();
        r.timings = None;
        Ok(serde_json::to_string_pretty(&r)?)
    }
}

/// Everything an experiment run produces.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub report: EvaluationReport,
    pub table: ErrorTable,
}

/// Fraction of rows where the predicted best (worst) algorithm, by absolute
/// predicted error, is the actual best (worst).
pub fn rank_accuracy(predicted: &[Vec<f64>], table: &ErrorTable) -> Result<(f64, f64)> {
    if table.is_empty() {
        return Err(Error::Empty("error table"));
    }
    if predicted.len() != table.len() {
        return Err(Error::LengthMismatch {
            expected: table.len(),
            got: predicted.len(),
        });
    }
    let (mut best, mut worst) = (0usize, 0usize);
    for (p, r) in predicted.iter().zip(&table.rows) {
        best += usize::from(argmin_abs(p) == argmin_abs(&r.errors));
        worst += usize::from(argmax_abs(p) == argmax_abs(&r.errors));
    }
    let n = table.len() as f64;
    Ok((best as f64 / n, worst as f64 / n))
}

pub fn rank_prediction_accuracy(meta: &MetaModel, table: &ErrorTable, features: &[FeatureVector]) -> Result<(f64, f64)> {
    let predicted = features.iter().map(|x| meta.predict_errors(x)).collect::<Result<Vec<_>>>()?;
    rank_accuracy(&predicted, table)
}

fn algorithm_scores(table: &ErrorTable) -> Result<Vec<AlgorithmRmse>> {
    (0..table.algorithms.len())
        .map(|k| {
            Ok(AlgorithmRmse {
                algorithm: table.algorithms[k],
                rmse: table.column_rmse(k)?,
            })
        })
        .collect()
}

fn frequencies(table: &ErrorTable) -> Result<Vec<BestFrequency>> {
    Ok(best_frequency(table)?
        .into_iter()
        .map(|(algorithm, pct_best)| BestFrequency { algorithm, pct_best })
        .collect())
}

fn select_ratings(ds: &RatingDataset, idx: &[usize]) -> Vec<Rating> {
    idx.iter().map(|&k| ds.ratings[k]).collect()
}

/// Pool-training ratings and evaluation ratings for an experiment.
pub fn experiment_partitions(ds: &RatingDataset, cfg: &ExperimentConfig) -> Result<(Vec<Rating>, Vec<Rating>)> {
    let fractions: &[f64] = match cfg.kind {
        ExperimentKind::Oracle7030 => &[0.7, 0.3],
        ExperimentKind::Meta50505Fold => &[0.5, 0.5],
    };
    let plan = random_split(ds, fractions, cfg.seed)?;
    Ok((select_ratings(ds, &plan.partitions[0]), select_ratings(ds, &plan.partitions[1])))
}

/// Per-user and per-item statistics used as meta-features. They only ever
/// see the pool-training ratings.
pub fn meta_feature_stats(pool_training: &[Rating]) -> Result<MetaFeatureStats> {
    Ok(compute_meta_stats(&RatingMatrix::from_ratings(pool_training)?))
}

pub fn run_experiment(ds: &RatingDataset, cfg: &ExperimentConfig, provider: &dyn PoolProvider) -> Result<ExperimentOutput> {
    match cfg.kind {
        ExperimentKind::Oracle7030 => run_oracle_experiment(ds, cfg, provider),
        ExperimentKind::Meta50505Fold => run_meta_experiment(ds, cfg, provider),
    }
}

struct Prepared {
    train: Vec<Rating>,
    eval: Vec<Rating>,
    pool: Pool,
    predictions: Vec<Vec<f64>>,
    table: ErrorTable,
    timings: Timings,
}

fn prepare(ds: &RatingDataset, cfg: &ExperimentConfig, provider: &dyn PoolProvider) -> Result<Prepared> {
    cfg.validate()?;
    let (train, eval) = experiment_partitions(ds, cfg)?;
    if eval.is_empty() {
        return Err(Error::Empty("evaluation partition"));
    }
    let matrix = Arc::new(RatingMatrix::from_ratings(&train)?);
    let mut ids = cfg.algorithms.clone();
    ids.sort();
    ids.dedup();
    let started = Instant::now();
    let (pool, cached) = provider.provide(&matrix, &cfg.pool, &ids)?;
    let pool_seconds = started.elapsed().as_secs_f64();
    log::info!("pool ready in {pool_seconds:.2}s ({cached} of {} from cache)", pool.len());
    let predictions = prediction_matrix(&pool, &eval);
    let table = ErrorTable::from_predictions(pool.algorithms(), &eval, &predictions)?;
    Ok(Prepared {
        train,
        eval,
        pool,
        predictions,
        table,
        timings: Timings {
            pool_seconds,
            total_seconds: 0.0,
            predictors_from_cache: cached,
        },
    })
}

pub fn run_oracle_experiment(ds: &RatingDataset, cfg: &ExperimentConfig, provider: &dyn PoolProvider) -> Result<ExperimentOutput> {
    let started = Instant::now();
    let p = prepare(ds, cfg, provider)?;
    let mut timings = p.timings;
    timings.total_seconds = started.elapsed().as_secs_f64();
    let report = EvaluationReport {
        dataset: ds.name,
        experiment: ExperimentKind::Oracle7030,
        seed: cfg.seed,
        counts: Counts {
            ratings: ds.len(),
            pool_training: p.train.len(),
            evaluation: p.eval.len(),
        },
        algorithm_rmse: algorithm_scores(&p.table)?,
        oracle_rmse: oracle_rmse(&p.table)?,
        best_frequency: frequencies(&p.table)?,
        meta: None,
        timings: Some(timings),
    };
    Ok(ExperimentOutput { report, table: p.table })
}

pub fn run_meta_experiment(ds: &RatingDataset, cfg: &ExperimentConfig, provider: &dyn PoolProvider) -> Result<ExperimentOutput> {
    let started = Instant::now();
    let p = prepare(ds, cfg, provider)?;
    let n = p.eval.len();
    if cfg.folds > n {
        return Err(Error::InvalidFoldCount { k: cfg.folds, n });
    }
    let schema = build_schema(ds);
    let stats = meta_feature_stats(&p.train)?;
    let pairs: Vec<(u32, u32)> = p.eval.iter().map(|r| (r.user, r.item)).collect();
    let features = encode_pairs(ds, &pairs, &stats, &schema)?;
    let positions: Vec<usize> = (0..n).collect();
    let plan = kfold(&positions, cfg.folds, cfg.seed)?;
    let algorithms = p.pool.algorithms();

    let mut meta_err = Vec::with_capacity(n);
    let mut single_err = Vec::with_capacity(n);
    let mut ensemble_err = Vec::with_capacity(n);
    let mut oracle_err = Vec::with_capacity(n);
    let mut predicted = Vec::with_capacity(n);
    let mut truth_rows = Vec::with_capacity(n);
    let mut chosen_counts = vec![0usize; algorithms.len()];
    let mut per_fold = Vec::with_capacity(cfg.folds);

    for f in 0..cfg.folds {
        let (train_pos, test_pos) = plan.fold(f);
        let train_table = p.table.select(&train_pos);
        let train_x: Vec<FeatureVector> = train_pos.iter().map(|&k| features[k].clone()).collect();
        let meta = train_meta(&train_table, &train_x, &schema, &stats, cfg.ridge)?;

        let single = (0..algorithms.len())
            .map(|k| train_table.column_rmse(k))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (k, r)| if r < best.1 { (k, r) } else { best })
            .0;

        let (mut m, mut s, mut e, mut o) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &k in test_pos {
            let row = &p.table.rows[k];
            let errs = meta.predict_errors(&features[k])?;
            let choice = argmin_abs(&errs);
            chosen_counts[choice] += 1;
            m.push(row.errors[choice]);
            s.push(row.errors[single]);
            e.push(ensemble_of(&p.predictions[k]) - row.truth);
            o.push(row.errors[argmin_abs(&row.errors)]);
            predicted.push(errs);
            truth_rows.push(row.clone());
        }
        per_fold.push(FoldResult {
            fold: f,
            meta_training_rows: train_pos.len(),
            test_rows: test_pos.len(),
            single_best: algorithms[single],
            meta_rmse: rmse(&m)?,
            single_best_rmse: rmse(&s)?,
            ensemble_rmse: rmse(&e)?,
            oracle_rmse: rmse(&o)?,
        });
        log::info!("fold {f}: meta {:.4}, single best {:.4}", per_fold[f].meta_rmse, per_fold[f].single_best_rmse);
        meta_err.extend(m);
        single_err.extend(s);
        ensemble_err.extend(e);
        oracle_err.extend(o);
    }

    let fold_table = ErrorTable::new(algorithms.clone(), truth_rows)?;
    let (best_acc, worst_acc) = rank_accuracy(&predicted, &fold_table)?;
    let meta_results = MetaResults {
        folds: cfg.folds,
        meta_rmse: rmse(&meta_err)?,
        single_best_rmse: rmse(&single_err)?,
        ensemble_rmse: rmse(&ensemble_err)?,
        oracle_rmse: rmse(&oracle_err)?,
        meta_rmse_fold_mean: per_fold.iter().map(|f| f.meta_rmse).sum::<f64>() / cfg.folds as f64,
        per_fold,
        best_acc,
        worst_acc,
        selection_frequency: algorithms
            .iter()
            .zip(&chosen_counts)
            .map(|(&algorithm, &c)| BestFrequency {
                algorithm,
                pct_best: 100.0 * c as f64 / n as f64,
            })
            .collect(),
    };
    let mut timings = p.timings;
    timings.total_seconds = started.elapsed().as_secs_f64();
    let report = EvaluationReport {
        dataset: ds.name,
        experiment: ExperimentKind::Meta50505Fold,
        seed: cfg.seed,
        counts: Counts {
            ratings: ds.len(),
            pool_training: p.train.len(),
            evaluation: n,
        },
        algorithm_rmse: algorithm_scores(&p.table)?,
        oracle_rmse: oracle_rmse(&p.table)?,
        best_frequency: frequencies(&p.table)?,
        meta: Some(meta_results),
        timings: Some(timings),
    };
    Ok(ExperimentOutput { report, table: p.table })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_bytes(header: [&str; 2], rows: impl IntoIterator<Item = (String, f64)>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for (name, v) in rows {
        w.write_record([name, v.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Config(e.to_string()))
}

/// Write `report.json`, `fig3.csv`, `fig4.csv`, `error_table.csv` and, for the
/// meta experiment, `fig5.csv` into `dir`.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let r = &out.report;
    write_file(&dir.join("report.json"), serde_json::to_string_pretty(r)?.as_bytes())?;

    let fig3 = r
        .algorithm_rmse
        .iter()
        .map(|a| (a.algorithm.as_str().to_string(), a.rmse))
        .chain([("oracle".to_string(), r.oracle_rmse)]);
    write_file(&dir.join("fig3.csv"), &csv_bytes(["algorithm", "rmse"], fig3)?)?;

    let fig4 = r.best_frequency.iter().map(|b| (b.algorithm.as_str().to_string(), b.pct_best));
    write_file(&dir.join("fig4.csv"), &csv_bytes(["algorithm", "pct_best"], fig4)?)?;

    if let Some(m) = &r.meta {
        let fig5 = [
            ("meta_learner", m.meta_rmse),
            ("single_best", m.single_best_rmse),
            ("ensemble", m.ensemble_rmse),
            ("oracle", m.oracle_rmse),
        ]
        .map(|(s, v)| (s.to_string(), v));
        write_file(&dir.join("fig5.csv"), &csv_bytes(["system", "rmse"], fig5)?)?;
    }

    let path = dir.join("error_table.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    out.table.write_csv(std::io::BufWriter::new(file))
}
