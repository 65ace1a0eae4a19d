//! Run configuration: command-line flags over an optional TOML file over
//! built-in defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use metarec::{AlgorithmId, DatasetName, ExperimentKind};

use crate::Failure;

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with any of the options below (flag names, `_` for `-`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// ml100k or ml1m.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Directory holding the MovieLens files.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// oracle (70/30 split) or meta (50/50 split plus k-fold meta-learning).
    #[arg(long)]
    pub experiment: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Folds for the meta experiment.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Output directory for report.json and the CSV files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reuse fitted predictors stored here; stale entries are refitted.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Comma-separated subset of the pool, e.g. `svd,svdpp,slope_one`.
    #[arg(long)]
    pub algorithms: Option<String>,
    /// Ridge penalty of the error models.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Required for ML-1M.
    #[arg(long)]
    pub allow_long: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    dataset: Option<String>,
    data_dir: Option<PathBuf>,
    experiment: Option<String>,
    seed: Option<u64>,
    folds: Option<usize>,
    out: Option<PathBuf>,
    cache_dir: Option<PathBuf>,
    algorithms: Option<AlgorithmList>,
    lambda: Option<f64>,
    threads: Option<usize>,
    allow_long: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AlgorithmList {
    Joined(String),
    List(Vec<String>),
}

impl AlgorithmList {
    fn joined(self) -> String {
        match self {
            AlgorithmList::Joined(s) => s,
            AlgorithmList::List(v) => v.join(","),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub dataset: DatasetName,
    pub data_dir: PathBuf,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub folds: usize,
    pub out: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub algorithms: Vec<AlgorithmId>,
    pub lambda: f64,
    pub threads: Option<usize>,
    pub allow_long: bool,
}

pub const DEFAULT_SEED: u64 = 42;

fn default_data_dir(dataset: DatasetName) -> PathBuf {
    Path::new("data").join(match dataset {
        DatasetName::Ml100k => "ml-100k",
        DatasetName::Ml1m => "ml-1m",
    })
}

impl CliConfig {
    pub fn resolve(args: RunArgs) -> Result<Self, Failure> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
                toml::from_str::<FileConfig>(&text)
                    .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };

        let dataset: DatasetName = match args.dataset.or(file.dataset) {
            Some(s) => s.parse().map_err(Failure::from)?,
            None => DatasetName::Ml100k,
        };
        let experiment: ExperimentKind = match args.experiment.or(file.experiment) {
            Some(s) => s.parse().map_err(Failure::from)?,
            None => ExperimentKind::Oracle7030,
        };
        let algorithms = match args.algorithms.or(file.algorithms.map(AlgorithmList::joined)) {
            Some(s) => AlgorithmId::parse_list(&s).map_err(Failure::from)?,
            None => AlgorithmId::ALL.to_vec(),
        };
        let cfg = Self {
            dataset,
            data_dir: args
                .data_dir
                .or(file.data_dir)
                .unwrap_or_else(|| default_data_dir(dataset)),
            experiment,
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            folds: args.folds.or(file.folds).unwrap_or(5),
            out: args.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            cache_dir: args.cache_dir.or(file.cache_dir),
            algorithms,
            lambda: args.lambda.or(file.lambda).unwrap_or(1e-6),
            threads: args.threads.or(file.threads),
            allow_long: args.allow_long || file.allow_long.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        if self.dataset == DatasetName::Ml1m && !self.allow_long {
            return Err(Failure::usage("ml1m runs take a long time; pass --allow-long to proceed"));
        }
        if self.algorithms.is_empty() {
            return Err(Failure::usage("--algorithms selects nothing"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Failure::usage(format!("--lambda must be a non-negative number, got {}", self.lambda)));
        }
        if self.experiment == ExperimentKind::Meta50505Fold && self.folds < 2 {
            return Err(Failure::usage("--folds must be at least 2"));
        }
        if self.threads == Some(0) {
            return Err(Failure::usage("--threads must be positive"));
        }
        Ok(())
    }

    pub fn experiment_config(&self) -> metarec::ExperimentConfig {
        let mut cfg = metarec::ExperimentConfig::new(self.dataset, self.experiment, self.seed);
        cfg.folds = self.folds;
        cfg.algorithms = self.algorithms.clone();
        cfg.ridge.lambda = self.lambda;
        cfg
    }
}
