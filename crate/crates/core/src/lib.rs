//! Micro-level algorithm selection for rating prediction.
//!
//! A pool of nine collaborative-filtering predictors is fitted on a training
//! partition. For every held-out user-item pair a per-algorithm linear model
//! predicts the signed error each predictor would make, and the predictor with
//! the smallest predicted absolute error supplies the final rating.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: MovieLens 100K / 1M loaders, seeded splits and fold plans.
//! - [`pool`]: the nine rating predictors behind one fit/predict contract.
//! - [`features`]: content one-hots plus per-user / per-item rating statistics.
//! - [`linmodel`]: ridge least squares for the error models.
//! - [`meta`]: error tables, meta-model training, selection, oracle, ensemble.
//! - [`eval`]: metrics and the two experiment protocols.
//! - [`cache`]: on-disk container for fitted predictors.

pub mod cache;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod linmodel;
pub mod meta;
pub mod pool;
pub mod rng;

pub use dataset::{DatasetName, Gender, ItemProfile, Rating, RatingDataset, SplitPlan, UserProfile};
pub use error::{Error, Result};
pub use eval::{EvaluationReport, ExperimentConfig, ExperimentKind};
pub use features::{FeatureSchema, FeatureVector, MetaFeatureStats};
pub use linmodel::{LinearModel, RidgeConfig};
pub use meta::{ErrorTable, MetaModel, SelectionResult};
pub use pool::{AlgorithmId, Pool, PoolConfig, Prediction, RatingMatrix, TrainedPredictor};

/// Lowest value on the rating scale.
pub const RATING_MIN: f64 = 1.0;
/// Highest value on the rating scale.
pub const RATING_MAX: f64 = 5.0;

/// Clamp a raw score onto the rating scale.
#[inline]
pub fn clip_rating(score: f64) -> f64 {
    score.clamp(RATING_MIN, RATING_MAX)
}
