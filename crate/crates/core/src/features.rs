//! Meta-learner inputs: one-hot content features from the user and item
//! profiles, followed by ten rating statistics (mean, standard deviation,
//! minimum, maximum, median for the user and for the item).
//!
//! Column layout, in order:
//!
//! | block      | columns                                   | encoding     |
//! |------------|-------------------------------------------|--------------|
//! | age        | 1                                         | numeric      |
//! | gender     | `gender_male`, `gender_female`            | one-hot      |
//! | occupation | one per occupation, dataset order         | one-hot      |
//! | decade     | `decade_pre1920`, `decade_1920s`, ...     | one-hot / 0s |
//! | genre      | one per genre, dataset order              | multi-hot    |
//! | statistics | `user_mean` ... `item_median`             | numeric      |
//!
//! Numeric columns are z-scored by a [`Standardizer`] fitted on the
//! meta-training rows; one-hot columns stay 0/1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetName, Gender, ItemProfile, RatingDataset, UserProfile};
use crate::error::{Error, Result};
use crate::pool::RatingMatrix;

pub const STAT_NAMES: [&str; 5] = ["mean", "std", "min", "max", "median"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Gender,
    Occupation,
    Decade,
    Genre,
    Statistic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Release-year bucket. Everything before 1920 shares one bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decade {
    Before1920,
    Starting(u16),
}

impl Decade {
    pub fn of(year: u16) -> Self {
        if year < 1920 {
            Decade::Before1920
        } else {
            Decade::Starting(year - year % 10)
        }
    }

    fn column_name(self) -> String {
        match self {
            Decade::Before1920 => "decade_pre1920".to_string(),
            Decade::Starting(y) => format!("decade_{y}s"),
        }
    }
}

/// Ordered, named feature columns for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub dataset: DatasetName,
    pub occupations: Vec<String>,
    pub genres: Vec<String>,
    pub decades: Vec<Decade>,
    pub columns: Vec<Column>,
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    fn gender_offset(&self) -> usize {
        1
    }

    fn occupation_offset(&self) -> usize {
        3
    }

    fn decade_offset(&self) -> usize {
        self.occupation_offset() + self.occupations.len()
    }

    fn genre_offset(&self) -> usize {
        self.decade_offset() + self.decades.len()
    }

    fn stats_offset(&self) -> usize {
        self.genre_offset() + self.genres.len()
    }

    /// Indices of the z-scored columns (age and the ten statistics).
    pub fn numeric_columns(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c.kind, ColumnKind::Numeric | ColumnKind::Statistic))
            .map(|(k, _)| k)
            .collect()
    }

    /// Column ranges of the single-choice blocks (gender, occupation, decade).
    pub fn single_choice_blocks(&self) -> [(ColumnKind, std::ops::Range<usize>); 3] {
        [
            (ColumnKind::Gender, self.gender_offset()..self.occupation_offset()),
            (ColumnKind::Occupation, self.occupation_offset()..self.decade_offset()),
            (ColumnKind::Decade, self.decade_offset()..self.genre_offset()),
        ]
    }

    pub fn genre_block(&self) -> std::ops::Range<usize> {
        self.genre_offset()..self.stats_offset()
    }

    pub fn stats_block(&self) -> std::ops::Range<usize> {
        self.stats_offset()..self.len()
    }
}

/// Build the column layout from the dataset's vocabularies. Decades run from
/// the 1920s through the 1990s, extended to later decades present in the
/// item profiles.
pub fn build_schema(ds: &RatingDataset) -> FeatureSchema {
    let latest = ds
        .items
        .values()
        .filter_map(|i| i.release_year)
        .map(|y| y - y % 10)
        .max()
        .unwrap_or(1990)
        .max(1990);
    let mut decades = vec![Decade::Before1920];
    decades.extend((1920..=latest).step_by(10).map(Decade::Starting));

    let mut columns = vec![
        Column {
            name: "age".into(),
            kind: ColumnKind::Numeric,
        },
        Column {
            name: "gender_male".into(),
            kind: ColumnKind::Gender,
        },
        Column {
            name: "gender_female".into(),
            kind: ColumnKind::Gender,
        },
    ];
    columns.extend(ds.occupations.iter().map(|o| Column {
        name: format!("occupation_{o}"),
        kind: ColumnKind::Occupation,
    }));
    columns.extend(decades.iter().map(|d| Column {
        name: d.column_name(),
        kind: ColumnKind::Decade,
    }));
    columns.extend(ds.genres.iter().map(|g| Column {
        name: format!("genre_{g}"),
        kind: ColumnKind::Genre,
    }));
    for side in ["user", "item"] {
        columns.extend(STAT_NAMES.iter().map(|s| Column {
            name: format!("{side}_{s}"),
            kind: ColumnKind::Statistic,
        }));
    }
    FeatureSchema {
        dataset: ds.name,
        occupations: ds.occupations.clone(),
        genres: ds.genres.clone(),
        decades,
        columns,
    }
}

/// Summary of one entity's training ratings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

impl EntityStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        // sorted first so the result does not depend on input order
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let mid = sorted.len() / 2;
        let median = if sorted.len() & 1 == 0 {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        } else {
            sorted[mid]
        };
        Some(Self {
            mean,
            std: var.sqrt(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            median,
        })
    }

    fn as_array(&self) -> [f64; 5] {
        [self.mean, self.std, self.min, self.max, self.median]
    }
}

/// Per-user and per-item rating statistics of the pool-training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFeatureStats {
    pub users: BTreeMap<u32, EntityStats>,
    pub items: BTreeMap<u32, EntityStats>,
    /// Used for entities absent from training: `(mu, global std, 1, 5, mu)`.
    pub fallback: EntityStats,
}

impl MetaFeatureStats {
    pub fn user(&self, id: u32) -> &EntityStats {
        self.users.get(&id).unwrap_or(&self.fallback)
    }

    pub fn item(&self, id: u32) -> &EntityStats {
        self.items.get(&id).unwrap_or(&self.fallback)
    }
}

pub fn compute_meta_stats(train: &RatingMatrix) -> MetaFeatureStats {
    let values = |list: &[(usize, f64)]| -> Vec<f64> { list.iter().map(|&(_, v)| v).collect() };
    let users = (0..train.n_users())
        .map(|u| (train.user_id(u), EntityStats::from_values(&values(train.user_ratings(u))).expect("non-empty")))
        .collect();
    let items = (0..train.n_items())
        .map(|i| (train.item_id(i), EntityStats::from_values(&values(train.item_ratings(i))).expect("non-empty")))
        .collect();
    let all: Vec<f64> = train.entries().iter().map(|&(_, _, v)| v).collect();
    let global = EntityStats::from_values(&all).expect("training matrix is non-empty");
    let mu = train.global_mean();
    MetaFeatureStats {
        users,
        items,
        fallback: EntityStats {
            mean: mu,
            std: global.std,
            min: crate::RATING_MIN,
            max: crate::RATING_MAX,
            median: mu,
        },
    }
}

/// Dense feature values laid out by a [`FeatureSchema`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Unstandardized features of one user-item pair.
pub fn encode_pair(
    user: &UserProfile,
    item: &ItemProfile,
    stats: &MetaFeatureStats,
    schema: &FeatureSchema,
) -> Result<FeatureVector> {
    let mut x = vec![0.0; schema.len()];
    x[0] = f64::from(user.age);
    x[schema.gender_offset()
        + match user.gender {
            Gender::Male => 0,
            Gender::Female => 1,
        }] = 1.0;

    let occ = schema
        .occupations
        .iter()
        .position(|o| *o == user.occupation)
        .ok_or_else(|| Error::OutOfVocabulary {
            field: "occupation",
            value: user.occupation.clone(),
        })?;
    x[schema.occupation_offset() + occ] = 1.0;

    if let Some(year) = item.release_year {
        let d = schema
            .decades
            .iter()
            .position(|&d| d == Decade::of(year))
            .ok_or_else(|| Error::OutOfVocabulary {
                field: "release decade",
                value: year.to_string(),
            })?;
        x[schema.decade_offset() + d] = 1.0;
    }

    for genre in &item.genres {
        let g = schema
            .genres
            .iter()
            .position(|s| s == genre)
            .ok_or_else(|| Error::OutOfVocabulary {
                field: "genre",
                value: genre.clone(),
            })?;
        x[schema.genre_offset() + g] = 1.0;
    }

    let off = schema.stats_offset();
    x[off..off + 5].copy_from_slice(&stats.user(user.user_id).as_array());
    x[off + 5..off + 10].copy_from_slice(&stats.item(item.item_id).as_array());
    Ok(FeatureVector(x))
}

/// Encode many `(user, item)` pairs against the dataset's profiles.
pub fn encode_pairs(
    ds: &RatingDataset,
    pairs: &[(u32, u32)],
    stats: &MetaFeatureStats,
    schema: &FeatureSchema,
) -> Result<Vec<FeatureVector>> {
    use rayon::prelude::*;
    pairs
        .par_iter()
        .map(|&(u, i)| {
            let user = ds.user(u).ok_or_else(|| Error::OutOfVocabulary {
                field: "user",
                value: u.to_string(),
            })?;
            let item = ds.item(i).ok_or_else(|| Error::OutOfVocabulary {
                field: "item",
                value: i.to_string(),
            })?;
            encode_pair(user, item, stats, schema)
        })
        .collect()
}

/// Z-scores the numeric columns with moments of the rows it was fitted on.
/// Columns with zero spread are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub columns: Vec<usize>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[FeatureVector], schema: &FeatureSchema) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("feature rows"));
        }
        let columns = schema.numeric_columns();
        let n = rows.len() as f64;
        let mut mean = Vec::with_capacity(columns.len());
        let mut scale = Vec::with_capacity(columns.len());
        for &c in &columns {
            let m = rows.iter().map(|r| r.0[c]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r.0[c] - m) * (r.0[c] - m)).sum::<f64>() / n;
            mean.push(m);
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Ok(Self { columns, mean, scale })
    }

    pub fn apply(&self, x: &FeatureVector) -> FeatureVector {
        let mut out = x.clone();
        for ((&c, m), s) in self.columns.iter().zip(&self.mean).zip(&self.scale) {
            out.0[c] = (out.0[c] - m) / s;
        }
        out
    }
}
