//! In-memory MovieLens datasets and deterministic partitioning.

mod movielens;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use movielens::{load_movielens, ML100K_GENRES, ML1M_GENRES, ML1M_OCCUPATIONS};
pub use split::{kfold, random_split, random_split_indices, SplitPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Ml100k,
    Ml1m,
}

impl DatasetName {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Ml100k => "ml100k",
            DatasetName::Ml1m => "ml1m",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ml100k" | "ml-100k" => Ok(DatasetName::Ml100k),
            "ml1m" | "ml-1m" => Ok(DatasetName::Ml1m),
            other => Err(Error::Config(format!("unknown dataset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    /// Star rating, 1 to 5.
    pub value: u8,
    pub timestamp: u64,
}

impl Rating {
    pub fn value_f64(&self) -> f64 {
        f64::from(self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: u32,
    /// Years for 100K; the bucket code (1, 18, 25, 35, 45, 50, 56) for 1M.
    pub age: u32,
    pub gender: Gender,
    pub occupation: String,
    pub zip_code: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemProfile {
    pub item_id: u32,
    pub title: String,
    pub release_year: Option<u16>,
    pub genres: Vec<String>,
}

/// Ratings plus the user and item side information they refer to.
///
/// Construction goes through [`RatingDataset::new`], which enforces
/// referential integrity and rejects duplicate `(user, item)` pairs.
#[derive(Debug, Clone)]
pub struct RatingDataset {
    pub name: DatasetName,
    pub ratings: Vec<Rating>,
    pub users: BTreeMap<u32, UserProfile>,
    pub items: BTreeMap<u32, ItemProfile>,
    /// Occupation vocabulary in the order the dataset ships it.
    pub occupations: Vec<String>,
    /// Genre vocabulary in the order the dataset ships it.
    pub genres: Vec<String>,
}

impl RatingDataset {
    pub fn new(
        name: DatasetName,
        ratings: Vec<Rating>,
        users: BTreeMap<u32, UserProfile>,
        items: BTreeMap<u32, ItemProfile>,
        occupations: Vec<String>,
        genres: Vec<String>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(ratings.len());
        for r in &ratings {
            if !(1..=5).contains(&r.value) {
                return Err(Error::Config(format!(
                    "rating {} for user {}, item {} is off the 1-5 scale",
                    r.value, r.user, r.item
                )));
            }
            if !users.contains_key(&r.user) {
                return Err(Error::DanglingReference {
                    user: r.user,
                    item: r.item,
                    kind: "user",
                });
            }
            if !items.contains_key(&r.item) {
                return Err(Error::DanglingReference {
                    user: r.user,
                    item: r.item,
                    kind: "item",
                });
            }
            if !seen.insert((r.user, r.item)) {
                return Err(Error::DuplicateRating {
                    user: r.user,
                    item: r.item,
                });
            }
        }
        Ok(Self {
            name,
            ratings,
            users,
            items,
            occupations,
            genres,
        })
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// Ratings at the given indices, in index order.
    pub fn select(&self, indices: &[usize]) -> Vec<Rating> {
        indices.iter().map(|&i| self.ratings[i]).collect()
    }

    pub fn user(&self, id: u32) -> Option<&UserProfile> {
        self.users.get(&id)
    }

    pub fn item(&self, id: u32) -> Option<&ItemProfile> {
        self.items.get(&id)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_pairs() {
        let ds = fixtures::tiny();
        let mut ratings = ds.ratings.clone();
        ratings.push(ratings[0]);
        let err = RatingDataset::new(ds.name, ratings, ds.users, ds.items, ds.occupations, ds.genres).unwrap_err();
        assert!(matches!(err, Error::DuplicateRating { user: 1, item: 10 }));
    }

    #[test]
    fn rejects_dangling_references() {
        let ds = fixtures::tiny();
        let mut ratings = ds.ratings.clone();
        ratings.push(Rating {
            user: 99,
            item: 10,
            value: 3,
            timestamp: 0,
        });
        let err = RatingDataset::new(ds.name, ratings, ds.users, ds.items, ds.occupations, ds.genres).unwrap_err();
        assert!(matches!(err, Error::DanglingReference { kind: "user", .. }));
    }

    #[test]
    fn dataset_names_parse() {
        assert_eq!("ml-100k".parse::<DatasetName>().unwrap(), DatasetName::Ml100k);
        assert_eq!("ML1M".parse::<DatasetName>().unwrap(), DatasetName::Ml1m);
        assert!("ml10m".parse::<DatasetName>().is_err());
    }
}
