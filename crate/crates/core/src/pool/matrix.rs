use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::dataset::Rating;
use crate::error::{Error, Result};

/// A training partition indexed both ways.
///
/// Raw user/item ids are mapped to dense indices in ascending id order, so a
/// lower index always means a lower raw id. Adjacency lists are sorted by the
/// opposite index.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    user_ids: Vec<u32>,
    item_ids: Vec<u32>,
    user_index: HashMap<u32, usize>,
    item_index: HashMap<u32, usize>,
    entries: Vec<(usize, usize, f64)>,
    by_user: Vec<Vec<(usize, f64)>>,
    by_item: Vec<Vec<(usize, f64)>>,
    global_mean: f64,
}

impl RatingMatrix {
    pub fn from_ratings(ratings: &[Rating]) -> Result<Self> {
        Self::from_triples(ratings.iter().map(|r| (r.user, r.item, r.value_f64())))
    }

    /// Build from `(user, item, value)` triples. Insertion order is kept for
    /// [`RatingMatrix::entries`] and the fingerprint.
    pub fn from_triples(triples: impl IntoIterator<Item = (u32, u32, f64)>) -> Result<Self> {
        let raw: Vec<(u32, u32, f64)> = triples.into_iter().collect();
        if raw.is_empty() {
            return Err(Error::Empty("training ratings"));
        }
        let mut user_ids: Vec<u32> = raw.iter().map(|t| t.0).collect();
        let mut item_ids: Vec<u32> = raw.iter().map(|t| t.1).collect();
        user_ids.sort_unstable();
        user_ids.dedup();
        item_ids.sort_unstable();
        item_ids.dedup();
        let user_index: HashMap<u32, usize> = user_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let item_index: HashMap<u32, usize> = item_ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();

        let mut by_user = vec![Vec::new(); user_ids.len()];
        let mut by_item = vec![Vec::new(); item_ids.len()];
        let mut entries = Vec::with_capacity(raw.len());
        let mut sum = 0.0;
        for &(u, i, v) in &raw {
            let (ui, ii) = (user_index[&u], item_index[&i]);
            by_user[ui].push((ii, v));
            by_item[ii].push((ui, v));
            entries.push((ui, ii, v));
            sum += v;
        }
        for list in by_user.iter_mut().chain(by_item.iter_mut()) {
            list.sort_unstable_by_key(|&(k, _)| k);
        }
        for (ui, list) in by_user.iter().enumerate() {
            if let Some(w) = list.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::DuplicateRating {
                    user: user_ids[ui],
                    item: item_ids[w[0].0],
                });
            }
        }
        Ok(Self {
            global_mean: sum / raw.len() as f64,
            user_ids,
            item_ids,
            user_index,
            item_index,
            entries,
            by_user,
            by_item,
        })
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn n_ratings(&self) -> usize {
        self.entries.len()
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn user_index(&self, raw: u32) -> Option<usize> {
        self.user_index.get(&raw).copied()
    }

    pub fn item_index(&self, raw: u32) -> Option<usize> {
        self.item_index.get(&raw).copied()
    }

    pub fn user_id(&self, index: usize) -> u32 {
        self.user_ids[index]
    }

    pub fn item_id(&self, index: usize) -> u32 {
        self.item_ids[index]
    }

    /// `(item index, value)` pairs rated by a user.
    pub fn user_ratings(&self, user: usize) -> &[(usize, f64)] {
        &self.by_user[user]
    }

    /// `(user index, value)` pairs for an item.
    pub fn item_ratings(&self, item: usize) -> &[(usize, f64)] {
        &self.by_item[item]
    }

    /// `(user index, item index, value)` in insertion order.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn user_mean(&self, user: usize) -> f64 {
        mean(&self.by_user[user])
    }

    pub fn item_mean(&self, item: usize) -> f64 {
        mean(&self.by_item[item])
    }

    /// SHA-256 over the raw triples in insertion order (little-endian ids,
    /// value as f64 bits), hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for &(u, i, v) in &self.entries {
            hasher.update(self.user_ids[u].to_le_bytes());
            hasher.update(self.item_ids[i].to_le_bytes());
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

fn mean(list: &[(usize, f64)]) -> f64 {
    list.iter().map(|&(_, v)| v).sum::<f64>() / list.len() as f64
}
