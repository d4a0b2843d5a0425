use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One raw observation before indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTriple {
    pub user: String,
    pub item: String,
    pub rating: f64,
    pub timestamp: Option<i64>,
}

/// An indexed observation `r_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

/// Sparse ratings of one domain. Entries are sorted by `(user, item)` and
/// each pair occurs at most once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsMatrix {
    domain: String,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    entries: Vec<Rating>,
}

impl RatingsMatrix {
    pub fn new(
        domain: impl Into<String>,
        user_ids: Vec<String>,
        item_ids: Vec<String>,
        mut entries: Vec<Rating>,
    ) -> Result<Self> {
        for e in &entries {
            if e.user as usize >= user_ids.len() {
                return Err(Error::OutOfRange {
                    what: "user",
                    index: e.user as usize,
                    size: user_ids.len(),
                });
            }
            if e.item as usize >= item_ids.len() {
                return Err(Error::OutOfRange {
                    what: "item",
                    index: e.item as usize,
                    size: item_ids.len(),
                });
            }
            if !e.value.is_finite() {
                return Err(Error::Config(format!("non-finite rating {}", e.value)));
            }
        }
        entries.sort_by_key(|e| (e.user, e.item));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item))
        {
            return Err(Error::Config(format!(
                "duplicate entry for user {} item {}",
                w[0].user, w[0].item
            )));
        }
        Ok(Self {
            domain: domain.into(),
            user_ids,
            item_ids,
            entries,
        })
    }

    /// Indexes raw triples. Users and items are numbered in sorted id order;
    /// for a repeated `(user, item)` pair the latest timestamp wins, and on
    /// equal timestamps the later record.
    pub fn from_triples(domain: impl Into<String>, triples: &[RatingTriple]) -> Result<Self> {
        let mut latest: HashMap<(&str, &str), (Option<i64>, f64)> = HashMap::new();
        for t in triples {
            let key = (t.user.as_str(), t.item.as_str());
            match latest.get(&key) {
                Some(&(ts, _)) if ts > t.timestamp => {}
                _ => {
                    latest.insert(key, (t.timestamp, t.rating));
                }
            }
        }
        let mut users: Vec<&str> = latest.keys().map(|k| k.0).collect();
        let mut items: Vec<&str> = latest.keys().map(|k| k.1).collect();
        users.sort_unstable();
        users.dedup();
        items.sort_unstable();
        items.dedup();
        let user_pos: HashMap<&str, u32> = users.iter().enumerate().map(|(i, u)| (*u, i as u32)).collect();
        let item_pos: HashMap<&str, u32> = items.iter().enumerate().map(|(i, u)| (*u, i as u32)).collect();
        let entries = latest
            .iter()
            .map(|(&(u, i), &(_, value))| Rating {
                user: user_pos[u],
                item: item_pos[i],
                value,
            })
            .collect();
        Self::new(
            domain,
            users.into_iter().map(String::from).collect(),
            items.into_iter().map(String::from).collect(),
            entries,
        )
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    /// `|Ω|`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn omega(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().map(|e| (e.user, e.item))
    }

    pub fn sparsity(&self) -> f64 {
        let cells = self.n_users() as f64 * self.n_items() as f64;
        if cells == 0.0 {
            1.0
        } else {
            1.0 - self.len() as f64 / cells
        }
    }

    pub fn mean(&self) -> Option<f64> {
        if self.is_empty() {
            None
        } else {
            Some(self.entries.iter().map(|e| e.value).sum::<f64>() / self.len() as f64)
        }
    }

    pub fn user_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_users()];
        for e in &self.entries {
            counts[e.user as usize] += 1;
        }
        counts
    }

    pub fn item_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_items()];
        for e in &self.entries {
            counts[e.item as usize] += 1;
        }
        counts
    }

    /// `[start, end)` ranges of each user's entries.
    pub fn user_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut ranges = vec![0..0; self.n_users()];
        let mut start = 0;
        while start < self.entries.len() {
            let u = self.entries[start].user;
            let mut end = start;
            while end < self.entries.len() && self.entries[end].user == u {
                end += 1;
            }
            ranges[u as usize] = start..end;
            start = end;
        }
        ranges
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_ids.iter().position(|u| u == id)
    }

    /// Same index spaces, restricted to the given entry positions.
    pub fn subset(&self, positions: &[usize]) -> Result<Self> {
        let entries = positions
            .iter()
            .map(|&p| {
                self.entries.get(p).copied().ok_or(Error::OutOfRange {
                    what: "entry",
                    index: p,
                    size: self.entries.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            self.domain.clone(),
            self.user_ids.clone(),
            self.item_ids.clone(),
            entries,
        )
    }

    /// Drops users and items without entries and renumbers the rest,
    /// preserving order.
    pub fn compact(&self) -> Self {
        let keep_users: Vec<bool> = self.user_counts().iter().map(|&c| c > 0).collect();
        let keep_items: Vec<bool> = self.item_counts().iter().map(|&c| c > 0).collect();
        let (user_ids, user_map) = renumber(&self.user_ids, &keep_users);
        let (item_ids, item_map) = renumber(&self.item_ids, &keep_items);
        let entries = self
            .entries
            .iter()
            .map(|e| Rating {
                user: user_map[e.user as usize],
                item: item_map[e.item as usize],
                value: e.value,
            })
            .collect();
        Self {
            domain: self.domain.clone(),
            user_ids,
            item_ids,
            entries,
        }
    }

    /// Keeps only the users whose id is in `keep`, then compacts.
    pub fn restrict_users(&self, keep: &std::collections::BTreeSet<String>) -> Self {
        let entries: Vec<Rating> = self
            .entries
            .iter()
            .filter(|e| keep.contains(&self.user_ids[e.user as usize]))
            .copied()
            .collect();
        Self {
            domain: self.domain.clone(),
            user_ids: self.user_ids.clone(),
            item_ids: self.item_ids.clone(),
            entries,
        }
        .compact()
    }

    /// Re-expresses the matrix over another user index, e.g. the shared
    /// index of a [`UserAlignment`](super::UserAlignment). Every user with
    /// entries must exist in `user_ids`.
    pub fn reindex_users(&self, user_ids: &[String]) -> Result<Self> {
        let pos: HashMap<&str, u32> = user_ids
            .iter()
            .enumerate()
            .map(|(i, u)| (u.as_str(), i as u32))
            .collect();
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let id = &self.user_ids[e.user as usize];
                pos.get(id.as_str())
                    .map(|&user| Rating { user, ..*e })
                    .ok_or_else(|| Error::Config(format!("user {id:?} missing from the target index")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.domain.clone(), user_ids.to_vec(), self.item_ids.clone(), entries)
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = domain.into();
        self
    }
}

fn renumber(ids: &[String], keep: &[bool]) -> (Vec<String>, Vec<u32>) {
    let mut out = Vec::new();
    let mut map = vec![u32::MAX; ids.len()];
    for (i, id) in ids.iter().enumerate() {
        if keep[i] {
            map[i] = out.len() as u32;
            out.push(id.clone());
        }
    }
    (out, map)
}

/// Removes users with fewer than `min_count` ratings.
///
/// Dropping a user only removes that user's rows, so a single pass already
/// reaches the fixed point. Items left without ratings are dropped too.
pub fn filter_min_ratings(matrix: &RatingsMatrix, min_count: usize) -> Result<RatingsMatrix> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let counts = matrix.user_counts();
    let entries: Vec<Rating> = matrix
        .entries()
        .iter()
        .filter(|e| counts[e.user as usize] >= min_count)
        .copied()
        .collect();
    if entries.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no user in {:?} has at least {min_count} ratings",
            matrix.domain()
        )));
    }
    Ok(RatingsMatrix {
        domain: matrix.domain.clone(),
        user_ids: matrix.user_ids.clone(),
        item_ids: matrix.item_ids.clone(),
        entries,
    }
    .compact())
}

/// Summary row for a domain, in the layout of a dataset statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainStats {
    pub domain: String,
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub sparsity: f64,
}

pub fn domain_stats(matrices: &BTreeMap<String, RatingsMatrix>) -> Vec<DomainStats> {
    matrices
        .values()
        .map(|m| {
            let c = m.compact();
            DomainStats {
                domain: m.domain().to_string(),
                users: c.n_users(),
                items: c.n_items(),
                ratings: c.len(),
                sparsity: c.sparsity(),
            }
        })
        .collect()
}
