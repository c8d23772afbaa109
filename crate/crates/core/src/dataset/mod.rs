//! Interaction logs.
//!
//! A [`Dataset`] is an immutable, globally time-ordered list of
//! [`Interaction`]s together with per-user and per-item sequences of
//! positions into that list. User and item ids are dense (`0..n_users`,
//! `0..n_items`) and the universe sizes are carried along even when some
//! ids have no interactions, so that a train set, its test set, and any
//! perturbed copy share one id space.

mod load;
mod synth;

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use load::{load_interactions, write_id_map, ColumnSpec, Delimiter, LoadOptions};
pub use synth::{synth_generate, synth_generate_with_chains, SynthConfig, SynthOutput};

/// Gap between the `seq_index` values assigned at ingestion. Leaves room for
/// inserted rows to sit between two existing ones.
pub const SEQ_STRIDE: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub timestamp: f64,
    /// Stable identity of the row and tie-breaker for equal timestamps.
    pub seq_index: u64,
}

impl Interaction {
    /// Total order used everywhere: timestamp, then `seq_index`.
    pub fn order(&self, other: &Self) -> Ordering {
        self.timestamp
            .total_cmp(&other.timestamp)
            .then(self.seq_index.cmp(&other.seq_index))
    }
}

/// Dense id to original id tables, kept for reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMaps {
    pub users: Vec<String>,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    interactions: Vec<Interaction>,
    user_seqs: Vec<Vec<u32>>,
    item_seqs: Vec<Vec<u32>>,
    n_users: usize,
    n_items: usize,
    ids: Option<Arc<IdMaps>>,
}

impl Dataset {
    /// Builds a dataset over the universe `n_users` x `n_items`, sorting the
    /// rows by (timestamp, seq_index).
    pub fn new(mut interactions: Vec<Interaction>, n_users: usize, n_items: usize) -> Result<Self> {
        for x in &interactions {
            if !x.timestamp.is_finite() || x.timestamp < 0.0 {
                return Err(Error::Validation(format!(
                    "interaction {} has invalid timestamp {}",
                    x.seq_index, x.timestamp
                )));
            }
            if x.user as usize >= n_users || x.item as usize >= n_items {
                return Err(Error::Validation(format!(
                    "interaction {} references user {} / item {} outside a {}x{} universe",
                    x.seq_index, x.user, x.item, n_users, n_items
                )));
            }
        }
        interactions.sort_by(Interaction::order);
        let mut seqs: Vec<u64> = interactions.iter().map(|x| x.seq_index).collect();
        seqs.sort_unstable();
        if seqs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("duplicate seq_index".into()));
        }

        let mut user_seqs = vec![Vec::new(); n_users];
        let mut item_seqs = vec![Vec::new(); n_items];
        for (pos, x) in interactions.iter().enumerate() {
            user_seqs[x.user as usize].push(pos as u32);
            item_seqs[x.item as usize].push(pos as u32);
        }
        Ok(Self {
            interactions,
            user_seqs,
            item_seqs,
            n_users,
            n_items,
            ids: None,
        })
    }

    pub fn with_ids(mut self, ids: Option<Arc<IdMaps>>) -> Self {
        self.ids = ids;
        self
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn ids(&self) -> Option<&Arc<IdMaps>> {
        self.ids.as_ref()
    }

    /// Positions (into [`Dataset::interactions`]) of a user's rows, in order.
    pub fn user_sequence(&self, user: u32) -> &[u32] {
        &self.user_seqs[user as usize]
    }

    pub fn item_sequence(&self, item: u32) -> &[u32] {
        &self.item_seqs[item as usize]
    }

    pub fn user_sequences(&self) -> &[Vec<u32>] {
        &self.user_seqs
    }

    pub fn item_sequences(&self) -> &[Vec<u32>] {
        &self.item_seqs
    }

    pub fn get(&self, pos: usize) -> &Interaction {
        &self.interactions[pos]
    }

    /// Position of the row with the given `seq_index`.
    pub fn position_of(&self, seq_index: u64) -> Option<usize> {
        self.interactions.iter().position(|x| x.seq_index == seq_index)
    }

    /// Serializes the rows as `user,item,timestamp,seq_index` CSV; handy for
    /// byte-level comparisons and for feeding the log to other tools.
    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut out = b"user,item,timestamp,seq_index\n".to_vec();
        for x in &self.interactions {
            out.extend_from_slice(
                format!("{},{},{},{}\n", x.user, x.item, x.timestamp, x.seq_index).as_bytes(),
            );
        }
        out
    }
}

/// Per-user chronological split into train and test parts.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub frac: f64,
}

/// Keeps users with at least `min_count` interactions, drops items left
/// without interactions, and re-densifies both id spaces in ascending order
/// of the previous dense ids.
pub fn filter_min_activity(ds: &Dataset, min_count: usize) -> Result<Dataset> {
    if min_count < 1 {
        return Err(Error::Contract("min_count must be >= 1".into()));
    }
    let mut user_map = vec![u32::MAX; ds.n_users];
    let mut next = 0u32;
    for (u, seq) in ds.user_seqs.iter().enumerate() {
        if seq.len() >= min_count {
            user_map[u] = next;
            next += 1;
        }
    }
    let n_users = next as usize;
    if n_users == 0 {
        return Err(Error::Empty("no users survive filter".into()));
    }

    let mut item_used = vec![false; ds.n_items];
    for x in &ds.interactions {
        if user_map[x.user as usize] != u32::MAX {
            item_used[x.item as usize] = true;
        }
    }
    let mut item_map = vec![u32::MAX; ds.n_items];
    let mut n_items = 0u32;
    for (i, used) in item_used.iter().enumerate() {
        if *used {
            item_map[i] = n_items;
            n_items += 1;
        }
    }

    let rows = ds
        .interactions
        .iter()
        .filter(|x| user_map[x.user as usize] != u32::MAX)
        .map(|x| Interaction {
            user: user_map[x.user as usize],
            item: item_map[x.item as usize],
            ..*x
        })
        .collect();
    let ids = ds.ids.as_ref().map(|ids| {
        Arc::new(IdMaps {
            users: keep_mapped(&ids.users, &user_map),
            items: keep_mapped(&ids.items, &item_map),
        })
    });
    Ok(Dataset::new(rows, n_users, n_items as usize)?.with_ids(ids))
}

fn keep_mapped(names: &[String], map: &[u32]) -> Vec<String> {
    names
        .iter()
        .zip(map)
        .filter(|(_, m)| **m != u32::MAX)
        .map(|(n, _)| n.clone())
        .collect()
}

/// Number of leading interactions of an `n`-long user sequence that go to
/// training. The small epsilon keeps products such as `0.29 * 100` from
/// flooring one below the exact value.
pub fn train_prefix_len(n: usize, frac: f64) -> usize {
    ((frac * n as f64) + 1e-9).floor() as usize
}

/// Sends the first `floor(frac * n)` interactions of every user to train and
/// the rest to test.
pub fn temporal_split(ds: &Dataset, frac: f64) -> Result<TemporalSplit> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::Contract(format!("split fraction {frac} outside (0, 1)")));
    }
    if ds.is_empty() {
        return Err(Error::Empty("cannot split an empty dataset".into()));
    }
    let mut in_train = vec![false; ds.len()];
    for (u, seq) in ds.user_seqs.iter().enumerate() {
        if seq.is_empty() {
            continue;
        }
        if seq.len() < 2 {
            return Err(Error::Validation(format!(
                "user {u} has {} interaction(s); at least 2 are needed to split (filter first)",
                seq.len()
            )));
        }
        let n_train = train_prefix_len(seq.len(), frac).min(seq.len() - 1);
        for &pos in &seq[..n_train] {
            in_train[pos as usize] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = ds
        .interactions
        .iter()
        .zip(&in_train)
        .partition(|(_, t)| **t);
    let strip = |v: Vec<(&Interaction, &bool)>| v.into_iter().map(|(x, _)| *x).collect::<Vec<_>>();
    Ok(TemporalSplit {
        train: Dataset::new(strip(train), ds.n_users, ds.n_items)?.with_ids(ds.ids.clone()),
        test: Dataset::new(strip(test), ds.n_users, ds.n_items)?.with_ids(ds.ids.clone()),
        frac,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopularityIndex {
    /// Occurrences in the training data, indexed by dense item id.
    pub counts: Vec<u64>,
    /// All item ids of the universe by (count desc, id asc).
    pub order: Vec<u32>,
}

impl PopularityIndex {
    pub fn most_popular(&self) -> u32 {
        self.order[0]
    }

    pub fn least_popular(&self) -> u32 {
        *self.order.last().expect("non-empty universe")
    }
}

pub fn item_popularity(train: &Dataset) -> Result<PopularityIndex> {
    if train.is_empty() {
        return Err(Error::Empty("popularity of an empty dataset".into()));
    }
    let counts: Vec<u64> = train.item_seqs.iter().map(|s| s.len() as u64).collect();
    let mut order: Vec<u32> = (0..train.n_items as u32).collect();
    order.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
    Ok(PopularityIndex { counts, order })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(user: u32, item: u32, t: f64, seq: u64) -> Interaction {
        Interaction {
            user,
            item,
            timestamp: t,
            seq_index: seq,
        }
    }

    fn user_with(n: usize, user: u32, start_seq: u64) -> Vec<Interaction> {
        (0..n)
            .map(|k| row(user, (k % 3) as u32, k as f64, start_seq + k as u64))
            .collect()
    }

    #[test]
    fn filter_keeps_active_users_only() {
        let mut rows = user_with(12, 0, 0);
        rows.extend(user_with(3, 1, 100));
        let ds = Dataset::new(rows, 2, 3).unwrap();
        let out = filter_min_activity(&ds, 10).unwrap();
        assert_eq!(out.n_users(), 1);
        assert_eq!(out.len(), 12);
    }

    #[test]
    fn filter_with_min_one_is_identity() {
        let mut rows = user_with(4, 0, 0);
        rows.extend(user_with(2, 1, 100));
        let ds = Dataset::new(rows, 2, 3).unwrap();
        assert_eq!(filter_min_activity(&ds, 1).unwrap(), ds);
    }

    #[test]
    fn filter_rejects_empty_result() {
        let ds = Dataset::new(user_with(3, 0, 0), 1, 3).unwrap();
        let err = filter_min_activity(&ds, 10).unwrap_err();
        assert!(err.to_string().contains("no users survive filter"));
    }

    #[test]
    fn filter_redensifies_items() {
        // item 1 only used by the dropped user
        let rows = vec![
            row(0, 0, 0.0, 0),
            row(0, 2, 1.0, 1),
            row(1, 1, 2.0, 2),
        ];
        let ds = Dataset::new(rows, 2, 3).unwrap();
        let out = filter_min_activity(&ds, 2).unwrap();
        assert_eq!(out.n_items(), 2);
        let items: Vec<u32> = out.interactions().iter().map(|x| x.item).collect();
        assert_eq!(items, vec![0, 1]);
    }

    #[test]
    fn split_floor_arithmetic() {
        for (n, frac, train) in [(10, 0.9, 9), (11, 0.9, 9), (2, 0.5, 1)] {
            let ds = Dataset::new(user_with(n, 0, 0), 1, 3).unwrap();
            let s = temporal_split(&ds, frac).unwrap();
            assert_eq!(s.train.len(), train, "n={n}");
            assert_eq!(s.test.len(), n - train, "n={n}");
        }
    }

    #[test]
    fn split_rejects_single_interaction_user() {
        let mut rows = user_with(5, 0, 0);
        rows.push(row(1, 0, 3.0, 99));
        let ds = Dataset::new(rows, 2, 3).unwrap();
        assert!(matches!(temporal_split(&ds, 0.9), Err(Error::Validation(_))));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let ds = Dataset::new(user_with(5, 0, 0), 1, 3).unwrap();
        assert!(temporal_split(&ds, 1.0).is_err());
        assert!(temporal_split(&ds, 0.0).is_err());
    }

    #[test]
    fn popularity_order_ties_by_id() {
        // a=0:3, b=1:1, c=2:3
        let items = [0, 2, 0, 1, 2, 0, 2];
        let rows = items
            .iter()
            .enumerate()
            .map(|(k, &i)| row(0, i, k as f64, k as u64))
            .collect();
        let pop = item_popularity(&Dataset::new(rows, 1, 3).unwrap()).unwrap();
        assert_eq!(pop.order, vec![0, 2, 1]);
        assert_eq!(pop.counts, vec![3, 1, 3]);
    }

    #[test]
    fn popularity_single_item() {
        let ds = Dataset::new(user_with(1, 0, 0), 1, 1).unwrap();
        let pop = item_popularity(&ds).unwrap();
        assert_eq!(pop.most_popular(), 0);
        assert_eq!(pop.least_popular(), 0);
    }

    #[test]
    fn rejects_negative_timestamp_and_duplicate_seq() {
        assert!(Dataset::new(vec![row(0, 0, -1.0, 0)], 1, 1).is_err());
        assert!(Dataset::new(vec![row(0, 0, 1.0, 0), row(0, 0, 2.0, 0)], 1, 1).is_err());
    }
}
