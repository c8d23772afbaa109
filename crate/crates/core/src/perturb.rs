//! Target selection and the three minimal training-data edits.
//!
//! Random target variants draw from a ChaCha8 generator seeded with the
//! strategy seed on the target-selection stream (see [`crate::rng`]); item
//! choice for replacement and insertion uses the item-selection stream of
//! the same seed.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Interaction, PopularityIndex, SEQ_STRIDE};
use crate::idag::{select_targets, CascadeScores, Idag};
use crate::rng::{seeded, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Loo,
    Replace,
    Insert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStrategy {
    #[default]
    Random,
    Popular,
    Unpopular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetVariant {
    #[default]
    Random,
    EarliestRandom,
    LatestRandom,
    Casper,
}

impl TargetVariant {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "random" => Some(Self::Random),
            "earliest_random" | "earliest-random" => Some(Self::EarliestRandom),
            "latest_random" | "latest-random" => Some(Self::LatestRandom),
            "casper" => Some(Self::Casper),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::EarliestRandom => "earliest_random",
            Self::LatestRandom => "latest_random",
            Self::Casper => "casper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetStrategy {
    pub variant: TargetVariant,
    pub k: usize,
    pub seed: u64,
}

/// One concrete edit of a training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: EditKind,
    /// `seq_index` of the targeted training interaction.
    pub target: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_item: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_strategy: Option<ItemStrategy>,
}

/// Experiment-level description of which edits to make.
///
/// A missing `kind` means no edit at all. When `seed` is absent, the run
/// seed drives target and item selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub kind: Option<EditKind>,
    #[serde(default)]
    pub strategy: TargetVariant,
    #[serde(default)]
    pub item_strategy: ItemStrategy,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn one() -> usize {
    1
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            kind: Some(EditKind::Loo),
            strategy: TargetVariant::Random,
            item_strategy: ItemStrategy::Random,
            k: 1,
            seed: None,
        }
    }
}

fn candidate_pool(train: &Dataset, variant: TargetVariant) -> Vec<usize> {
    match variant {
        TargetVariant::Random => (0..train.len()).collect(),
        TargetVariant::EarliestRandom => train
            .user_sequences()
            .iter()
            .filter_map(|s| s.first().map(|&p| p as usize))
            .collect(),
        TargetVariant::LatestRandom => train
            .user_sequences()
            .iter()
            .filter_map(|s| s.last().map(|&p| p as usize))
            .collect(),
        TargetVariant::Casper => Vec::new(),
    }
}

/// Picks `k` training interactions (returned as `seq_index` values).
pub fn choose_targets(
    train: &Dataset,
    strategy: &TargetStrategy,
    casper: Option<(&Idag, &CascadeScores)>,
) -> Result<Vec<u64>> {
    if strategy.k == 0 {
        return Err(Error::Validation("target count k must be >= 1".into()));
    }
    if strategy.variant == TargetVariant::Casper {
        let (g, scores) = casper.ok_or_else(|| {
            Error::Contract("the casper strategy needs a DAG and its cascading scores".into())
        })?;
        let nodes = select_targets(g, scores, strategy.k)?;
        return Ok(nodes.into_iter().map(|n| g.seq_index(n)).collect());
    }
    let pool = candidate_pool(train, strategy.variant);
    if pool.len() < strategy.k {
        return Err(Error::Validation(format!(
            "{} pool has {} interactions, fewer than k={}",
            strategy.variant.name(),
            pool.len(),
            strategy.k
        )));
    }
    let mut rng = seeded(strategy.seed, Stream::TargetSelection);
    Ok(index::sample(&mut rng, pool.len(), strategy.k)
        .into_iter()
        .map(|i| train.get(pool[i]).seq_index)
        .collect())
}

/// Picks a replacement or inserted item outside `exclude`.
pub fn choose_item<R: Rng + ?Sized>(
    pop: &PopularityIndex,
    strategy: ItemStrategy,
    exclude: &[u32],
    rng: &mut R,
) -> Result<u32> {
    let allowed = |i: &u32| !exclude.contains(i);
    let none = || Error::Validation("every item is excluded".into());
    match strategy {
        ItemStrategy::Popular => pop.order.iter().copied().find(allowed).ok_or_else(none),
        ItemStrategy::Unpopular => {
            let min = pop
                .order
                .iter()
                .filter(|i| allowed(i))
                .map(|&i| pop.counts[i as usize])
                .min()
                .ok_or_else(none)?;
            (0..pop.counts.len() as u32)
                .find(|i| allowed(i) && pop.counts[*i as usize] == min)
                .ok_or_else(none)
        }
        ItemStrategy::Random => {
            let candidates: Vec<u32> = (0..pop.counts.len() as u32).filter(allowed).collect();
            if candidates.is_empty() {
                return Err(none());
            }
            Ok(candidates[rng.random_range(0..candidates.len())])
        }
    }
}

/// Turns a spec into concrete edits against `train`.
pub fn plan_perturbations(
    train: &Dataset,
    spec: &PerturbationSpec,
    seed: u64,
    pop: &PopularityIndex,
    casper: Option<(&Idag, &CascadeScores)>,
) -> Result<Vec<Perturbation>> {
    let Some(kind) = spec.kind else {
        return Ok(Vec::new());
    };
    let seed = spec.seed.unwrap_or(seed);
    let strategy = TargetStrategy {
        variant: spec.strategy,
        k: spec.k,
        seed,
    };
    let targets = choose_targets(train, &strategy, casper)?;
    let mut item_rng = seeded(seed, Stream::ItemSelection);
    targets
        .into_iter()
        .map(|target| {
            let (new_item, item_strategy) = match kind {
                EditKind::Loo => (None, None),
                EditKind::Replace | EditKind::Insert => {
                    let pos = train
                        .position_of(target)
                        .ok_or_else(|| Error::Contract(format!("unknown target {target}")))?;
                    let original = train.get(pos).item;
                    let item = choose_item(pop, spec.item_strategy, &[original], &mut item_rng)?;
                    (Some(item), Some(spec.item_strategy))
                }
            };
            Ok(Perturbation {
                kind,
                target,
                new_item,
                item_strategy,
            })
        })
        .collect()
}

/// Applies one edit, returning a new dataset over the same id universe.
///
/// Inserted rows take the target's user and timestamp and a `seq_index`
/// just above the target's, so they sort immediately after it. The gap is
/// half the distance to the next larger `seq_index` (at most half of
/// [`SEQ_STRIDE`]); inserting fails once no gap is left.
pub fn apply(train: &Dataset, p: &Perturbation) -> Result<Dataset> {
    let pos = train
        .position_of(p.target)
        .ok_or_else(|| Error::Contract(format!("unknown target interaction {}", p.target)))?;
    let target = *train.get(pos);
    let mut rows: Vec<Interaction> = train.interactions().to_vec();
    let new_item = |what: &str| {
        let item = p
            .new_item
            .ok_or_else(|| Error::Contract(format!("{what} needs a new item")))?;
        if item as usize >= train.n_items() {
            return Err(Error::Contract(format!("item {item} outside the universe")));
        }
        Ok(item)
    };
    match p.kind {
        EditKind::Loo => {
            rows.remove(pos);
        }
        EditKind::Replace => {
            let item = new_item("replacement")?;
            if item == target.item {
                return Err(Error::Validation(format!(
                    "replacement item {item} equals the original item"
                )));
            }
            rows[pos].item = item;
        }
        EditKind::Insert => {
            let item = new_item("insertion")?;
            let next_seq = rows
                .iter()
                .map(|x| x.seq_index)
                .filter(|&s| s > target.seq_index)
                .min()
                .unwrap_or(u64::MAX);
            let gap = (next_seq - target.seq_index).min(SEQ_STRIDE);
            if gap < 2 {
                return Err(Error::Validation(format!(
                    "no seq_index room to insert after {}",
                    target.seq_index
                )));
            }
            rows.insert(
                pos + 1,
                Interaction {
                    item,
                    seq_index: target.seq_index + gap / 2,
                    ..target
                },
            );
        }
    }
    Ok(Dataset::new(rows, train.n_users(), train.n_items())?.with_ids(train.ids().cloned()))
}

pub fn apply_all(train: &Dataset, edits: &[Perturbation]) -> Result<Dataset> {
    edits.iter().try_fold(train.clone(), |ds, p| apply(&ds, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::item_popularity;

    fn ds(rows: &[(u32, u32)]) -> Dataset {
        let n_users = rows.iter().map(|r| r.0).max().unwrap() as usize + 1;
        let n_items = rows.iter().map(|r| r.1).max().unwrap() as usize + 2;
        let rows = rows
            .iter()
            .enumerate()
            .map(|(k, &(user, item))| Interaction {
                user,
                item,
                timestamp: k as f64,
                seq_index: k as u64 * SEQ_STRIDE,
            })
            .collect();
        Dataset::new(rows, n_users, n_items).unwrap()
    }

    fn three_users() -> Dataset {
        ds(&[(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0), (0, 2), (1, 0), (2, 1), (0, 3)])
    }

    #[test]
    fn earliest_and_latest_pools() {
        let train = three_users();
        let firsts: Vec<u64> = (0..3).map(|u| train.get(train.user_sequence(u)[0] as usize).seq_index).collect();
        let lasts: Vec<u64> = (0..3)
            .map(|u| train.get(*train.user_sequence(u).last().unwrap() as usize).seq_index)
            .collect();
        for seed in 0..20 {
            let s = TargetStrategy {
                variant: TargetVariant::EarliestRandom,
                k: 1,
                seed,
            };
            let t = choose_targets(&train, &s, None).unwrap();
            assert!(firsts.contains(&t[0]));
            assert_eq!(t, choose_targets(&train, &s, None).unwrap());
            let s = TargetStrategy {
                variant: TargetVariant::LatestRandom,
                ..s
            };
            assert!(lasts.contains(&choose_targets(&train, &s, None).unwrap()[0]));
        }
        let all = TargetStrategy {
            variant: TargetVariant::LatestRandom,
            k: 3,
            seed: 1,
        };
        let mut got = choose_targets(&train, &all, None).unwrap();
        got.sort();
        let mut want = lasts.clone();
        want.sort();
        assert_eq!(got, want);
        assert!(choose_targets(&train, &TargetStrategy { k: 4, ..all }, None).is_err());
        let casper = TargetStrategy {
            variant: TargetVariant::Casper,
            k: 1,
            seed: 0,
        };
        assert!(choose_targets(&train, &casper, None).is_err());
    }

    #[test]
    fn item_choice() {
        // a=0 occurs 5 times, b=1 once
        let train = ds(&[(0, 0), (0, 0), (0, 0), (0, 0), (0, 0), (0, 1)]);
        let pop = item_popularity(&train).unwrap();
        let pop = PopularityIndex {
            counts: pop.counts[..2].to_vec(),
            order: vec![0, 1],
        };
        let mut rng = seeded(0, Stream::ItemSelection);
        assert_eq!(choose_item(&pop, ItemStrategy::Popular, &[], &mut rng).unwrap(), 0);
        assert_eq!(choose_item(&pop, ItemStrategy::Unpopular, &[], &mut rng).unwrap(), 1);
        assert_eq!(choose_item(&pop, ItemStrategy::Unpopular, &[1], &mut rng).unwrap(), 0);
        assert!(choose_item(&pop, ItemStrategy::Random, &[0, 1], &mut rng).is_err());
        let a = choose_item(&pop, ItemStrategy::Random, &[], &mut seeded(9, Stream::ItemSelection)).unwrap();
        let b = choose_item(&pop, ItemStrategy::Random, &[], &mut seeded(9, Stream::ItemSelection)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unpopular_tie_takes_lowest_id() {
        let pop = PopularityIndex {
            counts: vec![3, 1, 1],
            order: vec![0, 1, 2],
        };
        let mut rng = seeded(0, Stream::ItemSelection);
        assert_eq!(choose_item(&pop, ItemStrategy::Unpopular, &[], &mut rng).unwrap(), 1);
    }

    #[test]
    fn leave_one_out() {
        let train = three_users();
        let target = train.get(4).seq_index;
        let out = apply(
            &train,
            &Perturbation {
                kind: EditKind::Loo,
                target,
                new_item: None,
                item_strategy: None,
            },
        )
        .unwrap();
        assert_eq!(out.len(), 9);
        let kept: Vec<_> = train.interactions().iter().filter(|x| x.seq_index != target).copied().collect();
        assert_eq!(out.interactions(), &kept[..]);
    }

    #[test]
    fn replace_updates_item_sequences() {
        let train = three_users();
        let target = *train.get(0); // (0, item 0)
        let out = apply(
            &train,
            &Perturbation {
                kind: EditKind::Replace,
                target: target.seq_index,
                new_item: Some(4),
                item_strategy: None,
            },
        )
        .unwrap();
        assert_eq!(out.user_sequence(0).len(), train.user_sequence(0).len());
        assert_eq!(out.item_sequence(0).len(), train.item_sequence(0).len() - 1);
        assert_eq!(out.item_sequence(4).len(), train.item_sequence(4).len() + 1);
        assert_eq!(out.get(0).timestamp, target.timestamp);

        let same = Perturbation {
            kind: EditKind::Replace,
            target: target.seq_index,
            new_item: Some(0),
            item_strategy: None,
        };
        assert!(apply(&train, &same).is_err());
        let missing = Perturbation {
            target: 12345,
            ..same
        };
        assert!(apply(&train, &missing).is_err());
    }

    #[test]
    fn insert_lands_right_after_target() {
        let train = three_users();
        let target = *train.get(3); // user 0, second event
        let out = apply(
            &train,
            &Perturbation {
                kind: EditKind::Insert,
                target: target.seq_index,
                new_item: Some(4),
                item_strategy: None,
            },
        )
        .unwrap();
        assert_eq!(out.len(), 11);
        let inserted = out.get(4);
        assert_eq!((inserted.user, inserted.item, inserted.timestamp), (0, 4, target.timestamp));
        assert_eq!(out.user_sequence(0).len(), train.user_sequence(0).len() + 1);
        assert_eq!(out.user_sequence(0)[2], 4);
    }
}
