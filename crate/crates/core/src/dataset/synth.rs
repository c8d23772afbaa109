//! Seeded synthetic interaction logs.
//!
//! Each user walks a private first-order Markov chain over the items. The
//! chains share a clustered base chain (see [`base_row`]) and a user's
//! row out of `i` is drawn from `Dirichlet(concentration * n_items * b + FLOOR)`
//! the first time the walk leaves `i`. Large `concentration` keeps every
//! user close to the base chain (strong shared structure); small values give
//! idiosyncratic, noisy rows. Users take turns according
//! to a seeded shuffle of all event slots; the slot position is the
//! timestamp, so timestamps are distinct integers, increasing within each
//! user and interleaved across users.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use super::{Dataset, Interaction, SEQ_STRIDE};
use crate::rng::{seeded, seeded_member, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub events_per_user: usize,
    #[serde(default = "default_order")]
    pub markov_order: usize,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
}

/// Relative weight of transitions that leave the current cluster.
const LEAK: f64 = 0.02;
/// Keeps every Dirichlet shape positive.
const FLOOR: f64 = 1e-3;

fn default_order() -> usize {
    1
}

fn default_concentration() -> f64 {
    5.0
}

impl Default for SynthConfig {
    /// The standard desk-scale benchmark: 200 users x 100 items, 100 events
    /// per user.
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 100,
            events_per_user: 100,
            markov_order: 1,
            concentration: default_concentration(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 || self.events_per_user == 0 {
            return Err(Error::Validation(
                "synthetic config counts must all be >= 1".into(),
            ));
        }
        if self.markov_order != 1 {
            return Err(Error::Validation(format!(
                "only first-order chains are supported (got order {})",
                self.markov_order
            )));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(Error::Validation("concentration must be positive".into()));
        }
        Ok(())
    }
}

/// A generated log together with the transition rows that produced it.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    /// `chains[user][from]` is the transition row out of `from`, if the walk
    /// ever left that item.
    pub chains: Vec<Vec<Option<Vec<f64>>>>,
}

pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<Dataset> {
    synth_generate_with_chains(cfg, seed).map(|o| o.dataset)
}

pub fn synth_generate_with_chains(cfg: &SynthConfig, seed: u64) -> Result<SynthOutput> {
    cfg.validate()?;
    let total = cfg.n_users * cfg.events_per_user;
    let mut slots: Vec<u32> = (0..cfg.n_users as u32)
        .flat_map(|u| std::iter::repeat_n(u, cfg.events_per_user))
        .collect();
    slots.shuffle(&mut seeded(seed, Stream::SynthSchedule));

    let mut base: Vec<Option<Vec<f64>>> = vec![None; cfg.n_items];

    let mut chains: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; cfg.n_items]; cfg.n_users];
    let mut items_by_user: Vec<Vec<u32>> = Vec::with_capacity(cfg.n_users);
    for (u, chain) in chains.iter_mut().enumerate() {
        let mut rng = seeded_member(seed, Stream::SynthChains, u as u64);
        let mut cumulative: Vec<Option<Vec<f64>>> = vec![None; cfg.n_items];
        let mut walk = Vec::with_capacity(cfg.events_per_user);
        let mut current = rng.random_range(0..cfg.n_items) as u32;
        walk.push(current);
        for _ in 1..cfg.events_per_user {
            let from = current as usize;
            if cumulative[from].is_none() {
                let b = base[from].get_or_insert_with(|| {
                    let mut brng = seeded_member(seed, Stream::SynthBase, from as u64);
                    base_row(from, cfg.n_items, &mut brng)
                });
                let scale = cfg.concentration * cfg.n_items as f64;
                let shapes: Vec<f64> = b.iter().map(|w| scale * w + FLOOR).collect();
                let row = sample_row(&shapes, &mut rng);
                let mut acc = 0.0;
                cumulative[from] = Some(
                    row.iter()
                        .map(|w| {
                            acc += w;
                            acc
                        })
                        .collect(),
                );
                chain[from] = Some(row);
            }
            let cum = cumulative[from].as_ref().expect("row sampled above");
            let draw: f64 = rng.random::<f64>() * cum[cum.len() - 1];
            let next = cum.partition_point(|&c| c <= draw).min(cfg.n_items - 1);
            current = next as u32;
            walk.push(current);
        }
        items_by_user.push(walk);
    }

    let mut cursor = vec![0usize; cfg.n_users];
    let mut rows = Vec::with_capacity(total);
    for (pos, &u) in slots.iter().enumerate() {
        let k = cursor[u as usize];
        cursor[u as usize] += 1;
        rows.push(Interaction {
            user: u,
            item: items_by_user[u as usize][k],
            timestamp: pos as f64,
            seq_index: pos as u64 * SEQ_STRIDE,
        });
    }
    Ok(SynthOutput {
        dataset: Dataset::new(rows, cfg.n_users, cfg.n_items)?,
        chains,
    })
}

/// Items fall into `ceil(sqrt(n))` clusters by `item % clusters`. The base
/// row out of `from` puts i.i.d. exponential weights on its own cluster and
/// `LEAK` times that elsewhere.
fn base_row<R: Rng>(from: usize, n: usize, rng: &mut R) -> Vec<f64> {
    let clusters = (n as f64).sqrt().ceil() as usize;
    let weights: Vec<f64> = (0..n)
        .map(|j| {
            let w: f64 = Exp1.sample(rng);
            if j % clusters == from % clusters { w } else { LEAK * w }
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / sum).collect()
}

/// One Dirichlet draw via normalized Gamma variates.
fn sample_row<R: Rng>(shapes: &[f64], rng: &mut R) -> Vec<f64> {
    let n = shapes.len();
    let mut row: Vec<f64> = shapes
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let sum: f64 = row.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        row.iter_mut().for_each(|w| *w /= sum);
    } else {
        // every weight underflowed; put all mass on one item
        row.iter_mut().for_each(|w| *w = 0.0);
        row[rng.random_range(0..n)] = 1.0;
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bytes() {
        let cfg = SynthConfig {
            n_users: 2,
            n_items: 3,
            events_per_user: 5,
            ..SynthConfig::default()
        };
        let a = synth_generate(&cfg, 7).unwrap();
        let b = synth_generate(&cfg, 7).unwrap();
        assert_eq!(a.to_csv_bytes(), b.to_csv_bytes());
        assert_eq!(a.len(), 10);
        assert_ne!(
            synth_generate(&cfg, 8).unwrap().to_csv_bytes(),
            a.to_csv_bytes()
        );
    }

    #[test]
    fn single_item_universe() {
        let cfg = SynthConfig {
            n_users: 3,
            n_items: 1,
            events_per_user: 4,
            ..SynthConfig::default()
        };
        let ds = synth_generate(&cfg, 1).unwrap();
        assert!(ds.interactions().iter().all(|x| x.item == 0));
    }

    #[test]
    fn per_user_timestamps_increase() {
        let ds = synth_generate(&SynthConfig::default(), 3).unwrap();
        for seq in ds.user_sequences() {
            assert_eq!(seq.len(), 100);
            assert!(seq
                .windows(2)
                .all(|w| ds.get(w[0] as usize).timestamp < ds.get(w[1] as usize).timestamp));
        }
    }

    #[test]
    fn rejects_zero_counts_and_higher_orders() {
        let mut cfg = SynthConfig::default();
        cfg.n_items = 0;
        assert!(synth_generate(&cfg, 0).is_err());
        let mut cfg = SynthConfig::default();
        cfg.markov_order = 2;
        assert!(synth_generate(&cfg, 0).is_err());
    }
}
