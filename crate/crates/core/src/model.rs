//! Deterministic reference recommender.
//!
//! Users and items live in a shared `d`-dimensional space. Training walks
//! the log in global time order, one interaction at a time, so an edit at
//! time `t` changes every update after `t` and nothing before it. For each
//! training interaction `(u, i, t)`:
//!
//! 1. if `u` has a next training interaction with item `j`, draw a negative
//!    `n != j` and take a BPR step on `u . (v_j - v_n)`;
//! 2. drift the user state toward the item just consumed,
//!    `u <- normalize((1 - a) u + a v_i)`.
//!
//! At test time only the drift is applied. All arithmetic is single-threaded
//! with sums accumulated in index order.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Interaction, TemporalSplit};
use crate::metrics::RankList;
use crate::rng::{seeded, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub drift: f64,
    pub epochs: usize,
    pub negatives: usize,
    /// Only each user's latest `max_seq_len` training interactions take part.
    pub max_seq_len: Option<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            learning_rate: 0.05,
            drift: 0.3,
            epochs: 2,
            negatives: 1,
            max_seq_len: None,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Validation("model dim must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Validation("learning rate must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.drift) {
            return Err(Error::Validation("drift must lie in [0, 1]".into()));
        }
        if self.epochs == 0 || self.negatives == 0 {
            return Err(Error::Validation("epochs and negatives must be >= 1".into()));
        }
        if self.max_seq_len == Some(0) {
            return Err(Error::Validation("max_seq_len must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqEmbModel {
    n_users: usize,
    n_items: usize,
    /// Row-major `n_users x dim`.
    user_emb: Vec<f64>,
    /// Row-major `n_items x dim`.
    item_emb: Vec<f64>,
    config: ModelConfig,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.len() {
        acc += a[k] * b[k];
    }
    acc
}

/// Normalizes in place; leaves the vector alone below a 1e-12 norm.
fn normalize(v: &mut [f64]) -> bool {
    let norm = dot(v, v).sqrt();
    if norm < 1e-12 || !norm.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl SeqEmbModel {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn user(&self, u: u32) -> &[f64] {
        let d = self.config.dim;
        &self.user_emb[u as usize * d..(u as usize + 1) * d]
    }

    pub fn item(&self, i: u32) -> &[f64] {
        let d = self.config.dim;
        &self.item_emb[i as usize * d..(i as usize + 1) * d]
    }

    /// Recurrent update `u <- normalize((1 - a) u + a v_item)`. When `a` is
    /// zero and the state is unchanged since it was last normalized, the
    /// vector is left bit-for-bit as is.
    fn drift(user: &mut [f64], item: &[f64], alpha: f64, dirty: bool) {
        if alpha == 0.0 && !dirty {
            return;
        }
        let prev: Vec<f64> = user.to_vec();
        for k in 0..user.len() {
            user[k] = (1.0 - alpha) * user[k] + alpha * item[k];
        }
        if !normalize(user) {
            user.copy_from_slice(&prev);
        }
    }

    /// Full ranking for a user state: score descending, item id ascending.
    pub fn rank_items(&self, user_state: &[f64]) -> RankList {
        let d = self.config.dim;
        let mut scored: Vec<(f64, u32)> = (0..self.n_items)
            .map(|i| (dot(user_state, &self.item_emb[i * d..(i + 1) * d]), i as u32))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        RankList::from_trusted(scored.into_iter().map(|(_, i)| i).collect(), self.n_items)
    }
}

/// Seeded initialization: entries uniform in `[-1/sqrt(d), 1/sqrt(d)]`,
/// user rows then scaled to unit norm.
pub fn init(n_users: usize, n_items: usize, cfg: &ModelConfig) -> Result<SeqEmbModel> {
    cfg.validate()?;
    if n_users == 0 || n_items == 0 {
        return Err(Error::Validation("model needs at least one user and one item".into()));
    }
    let d = cfg.dim;
    let bound = 1.0 / (d as f64).sqrt();
    let mut rng = seeded(cfg.seed, Stream::ModelInit);
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
    };
    let mut user_emb = draw(n_users * d);
    let item_emb = draw(n_items * d);
    for row in user_emb.chunks_mut(d) {
        if !normalize(row) {
            row.iter_mut().for_each(|x| *x = 0.0);
            row[0] = 1.0;
        }
    }
    Ok(SeqEmbModel {
        n_users,
        n_items,
        user_emb,
        item_emb,
        config: *cfg,
    })
}

/// Positions in `train` that take part in training under `max_seq_len`.
fn participating(train: &Dataset, max_seq_len: Option<usize>) -> Vec<bool> {
    match max_seq_len {
        None => vec![true; train.len()],
        Some(l) => {
            let mut keep = vec![false; train.len()];
            for seq in train.user_sequences() {
                for &p in &seq[seq.len().saturating_sub(l)..] {
                    keep[p as usize] = true;
                }
            }
            keep
        }
    }
}

/// Trains in place on `train` with the model's own config.
pub fn fit(mut model: SeqEmbModel, train: &Dataset) -> Result<SeqEmbModel> {
    if train.n_users() > model.n_users || train.n_items() > model.n_items {
        return Err(Error::Contract(format!(
            "training universe {}x{} exceeds model universe {}x{}",
            train.n_users(),
            train.n_items(),
            model.n_users,
            model.n_items
        )));
    }
    let cfg = model.config;
    let d = cfg.dim;
    let keep = participating(train, cfg.max_seq_len);
    let rows = train.interactions();

    let mut next_item: Vec<Option<u32>> = vec![None; rows.len()];
    for seq in train.user_sequences() {
        let mut later: Option<u32> = None;
        for &p in seq.iter().rev() {
            if keep[p as usize] {
                next_item[p as usize] = later;
                later = Some(rows[p as usize].item);
            }
        }
    }

    let mut rng = seeded(cfg.seed, Stream::NegativeSampling);
    let mut u_old = vec![0.0; d];
    let mut diff = vec![0.0; d];
    let n_items = model.n_items;
    for epoch in 0..cfg.epochs {
        for (step, x) in rows.iter().enumerate() {
            if !keep[step] {
                continue;
            }
            let u = x.user as usize;
            let mut dirty = false;
            if let (Some(j), true) = (next_item[step], n_items > 1) {
                let j = j as usize;
                for _ in 0..cfg.negatives {
                    let r = rng.random_range(0..n_items - 1);
                    let n = if r >= j { r + 1 } else { r };
                    u_old.copy_from_slice(&model.user_emb[u * d..(u + 1) * d]);
                    for k in 0..d {
                        diff[k] = model.item_emb[j * d + k] - model.item_emb[n * d + k];
                    }
                    let s = sigmoid(dot(&u_old, &diff));
                    let g = cfg.learning_rate * (1.0 - s);
                    if g != 0.0 {
                        dirty = true;
                    }
                    for k in 0..d {
                        model.user_emb[u * d + k] += g * diff[k];
                        model.item_emb[j * d + k] += g * u_old[k];
                        model.item_emb[n * d + k] -= g * u_old[k];
                    }
                    let finite = model.user_emb[u * d..(u + 1) * d]
                        .iter()
                        .chain(&model.item_emb[j * d..(j + 1) * d])
                        .chain(&model.item_emb[n * d..(n + 1) * d])
                        .all(|v| v.is_finite());
                    if !finite {
                        return Err(Error::NonFinite { epoch, step });
                    }
                }
            }
            let i = x.item as usize;
            let (users, items) = (&mut model.user_emb, &model.item_emb);
            SeqEmbModel::drift(
                &mut users[u * d..(u + 1) * d],
                &items[i * d..(i + 1) * d],
                cfg.drift,
                dirty,
            );
            if !model.user_emb[u * d..(u + 1) * d].iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { epoch, step });
            }
        }
    }
    Ok(model)
}

/// A test interaction and the full ranking produced right before it.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedTest {
    pub test: Interaction,
    pub list: RankList,
}

/// Emits one full rank list per test interaction, in time order, drifting
/// the user state with each consumed test item (no gradient steps). The
/// model itself is not modified.
pub fn rank_for_test(model: &SeqEmbModel, split: &TemporalSplit) -> Result<Vec<RankedTest>> {
    if split.test.n_users() > model.n_users || split.test.n_items() > model.n_items {
        return Err(Error::Contract("test universe exceeds model universe".into()));
    }
    let d = model.config.dim;
    let mut users = model.user_emb.clone();
    let mut out = Vec::with_capacity(split.test.len());
    for x in split.test.interactions() {
        let u = x.user as usize;
        let list = model.rank_items(&users[u * d..(u + 1) * d]);
        out.push(RankedTest { test: *x, list });
        let i = x.item as usize;
        SeqEmbModel::drift(
            &mut users[u * d..(u + 1) * d],
            &model.item_emb[i * d..(i + 1) * d],
            model.config.drift,
            false,
        );
    }
    Ok(out)
}

/// A recommender that the stability harness can train and query.
///
/// Implementations must be deterministic: identical inputs and seed give
/// identical rank lists.
pub trait ModelAdapter: Sync {
    type Fitted: Send + Sync;

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Self::Fitted>;

    fn rank_for_test(&self, fitted: &Self::Fitted, split: &TemporalSplit) -> Result<Vec<RankedTest>>;
}

/// [`ModelAdapter`] for [`SeqEmbModel`]; the seed passed to `fit` replaces
/// the configured one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqEmbAdapter {
    pub config: ModelConfig,
}

impl ModelAdapter for SeqEmbAdapter {
    type Fitted = SeqEmbModel;

    fn fit(&self, train: &Dataset, seed: u64) -> Result<SeqEmbModel> {
        let cfg = ModelConfig {
            seed,
            ..self.config
        };
        fit(init(train.n_users(), train.n_items(), &cfg)?, train)
    }

    fn rank_for_test(&self, fitted: &SeqEmbModel, split: &TemporalSplit) -> Result<Vec<RankedTest>> {
        rank_for_test(fitted, split)
    }
}

pub const CHECKPOINT_FORMAT: &str = "rankstab-seqemb";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    version: u32,
    n_users: usize,
    n_items: usize,
    dim: usize,
    config: ModelConfig,
}

/// Writes a checkpoint: one JSON header line, then one CSV line per
/// embedding row, `user,<id>,<v_1>,...,<v_d>` followed by
/// `item,<id>,<v_1>,...`. Values use shortest round-trip formatting.
pub fn write_checkpoint<W: Write>(model: &SeqEmbModel, mut out: W) -> Result<()> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        n_users: model.n_users,
        n_items: model.n_items,
        dim: model.config.dim,
        config: model.config,
    };
    serde_json::to_writer(&mut out, &header)?;
    writeln!(out)?;
    for (kind, n, emb) in [
        ("user", model.n_users, &model.user_emb),
        ("item", model.n_items, &model.item_emb),
    ] {
        for (id, row) in emb.chunks(model.config.dim).enumerate().take(n) {
            write!(out, "{kind},{id}")?;
            for v in row {
                write!(out, ",{v:?}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<SeqEmbModel> {
    let mut lines = input.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Empty("empty checkpoint".into()))??;
    let header: CheckpointHeader = serde_json::from_str(&header_line)?;
    if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported checkpoint {} v{}",
            header.format, header.version
        )));
    }
    let d = header.dim;
    let mut user_emb = vec![f64::NAN; header.n_users * d];
    let mut item_emb = vec![f64::NAN; header.n_items * d];
    for (k, line) in lines.enumerate() {
        let line = line?;
        let lineno = k as u64 + 2;
        let bad = |m: &str| Error::Parse {
            line: lineno,
            message: m.to_string(),
        };
        let mut fields = line.split(',');
        let (emb, n) = match fields.next() {
            Some("user") => (&mut user_emb, header.n_users),
            Some("item") => (&mut item_emb, header.n_items),
            _ => return Err(bad("row kind must be user or item")),
        };
        let id: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad row id"))?;
        if id >= n {
            return Err(bad("row id out of range"));
        }
        let values: Vec<f64> = fields
            .map(|s| s.parse::<f64>().map_err(|_| bad("bad value")))
            .collect::<Result<_>>()?;
        if values.len() != d {
            return Err(bad("wrong number of values"));
        }
        emb[id * d..(id + 1) * d].copy_from_slice(&values);
    }
    if user_emb.iter().chain(&item_emb).any(|v| !v.is_finite()) {
        return Err(Error::Validation("checkpoint is missing rows".into()));
    }
    Ok(SeqEmbModel {
        n_users: header.n_users,
        n_items: header.n_items,
        user_emb,
        item_emb,
        config: header.config,
    })
}
