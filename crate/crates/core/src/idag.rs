//! Interaction dependency DAG and cascading scores.
//!
//! Nodes are training interactions. Each node points to the next
//! interaction of the same user and to the next interaction of the same
//! item, so an edit to a node can influence every node reachable from it.
//! The cascading score of a node is the size of that reachable set,
//! the node itself included.
//!
//! Interactions sharing a timestamp are never linked to each other: within
//! a user or item sequence, every member of a group of equal timestamps
//! points to the first member of the next strictly-later group.
//!
//! A parent always reaches strictly more nodes than any child, so the
//! maximum score is attained on a zero-in-degree node and only those are
//! scored.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::{Error, Result};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    User,
    Item,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::User => "user",
            EdgeKind::Item => "item",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Idag {
    /// Position of each node's interaction in the training dataset. Node ids
    /// follow (timestamp, seq_index) order.
    positions: Vec<u32>,
    timestamps: Vec<f64>,
    seq_indices: Vec<u64>,
    user_next: Vec<u32>,
    item_next: Vec<u32>,
    in_degree: Vec<u32>,
    max_seq_len: Option<usize>,
}

impl Idag {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn max_seq_len(&self) -> Option<usize> {
        self.max_seq_len
    }

    /// Position of the node's interaction in the training dataset.
    pub fn position(&self, node: u32) -> usize {
        self.positions[node as usize] as usize
    }

    pub fn seq_index(&self, node: u32) -> u64 {
        self.seq_indices[node as usize]
    }

    pub fn timestamp(&self, node: u32) -> f64 {
        self.timestamps[node as usize]
    }

    pub fn in_degree(&self, node: u32) -> u32 {
        self.in_degree[node as usize]
    }

    pub fn node_of_seq_index(&self, seq_index: u64) -> Option<u32> {
        self.seq_indices
            .iter()
            .position(|&s| s == seq_index)
            .map(|n| n as u32)
    }

    /// Successors of `node`: at most one user edge and one item edge.
    pub fn successors(&self, node: u32) -> impl Iterator<Item = (u32, EdgeKind)> + '_ {
        let n = node as usize;
        [
            (self.user_next[n], EdgeKind::User),
            (self.item_next[n], EdgeKind::Item),
        ]
        .into_iter()
        .filter(|(d, _)| *d != NONE)
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, EdgeKind)> + '_ {
        (0..self.node_count() as u32)
            .flat_map(move |s| self.successors(s).map(move |(d, k)| (s, d, k)))
    }

    pub fn zero_in_degree_nodes(&self) -> impl Iterator<Item = u32> + '_ {
        self.in_degree
            .iter()
            .enumerate()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| n as u32)
    }

    /// Writes one `src dst kind` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for (s, d, k) in self.edges() {
            writeln!(out, "{s} {d} {}", k.as_str())?;
        }
        Ok(())
    }
}

/// Links each equal-timestamp group of `seq` to the first member of the next
/// strictly-later group.
/// One pass over the nodes in time order. `groups[k]` holds the latest
/// equal-timestamp group of key `k`; a strictly later node of the same key
/// becomes the successor of every member.
fn link_by_key(key: &[u32], n_keys: usize, timestamps: &[f64], next: &mut [u32], in_degree: &mut [u32]) {
    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); n_keys];
    for (v, &k) in key.iter().enumerate() {
        let group = &mut groups[k as usize];
        if let Some(&first) = group.first() {
            if timestamps[first as usize] < timestamps[v] {
                for &m in group.iter() {
                    next[m as usize] = v as u32;
                }
                in_degree[v] += group.len() as u32;
                group.clear();
            }
        }
        group.push(v as u32);
    }
}

/// Builds the DAG over `train`, optionally restricted to each user's latest
/// `max_seq_len` interactions. Item sequences are induced from the surviving
/// nodes.
pub fn build_idag(train: &Dataset, max_seq_len: Option<usize>) -> Result<Idag> {
    if train.is_empty() {
        return Err(Error::Empty("cannot build a DAG from an empty training set".into()));
    }
    if max_seq_len == Some(0) {
        return Err(Error::Contract("max sequence length must be >= 1".into()));
    }

    let mut kept = vec![max_seq_len.is_none(); train.len()];
    if let Some(l) = max_seq_len {
        for seq in train.user_sequences() {
            for &pos in &seq[seq.len().saturating_sub(l)..] {
                kept[pos as usize] = true;
            }
        }
    }
    let positions: Vec<u32> = (0..train.len() as u32).filter(|&p| kept[p as usize]).collect();
    let n = positions.len();
    let rows = train.interactions();
    let timestamps: Vec<f64> = positions.iter().map(|&p| rows[p as usize].timestamp).collect();
    let seq_indices: Vec<u64> = positions.iter().map(|&p| rows[p as usize].seq_index).collect();

    let mut user_next = vec![NONE; n];
    let mut item_next = vec![NONE; n];
    let mut in_degree = vec![0u32; n];
    let users: Vec<u32> = positions.iter().map(|&p| rows[p as usize].user).collect();
    link_by_key(&users, train.n_users(), &timestamps, &mut user_next, &mut in_degree);
    let items: Vec<u32> = positions.iter().map(|&p| rows[p as usize].item).collect();
    link_by_key(&items, train.n_items(), &timestamps, &mut item_next, &mut in_degree);

    Ok(Idag {
        positions,
        timestamps,
        seq_indices,
        user_next,
        item_next,
        in_degree,
        max_seq_len,
    })
}

/// Reusable breadth-first traversal state. Marks are generation stamps, so
/// repeated searches do not clear the visited array.
#[derive(Debug, Clone)]
pub struct Bfs {
    mark: Vec<u32>,
    generation: u32,
    queue: Vec<u32>,
}

impl Bfs {
    pub fn new(node_count: usize) -> Self {
        Self {
            mark: vec![0; node_count],
            generation: 0,
            queue: Vec::new(),
        }
    }

    /// Number of distinct nodes reachable from `root`, `root` included.
    pub fn descendants(&mut self, g: &Idag, root: u32) -> usize {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.generation = 1;
        }
        let generation = self.generation;
        self.queue.clear();
        self.queue.push(root);
        self.mark[root as usize] = generation;
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head] as usize;
            head += 1;
            for succ in [g.user_next[v], g.item_next[v]] {
                if succ != NONE && self.mark[succ as usize] != generation {
                    self.mark[succ as usize] = generation;
                    self.queue.push(succ);
                }
            }
        }
        self.queue.len()
    }
}

pub fn descendant_count(g: &Idag, node: u32) -> Result<usize> {
    if node as usize >= g.node_count() {
        return Err(Error::Contract(format!(
            "node {node} not in a DAG of {} nodes",
            g.node_count()
        )));
    }
    Ok(Bfs::new(g.node_count()).descendants(g, node))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeScores {
    /// `(node, score)` for every zero-in-degree node, by node id.
    pub scores: Vec<(u32, usize)>,
}

impl CascadeScores {
    /// Number of zero-in-degree nodes.
    pub fn z(&self) -> usize {
        self.scores.len()
    }

    pub fn score_of(&self, node: u32) -> Option<usize> {
        self.scores
            .binary_search_by_key(&node, |(n, _)| *n)
            .ok()
            .map(|i| self.scores[i].1)
    }

    pub fn max_score(&self) -> Option<usize> {
        self.scores.iter().map(|(_, s)| *s).max()
    }

    /// Writes `node,seq_index,score` rows.
    pub fn write_csv<W: Write>(&self, g: &Idag, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "seq_index", "score"])?;
        for &(n, s) in &self.scores {
            w.write_record([n.to_string(), g.seq_index(n).to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Roots handled per sweep, as `u64` words.
const BLOCK_WORDS: usize = 4;

/// Scores every zero-in-degree node. Roots are taken in blocks of
/// `64 * BLOCK_WORDS`; one forward sweep over the nodes carries, per node,
/// the set of block roots that reach it, and bit-sliced counters tally how
/// many nodes each root reaches. Blocks run in parallel.
pub fn cascading_scores(g: &Idag) -> CascadeScores {
    let roots: Vec<u32> = g.zero_in_degree_nodes().collect();
    let counts: Vec<usize> = roots
        .par_chunks(64 * BLOCK_WORDS)
        .flat_map_iter(|block| sweep_block(g, block))
        .collect();
    CascadeScores {
        scores: roots.into_iter().zip(counts).collect(),
    }
}

fn sweep_block(g: &Idag, roots: &[u32]) -> Vec<usize> {
    let n = g.node_count();
    let mut reach = vec![0u64; n * BLOCK_WORDS];
    for (i, &r) in roots.iter().enumerate() {
        reach[r as usize * BLOCK_WORDS + i / 64] |= 1 << (i % 64);
    }
    // planes[k][w] holds bit k of the 64 counters packed in word w
    let mut planes: Vec<[u64; BLOCK_WORDS]> = Vec::new();
    for v in 0..n {
        let row: [u64; BLOCK_WORDS] = reach[v * BLOCK_WORDS..][..BLOCK_WORDS].try_into().expect("block row");
        if row.iter().all(|&w| w == 0) {
            continue;
        }
        for succ in [g.user_next[v], g.item_next[v]] {
            if succ != NONE {
                // edges point to later node ids
                let dst = &mut reach[succ as usize * BLOCK_WORDS..][..BLOCK_WORDS];
                for (d, s) in dst.iter_mut().zip(&row) {
                    *d |= s;
                }
            }
        }
        let mut carry = row;
        let mut k = 0;
        while carry.iter().any(|&c| c != 0) {
            if k == planes.len() {
                planes.push([0; BLOCK_WORDS]);
            }
            for (p, c) in planes[k].iter_mut().zip(carry.iter_mut()) {
                let overflow = *p & *c;
                *p ^= *c;
                *c = overflow;
            }
            k += 1;
        }
    }
    (0..roots.len())
        .map(|i| {
            planes
                .iter()
                .enumerate()
                .map(|(k, plane)| ((plane[i / 64] >> (i % 64) & 1) as usize) << k)
                .sum()
        })
        .collect()
}

/// The `k` highest-scoring zero-in-degree nodes by (score desc, timestamp
/// asc, seq_index asc).
pub fn select_targets(g: &Idag, scores: &CascadeScores, k: usize) -> Result<Vec<u32>> {
    if k == 0 || k > scores.z() {
        return Err(Error::Validation(format!(
            "cannot select {k} targets from {} zero-in-degree nodes",
            scores.z()
        )));
    }
    let mut ranked = scores.scores.clone();
    // node ids already follow (timestamp, seq_index) order
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    debug_assert!(ranked
        .iter()
        .all(|(n, _)| g.in_degree(*n) == 0));
    Ok(ranked.into_iter().take(k).map(|(n, _)| n).collect())
}
