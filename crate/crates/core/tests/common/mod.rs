#![allow(dead_code)]

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankstab::dataset::{Dataset, Interaction, SEQ_STRIDE};
use rankstab::idag::Idag;

/// Rows `(user, item, timestamp)` in file order.
pub fn dataset(rows: &[(u32, u32, f64)]) -> Dataset {
    let n_users = rows.iter().map(|r| r.0).max().map_or(0, |m| m as usize + 1);
    let n_items = rows.iter().map(|r| r.1).max().map_or(0, |m| m as usize + 1);
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, &(user, item, timestamp))| Interaction {
            user,
            item,
            timestamp,
            seq_index: i as u64 * SEQ_STRIDE,
        })
        .collect();
    Dataset::new(rows, n_users, n_items).unwrap()
}

/// Twelve interactions X1..X12 at t = 1..12, users A..D = 0..3 and items
/// a..g = 0..6. Under user-next and item-next edges X3 reaches eight
/// interactions and X1 five.
pub fn cascade_fixture() -> Dataset {
    const A: u32 = 0;
    const B: u32 = 1;
    const C: u32 = 2;
    const D: u32 = 3;
    let rows = [
        (A, 0), // X1  a
        (B, 1), // X2  b
        (C, 2), // X3  c
        (A, 3), // X4  d
        (D, 2), // X5  c
        (C, 4), // X6  e
        (B, 0), // X7  a
        (D, 5), // X8  f
        (C, 6), // X9  g
        (D, 4), // X10 e
        (A, 6), // X11 g
        (B, 4), // X12 e
    ];
    dataset(
        &rows
            .iter()
            .enumerate()
            .map(|(i, &(u, it))| (u, it, (i + 1) as f64))
            .collect::<Vec<_>>(),
    )
}

/// Random log with at most `max_rows` rows and deliberately tied timestamps.
pub fn random_log(rng: &mut ChaCha8Rng, max_rows: usize) -> Dataset {
    let n = rng.random_range(1..=max_rows);
    let users = rng.random_range(1..=12u32);
    let items = rng.random_range(1..=15u32);
    let span = rng.random_range(1..=n as u32 * 2) as f64;
    let rows: Vec<(u32, u32, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0..users),
                rng.random_range(0..items),
                rng.random_range(0..span as u32) as f64,
            )
        })
        .collect();
    dataset(&rows)
}

/// Self-inclusive descendant counts from a boolean reachability matrix.
/// Edges only point forward in node order, so sweeping nodes from last to
/// first closes the relation.
pub fn closure_counts(g: &Idag) -> Vec<usize> {
    let n = g.node_count();
    let mut reach = vec![vec![false; n]; n];
    for (s, d, _) in g.edges() {
        assert!(d > s, "edge {s}->{d} points backwards");
        reach[s as usize][d as usize] = true;
    }
    for u in (0..n).rev() {
        reach[u][u] = true;
        let direct: Vec<usize> = (0..n).filter(|&v| reach[u][v]).collect();
        for v in direct {
            for w in 0..n {
                if reach[v][w] {
                    reach[u][w] = true;
                }
            }
        }
    }
    reach.iter().map(|row| row.iter().filter(|&&r| r).count()).collect()
}

/// Truncated RBO by direct summation, recomputing each prefix overlap.
pub fn naive_rbo(a: &[u32], b: &[u32], p: f64) -> f64 {
    let mut sum = 0.0;
    for d in 1..=a.len() {
        let sa: HashSet<u32> = a[..d].iter().copied().collect();
        let overlap = b[..d].iter().filter(|x| sa.contains(x)).count();
        sum += p.powi(d as i32 - 1) * overlap as f64 / d as f64;
    }
    (1.0 - p) * sum
}

pub fn shuffled(rng: &mut ChaCha8Rng, n: usize) -> Vec<u32> {
    let mut v: Vec<u32> = (0..n as u32).collect();
    v.shuffle(rng);
    v
}

/// Two-sided signed-rank p-value by listing all 2^n sign patterns.
pub fn enumerated_wilcoxon_p(x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|&a| {
            let below = abs.iter().filter(|&&b| b < a).count() as f64;
            let equal = abs.iter().filter(|&&b| b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let observed: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let target = (observed - total / 2.0).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if (w - total / 2.0).abs() >= target - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
