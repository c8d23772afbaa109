//! Rank-list similarity and next-item metrics.

mod wilcoxon;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use wilcoxon::{
    wilcoxon_exact_p, wilcoxon_normal_p, wilcoxon_signed_rank, SignedRanks, WilcoxonMethod,
    WilcoxonResult,
};

/// An ordering of distinct item ids drawn from `0..universe_size`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankList {
    items: Vec<u32>,
    universe_size: usize,
}

impl RankList {
    pub fn new(items: Vec<u32>, universe_size: usize) -> Result<Self> {
        if items.len() > universe_size {
            return Err(Error::Contract(format!(
                "rank list of length {} exceeds universe of {universe_size}",
                items.len()
            )));
        }
        let mut seen = vec![false; universe_size];
        for &i in &items {
            let slot = seen.get_mut(i as usize).ok_or_else(|| {
                Error::Contract(format!("item {i} outside universe of {universe_size}"))
            })?;
            if *slot {
                return Err(Error::Contract(format!("item {i} appears twice")));
            }
            *slot = true;
        }
        Ok(Self {
            items,
            universe_size,
        })
    }

    /// Skips validation; callers guarantee distinct in-range items.
    pub(crate) fn from_trusted(items: Vec<u32>, universe_size: usize) -> Self {
        debug_assert!(items.len() <= universe_size);
        Self {
            items,
            universe_size,
        }
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn is_full(&self) -> bool {
        self.items.len() == self.universe_size
    }

    /// 1-based rank of `item`, if present.
    pub fn rank_of(&self, item: u32) -> Option<usize> {
        self.items.iter().position(|&i| i == item).map(|p| p + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RboParams {
    /// Persistence: the weight of depth `d` is proportional to `p^(d-1)`.
    pub p: f64,
}

impl Default for RboParams {
    fn default() -> Self {
        Self { p: 0.9 }
    }
}

impl RboParams {
    pub fn new(p: f64) -> Result<Self> {
        let params = Self { p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p > 0.0 && self.p < 1.0 {
            Ok(())
        } else {
            Err(Error::Contract(format!("RBO persistence {} outside (0, 1)", self.p)))
        }
    }
}

/// Weighted overlap sums of two equal-set rank lists: `(sum_d w_d * o_d / d,
/// sum_d w_d)` with `w_d = p^(d-1)`. The overlap `o_d` of the two depth-`d`
/// prefixes is maintained incrementally with one membership flag per item.
fn rbo_sums(a: &RankList, b: &RankList, params: RboParams) -> Result<(f64, f64)> {
    params.validate()?;
    if a.universe_size != b.universe_size || a.len() != b.len() {
        return Err(Error::Contract(format!(
            "RBO needs lists over one universe with equal length (got {}/{} and {}/{})",
            a.len(),
            a.universe_size,
            b.len(),
            b.universe_size
        )));
    }
    const IN_A: u8 = 1;
    const IN_B: u8 = 2;
    let mut flags = vec![0u8; a.universe_size];
    let mut overlap = 0usize;
    let mut weight = 1.0f64;
    let mut acc = 0.0f64;
    let mut total = 0.0f64;
    for (d, (&x, &y)) in a.items.iter().zip(&b.items).enumerate() {
        if x == y {
            overlap += 1;
        } else {
            if flags[x as usize] & IN_B != 0 {
                overlap += 1;
            }
            if flags[y as usize] & IN_A != 0 {
                overlap += 1;
            }
        }
        flags[x as usize] |= IN_A;
        flags[y as usize] |= IN_B;
        acc += weight * (overlap as f64 / (d + 1) as f64);
        total += weight;
        weight *= params.p;
    }
    if overlap != a.len() {
        return Err(Error::Contract("RBO lists contain different item sets".into()));
    }
    Ok((acc, total))
}

/// Rank-biased overlap truncated at the list length `n`:
/// `(1 - p) * sum_{d=1..n} p^(d-1) * |A[1:d] ∩ B[1:d]| / d`.
///
/// Identical lists score `1 - p^n`, not 1; see [`rbo_normalized`].
pub fn rbo(a: &RankList, b: &RankList, params: RboParams) -> Result<f64> {
    let (acc, _) = rbo_sums(a, b, params)?;
    Ok((1.0 - params.p) * acc)
}

/// [`rbo`] divided by its maximum `1 - p^n`. The divisor is accumulated with
/// the same weights as the numerator, so identical lists give exactly 1.0.
pub fn rbo_normalized(a: &RankList, b: &RankList, params: RboParams) -> Result<f64> {
    let (acc, total) = rbo_sums(a, b, params)?;
    if total == 0.0 {
        return Ok(1.0);
    }
    Ok(acc / total)
}

/// Jaccard similarity of the two top-`k` prefixes.
pub fn jaccard_top_k(a: &RankList, b: &RankList, k: usize) -> Result<f64> {
    if k == 0 || k > a.len() || k > b.len() {
        return Err(Error::Contract(format!(
            "top-k Jaccard with k={k} on lists of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut top_a = a.items[..k].to_vec();
    let mut top_b = b.items[..k].to_vec();
    top_a.sort_unstable();
    top_b.sort_unstable();
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < k && j < k {
        match top_a[i].cmp(&top_b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(shared as f64 / (2 * k - shared) as f64)
}

pub fn reciprocal_rank(list: &RankList, truth: u32) -> Result<f64> {
    list.rank_of(truth)
        .map(|r| 1.0 / r as f64)
        .ok_or_else(|| Error::Contract(format!("ground-truth item {truth} not in rank list")))
}

pub fn recall_at_k(list: &RankList, truth: u32, k: usize) -> Result<f64> {
    let rank = list
        .rank_of(truth)
        .ok_or_else(|| Error::Contract(format!("ground-truth item {truth} not in rank list")))?;
    Ok(if rank <= k { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Rbo,
    RboNormalized,
    Jaccard,
}

impl MetricKind {
    pub fn label(self, k: usize) -> String {
        match self {
            MetricKind::Rbo => "rbo".into(),
            MetricKind::RboNormalized => "rbo_normalized".into(),
            MetricKind::Jaccard => format!("jaccard@{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub rbo: RboParams,
    /// Cut-off for top-K Jaccard and Recall@K.
    pub k: usize,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            rbo: RboParams::default(),
            k: 10,
        }
    }
}

pub fn score_pair(a: &RankList, b: &RankList, kind: MetricKind, params: &MetricParams) -> Result<f64> {
    match kind {
        MetricKind::Rbo => rbo(a, b, params.rbo),
        MetricKind::RboNormalized => rbo_normalized(a, b, params.rbo),
        MetricKind::Jaccard => jaccard_top_k(a, b, params.k),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestScore {
    /// `seq_index` of the test interaction.
    pub test: u64,
    pub score: f64,
}

/// Mean similarity between before/after rank lists over the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlsReport {
    pub metric_kind: MetricKind,
    pub k: usize,
    pub per_test_scores: Vec<TestScore>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Scores every aligned pair and averages. Pairs are scored in parallel;
/// the output keeps input order.
pub fn aggregate_rls(
    pairs: &[(u64, &RankList, &RankList)],
    kind: MetricKind,
    params: &MetricParams,
) -> Result<RlsReport> {
    if pairs.is_empty() {
        return Err(Error::Empty("no rank-list pairs to aggregate".into()));
    }
    let per_test_scores = pairs
        .par_iter()
        .map(|&(test, a, b)| score_pair(a, b, kind, params).map(|score| TestScore { test, score }))
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = per_test_scores.iter().map(|s| s.score).collect();
    let (mean, std) = mean_std(&scores);
    Ok(RlsReport {
        metric_kind: kind,
        k: params.k,
        per_test_scores,
        mean,
        std,
    })
}
