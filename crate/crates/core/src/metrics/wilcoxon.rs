//! Two-sided Wilcoxon signed-rank test for paired samples.
//!
//! Zero differences are dropped; tied absolute differences share their
//! average rank. Up to [`EXACT_MAX_N`] pairs the p-value comes from the
//! exact null distribution of the positive-rank sum (a subset-sum count over
//! doubled ranks, so half ranks stay integral); above that, a normal
//! approximation with tie-corrected variance and continuity correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::{Error, Result};

pub const EXACT_MAX_N: usize = 12;
const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
    /// Every difference was zero.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub p_value: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub method: WilcoxonMethod,
}

/// Non-zero differences ranked by absolute value.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedRanks {
    /// Average ranks, doubled so they are integers.
    pub doubled_ranks: Vec<u64>,
    pub positive: Vec<bool>,
    /// Sizes of groups of tied absolute differences.
    pub tie_groups: Vec<usize>,
}

impl SignedRanks {
    pub fn from_pairs(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Contract(format!(
                "paired samples differ in length ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        let mut diffs: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(a, b)| a - b)
            .filter(|d| *d != 0.0)
            .collect();
        if diffs.iter().any(|d| !d.is_finite()) {
            return Err(Error::Contract("non-finite paired difference".into()));
        }
        diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

        let n = diffs.len();
        let mut doubled_ranks = vec![0u64; n];
        let mut tie_groups = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && diffs[end].abs() == diffs[start].abs() {
                end += 1;
            }
            // ranks start+1..=end share (start+1+end)/2; doubled: start+1+end
            let r2 = (start + 1 + end) as u64;
            doubled_ranks[start..end].iter_mut().for_each(|r| *r = r2);
            tie_groups.push(end - start);
            start = end;
        }
        Ok(Self {
            doubled_ranks,
            positive: diffs.iter().map(|d| *d > 0.0).collect(),
            tie_groups,
        })
    }

    pub fn len(&self) -> usize {
        self.doubled_ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doubled_ranks.is_empty()
    }

    fn doubled_w_plus(&self) -> u64 {
        self.doubled_ranks
            .iter()
            .zip(&self.positive)
            .filter(|(_, p)| **p)
            .map(|(r, _)| *r)
            .sum()
    }

    pub fn w_plus(&self) -> f64 {
        self.doubled_w_plus() as f64 / 2.0
    }
}

/// Exact two-sided p-value: the null probability that the positive-rank sum
/// lies at least as far from its mean as the observed one.
pub fn wilcoxon_exact_p(ranks: &SignedRanks) -> f64 {
    if ranks.is_empty() {
        return 1.0;
    }
    let total: u64 = ranks.doubled_ranks.iter().sum();
    // counts[s]: sign assignments whose doubled positive-rank sum is s
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in &ranks.doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let observed = ranks.doubled_w_plus() as i128;
    // deviations compared on the doubled-of-doubled scale to stay integral
    let dev = |s: i128| (2 * s - total as i128).abs();
    let cutoff = dev(observed);
    let extreme: f64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| dev(*s as i128) >= cutoff)
        .map(|(_, c)| *c)
        .sum();
    let all: f64 = counts.iter().sum();
    (extreme / all).clamp(0.0, 1.0)
}

/// Normal-approximation two-sided p-value with tie correction and a 0.5
/// continuity correction.
pub fn wilcoxon_normal_p(ranks: &SignedRanks) -> f64 {
    let n = ranks.len() as f64;
    if ranks.is_empty() {
        return 1.0;
    }
    let mean = n * (n + 1.0) / 4.0;
    let ties: f64 = ranks
        .tie_groups
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let dev = ((ranks.w_plus() - mean).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    let ranks = SignedRanks::from_pairs(x, y)?;
    let n = ranks.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            w_plus: 0.0,
            p_value: 1.0,
            n,
            method: WilcoxonMethod::Degenerate,
        });
    }
    if n < MIN_PAIRS {
        return Err(Error::Contract(format!(
            "Wilcoxon test needs at least {MIN_PAIRS} non-zero differences, got {n}"
        )));
    }
    let w_plus = ranks.w_plus();
    let w_minus = (n * (n + 1)) as f64 / 2.0 - w_plus;
    let (p_value, method) = if n <= EXACT_MAX_N {
        (wilcoxon_exact_p(&ranks), WilcoxonMethod::Exact)
    } else {
        (wilcoxon_normal_p(&ranks), WilcoxonMethod::Normal)
    };
    Ok(WilcoxonResult {
        statistic: w_plus.min(w_minus),
        w_plus,
        p_value,
        n,
        method,
    })
}
