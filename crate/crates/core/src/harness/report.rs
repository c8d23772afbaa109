use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, SeedRun, StrategyComparison, SweepReport};
use crate::metrics::mean_std;
use crate::perturb::Perturbation;
use crate::{Error, Result};

/// Scores of one test interaction under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub seed: u64,
    /// `seq_index` of the test interaction.
    pub test: u64,
    pub user: u32,
    pub rbo: f64,
    pub rbo_normalized: f64,
    pub jaccard: f64,
    pub rr_original: f64,
    pub rr_perturbed: f64,
    pub recall_original: f64,
    pub recall_perturbed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub rbo: f64,
    pub rbo_normalized: f64,
    pub jaccard: f64,
    pub mrr_original: f64,
    pub mrr_perturbed: f64,
    pub recall_original: f64,
    pub recall_perturbed: f64,
    pub edits: Vec<Perturbation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSeed {
    pub rbo: MeanStd,
    pub rbo_normalized: MeanStd,
    pub jaccard: MeanStd,
    pub mrr_original: MeanStd,
    pub mrr_perturbed: MeanStd,
    pub recall_original: MeanStd,
    pub recall_perturbed: MeanStd,
}

/// Means over all of a user's test interactions and seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserSummary {
    pub user: u32,
    pub n_tests: usize,
    pub mrr: f64,
    pub rbo: f64,
    pub rbo_normalized: f64,
    pub jaccard: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub size: usize,
    pub mrr: f64,
    pub rbo: f64,
    pub rbo_normalized: f64,
    pub jaccard: f64,
}

/// Users split 20/60/20 by mean MRR under the original model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub high: GroupStats,
    pub mid: GroupStats,
    pub low: GroupStats,
    /// Set when every user has the same MRR, so the split is by user id alone.
    pub all_mrr_tied: bool,
    pub high_users: Vec<u32>,
    pub low_users: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: ExperimentConfig,
    /// No edit was applied; `M` and `M'` should coincide.
    pub control: bool,
    /// Standard deviations are population (divide-by-n) values.
    pub std_kind: String,
    pub seeds: Vec<SeedSummary>,
    pub summary: CrossSeed,
    pub per_user: Vec<UserSummary>,
    pub groups: Option<GroupSummary>,
    pub per_test: Vec<TestRow>,
}

fn mean_of<F: Fn(&TestRow) -> f64>(rows: &[TestRow], f: F) -> f64 {
    rows.iter().map(f).sum::<f64>() / rows.len() as f64
}

impl StabilityReport {
    pub(crate) fn assemble(config: ExperimentConfig, runs: Vec<SeedRun>) -> Result<Self> {
        if runs.iter().any(|r| r.rows.is_empty()) {
            return Err(Error::Empty("a seed produced no test interactions".into()));
        }
        let seeds: Vec<SeedSummary> = runs
            .iter()
            .map(|r| SeedSummary {
                seed: r.seed,
                rbo: mean_of(&r.rows, |x| x.rbo),
                rbo_normalized: mean_of(&r.rows, |x| x.rbo_normalized),
                jaccard: mean_of(&r.rows, |x| x.jaccard),
                mrr_original: mean_of(&r.rows, |x| x.rr_original),
                mrr_perturbed: mean_of(&r.rows, |x| x.rr_perturbed),
                recall_original: mean_of(&r.rows, |x| x.recall_original),
                recall_perturbed: mean_of(&r.rows, |x| x.recall_perturbed),
                edits: r.edits.clone(),
            })
            .collect();
        let col = |f: fn(&SeedSummary) -> f64| MeanStd::of(&seeds.iter().map(f).collect::<Vec<_>>());
        let summary = CrossSeed {
            rbo: col(|s| s.rbo),
            rbo_normalized: col(|s| s.rbo_normalized),
            jaccard: col(|s| s.jaccard),
            mrr_original: col(|s| s.mrr_original),
            mrr_perturbed: col(|s| s.mrr_perturbed),
            recall_original: col(|s| s.recall_original),
            recall_perturbed: col(|s| s.recall_perturbed),
        };
        let per_test: Vec<TestRow> = runs.into_iter().flat_map(|r| r.rows).collect();
        let per_user = per_user(&per_test);
        let mut report = Self {
            control: config.perturbation.kind.is_none(),
            config,
            std_kind: "population".into(),
            seeds,
            summary,
            per_user,
            groups: None,
            per_test,
        };
        report.groups = user_group_breakdown(&report).ok();
        Ok(report)
    }

    /// Mean over users of each user's mean score; what the group means
    /// recombine to.
    pub fn user_mean(&self) -> GroupStats {
        stats(&self.per_user.iter().collect::<Vec<_>>())
    }
}

fn per_user(rows: &[TestRow]) -> Vec<UserSummary> {
    let mut acc: BTreeMap<u32, Vec<&TestRow>> = BTreeMap::new();
    for r in rows {
        acc.entry(r.user).or_default().push(r);
    }
    acc.into_iter()
        .map(|(user, rs)| {
            let n = rs.len() as f64;
            let avg = |f: fn(&TestRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
            UserSummary {
                user,
                n_tests: rs.len(),
                mrr: avg(|r| r.rr_original),
                rbo: avg(|r| r.rbo),
                rbo_normalized: avg(|r| r.rbo_normalized),
                jaccard: avg(|r| r.jaccard),
            }
        })
        .collect()
}

fn stats(users: &[&UserSummary]) -> GroupStats {
    let n = users.len() as f64;
    let avg = |f: fn(&UserSummary) -> f64| {
        if users.is_empty() {
            0.0
        } else {
            users.iter().map(|u| f(u)).sum::<f64>() / n
        }
    };
    GroupStats {
        size: users.len(),
        mrr: avg(|u| u.mrr),
        rbo: avg(|u| u.rbo),
        rbo_normalized: avg(|u| u.rbo_normalized),
        jaccard: avg(|u| u.jaccard),
    }
}

/// Splits users into the top 20% by MRR, the bottom 20%, and the rest
/// (group sizes `ceil(0.2 n)`, remainder, `ceil(0.2 n)`); equal MRRs are
/// ordered by user id.
pub fn user_group_breakdown(report: &StabilityReport) -> Result<GroupSummary> {
    let n = report.per_user.len();
    if n < 5 {
        return Err(Error::Validation(format!(
            "user groups need at least 5 users, got {n}"
        )));
    }
    let mut users: Vec<&UserSummary> = report.per_user.iter().collect();
    users.sort_by(|a, b| b.mrr.total_cmp(&a.mrr).then(a.user.cmp(&b.user)));
    // ceil(0.2 n) in integers
    let edge = n.div_ceil(5);
    let (high, rest) = users.split_at(edge);
    let (mid, low) = rest.split_at(n - 2 * edge);
    let first = users[0].mrr;
    Ok(GroupSummary {
        high: stats(high),
        mid: stats(mid),
        low: stats(low),
        all_mrr_tied: users.iter().all(|u| u.mrr == first),
        high_users: high.iter().map(|u| u.user).collect(),
        low_users: low.iter().map(|u| u.user).collect(),
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SeedCsvRow<'a> {
    seed: u64,
    rbo: f64,
    rbo_normalized: f64,
    jaccard: f64,
    mrr_original: f64,
    mrr_perturbed: f64,
    recall_original: f64,
    recall_perturbed: f64,
    targets: &'a str,
}

#[derive(Serialize)]
struct GroupCsvRow<'a> {
    group: &'a str,
    size: usize,
    mrr: f64,
    rbo: f64,
    rbo_normalized: f64,
    jaccard: f64,
}

/// Writes `report.json`, `per_test.csv`, `per_user.csv`, `per_seed.csv` and,
/// when groups exist, `per_group.csv` into `dir`.
pub fn write_report_files(report: &StabilityReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_vec_pretty(report)?)?;
    write_csv(&dir.join("per_test.csv"), &report.per_test)?;
    write_csv(&dir.join("per_user.csv"), &report.per_user)?;
    let targets: Vec<String> = report
        .seeds
        .iter()
        .map(|s| {
            s.edits
                .iter()
                .map(|e| e.target.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    write_csv(
        &dir.join("per_seed.csv"),
        report.seeds.iter().zip(&targets).map(|(s, t)| SeedCsvRow {
            seed: s.seed,
            rbo: s.rbo,
            rbo_normalized: s.rbo_normalized,
            jaccard: s.jaccard,
            mrr_original: s.mrr_original,
            mrr_perturbed: s.mrr_perturbed,
            recall_original: s.recall_original,
            recall_perturbed: s.recall_perturbed,
            targets: t,
        }),
    )?;
    if let Some(g) = &report.groups {
        write_csv(
            &dir.join("per_group.csv"),
            [("high", &g.high), ("mid", &g.mid), ("low", &g.low)]
                .into_iter()
                .map(|(name, s)| GroupCsvRow {
                    group: name,
                    size: s.size,
                    mrr: s.mrr,
                    rbo: s.rbo,
                    rbo_normalized: s.rbo_normalized,
                    jaccard: s.jaccard,
                }),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct StrategyCsvRow {
    strategy: String,
    seed: u64,
    rbo: f64,
    rbo_normalized: f64,
    jaccard: f64,
}

#[derive(Serialize)]
struct PValueCsvRow {
    a: String,
    b: String,
    statistic: Option<f64>,
    p_value: Option<f64>,
}

fn strategy_label(spec: &crate::perturb::PerturbationSpec) -> String {
    let kind = match spec.kind {
        None => "none".to_string(),
        Some(k) => serde_json::to_value(k)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
    };
    format!("{}:{}:k{}", spec.strategy.name(), kind, spec.k)
}

/// Writes `comparison.json`, a tidy `rbo_vs_strategy.csv`, and
/// `wilcoxon.csv`.
pub fn write_comparison_files(cmp: &StrategyComparison, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("comparison.json"), serde_json::to_vec_pretty(cmp)?)?;
    let labels: Vec<String> = cmp.strategies.iter().map(strategy_label).collect();
    write_csv(
        &dir.join("rbo_vs_strategy.csv"),
        cmp.reports.iter().zip(&labels).flat_map(|(r, l)| {
            r.seeds.iter().map(move |s| StrategyCsvRow {
                strategy: l.clone(),
                seed: s.seed,
                rbo: s.rbo,
                rbo_normalized: s.rbo_normalized,
                jaccard: s.jaccard,
            })
        }),
    )?;
    let mut rows = Vec::new();
    for (a, row) in cmp.wilcoxon.iter().enumerate() {
        for (b, w) in row.iter().enumerate().skip(a + 1) {
            rows.push(PValueCsvRow {
                a: labels[a].clone(),
                b: labels[b].clone(),
                statistic: w.map(|w| w.statistic),
                p_value: w.map(|w| w.p_value),
            });
        }
    }
    write_csv(&dir.join("wilcoxon.csv"), rows)
}

#[derive(Serialize)]
struct SweepCsvRow {
    k: usize,
    seed: u64,
    jaccard: f64,
    rbo: f64,
    rbo_normalized: f64,
    targets: String,
}

/// Writes `sweep.json` and a tidy `jaccard_vs_k.csv`.
pub fn write_sweep_files(sweep: &SweepReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep.json"), serde_json::to_vec_pretty(sweep)?)?;
    write_csv(
        &dir.join("jaccard_vs_k.csv"),
        sweep.ks.iter().zip(&sweep.reports).flat_map(|(&k, r)| {
            r.seeds.iter().map(move |s| SweepCsvRow {
                k,
                seed: s.seed,
                jaccard: s.jaccard,
                rbo: s.rbo,
                rbo_normalized: s.rbo_normalized,
                targets: s
                    .edits
                    .iter()
                    .map(|e| e.target.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            })
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(user: u32, mrr: f64, jaccard: f64) -> UserSummary {
        UserSummary {
            user,
            n_tests: 1,
            mrr,
            rbo: jaccard / 2.0,
            rbo_normalized: jaccard,
            jaccard,
        }
    }

    fn report_with(users: Vec<UserSummary>) -> StabilityReport {
        StabilityReport {
            config: ExperimentConfig::default(),
            control: false,
            std_kind: "population".into(),
            seeds: vec![],
            summary: CrossSeed {
                rbo: MeanStd { mean: 0.0, std: 0.0 },
                rbo_normalized: MeanStd { mean: 0.0, std: 0.0 },
                jaccard: MeanStd { mean: 0.0, std: 0.0 },
                mrr_original: MeanStd { mean: 0.0, std: 0.0 },
                mrr_perturbed: MeanStd { mean: 0.0, std: 0.0 },
                recall_original: MeanStd { mean: 0.0, std: 0.0 },
                recall_perturbed: MeanStd { mean: 0.0, std: 0.0 },
            },
            per_user: users,
            groups: None,
            per_test: vec![],
        }
    }

    #[test]
    fn ten_users_split_two_six_two() {
        let users = (0..10).map(|u| user(u, u as f64 / 10.0, 0.5)).collect();
        let g = user_group_breakdown(&report_with(users)).unwrap();
        assert_eq!((g.high.size, g.mid.size, g.low.size), (2, 6, 2));
        assert_eq!(g.high_users, vec![9, 8]);
        assert_eq!(g.low_users, vec![1, 0]);
        assert!(!g.all_mrr_tied);
    }

    #[test]
    fn tied_mrr_falls_back_to_user_id() {
        let users = (0..7).map(|u| user(u, 0.3, 0.5)).collect();
        let g = user_group_breakdown(&report_with(users)).unwrap();
        assert!(g.all_mrr_tied);
        assert_eq!(g.high_users, vec![0, 1]);
        assert_eq!(g.low_users, vec![5, 6]);
    }

    #[test]
    fn too_few_users() {
        let users = (0..4).map(|u| user(u, 0.3, 0.5)).collect();
        assert!(user_group_breakdown(&report_with(users)).is_err());
    }
}
