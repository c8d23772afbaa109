//! The stability measurement protocol.
//!
//! For every seed: train `M` on the original training split and rank each
//! test interaction; pick targets and edit the training data; train `M'`
//! with the same seed and rank again; then compare the two rank lists of
//! every test interaction. `M` and `M'` share initialization, negative
//! sampling and iteration order, so the edit is the only source of
//! divergence.

mod bench;
mod report;

use std::path::PathBuf;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    filter_min_activity, item_popularity, load_interactions, synth_generate, temporal_split,
    Dataset, LoadOptions, PopularityIndex, SynthConfig, TemporalSplit,
};
use crate::idag::{build_idag, cascading_scores, CascadeScores, Idag};
use crate::metrics::{
    jaccard_top_k, rbo, rbo_normalized, recall_at_k, reciprocal_rank, wilcoxon_signed_rank,
    MetricParams, WilcoxonResult,
};
use crate::model::{ModelAdapter, ModelConfig, RankedTest, SeqEmbAdapter};
use crate::perturb::{apply_all, plan_perturbations, Perturbation, PerturbationSpec, TargetVariant};
use crate::{Error, Result};

pub use bench::{
    bench_dataset, runtime_benchmark, time_idag_once, time_idag_phase, BenchConfig, BenchRow, BenchTable, Timing,
};
pub use report::{
    user_group_breakdown, write_comparison_files, write_report_files, write_sweep_files,
    GroupStats, GroupSummary, MeanStd, SeedSummary, StabilityReport, TestRow, UserSummary,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synth {
        #[serde(flatten)]
        config: SynthConfig,
        #[serde(default)]
        seed: u64,
    },
    File {
        path: PathBuf,
        #[serde(default, flatten)]
        options: LoadOptions,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synth {
            config: SynthConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Users with fewer interactions are dropped before splitting.
    pub min_count: usize,
    pub split_frac: f64,
    pub model: ModelConfig,
    pub perturbation: PerturbationSpec,
    pub metrics: MetricParams,
    pub seeds: Vec<u64>,
    /// Per-user window for the dependency DAG; falls back to the model's
    /// `max_seq_len`.
    pub idag_max_seq_len: Option<usize>,
    pub output: Option<PathBuf>,
    /// Seeds evaluated concurrently.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            min_count: 10,
            split_frac: 0.9,
            model: ModelConfig::default(),
            perturbation: PerturbationSpec::default(),
            metrics: MetricParams::default(),
            seeds: vec![0, 1, 2],
            idag_max_seq_len: None,
            output: None,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Validation("at least one seed is required".into()));
        }
        if self.metrics.k == 0 {
            return Err(Error::Validation("K must be >= 1".into()));
        }
        self.metrics.rbo.validate().map_err(|e| Error::Validation(e.to_string()))?;
        if self.perturbation.k == 0 {
            return Err(Error::Validation("perturbation k must be >= 1".into()));
        }
        if self.min_count == 0 {
            return Err(Error::Validation("min_count must be >= 1".into()));
        }
        if !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return Err(Error::Validation("split_frac must lie in (0, 1)".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Validation("jobs must be >= 1".into()));
        }
        if let DataSource::Synth { config, .. } = &self.data {
            config.validate()?;
        }
        self.model.validate()
    }

    fn idag_window(&self) -> Option<usize> {
        self.idag_max_seq_len.or(self.model.max_seq_len)
    }
}

/// Data shared by every seed of one experiment.
pub struct Prepared {
    pub split: TemporalSplit,
    pub popularity: PopularityIndex,
    pub casper: Option<(Idag, CascadeScores)>,
}

impl Prepared {
    fn casper_ref(&self) -> Option<(&Idag, &CascadeScores)> {
        self.casper.as_ref().map(|(g, s)| (g, s))
    }
}

/// Loads (or generates), filters, and splits the configured data.
pub fn load_split(cfg: &ExperimentConfig) -> Result<TemporalSplit> {
    let raw = match &cfg.data {
        DataSource::Synth { config, seed } => synth_generate(config, *seed)?,
        DataSource::File { path, options } => {
            let file = std::fs::File::open(path).map_err(|e| {
                Error::Validation(format!("cannot open {}: {e}", path.display()))
            })?;
            load_interactions(std::io::BufReader::new(file), options)?
        }
    };
    let filtered = filter_min_activity(&raw, cfg.min_count)?;
    temporal_split(&filtered, cfg.split_frac)
}

pub fn prepare(cfg: &ExperimentConfig, with_casper: bool) -> Result<Prepared> {
    let split = load_split(cfg)?;
    let popularity = item_popularity(&split.train)?;
    let casper = if with_casper {
        let g = build_idag(&split.train, cfg.idag_window())?;
        let scores = cascading_scores(&g);
        info!(
            "dependency DAG: {} nodes, {} zero in-degree, max score {:?}",
            g.node_count(),
            scores.z(),
            scores.max_score()
        );
        Some((g, scores))
    } else {
        None
    };
    Ok(Prepared {
        split,
        popularity,
        casper,
    })
}

/// Everything measured for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub edits: Vec<Perturbation>,
    pub rows: Vec<TestRow>,
}

fn score_runs(
    seed: u64,
    edits: Vec<Perturbation>,
    before: &[RankedTest],
    after: &[RankedTest],
    metrics: &MetricParams,
) -> Result<SeedRun> {
    if before.len() != after.len() {
        return Err(Error::Contract("rank-list runs differ in length".into()));
    }
    let rows = before
        .par_iter()
        .zip(after)
        .map(|(a, b)| {
            if a.test != b.test {
                return Err(Error::Contract("rank-list runs are misaligned".into()));
            }
            let truth = a.test.item;
            Ok(TestRow {
                seed,
                test: a.test.seq_index,
                user: a.test.user,
                rbo: rbo(&a.list, &b.list, metrics.rbo)?,
                rbo_normalized: rbo_normalized(&a.list, &b.list, metrics.rbo)?,
                jaccard: jaccard_top_k(&a.list, &b.list, metrics.k.min(a.list.len()))?,
                rr_original: reciprocal_rank(&a.list, truth)?,
                rr_perturbed: reciprocal_rank(&b.list, truth)?,
                recall_original: recall_at_k(&a.list, truth, metrics.k)?,
                recall_perturbed: recall_at_k(&b.list, truth, metrics.k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedRun { seed, edits, rows })
}

fn retrain_and_score<A: ModelAdapter>(
    adapter: &A,
    prepared: &Prepared,
    seed: u64,
    model_seed: u64,
    before: &[RankedTest],
    edits: Vec<Perturbation>,
    metrics: &MetricParams,
) -> Result<SeedRun> {
    let train = apply_all(&prepared.split.train, &edits)?;
    let split = TemporalSplit {
        train,
        test: prepared.split.test.clone(),
        frac: prepared.split.frac,
    };
    let fitted = adapter.fit(&split.train, model_seed)?;
    let after = adapter.rank_for_test(&fitted, &split)?;
    score_runs(seed, edits, before, &after, metrics)
}

fn baseline<A: ModelAdapter>(adapter: &A, prepared: &Prepared, seed: u64) -> Result<Vec<RankedTest>> {
    let fitted = adapter.fit(&prepared.split.train, seed)?;
    adapter.rank_for_test(&fitted, &prepared.split)
}

fn seed_run<A: ModelAdapter>(
    adapter: &A,
    prepared: &Prepared,
    spec: &PerturbationSpec,
    metrics: &MetricParams,
    seed: u64,
    perturbed_model_seed: u64,
) -> Result<SeedRun> {
    let before = baseline(adapter, prepared, seed)?;
    let edits = plan_perturbations(
        &prepared.split.train,
        spec,
        seed,
        &prepared.popularity,
        prepared.casper_ref(),
    )?;
    info!("seed {seed}: {} edit(s) {:?}", edits.len(), edits);
    retrain_and_score(adapter, prepared, seed, perturbed_model_seed, &before, edits, metrics)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))
}

/// Runs `f` for every seed, `jobs` seeds at a time, keeping seed order.
fn per_seed<T: Send>(
    cfg: &ExperimentConfig,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let run = || {
        cfg.seeds
            .par_iter()
            .map(|&s| f(s).map_err(|e| e.with_seed(s)))
            .collect::<Result<Vec<T>>>()
    };
    if cfg.jobs == 1 {
        cfg.seeds
            .iter()
            .map(|&s| f(s).map_err(|e| e.with_seed(s)))
            .collect()
    } else {
        pool(cfg.jobs)?.install(run)
    }
}

/// [`run_stability`] with an explicit model adapter.
pub fn run_stability_with<A: ModelAdapter>(adapter: &A, cfg: &ExperimentConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let with_casper =
        cfg.perturbation.kind.is_some() && cfg.perturbation.strategy == TargetVariant::Casper;
    let prepared = prepare(cfg, with_casper)?;
    let runs = per_seed(cfg, |seed| {
        seed_run(adapter, &prepared, &cfg.perturbation, &cfg.metrics, seed, seed)
    })?;
    StabilityReport::assemble(cfg.clone(), runs)
}

/// Trains `M` and `M'` for every seed and compares their rank lists.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<StabilityReport> {
    run_stability_with(&SeqEmbAdapter { config: cfg.model }, cfg)
}

fn check_control(report: &StabilityReport) -> Result<()> {
    if let Some(row) = report
        .per_test
        .iter()
        .find(|r| r.rbo_normalized != 1.0 || r.jaccard != 1.0)
    {
        return Err(Error::Determinism(format!(
            "seed {}: rank lists differ at test interaction {} (user {}): rbo_normalized {}, jaccard {}",
            row.seed, row.test, row.user, row.rbo_normalized, row.jaccard
        )));
    }
    Ok(())
}

/// Trains twice without any edit and requires identical rank lists for
/// every test interaction.
pub fn run_control(cfg: &ExperimentConfig) -> Result<StabilityReport> {
    let mut cfg = cfg.clone();
    cfg.perturbation.kind = None;
    let report = run_stability(&cfg)?;
    check_control(&report)?;
    Ok(report)
}

/// Control run where `M'` is trained with `seed + seed_offset`. A non-zero
/// offset must trip the determinism check.
pub fn run_control_with_offset(cfg: &ExperimentConfig, seed_offset: u64) -> Result<StabilityReport> {
    let mut cfg = cfg.clone();
    cfg.perturbation.kind = None;
    cfg.validate()?;
    let adapter = SeqEmbAdapter { config: cfg.model };
    let prepared = prepare(&cfg, false)?;
    let runs = per_seed(&cfg, |seed| {
        seed_run(
            &adapter,
            &prepared,
            &cfg.perturbation,
            &cfg.metrics,
            seed,
            seed.wrapping_add(seed_offset),
        )
    })?;
    let report = StabilityReport::assemble(cfg.clone(), runs)?;
    check_control(&report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub strategies: Vec<PerturbationSpec>,
    pub reports: Vec<StabilityReport>,
    /// Two-sided Wilcoxon on per-seed mean RBO; `None` where skipped.
    pub wilcoxon: Vec<Vec<Option<WilcoxonResult>>>,
    pub warnings: Vec<String>,
}

impl StrategyComparison {
    pub fn per_seed_rbo(&self, strategy: usize) -> Vec<f64> {
        self.reports[strategy].seeds.iter().map(|s| s.rbo).collect()
    }
}

/// Runs every strategy over the same seeds and compares them pairwise.
pub fn compare_strategies(
    cfg: &ExperimentConfig,
    strategies: &[PerturbationSpec],
) -> Result<StrategyComparison> {
    if strategies.len() < 2 {
        return Err(Error::Validation("compare needs at least two strategies".into()));
    }
    let mut warnings = Vec::new();
    if cfg.seeds.len() < 10 {
        let msg = format!(
            "only {} seeds; paired comparisons are usually run with at least 10",
            cfg.seeds.len()
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let reports = strategies
        .iter()
        .map(|spec| {
            let mut c = cfg.clone();
            c.perturbation = *spec;
            run_stability(&c)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_seed: Vec<Vec<f64>> = reports
        .iter()
        .map(|r| r.seeds.iter().map(|s| s.rbo).collect())
        .collect();
    let n = strategies.len();
    let mut wilcoxon = vec![vec![None; n]; n];
    for a in 0..n {
        for b in 0..n {
            match wilcoxon_signed_rank(&per_seed[a], &per_seed[b]) {
                Ok(w) => wilcoxon[a][b] = Some(w),
                Err(e) => {
                    if a < b {
                        let msg = format!("wilcoxon skipped for strategies {a} vs {b}: {e}");
                        warn!("{msg}");
                        warnings.push(msg);
                    }
                }
            }
        }
    }
    Ok(StrategyComparison {
        strategies: strategies.to_vec(),
        reports,
        wilcoxon,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub ks: Vec<usize>,
    pub reports: Vec<StabilityReport>,
}

/// CASPER with `k` edits for every `k` in `ks`, fitting `M` once per seed.
/// Targets for a smaller `k` are a prefix of those for a larger one.
pub fn sweep_k(cfg: &ExperimentConfig, ks: &[usize]) -> Result<SweepReport> {
    cfg.validate()?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Validation("k values must be >= 1".into()));
    }
    if cfg.perturbation.strategy != TargetVariant::Casper || cfg.perturbation.kind.is_none() {
        return Err(Error::Validation("sweep-k needs the casper strategy and an edit kind".into()));
    }
    let k_max = *ks.iter().max().expect("non-empty");
    let adapter = SeqEmbAdapter { config: cfg.model };
    let prepared = prepare(cfg, true)?;
    let spec = PerturbationSpec {
        k: k_max,
        ..cfg.perturbation
    };
    // per seed: one run per k
    let runs: Vec<Vec<SeedRun>> = per_seed(cfg, |seed| {
        let before = baseline(&adapter, &prepared, seed)?;
        let edits = plan_perturbations(
            &prepared.split.train,
            &spec,
            seed,
            &prepared.popularity,
            prepared.casper_ref(),
        )?;
        ks.iter()
            .map(|&k| {
                retrain_and_score(
                    &adapter,
                    &prepared,
                    seed,
                    seed,
                    &before,
                    edits[..k].to_vec(),
                    &cfg.metrics,
                )
            })
            .collect()
    })?;
    let reports = ks
        .iter()
        .enumerate()
        .map(|(idx, &k)| {
            let mut c = cfg.clone();
            c.perturbation.k = k;
            StabilityReport::assemble(c, runs.iter().map(|r| r[idx].clone()).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        ks: ks.to_vec(),
        reports,
    })
}

/// Popularity ranking: every test interaction gets the same list of items
/// by training count. A reference point for next-item metrics.
pub fn popularity_mrr(split: &TemporalSplit) -> Result<f64> {
    let pop = item_popularity(&split.train)?;
    let list = crate::metrics::RankList::new(pop.order.clone(), split.train.n_items())?;
    let rr = split
        .test
        .interactions()
        .iter()
        .map(|x| reciprocal_rank(&list, x.item))
        .collect::<Result<Vec<_>>>()?;
    Ok(rr.iter().sum::<f64>() / rr.len() as f64)
}

/// Builds the DAG for a dataset as the harness would for CASPER.
pub fn casper_graph(train: &Dataset, window: Option<usize>) -> Result<(Idag, CascadeScores)> {
    let g = build_idag(train, window)?;
    let s = cascading_scores(&g);
    Ok((g, s))
}
