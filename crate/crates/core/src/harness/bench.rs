//! Runtime scaling of the DAG phase and of the whole pipeline.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{run_stability, DataSource, ExperimentConfig};
use crate::dataset::{synth_generate, Dataset, SynthConfig};
use crate::idag::{build_idag, cascading_scores};
use crate::metrics::mean_std;
use crate::perturb::{EditKind, PerturbationSpec, TargetVariant};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Target interaction counts, ascending.
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// Users are fixed; events per user grow with the size.
    pub n_users: usize,
    pub n_items: usize,
    pub data_seed: u64,
    /// Also time a one-seed CASPER leave-one-out run per size.
    pub pipeline: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![10_000, 20_000, 40_000],
            trials: 3,
            n_users: 200,
            n_items: 100,
            data_seed: 0,
            pipeline: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub median: f64,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Timing {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let (mean, std) = mean_std(&sorted);
        Self {
            median,
            mean,
            std,
            min: sorted[0],
            max: sorted[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub size: usize,
    pub interactions: usize,
    pub nodes: usize,
    pub zero_in_degree: usize,
    pub trials: usize,
    /// Seconds for DAG build plus cascading scores.
    pub idag: Timing,
    pub pipeline: Option<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
}

fn synth_for(cfg: &BenchConfig, size: usize) -> SynthConfig {
    SynthConfig {
        n_users: cfg.n_users,
        n_items: cfg.n_items,
        events_per_user: size.div_ceil(cfg.n_users).max(2),
        ..SynthConfig::default()
    }
}

/// The synthetic log of about `size` interactions the benchmark times.
pub fn bench_dataset(cfg: &BenchConfig, size: usize) -> Result<Dataset> {
    synth_generate(&synth_for(cfg, size), cfg.data_seed)
}

/// One timed DAG build + scoring; returns (seconds, nodes, Z).
pub fn time_idag_once(ds: &Dataset) -> Result<(f64, usize, usize)> {
    let start = Instant::now();
    let g = build_idag(ds, None)?;
    let scores = cascading_scores(&g);
    Ok((start.elapsed().as_secs_f64(), g.node_count(), scores.z()))
}

/// Times DAG build + scoring on a synthetic log of about `size`
/// interactions; returns (interactions, nodes, Z, per-trial seconds). One
/// untimed warm-up build runs first.
pub fn time_idag_phase(cfg: &BenchConfig, size: usize) -> Result<(usize, usize, usize, Vec<f64>)> {
    let ds = bench_dataset(cfg, size)?;
    let (_, nodes, z) = time_idag_once(&ds)?;
    let samples = (0..cfg.trials)
        .map(|_| time_idag_once(&ds).map(|t| t.0))
        .collect::<Result<Vec<_>>>()?;
    Ok((ds.len(), nodes, z, samples))
}

pub fn runtime_benchmark(cfg: &BenchConfig) -> Result<BenchTable> {
    if cfg.sizes.is_empty() {
        return Err(Error::Validation("no benchmark sizes given".into()));
    }
    if cfg.sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Validation("benchmark sizes must be ascending".into()));
    }
    if cfg.trials == 0 || cfg.sizes.contains(&0) {
        return Err(Error::Validation("trials and sizes must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        let (interactions, nodes, z, samples) = time_idag_phase(cfg, size)?;
        let pipeline = if cfg.pipeline {
            let exp = ExperimentConfig {
                data: DataSource::Synth {
                    config: synth_for(cfg, size),
                    seed: cfg.data_seed,
                },
                min_count: 1,
                perturbation: PerturbationSpec {
                    kind: Some(EditKind::Loo),
                    strategy: TargetVariant::Casper,
                    ..PerturbationSpec::default()
                },
                seeds: vec![0],
                ..ExperimentConfig::default()
            };
            let mut t = Vec::with_capacity(cfg.trials);
            for _ in 0..cfg.trials {
                let start = Instant::now();
                run_stability(&exp)?;
                t.push(start.elapsed().as_secs_f64());
            }
            Some(Timing::from_samples(&t))
        } else {
            None
        };
        log::info!("bench size {size}: idag {:?}", Timing::from_samples(&samples));
        rows.push(BenchRow {
            size,
            interactions,
            nodes,
            zero_in_degree: z,
            trials: cfg.trials,
            idag: Timing::from_samples(&samples),
            pipeline,
        });
    }
    Ok(BenchTable { rows })
}

impl BenchTable {
    /// One row per size: timings in seconds, blank pipeline columns when the
    /// pipeline was not timed.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "size",
            "interactions",
            "nodes",
            "zero_in_degree",
            "trials",
            "idag_median_s",
            "idag_mean_s",
            "idag_std_s",
            "pipeline_median_s",
            "pipeline_mean_s",
            "pipeline_std_s",
        ])?;
        for r in &self.rows {
            let p = |f: fn(&Timing) -> f64| r.pipeline.as_ref().map(|t| f(t).to_string()).unwrap_or_default();
            w.write_record([
                r.size.to_string(),
                r.interactions.to_string(),
                r.nodes.to_string(),
                r.zero_in_degree.to_string(),
                r.trials.to_string(),
                r.idag.median.to_string(),
                r.idag.mean.to_string(),
                r.idag.std.to_string(),
                p(|t| t.median),
                p(|t| t.mean),
                p(|t| t.std),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(Timing::from_samples(&[3.0, 1.0, 2.0]).median, 2.0);
        assert_eq!(Timing::from_samples(&[4.0, 1.0, 2.0, 3.0]).median, 2.5);
    }

    #[test]
    fn one_row_per_size() {
        let cfg = BenchConfig {
            sizes: vec![400, 800],
            trials: 3,
            n_users: 20,
            n_items: 10,
            pipeline: false,
            ..BenchConfig::default()
        };
        let t = runtime_benchmark(&cfg).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[1].interactions, 800);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn rejects_bad_sizes() {
        let mut cfg = BenchConfig::default();
        cfg.sizes = vec![];
        assert!(runtime_benchmark(&cfg).is_err());
        cfg.sizes = vec![20, 10];
        assert!(runtime_benchmark(&cfg).is_err());
    }
}
