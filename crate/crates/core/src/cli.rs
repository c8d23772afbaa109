//! `rankstab` command line.
//!
//! Experiment flags mirror [`ExperimentConfig`]; `--config` loads a JSON
//! config first and any flag given on the command line overrides it.
//! Exit codes: 0 success, 1 invalid arguments or input, 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{
    load_interactions, synth_generate, write_id_map, ColumnSpec, Delimiter, LoadOptions,
    SynthConfig,
};
use crate::harness::{
    compare_strategies, run_control, run_stability, runtime_benchmark, sweep_k,
    write_comparison_files, write_report_files, write_sweep_files, BenchConfig, DataSource,
    ExperimentConfig,
};
use crate::idag::{build_idag, cascading_scores, select_targets};
use crate::perturb::{EditKind, ItemStrategy, PerturbationSpec, TargetVariant};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rankstab", version, about = "Rank-list sensitivity of sequential recommenders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Measure rank-list stability under one perturbation setting.
    Stability {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Train twice without any edit and require identical rank lists.
        #[arg(long)]
        control: bool,
    },
    /// Compare target strategies over shared seeds.
    Compare {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated strategies.
        #[arg(long, value_delimiter = ',', default_value = "random,earliest_random,latest_random,casper")]
        strategies: Vec<String>,
    },
    /// CASPER with several perturbation counts.
    SweepK {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        ks: Vec<usize>,
    },
    /// Build the dependency DAG of a training log and report cascading scores.
    Idag {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        max_seq_len: Option<usize>,
        /// Number of top-scoring targets to print.
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, env = "RANKSTAB_OUT", default_value = "rankstab-out")]
        out: PathBuf,
    },
    /// Time the DAG phase and the full pipeline over growing synthetic logs.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "10000,20000,40000")]
        sizes: Vec<String>,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 100)]
        items: usize,
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
        /// Skip the full-pipeline timing.
        #[arg(long)]
        no_pipeline: bool,
        #[arg(long, env = "RANKSTAB_OUT", default_value = "rankstab-out")]
        out: PathBuf,
    },
    /// Write a synthetic interaction log as `user,item,timestamp` CSV.
    Synth {
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args, Default)]
struct SynthArgs {
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    events: Option<usize>,
    #[arg(long)]
    concentration: Option<f64>,
}

impl SynthArgs {
    fn apply(&self, cfg: &mut SynthConfig) {
        set(&mut cfg.n_users, self.users);
        set(&mut cfg.n_items, self.items);
        set(&mut cfg.events_per_user, self.events);
        set(&mut cfg.concentration, self.concentration);
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Use a generated log instead of an input file.
    #[arg(long, conflicts_with = "input")]
    synth: bool,
    #[command(flatten)]
    synth_args: SynthArgs,
    #[arg(long)]
    data_seed: Option<u64>,
    /// Interaction log (CSV or TSV).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "tsv"])]
    format: Option<String>,
    /// The input starts with a header row.
    #[arg(long)]
    header: bool,
    /// User column: a header name or a zero-based index.
    #[arg(long)]
    user_col: Option<String>,
    #[arg(long)]
    item_col: Option<String>,
    #[arg(long)]
    time_col: Option<String>,
}

impl DataArgs {
    fn load_options(&self, base: Option<&LoadOptions>) -> Result<LoadOptions> {
        let mut opts = base.cloned().unwrap_or_default();
        if let Some(f) = &self.format {
            opts.delimiter = if f == "tsv" { Delimiter::Tsv } else { Delimiter::Csv };
        }
        if self.header {
            opts.has_header = true;
        }
        let cols = [&self.user_col, &self.item_col, &self.time_col];
        if cols.iter().any(|c| c.is_some()) {
            let given: Vec<String> = cols
                .iter()
                .zip(["0", "1", "2"])
                .map(|(c, d)| (*c).clone().unwrap_or_else(|| d.to_string()))
                .collect();
            let idx: Option<Vec<usize>> = given.iter().map(|s| s.parse().ok()).collect();
            opts.columns = match idx {
                Some(i) => ColumnSpec::Indices {
                    user: i[0],
                    item: i[1],
                    timestamp: i[2],
                },
                None => ColumnSpec::Names {
                    user: given[0].clone(),
                    item: given[1].clone(),
                    timestamp: given[2].clone(),
                },
            };
        }
        Ok(opts)
    }

    /// Overrides the data source of `base` with whatever was given here.
    fn apply(&self, base: &DataSource) -> Result<DataSource> {
        if let Some(path) = &self.input {
            let prev = match base {
                DataSource::File { options, .. } => Some(options),
                _ => None,
            };
            return Ok(DataSource::File {
                path: path.clone(),
                options: self.load_options(prev)?,
            });
        }
        match base {
            DataSource::Synth { config, seed } => {
                let mut config = config.clone();
                self.synth_args.apply(&mut config);
                Ok(DataSource::Synth {
                    config,
                    seed: self.data_seed.unwrap_or(*seed),
                })
            }
            DataSource::File { path, options } if !self.synth => Ok(DataSource::File {
                path: path.clone(),
                options: self.load_options(Some(options))?,
            }),
            DataSource::File { .. } => {
                let mut config = SynthConfig::default();
                self.synth_args.apply(&mut config);
                Ok(DataSource::Synth {
                    config,
                    seed: self.data_seed.unwrap_or(0),
                })
            }
        }
    }
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    min_count: Option<usize>,
    #[arg(long)]
    split_frac: Option<f64>,

    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    drift: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    max_seq_len: Option<usize>,

    /// loo, replace, insert, or none.
    #[arg(long)]
    kind: Option<String>,
    /// random, earliest_random, latest_random, or casper.
    #[arg(long)]
    strategy: Option<String>,
    /// random, popular, or unpopular.
    #[arg(long)]
    item_strategy: Option<String>,
    /// Number of interactions to perturb.
    #[arg(short, long)]
    k: Option<usize>,
    /// Fix target selection across seeds.
    #[arg(long)]
    target_seed: Option<u64>,

    /// RBO persistence.
    #[arg(long)]
    p: Option<f64>,
    /// Cut-off for top-K Jaccard and Recall@K.
    #[arg(long)]
    top_k: Option<usize>,

    /// Number of seeds, starting at --seed-start.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed_start: u64,
    /// Explicit comma-separated seeds.
    #[arg(long, value_delimiter = ',', conflicts_with = "seeds")]
    seed_list: Option<Vec<u64>>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, env = "RANKSTAB_OUT")]
    out: Option<PathBuf>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn parse_kind(s: &str) -> Result<Option<EditKind>> {
    match s {
        "loo" => Ok(Some(EditKind::Loo)),
        "replace" => Ok(Some(EditKind::Replace)),
        "insert" => Ok(Some(EditKind::Insert)),
        "none" => Ok(None),
        _ => Err(Error::Validation(format!("unknown edit kind {s:?}"))),
    }
}

fn parse_strategy(s: &str) -> Result<TargetVariant> {
    TargetVariant::parse(s).ok_or_else(|| {
        Error::Validation(format!(
            "unknown strategy {s:?} (expected random, earliest_random, latest_random, casper)"
        ))
    })
}

fn parse_item_strategy(s: &str) -> Result<ItemStrategy> {
    match s {
        "random" => Ok(ItemStrategy::Random),
        "popular" => Ok(ItemStrategy::Popular),
        "unpopular" => Ok(ItemStrategy::Unpopular),
        _ => Err(Error::Validation(format!("unknown item strategy {s:?}"))),
    }
}

const DEFAULT_OUT: &str = "rankstab-out";

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::Validation(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text)?
            }
            None => ExperimentConfig::default(),
        };
        cfg.data = self.data.apply(&cfg.data)?;
        set(&mut cfg.min_count, self.min_count);
        set(&mut cfg.split_frac, self.split_frac);
        set(&mut cfg.model.dim, self.dim);
        set(&mut cfg.model.learning_rate, self.lr);
        set(&mut cfg.model.drift, self.drift);
        set(&mut cfg.model.epochs, self.epochs);
        set(&mut cfg.model.negatives, self.negatives);
        if self.max_seq_len.is_some() {
            cfg.model.max_seq_len = self.max_seq_len;
        }
        if let Some(k) = &self.kind {
            cfg.perturbation.kind = parse_kind(k)?;
        }
        if let Some(s) = &self.strategy {
            cfg.perturbation.strategy = parse_strategy(s)?;
        }
        if let Some(s) = &self.item_strategy {
            cfg.perturbation.item_strategy = parse_item_strategy(s)?;
        }
        set(&mut cfg.perturbation.k, self.k);
        if self.target_seed.is_some() {
            cfg.perturbation.seed = self.target_seed;
        }
        set(&mut cfg.metrics.rbo.p, self.p);
        set(&mut cfg.metrics.k, self.top_k);
        if let Some(n) = self.seeds {
            cfg.seeds = (0..n as u64).map(|s| self.seed_start + s).collect();
        }
        if let Some(list) = &self.seed_list {
            cfg.seeds = list.clone();
        }
        set(&mut cfg.jobs, self.jobs);
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        EXIT_INVALID
    } else {
        EXIT_RUNTIME
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Stability { exp, control } => {
            let cfg = exp.resolve()?;
            let report = if control {
                run_control(&cfg)?
            } else {
                run_stability(&cfg)?
            };
            let dir = out_dir(&cfg);
            write_report_files(&report, &dir)?;
            let s = &report.summary;
            println!(
                "rbo {:.6} ± {:.6}  rbo_normalized {:.6} ± {:.6}  jaccard@{} {:.6} ± {:.6}  mrr {:.6} -> {:.6}",
                s.rbo.mean,
                s.rbo.std,
                s.rbo_normalized.mean,
                s.rbo_normalized.std,
                cfg.metrics.k,
                s.jaccard.mean,
                s.jaccard.std,
                s.mrr_original.mean,
                s.mrr_perturbed.mean
            );
            if control {
                println!("control passed: all rank lists identical");
            }
            println!("wrote {}", dir.display());
        }
        Command::Compare { exp, strategies } => {
            let cfg = exp.resolve()?;
            let specs = strategies
                .iter()
                .map(|s| {
                    Ok(PerturbationSpec {
                        strategy: parse_strategy(s)?,
                        ..cfg.perturbation
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let cmp = compare_strategies(&cfg, &specs)?;
            for (name, r) in strategies.iter().zip(&cmp.reports) {
                println!(
                    "{name:>16}  rbo {:.6} ± {:.6}  jaccard {:.6}",
                    r.summary.rbo.mean, r.summary.rbo.std, r.summary.jaccard.mean
                );
            }
            let dir = out_dir(&cfg);
            write_comparison_files(&cmp, &dir)?;
            println!("wrote {}", dir.display());
        }
        Command::SweepK { exp, ks } => {
            let mut cfg = exp.resolve()?;
            if exp.strategy.is_none() {
                cfg.perturbation.strategy = TargetVariant::Casper;
            }
            let sweep = sweep_k(&cfg, &ks)?;
            for (k, r) in sweep.ks.iter().zip(&sweep.reports) {
                println!("k={k:<4} jaccard {:.6}  rbo {:.6}", r.summary.jaccard.mean, r.summary.rbo.mean);
            }
            let dir = out_dir(&cfg);
            write_sweep_files(&sweep, &dir)?;
            println!("wrote {}", dir.display());
        }
        Command::Idag {
            data,
            max_seq_len,
            top,
            out,
        } => cmd_idag(&data, max_seq_len, top, &out)?,
        Command::Bench {
            sizes,
            trials,
            users,
            items,
            data_seed,
            no_pipeline,
            out,
        } => {
            let sizes = sizes
                .iter()
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Validation(format!("bad size {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let table = runtime_benchmark(&BenchConfig {
                sizes,
                trials,
                n_users: users,
                n_items: items,
                data_seed,
                pipeline: !no_pipeline,
            })?;
            fs::create_dir_all(&out)?;
            let path = out.join("time_vs_size.csv");
            table.write_csv(fs::File::create(&path)?)?;
            for r in &table.rows {
                println!(
                    "{:>9} interactions  idag {:.4}s (median of {})",
                    r.interactions, r.idag.median, r.trials
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Synth { synth, seed, output } => {
            let mut cfg = SynthConfig::default();
            synth.apply(&mut cfg);
            let ds = synth_generate(&cfg, seed)?;
            let mut w = csv::Writer::from_path(&output)?;
            w.write_record(["user", "item", "timestamp"])?;
            for x in ds.interactions() {
                w.write_record([x.user.to_string(), x.item.to_string(), x.timestamp.to_string()])?;
            }
            w.flush()?;
            println!("wrote {} interactions to {}", ds.len(), output.display());
        }
    }
    Ok(())
}

fn cmd_idag(data: &DataArgs, max_seq_len: Option<usize>, top: usize, out: &Path) -> Result<()> {
    let train = match (&data.input, data.synth) {
        (Some(path), _) => {
            let file = fs::File::open(path)
                .map_err(|e| Error::Validation(format!("cannot open {}: {e}", path.display())))?;
            load_interactions(std::io::BufReader::new(file), &data.load_options(None)?)?
        }
        (None, true) => {
            let mut cfg = SynthConfig::default();
            data.synth_args.apply(&mut cfg);
            synth_generate(&cfg, data.data_seed.unwrap_or(0))?
        }
        (None, false) => return Err(Error::Validation("idag needs --input or --synth".into())),
    };
    let g = build_idag(&train, max_seq_len)?;
    let scores = cascading_scores(&g);
    fs::create_dir_all(out)?;
    g.write_edge_list(std::io::BufWriter::new(fs::File::create(out.join("edges.txt"))?))?;
    scores.write_csv(&g, fs::File::create(out.join("scores.csv"))?)?;
    if let Some(ids) = train.ids() {
        write_id_map(fs::File::create(out.join("users_map.csv"))?, &ids.users)?;
        write_id_map(fs::File::create(out.join("items_map.csv"))?, &ids.items)?;
    }
    println!("nodes {}", g.node_count());
    println!("edges {}", g.edge_count());
    println!("zero_in_degree {}", scores.z());
    println!("node,seq_index,user,item,timestamp,score");
    for n in select_targets(&g, &scores, top.min(scores.z()).max(1))? {
        let x = train.get(g.position(n));
        println!(
            "{n},{},{},{},{},{}",
            x.seq_index,
            x.user,
            x.item,
            x.timestamp,
            scores.score_of(n).unwrap_or(0)
        );
    }
    Ok(())
}
