//! Command implementations behind the `mstpart` binary.
//!
//! Each command returns a [`Report`]: key=value metric lines (or CSV for
//! sweeps) plus the feasibility that decides the exit status.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use mstpart::{
    epsilon_from_ubfactor, improve_partition, parse_hmetis, partition_hypergraph, read_partition, write_partition,
    BalanceSpec, ClusterRule, Hypergraph, Partition, PartitionConfig, PipelineResult,
};

pub const EXIT_FEASIBLE: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

/// Output of a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub feasible: bool,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.feasible {
            EXIT_FEASIBLE
        } else {
            EXIT_INFEASIBLE
        }
    }
}

/// Balance tolerance used when neither `--epsilon` nor `--ubfactor` is given.
pub fn default_epsilon(k: usize) -> f64 {
    match k {
        0..=2 => 0.04,
        3 => 0.06,
        4 => 0.08,
        _ => 0.02,
    }
}

#[derive(Debug, Clone, Args)]
pub struct BalanceArgs {
    /// Number of blocks.
    #[arg(long)]
    pub k: usize,
    /// Imbalance tolerance: caps are (1 + epsilon) * ceil(total / k).
    #[arg(long, conflicts_with = "ubfactor")]
    pub epsilon: Option<f64>,
    /// hMetis-style UBfactor, converted to epsilon.
    #[arg(long)]
    pub ubfactor: Option<f64>,
}

impl BalanceArgs {
    pub fn resolve_epsilon(&self) -> Result<f64> {
        match (self.epsilon, self.ubfactor) {
            (Some(e), _) => Ok(e),
            (None, Some(u)) => Ok(epsilon_from_ubfactor(u, self.k)?),
            (None, None) => Ok(default_epsilon(self.k)),
        }
    }
}

/// Pipeline knobs shared by `partition` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Hypergraph in hMetis format.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub balance: BalanceArgs,
    /// Number of embedding runs on the coarsest level.
    #[arg(long, default_value_t = 10)]
    pub num_init: usize,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Single-threaded evaluation with fixed reduction order.
    #[arg(long)]
    pub deterministic: bool,
    /// Weight of the clique term in the embedding objective (grid values).
    #[arg(long, value_delimiter = ',')]
    pub lambda1: Option<Vec<f64>>,
    /// Unit versus vertex-weighted balance mix (grid values).
    #[arg(long, value_delimiter = ',')]
    pub lambda2: Option<Vec<f64>>,
    /// Clique-term weight of the pairwise re-split objective (grid values).
    #[arg(long, value_delimiter = ',')]
    pub xi1: Option<Vec<f64>>,
    /// Balance versus separation mix of the pairwise objective (grid values).
    #[arg(long, value_delimiter = ',')]
    pub xi2: Option<Vec<f64>>,
    /// Similarity threshold of the initial spanning tree.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Cluster-count rules: `sqrt(n/2)`, `n/(5k)` or an integer.
    #[arg(long, value_delimiter = ',', value_parser = parse_cluster_rule)]
    pub p_rule: Option<Vec<ClusterRule>>,
    /// Iteration limit of the embedding solver.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Residual tolerance of the embedding solver.
    #[arg(long)]
    pub apg_tolerance: Option<f64>,
}

pub fn parse_cluster_rule(s: &str) -> Result<ClusterRule, String> {
    match s.trim() {
        "sqrt(n/2)" | "sqrt" => Ok(ClusterRule::SqrtHalf),
        "n/(5k)" | "fifth" => Ok(ClusterRule::FifthPerBlock),
        other => other
            .parse::<usize>()
            .map(ClusterRule::Fixed)
            .map_err(|_| format!("unknown cluster rule `{other}`")),
    }
}

impl RunArgs {
    pub fn config(&self) -> Result<PartitionConfig> {
        let mut c = PartitionConfig::new(self.balance.k, self.balance.resolve_epsilon()?);
        c.candidates.num_init = self.num_init;
        c.threads = self.threads;
        c.deterministic = self.deterministic;
        if let Some(v) = &self.lambda1 {
            c.candidates.lambda1 = v.clone();
        }
        if let Some(v) = &self.lambda2 {
            c.candidates.lambda2 = v.clone();
        }
        if let Some(v) = &self.xi1 {
            c.pairwise.xi1 = v.clone();
        }
        if let Some(v) = &self.xi2 {
            c.pairwise.xi2 = v.clone();
        }
        if let Some(t) = self.tau {
            c.candidates.tau = t;
        }
        if let Some(r) = &self.p_rule {
            c.candidates.cluster_rules = r.clone();
        }
        if let Some(m) = self.max_iters {
            c.candidates.apg.max_iters = m;
            c.pairwise.apg.max_iters = m;
        }
        if let Some(e) = self.apg_tolerance {
            c.candidates.apg.epsilon = e;
            c.pairwise.apg.epsilon = e;
        }
        if c.candidates.num_init == 0 {
            bail!("num-init must be at least 1");
        }
        Ok(c)
    }
}

fn read_hypergraph(path: &Path) -> Result<Hypergraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_hmetis(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_partition_file(path: &Path, h: &Hypergraph, k: usize) -> Result<Partition> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    read_partition(&text, h, k).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn ms(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1e3)
}

fn balance_lines(out: &mut String, p: &Partition, spec: &BalanceSpec) {
    let _ = writeln!(out, "cutsize={}", p.cutsize());
    let _ = writeln!(out, "k={}", spec.k);
    let _ = writeln!(out, "epsilon={}", spec.epsilon);
    let _ = writeln!(out, "block_weights={}", join(p.block_weights()));
    let _ = writeln!(out, "caps={}", join(&spec.upper_bounds));
    let _ = writeln!(out, "feasible={}", mstpart::is_feasible(p, spec));
}

/// Metric lines for a pipeline run. Timing keys start with `time_`.
pub fn partition_metrics(h: &Hypergraph, r: &PipelineResult, read: Duration, write: Duration) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "vertices={}", h.num_vertices());
    let _ = writeln!(out, "edges={}", h.num_edges());
    balance_lines(&mut out, &r.partition, &r.spec);
    let _ = writeln!(out, "level_sizes={}", join(&r.level_sizes));
    let _ = writeln!(out, "candidate_cutsizes={}", join(&r.candidate_cutsizes));
    if let Some(c) = r.chosen_candidate {
        let _ = writeln!(out, "chosen_candidate={c}");
    }
    let t = &r.timings;
    let _ = writeln!(out, "time_total_ms={}", ms(t.total));
    let _ = writeln!(out, "time_coarsening_ms={}", ms(t.coarsening));
    let _ = writeln!(out, "time_initial_ms={}", ms(t.initial));
    let _ = writeln!(out, "time_coarse_refinement_ms={}", ms(t.coarse_refinement));
    let _ = writeln!(out, "time_uncoarsening_ms={}", ms(t.uncoarsening));
    let _ = writeln!(out, "time_read_ms={}", ms(read));
    let _ = writeln!(out, "time_write_ms={}", ms(write));
    out
}

#[derive(Debug, Clone, Args)]
pub struct PartitionArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the metric lines here.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

/// Runs the full pipeline and writes the partition, even if infeasible.
pub fn cmd_partition(args: &PartitionArgs) -> Result<Report> {
    let config = args.run.config()?;
    let t = Instant::now();
    let h = read_hypergraph(&args.run.input)?;
    let read = t.elapsed();
    let result = partition_hypergraph(&h, &config)?;
    let t = Instant::now();
    write_file(&args.output, &write_partition(&result.partition))?;
    let write = t.elapsed();
    let text = partition_metrics(&h, &result, read, write);
    if let Some(m) = &args.metrics {
        write_file(m, &text)?;
    }
    Ok(Report {
        text,
        feasible: result.feasible,
    })
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    #[command(flatten)]
    pub balance: BalanceArgs,
}

/// Cutsize, connectivity histogram, block weights, caps and feasibility.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<Report> {
    let h = read_hypergraph(&args.input)?;
    let p = read_partition_file(&args.partition, &h, args.balance.k)?;
    let spec = BalanceSpec::for_hypergraph(&h, args.balance.k, args.balance.resolve_epsilon()?)?;
    Ok(evaluate_report(&h, &p, &spec))
}

pub fn evaluate_report(h: &Hypergraph, p: &Partition, spec: &BalanceSpec) -> Report {
    let mut hist = vec![0usize; p.k() + 1];
    for e in 0..h.num_edges() {
        hist[p.connectivity(e) as usize] += 1;
    }
    let mut text = String::new();
    balance_lines(&mut text, p, spec);
    let hist = hist
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > 0)
        .map(|(l, c)| format!("{l}:{c}"));
    let _ = writeln!(text, "connectivity_histogram={}", join(hist));
    Report {
        text,
        feasible: mstpart::is_feasible(p, spec),
    }
}

#[derive(Debug, Clone, Args)]
pub struct ImproveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    #[command(flatten)]
    pub balance: BalanceArgs,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub deterministic: bool,
}

/// Repairs (if needed) and refines an existing partition.
pub fn cmd_improve(args: &ImproveArgs) -> Result<Report> {
    let h = read_hypergraph(&args.input)?;
    let k = args.balance.k;
    let p = read_partition_file(&args.partition, &h, k)?;
    let mut config = PartitionConfig::new(k, args.balance.resolve_epsilon()?);
    config.threads = args.threads;
    config.deterministic = args.deterministic;
    let spec = BalanceSpec::for_hypergraph(&h, k, config.epsilon)?;
    let t = Instant::now();
    let r = improve_partition(&h, p, &spec, &config)?;
    let elapsed = t.elapsed();
    write_file(&args.output, &write_partition(&r.partition))?;
    let mut text = String::new();
    let _ = writeln!(text, "input_cutsize={}", r.input_cutsize);
    let _ = writeln!(text, "input_feasible={}", r.input_feasible);
    let repair = match r.repair {
        None => "not_needed",
        Some(true) => "succeeded",
        Some(false) => "failed",
    };
    let _ = writeln!(text, "repair={repair}");
    balance_lines(&mut text, &r.partition, &spec);
    let _ = writeln!(text, "ratio={:.6}", r.ratio());
    let _ = writeln!(text, "time_total_ms={}", ms(elapsed));
    Ok(Report {
        text,
        feasible: r.feasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    P,
    NumInit,
    Lambda1,
    Lambda2,
    Xi1,
    Xi2,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::P => "p",
            SweepAxis::NumInit => "num_init",
            SweepAxis::Lambda1 => "lambda1",
            SweepAxis::Lambda2 => "lambda2",
            SweepAxis::Xi1 => "xi1",
            SweepAxis::Xi2 => "xi2",
        }
    }

    fn defaults(self) -> Vec<String> {
        let v: &[&str] = match self {
            SweepAxis::P => &["sqrt(n/2)", "n/(5k)"],
            SweepAxis::NumInit => &["10"],
            SweepAxis::Lambda1 => &["0.9", "0.5", "0.15", "0.015"],
            SweepAxis::Lambda2 => &["1", "0.9", "0.8"],
            SweepAxis::Xi1 => &["0.5", "0.15"],
            SweepAxis::Xi2 => &["1", "0.8", "0.2"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Axis values (comma separated); defaults to the standard grid.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<String>>,
    #[command(flatten)]
    pub run: RunArgs,
    /// Write the CSV here instead of only reporting it.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Applies one axis value to `config`; returns the row label.
pub fn apply_axis(config: &mut PartitionConfig, axis: SweepAxis, value: &str) -> Result<String> {
    let num = || -> Result<f64> { value.trim().parse().with_context(|| format!("invalid {} value `{value}`", axis.name())) };
    match axis {
        SweepAxis::P => {
            let rule = parse_cluster_rule(value).map_err(anyhow::Error::msg)?;
            config.candidates.cluster_rules = vec![rule];
            return Ok(rule.label());
        }
        SweepAxis::NumInit => {
            let n: usize = value.trim().parse().with_context(|| format!("invalid num_init value `{value}`"))?;
            if n == 0 {
                bail!("num_init must be at least 1");
            }
            config.candidates.num_init = n;
        }
        SweepAxis::Lambda1 => config.candidates.lambda1 = vec![num()?],
        SweepAxis::Lambda2 => config.candidates.lambda2 = vec![num()?],
        SweepAxis::Xi1 => config.pairwise.xi1 = vec![num()?],
        SweepAxis::Xi2 => config.pairwise.xi2 = vec![num()?],
    }
    Ok(value.trim().to_string())
}

pub const SWEEP_HEADER: &str = "axis,value,cutsize,feasible,wall_ms";

/// One pipeline run per axis value; CSV rows of cutsize and wall time.
pub fn cmd_sweep(args: &SweepArgs) -> Result<Report> {
    let base = args.run.config()?;
    let h = read_hypergraph(&args.run.input)?;
    let values = args.values.clone().unwrap_or_else(|| args.axis.defaults());
    let mut csv = String::new();
    let _ = writeln!(csv, "{SWEEP_HEADER}");
    let mut all_feasible = true;
    for v in &values {
        let mut config = base.clone();
        let label = apply_axis(&mut config, args.axis, v)?;
        let r = partition_hypergraph(&h, &config)?;
        all_feasible &= r.feasible;
        let _ = writeln!(
            csv,
            "{},\"{}\",{},{},{}",
            args.axis.name(),
            label,
            r.partition.cutsize(),
            r.feasible,
            ms(r.timings.total)
        );
    }
    if let Some(path) = &args.csv {
        write_file(path, &csv)?;
    }
    Ok(Report {
        text: csv,
        feasible: all_feasible,
    })
}
