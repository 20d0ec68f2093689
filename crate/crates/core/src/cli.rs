//! Command-line driver: `run`, `compare` and `sweep`.
//!
//! Settings resolve in order flag > environment (output directory only) >
//! `--config` file > built-in default. The config file holds `key = value`
//! lines keyed by long flag name, e.g. `density = 0.2` or `dip-start = 10`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::controller::{compare_modes, run, ControlConfig, ControlMode};
use crate::error::{Error, Result};
use crate::metrics::{compare_results, summarize, Comparison, SimResult, Summary};
use crate::persistence::{
    bundle_json_bytes, emit_figures, series_csv_bytes, write_atomic, RunBundle,
};
use crate::population::Population;
use crate::targets::{target_from_file, triangular_target, TargetProfile};

pub const OUT_DIR_ENV: &str = "V2G_CA_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "v2g-ca", version, about = "Cellular-automaton V1G/V2G load-particle simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one population once and write its series and bundle.
    Run(ScenarioArgs),
    /// Simulate one population without and with V2G and draw the figures.
    Compare(ScenarioArgs),
    /// Repeat `compare` over a grid of seeds and aggregate the summaries.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// key = value file supplying defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of particles
    #[arg(long)]
    pub n: Option<usize>,
    /// Probability that a slot holds a charge in the initial schedules
    #[arg(long)]
    pub density: Option<f64>,
    /// Horizon (number of periods)
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Depth of the triangular dip as a fraction of the mean load
    #[arg(long, visible_alias = "target-fraction")]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub dip_start: Option<usize>,
    #[arg(long)]
    pub dip_end: Option<usize>,
    /// One-column CSV used instead of the triangular target
    #[arg(long)]
    pub target_file: Option<PathBuf>,
    /// direct | price
    #[arg(long)]
    pub mode: Option<ControlMode>,
    /// Allow discharge actions (run only; compare always does both)
    #[arg(long)]
    pub v2g: bool,
    /// Only particles that have charged before may discharge
    #[arg(long)]
    pub require_prior_charge: bool,
    #[arg(long)]
    pub max_discharges: Option<u32>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Number of consecutive seeds starting at --seed
    #[arg(long)]
    pub seeds: Option<usize>,
}

/// Fully resolved settings for one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub n: usize,
    pub density: f64,
    pub horizon: usize,
    pub seed: u64,
    pub fraction: f64,
    pub dip_start: usize,
    pub dip_end: usize,
    pub target_file: Option<PathBuf>,
    pub control: ControlConfig,
    pub out_dir: PathBuf,
    pub seeds: usize,
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Malformed {
            path: path.to_path_buf(),
            message: format!("line {}: expected key = value", i + 1),
        })?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

struct Defaults(BTreeMap<String, String>);

impl Defaults {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("config key {key}: {e}")))
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }
}

impl CliConfig {
    pub fn resolve(args: &ScenarioArgs, seeds: Option<usize>) -> Result<Self> {
        let file = match &args.config {
            Some(p) => Defaults(parse_config_file(p)?),
            None => Defaults(BTreeMap::new()),
        };
        let known = [
            "n",
            "density",
            "t",
            "seed",
            "fraction",
            "target-fraction",
            "dip-start",
            "dip-end",
            "target-file",
            "mode",
            "v2g",
            "require-prior-charge",
            "max-discharges",
            "out-dir",
            "seeds",
        ];
        if let Some(k) = file.0.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown config key {k:?}")));
        }

        let n = pick(args.n, file.get("n")?, 5000);
        let density = pick(args.density, file.get("density")?, 0.167);
        let horizon = pick(args.t, file.get("t")?, 100);
        let seed = pick(args.seed, file.get("seed")?, 1);
        let fraction = args
            .fraction
            .or(file.get("fraction")?)
            .or(file.get("target-fraction")?)
            .unwrap_or(0.35);
        // default dip spans the middle 60% of the horizon
        let default_start = ((horizon as f64 * 0.2).round() as usize).max(1);
        let default_end = ((horizon as f64 * 0.8).round() as usize)
            .max(default_start + 1)
            .min(horizon);
        let dip_start = pick(args.dip_start, file.get("dip-start")?, default_start);
        let dip_end = pick(args.dip_end, file.get("dip-end")?, default_end);
        let target_file = args.target_file.clone().or(file.get("target-file")?);
        let mode = pick(args.mode, file.get("mode")?, ControlMode::Price);
        let out_dir = args
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .or(file.get("out-dir")?)
            .unwrap_or_else(|| PathBuf::from("out"));
        let seeds = pick(seeds, file.get("seeds")?, 20);
        if n == 0 {
            return Err(Error::Config("--n must be positive".into()));
        }
        if seeds == 0 {
            return Err(Error::Config("--seeds must be positive".into()));
        }
        let max_discharges = args.max_discharges.or(file.get("max-discharges")?);
        if max_discharges == Some(0) {
            return Err(Error::Config("--max-discharges must be positive".into()));
        }
        Ok(Self {
            n,
            density,
            horizon,
            seed,
            fraction,
            dip_start,
            dip_end,
            target_file,
            control: ControlConfig {
                mode,
                v2g_enabled: args.v2g || file.flag("v2g")?,
                require_prior_charge: args.require_prior_charge
                    || file.flag("require-prior-charge")?,
                max_discharges_per_particle: max_discharges,
                seed,
            },
            out_dir,
            seeds,
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c.control.seed = seed;
        c
    }

    pub fn population(&self) -> Result<Population> {
        Population::generate(self.n, self.density, self.horizon, self.seed)
    }

    /// The triangular dip around `μ = N · density`, or the target file.
    pub fn target(&self) -> Result<TargetProfile> {
        match &self.target_file {
            Some(path) => target_from_file(path),
            None => triangular_target(
                self.n as f64 * self.density,
                self.fraction,
                self.dip_start,
                self.dip_end,
                self.horizon,
            ),
        }
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn format_summary(label: &str, s: &Summary) -> String {
    format!(
        "{label}: shifts={} discharges={} ratio={:.6} max_calls={} peak_responses={} tracking_error={} loop_area={}",
        s.total_shifts,
        s.total_discharges,
        s.discharge_ratio,
        s.max_calls,
        s.peak_responses,
        s.tracking_error,
        s.loop_area
    )
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn format_comparison(c: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", format_summary("v1g", &c.v1g));
    let _ = writeln!(out, "{}", format_summary("v2g", &c.v2g));
    let _ = writeln!(
        out,
        "response_level={} calls_at_level v1g={} v2g={}",
        c.response_level,
        fmt_opt(c.v1g_calls_at_level),
        fmt_opt(c.v2g_calls_at_level)
    );
    let _ = writeln!(
        out,
        "loop_area v1g={} v2g={} wavefront_concentration={} baseline_p95={}",
        c.v1g.loop_area, c.v2g.loop_area, c.wavefront_concentration, c.wavefront_baseline_p95
    );
    out
}

fn comparison_csv(c: &Comparison) -> String {
    let mut out = String::from(
        "mode,shifts,discharges,discharge_ratio,max_calls,peak_responses,tracking_error,loop_area,response_level,calls_at_level\n",
    );
    for (mode, s, calls) in [
        ("v1g", &c.v1g, c.v1g_calls_at_level),
        ("v2g", &c.v2g, c.v2g_calls_at_level),
    ] {
        let _ = writeln!(
            out,
            "{mode},{},{},{},{},{},{},{},{},{}",
            s.total_shifts,
            s.total_discharges,
            s.discharge_ratio,
            s.max_calls,
            s.peak_responses,
            s.tracking_error,
            s.loop_area,
            c.response_level,
            fmt_opt(calls)
        );
    }
    out
}

fn write_run(result: &SimResult, dir: &Path, suffix: &str) -> Result<()> {
    write_atomic(
        &dir.join(format!("series{suffix}.csv")),
        &series_csv_bytes(result)?,
    )?;
    write_atomic(
        &dir.join(format!("bundle{suffix}.json")),
        &bundle_json_bytes(&RunBundle::new(result.clone()))?,
    )
}

pub fn cmd_run(cfg: &CliConfig) -> Result<Summary> {
    let pop = cfg.population()?;
    let target = cfg.target()?;
    let result = run(&pop, &target, &cfg.control)?;
    write_run(&result, &cfg.out_dir, "")?;
    Ok(summarize(&result))
}

/// Runs both modes, writes series, bundles, figures and the summary CSV
/// into `cfg.out_dir`.
pub fn cmd_compare(cfg: &CliConfig) -> Result<Comparison> {
    let pop = cfg.population()?;
    let target = cfg.target()?;
    let (v1g, v2g) = compare_modes(&pop, &target, &cfg.control)?;
    write_run(&v1g, &cfg.out_dir, "_v1g")?;
    write_run(&v2g, &cfg.out_dir, "_v2g")?;
    emit_figures(&v1g, &v2g, &cfg.out_dir)?;
    let comparison = compare_results(&v1g, &v2g);
    write_atomic(
        &cfg.out_dir.join("compare_summary.csv"),
        comparison_csv(&comparison).as_bytes(),
    )?;
    Ok(comparison)
}

const SWEEP_COLUMNS: [&str; 12] = [
    "v1g_shifts",
    "v2g_shifts",
    "v2g_discharges",
    "discharge_ratio",
    "v1g_loop_area",
    "v2g_loop_area",
    "response_level",
    "v1g_calls_at_level",
    "v2g_calls_at_level",
    "wavefront_concentration",
    "wavefront_baseline_p95",
    "v2g_tracking_error",
];

fn sweep_values(c: &Comparison) -> [f64; 12] {
    [
        c.v1g.total_shifts as f64,
        c.v2g.total_shifts as f64,
        c.v2g.total_discharges as f64,
        c.v2g.discharge_ratio,
        c.v1g.loop_area,
        c.v2g.loop_area,
        c.response_level,
        c.v1g_calls_at_level.unwrap_or(f64::NAN),
        c.v2g_calls_at_level.unwrap_or(f64::NAN),
        c.wavefront_concentration,
        c.wavefront_baseline_p95,
        c.v2g.tracking_error,
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub seeds: Vec<u64>,
    pub comparisons: Vec<Comparison>,
    /// (column, mean, sample standard deviation)
    pub stats: Vec<(String, f64, f64)>,
}

/// `compare` for seeds `seed, seed+1, …`, each in `out_dir/seed_<s>/`, then
/// `sweep.csv` (one row per seed) and `sweep_stats.csv` (mean, std).
pub fn cmd_sweep(cfg: &CliConfig) -> Result<SweepOutcome> {
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.seed + i).collect();
    let comparisons = seeds
        .par_iter()
        .map(|&s| {
            let mut c = cfg.with_seed(s);
            c.out_dir = cfg.out_dir.join(format!("seed_{s}"));
            cmd_compare(&c)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = format!("seed,{}\n", SWEEP_COLUMNS.join(","));
    for (s, c) in seeds.iter().zip(&comparisons) {
        let vals: Vec<String> = sweep_values(c).iter().map(|v| csv_num(*v)).collect();
        let _ = writeln!(rows, "{s},{}", vals.join(","));
    }
    let stats: Vec<(String, f64, f64)> = SWEEP_COLUMNS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let xs: Vec<f64> = comparisons.iter().map(|c| sweep_values(c)[i]).collect();
            let (mean, std) = mean_std(&xs);
            (name.to_string(), mean, std)
        })
        .collect();
    let mut stats_csv = String::from("metric,mean,std\n");
    for (name, mean, std) in &stats {
        let _ = writeln!(stats_csv, "{name},{},{}", csv_num(*mean), csv_num(*std));
    }
    write_atomic(&cfg.out_dir.join("sweep.csv"), rows.as_bytes())?;
    write_atomic(&cfg.out_dir.join("sweep_stats.csv"), stats_csv.as_bytes())?;
    Ok(SweepOutcome {
        seeds,
        comparisons,
        stats,
    })
}

fn csv_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// Mean and sample standard deviation, skipping NaNs.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let vals: Vec<f64> = xs.iter().copied().filter(|v| !v.is_nan()).collect();
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Executes a parsed command line, printing reports to stdout.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => {
            let cfg = CliConfig::resolve(args, None)?;
            let summary = cmd_run(&cfg)?;
            println!("{}", format_summary("run", &summary));
        }
        Command::Compare(args) => {
            let cfg = CliConfig::resolve(args, None)?;
            print!("{}", format_comparison(&cmd_compare(&cfg)?));
        }
        Command::Sweep(args) => {
            let cfg = CliConfig::resolve(&args.scenario, args.seeds)?;
            let outcome = cmd_sweep(&cfg)?;
            println!("seeds={}", outcome.seeds.len());
            for (name, mean, std) in &outcome.stats {
                println!("{name}: mean={mean} std={std}");
            }
        }
    }
    Ok(())
}
