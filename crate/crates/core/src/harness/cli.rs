//! The `synrisk` command line.
//!
//! Every subcommand reads one JSON file whose `model` field names it. Without
//! `--out` the main result goes to stdout; with it, files are written into
//! the directory.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::{run_experiment, write_record, ExperimentConfig};
use crate::cascade::{build_gai_kapadia_system_with, simulate_default_cascade, simulate_random_cascade, SheetSpec};
use crate::clearing::{clear_eisenberg_noe, clear_fictitious_default, clear_rogers_veraart, FinancialSystem};
use crate::debtrank::{debtrank_iterated, debtrank_nonlinear, debtrank_original, leverage_spectral_radius, ExposureSystem};
use crate::firesale::{
    simulate_buffered_deleveraging, simulate_leverage_targeting, simulate_threshold_firesale, ImpactFunction,
    PortfolioSystem, Shock,
};
use crate::linalg::Matrix;
use crate::network::{read_edge_list, DegreeDistribution, DegreeModel, EdgeListGraph, DEFAULT_K_MAX};
use crate::rng::{child_seed, seeded};
use crate::structure::{core_periphery_detect_with, Adjacency, DetectOptions};
use crate::theory::{analyze, ResponseFunction};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "synrisk", version, about = "Contagion models for interbank networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Threshold,
    Target,
    Buffered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImpactKind {
    Linear,
    LogLinear,
}

#[derive(Debug, Args)]
pub struct FiresaleFlags {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub impact: Option<ImpactKind>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// `asset:<idx>:<xi>` or `bank:<idx>`.
    #[arg(long)]
    pub shock: Option<Shock>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clearing vector of a payment system.
    Clear(Common),
    /// Default cascade on an edge-list network.
    Cascade(Common),
    /// Mean cascade size and cascade conditions over a z-grid.
    Theory(Common),
    /// DebtRank trajectory.
    Debtrank(Common),
    /// Fire-sale cascade on overlapping portfolios.
    Firesale {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: FiresaleFlags,
    },
    /// Core-periphery partition of an edge-list network.
    Structure(Common),
    /// Seeded Monte Carlo sweep.
    Sweep(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearingMethod {
    #[default]
    EisenbergNoe,
    RogersVeraart,
    FictitiousDefault,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClearConfig {
    #[serde(rename = "L")]
    pub liabilities: Matrix,
    pub e: Vec<f64>,
    #[serde(default)]
    pub method: ClearingMethod,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    /// Edge-list file, relative to the config file.
    pub graph: PathBuf,
    pub sheet: SheetSpec,
    /// Explicit seed banks; otherwise `trials` runs with random seeds.
    #[serde(default)]
    pub seeds: Option<Vec<usize>>,
    #[serde(default)]
    pub rho0: Option<f64>,
    #[serde(default = "one_trial")]
    pub trials: usize,
}

fn one_trial() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    pub distribution: DegreeDistribution,
    pub response: ResponseFunction,
    pub rho0: f64,
    /// Mean degrees to substitute into a Poisson or regular distribution.
    #[serde(default)]
    pub z_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DebtRankVariant {
    #[default]
    Original,
    Iterated,
    Nonlinear,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebtRankConfig {
    #[serde(rename = "W")]
    pub exposures: Matrix,
    #[serde(rename = "E0", alias = "e")]
    pub equities: Vec<f64>,
    pub shock: Vec<f64>,
    #[serde(default)]
    pub variant: DebtRankVariant,
    #[serde(default)]
    pub alpha: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiresaleConfig {
    #[serde(rename = "Q")]
    pub holdings: Matrix,
    pub p0: Vec<f64>,
    #[serde(rename = "E")]
    pub equity: Vec<f64>,
    #[serde(default)]
    pub lambda: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda_max: Option<Vec<f64>>,
    #[serde(default)]
    pub marketable: Option<Vec<bool>>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub impact: Option<ImpactFunction>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub shock: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureConfig {
    pub graph: PathBuf,
    #[serde(default)]
    pub restarts: Option<usize>,
}

/// Single-run input files, tagged by `model`.
#[derive(Debug, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum RunConfig {
    Clear(ClearConfig),
    Cascade(CascadeConfig),
    Theory(TheoryConfig),
    Debtrank(DebtRankConfig),
    Firesale(FiresaleConfig),
    Structure(StructureConfig),
}

impl RunConfig {
    fn name(&self) -> &'static str {
        match self {
            RunConfig::Clear(_) => "clear",
            RunConfig::Cascade(_) => "cascade",
            RunConfig::Theory(_) => "theory",
            RunConfig::Debtrank(_) => "debtrank",
            RunConfig::Firesale(_) => "firesale",
            RunConfig::Structure(_) => "structure",
        }
    }
}

/// Parses the command line, runs it and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("synrisk: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = match &cli.command {
        Command::Firesale { common, .. } => common.threads,
        Command::Clear(c)
        | Command::Cascade(c)
        | Command::Theory(c)
        | Command::Debtrank(c)
        | Command::Structure(c)
        | Command::Sweep(c) => c.threads,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Config(vec!["--threads: must be at least 1".into()]));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::Parameter(e.to_string()))?;
    pool.install(|| dispatch(cli.command))
}

fn read_run_config(common: &Common, expected: &str) -> Result<RunConfig> {
    let text = fs::read_to_string(&common.config)?;
    let cfg: RunConfig = serde_json::from_str(&text)?;
    if cfg.name() != expected {
        return Err(Error::Config(vec![format!(
            "model: `{}` given to the `{expected}` subcommand",
            cfg.name()
        )]));
    }
    Ok(cfg)
}

fn relative_to(config: &Path, file: &Path) -> PathBuf {
    match config.parent() {
        Some(dir) if file.is_relative() => dir.join(file),
        _ => file.to_path_buf(),
    }
}

/// Writes `text` to `out/name`, or prints it when there is no output directory.
fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Clear(c) => clear(&c),
        Command::Cascade(c) => cascade(&c),
        Command::Theory(c) => theory(&c),
        Command::Debtrank(c) => debtrank(&c),
        Command::Firesale { common, flags } => firesale(&common, &flags),
        Command::Structure(c) => structure(&c),
        Command::Sweep(c) => sweep(&c),
    }
}

fn clear(c: &Common) -> Result<()> {
    let RunConfig::Clear(cfg) = read_run_config(c, "clear")? else { unreachable!() };
    let system = FinancialSystem::new(cfg.liabilities, cfg.e)?;
    let result = match cfg.method {
        ClearingMethod::EisenbergNoe => clear_eisenberg_noe(&system)?,
        ClearingMethod::RogersVeraart => clear_rogers_veraart(&system, cfg.alpha, cfg.beta)?,
        ClearingMethod::FictitiousDefault => clear_fictitious_default(&system)?,
    };
    emit(c.out.as_deref(), "clearing.json", &json(&result)?)
}

fn cascade(c: &Common) -> Result<()> {
    let RunConfig::Cascade(cfg) = read_run_config(c, "cascade")? else { unreachable!() };
    let graph = match read_edge_list(relative_to(&c.config, &cfg.graph))? {
        EdgeListGraph::Directed(g) => g,
        EdgeListGraph::Bipartite(_) => return Err(Error::param("cascade needs a directed edge list")),
    };
    let system = build_gai_kapadia_system_with(&graph, &cfg.sheet)?;
    let z = graph.edge_count() as f64 / graph.node_count().max(1) as f64;
    let master = c.seed.unwrap_or(0);
    let mut outcomes = Vec::new();
    let mut rows = Vec::new();
    match (&cfg.seeds, cfg.rho0) {
        (Some(seeds), _) => outcomes.push((master, simulate_default_cascade(&system, seeds)?)),
        (None, Some(rho0)) => {
            if cfg.trials == 0 {
                return Err(Error::Config(vec!["trials: must be at least 1".into()]));
            }
            for t in 0..cfg.trials {
                let seed = child_seed(master, 0, t as u64);
                outcomes.push((seed, simulate_random_cascade(&system, rho0, &mut seeded(seed))?));
            }
        }
        (None, None) => return Err(Error::Config(vec!["seeds, rho0: one of them is required".into()])),
    }
    for (seed, o) in &outcomes {
        rows.push(vec![
            seed.to_string(),
            z.to_string(),
            cfg.sheet.r_bar.to_string(),
            o.default_fraction.to_string(),
            o.rounds.to_string(),
        ]);
    }
    let header: Vec<String> = ["seed", "z", "R_bar", "default_fraction", "rounds"].map(String::from).to_vec();
    let results: Vec<_> = outcomes.into_iter().map(|(_, o)| o).collect();
    match c.out.as_deref() {
        Some(dir) => {
            emit(Some(dir), "cascade.json", &json(&results)?)?;
            emit(Some(dir), "trials.csv", &csv_text(&header, &rows)?)
        }
        None => emit(None, "", &json(&results)?),
    }
}

fn theory(c: &Common) -> Result<()> {
    let RunConfig::Theory(cfg) = read_run_config(c, "theory")? else { unreachable!() };
    let k_max = cfg.k_max.unwrap_or(DEFAULT_K_MAX);
    let models: Vec<DegreeModel> = match &cfg.z_grid {
        None => vec![DegreeModel::new(cfg.distribution.clone(), k_max)?],
        Some(grid) => grid
            .iter()
            .map(|&z| match cfg.distribution {
                DegreeDistribution::Poisson { .. } => DegreeModel::new(DegreeDistribution::Poisson { z }, k_max),
                DegreeDistribution::Regular { .. } if z >= 0.0 && z.fract() == 0.0 => {
                    DegreeModel::new(DegreeDistribution::Regular { z: z as usize }, k_max)
                }
                _ => Err(Error::Config(vec![
                    "z_grid: needs a poisson distribution or a regular one with integer z".into(),
                ])),
            })
            .collect::<Result<_>>()?,
    };
    let header = ["z", "q_star", "rho", "first_order", "second_order", "watts_margin"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for m in &models {
        let t = analyze(m, &cfg.response, cfg.rho0)?;
        rows.push(vec![
            t.z.to_string(),
            t.q_star.to_string(),
            t.rho.to_string(),
            t.first_order.holds.to_string(),
            t.second_order.holds.to_string(),
            t.watts.value.to_string(),
        ]);
    }
    emit(c.out.as_deref(), "theory.csv", &csv_text(&header, &rows)?)
}

fn debtrank(c: &Common) -> Result<()> {
    let RunConfig::Debtrank(cfg) = read_run_config(c, "debtrank")? else { unreachable!() };
    let system = ExposureSystem::new(cfg.exposures, cfg.equities)?;
    let traj = match cfg.variant {
        DebtRankVariant::Original => debtrank_original(&system, &cfg.shock)?,
        DebtRankVariant::Iterated => debtrank_iterated(&system, &cfg.shock)?,
        DebtRankVariant::Nonlinear => debtrank_nonlinear(&system, &cfg.shock, cfg.alpha)?,
    };
    let mut header = vec!["t".to_string()];
    header.extend((1..=system.len()).map(|i| format!("h_{i}")));
    let rows: Vec<Vec<String>> = traj
        .h
        .iter()
        .enumerate()
        .map(|(t, h)| std::iter::once(t.to_string()).chain(h.iter().map(f64::to_string)).collect())
        .collect();
    let summary = serde_json::json!({
        "lambda_max": leverage_spectral_radius(&system)?,
        "defaulted": traj.defaulted,
        "steps": traj.steps,
        "converged": traj.converged,
        "final_h": traj.final_h(),
    });
    match c.out.as_deref() {
        Some(dir) => {
            emit(Some(dir), "trajectory.csv", &csv_text(&header, &rows)?)?;
            emit(Some(dir), "summary.json", &json(&summary)?)
        }
        None => emit(None, "", &json(&summary)?),
    }
}

fn firesale(c: &Common, flags: &FiresaleFlags) -> Result<()> {
    let RunConfig::Firesale(cfg) = read_run_config(c, "firesale")? else { unreachable!() };
    let mut system = PortfolioSystem::new(cfg.holdings, cfg.p0, cfg.equity)?;
    if let Some(l) = cfg.lambda {
        system = system.with_target_leverage(l)?;
    }
    if let Some(l) = cfg.lambda_max {
        system = system.with_leverage_cap(l)?;
    }
    if let Some(m) = cfg.marketable {
        system = system.with_marketable(m)?;
    }
    let mut impact = cfg.impact.unwrap_or(ImpactFunction::LogLinear { alpha: 1.0 });
    if let Some(kind) = flags.impact {
        let alpha = impact.alpha();
        impact = match kind {
            ImpactKind::Linear => ImpactFunction::Linear { alpha },
            ImpactKind::LogLinear => ImpactFunction::LogLinear { alpha },
        };
    }
    if let Some(alpha) = flags.alpha {
        impact = match impact {
            ImpactFunction::Linear { .. } => ImpactFunction::Linear { alpha },
            ImpactFunction::LogLinear { .. } => ImpactFunction::LogLinear { alpha },
        };
    }
    let shock = match (&flags.shock, &cfg.shock) {
        (Some(s), _) => *s,
        (None, Some(s)) => s.parse()?,
        (None, None) => return Err(Error::Config(vec!["shock: required (config or --shock)".into()])),
    };
    let gamma = flags.gamma.or(cfg.gamma).unwrap_or(1.0);
    let outcome = match flags.mode.or(cfg.mode).unwrap_or(Mode::Threshold) {
        Mode::Threshold => simulate_threshold_firesale(&system, impact, shock)?,
        Mode::Target => simulate_leverage_targeting(&system, impact, shock, gamma)?,
        Mode::Buffered => simulate_buffered_deleveraging(&system, impact, shock)?,
    };
    emit(c.out.as_deref(), "firesale.json", &json(&outcome)?)
}

fn structure(c: &Common) -> Result<()> {
    let RunConfig::Structure(cfg) = read_run_config(c, "structure")? else { unreachable!() };
    let adj = match read_edge_list(relative_to(&c.config, &cfg.graph))? {
        EdgeListGraph::Directed(g) => Adjacency::from_directed(&g),
        EdgeListGraph::Bipartite(_) => return Err(Error::param("structure needs a directed edge list")),
    };
    let mut opts = DetectOptions {
        seed: c.seed.unwrap_or(0),
        ..DetectOptions::default()
    };
    if let Some(r) = cfg.restarts {
        opts.restarts = r;
    }
    let partition = core_periphery_detect_with(&adj, opts)?;
    emit(c.out.as_deref(), "structure.json", &json(&partition)?)
}

fn sweep(c: &Common) -> Result<()> {
    let text = fs::read_to_string(&c.config)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let dir = c
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("synrisk-out"));
    let record = run_experiment(&cfg)?;
    write_record(&record, &dir)?;
    eprintln!(
        "synrisk: {} rows over {} grid points written to {}",
        record.rows.len(),
        record.summary.len(),
        dir.display()
    );
    Ok(())
}
