use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use hetdata_core::{validate, ModelParams, RawParams};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hetdata", version, about = "Threshold, statics, wealth and verification runs for the data-economy model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON parameter file; unspecified fields take their defaults
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,

    /// Master seed, required by commands that sample
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true, default_value = "hetdata-out")]
    pub out: PathBuf,

    /// Data cost rate, overriding the parameter file
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tau: Option<f64>,

    /// Cost-rate grid `start:end:step`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tau_grid: Option<Grid>,

    /// Lambda grid `start:end:step`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda_grid: Option<Grid>,

    /// Ability grid `start:end:step`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu_grid: Option<Grid>,

    /// Monte Carlo paths for the capital checks
    #[arg(long, global = true)]
    pub paths: Option<usize>,

    /// Agents in the population checks
    #[arg(long, global = true)]
    pub population: Option<usize>,

    /// Low cost rate of the High/Low comparison
    #[arg(long, global = true, default_value_t = 0.3)]
    pub tau_low: f64,

    /// High cost rate of the High/Low comparison
    #[arg(long, global = true, default_value_t = 0.6)]
    pub tau_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the ability threshold at each cost rate
    Threshold,
    /// Comparative statics table and the High/Low report
    Statics,
    /// Expected capital table and its Monte Carlo comparison
    Wealth,
    /// Curves and intersections of the friction match
    Figure1,
    /// Run the property suite
    Verify,
    /// Every artifact in one directory
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Threshold => "threshold",
            Command::Statics => "statics",
            Command::Wealth => "wealth",
            Command::Figure1 => "figure1",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Command::Wealth | Command::Verify | Command::Report)
    }
}

/// Inclusive arithmetic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("grid `{s}` must have the form start:end:step"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("grid `{s}`: {e}"));
        let grid = Grid { start: num(a)?, end: num(b)?, step: num(c)? };
        if ![grid.start, grid.end, grid.step].iter().all(|x| x.is_finite()) {
            return Err(format!("grid `{s}` has non-finite entries"));
        }
        if grid.step <= 0.0 || grid.end < grid.start {
            return Err(format!("grid `{s}` must be strictly increasing (start <= end, step > 0)"));
        }
        if (grid.end - grid.start) / grid.step > 1e6 {
            return Err(format!("grid `{s}` has more than a million points"));
        }
        Ok(grid)
    }
}

impl Grid {
    pub fn new(start: f64, end: f64, step: f64) -> Self {
        Self { start, end, step }
    }

    /// `start + i step` up to `end`, allowing for rounding in the count.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + self.step * i as f64).collect()
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub params: ModelParams,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub tau_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub paths: usize,
    pub population: usize,
    pub tau_low: f64,
    pub tau_high: f64,
}

pub fn read_params(path: &Path) -> Result<RawParams<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read parameter file {}: {e}", path.display())))?;
    RawParams::from_json(&text)
        .map_err(|e| CliError::Config(format!("malformed parameter file {}: {e}", path.display())))
}

/// Flags override file values, which override defaults.
pub fn load_config(cli: Cli) -> Result<RunConfig, CliError> {
    let mut raw = RawParams::reference();
    if let Some(path) = &cli.params {
        raw = raw.overlay(&read_params(path)?);
    }
    if let Some(tau) = cli.tau {
        raw.tau = Some(tau);
    }
    let params = validate(&raw).map_err(|e| CliError::Config(format!("invalid parameters: {e}")))?;

    if cli.command.is_stochastic() && cli.seed.is_none() {
        return Err(CliError::Config(format!("`{}` samples random numbers and needs --seed", cli.command.name())));
    }
    let tau_grid = match (&cli.tau_grid, cli.tau) {
        (Some(g), _) => g.points(),
        (None, Some(t)) => vec![t],
        (None, None) if cli.command == Command::Threshold => vec![params.tau],
        (None, None) => Grid::new(0.05, 0.95, 0.05).points(),
    };
    if let Some(bad) = tau_grid.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
        return Err(CliError::Config(format!("cost rates must lie in (0, 1), got {bad}")));
    }
    let lambda_grid = cli.lambda_grid.clone().unwrap_or(Grid::new(1.0, 4.0, 0.05)).points();
    if let Some(bad) = lambda_grid.iter().find(|&&l| l < 1.0) {
        return Err(CliError::Config(format!("lambda grid must start at 1 or above, got {bad}")));
    }
    let mu_grid = cli.mu_grid.clone().unwrap_or(Grid::new(-1.0, 1.5, 0.5)).points();
    let paths = cli.paths.unwrap_or(100_000);
    if paths < 100 {
        return Err(CliError::Config(format!("--paths must be at least 100, got {paths}")));
    }
    let population = cli.population.unwrap_or(1_000_000);
    if population < 1000 {
        return Err(CliError::Config(format!("--population must be at least 1000, got {population}")));
    }
    if !(cli.tau_low > 0.0 && cli.tau_low < cli.tau_high && cli.tau_high < 1.0) {
        return Err(CliError::Config(format!(
            "need 0 < --tau-low < --tau-high < 1, got {} and {}",
            cli.tau_low, cli.tau_high
        )));
    }
    Ok(RunConfig {
        command: cli.command,
        params,
        seed: cli.seed,
        output_dir: cli.out,
        tau_grid,
        lambda_grid,
        mu_grid,
        paths,
        population,
        tau_low: cli.tau_low,
        tau_high: cli.tau_high,
    })
}

/// Worker cap from `HETDATA_THREADS`.
pub fn thread_cap(value: Option<String>) -> Result<Option<usize>, CliError> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("HETDATA_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}
