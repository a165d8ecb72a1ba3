//! Scenario parameters from flags and an optional JSON config file.
//!
//! A flag given on the command line wins over the same key in the config
//! file, which wins over the subcommand's default.

use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use coarseflow::{Boundary, Equation};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationKind {
    Advection,
    Burgers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Periodic,
    Dirichlet,
}

impl From<BoundaryKind> for Boundary {
    fn from(b: BoundaryKind) -> Self {
        match b {
            BoundaryKind::Periodic => Boundary::Periodic,
            BoundaryKind::Dirichlet => Boundary::Dirichlet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchOp {
    Gp,
    Cr,
    Race,
    All,
}

/// Every scenario key. Config files use the same names with underscores.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioArgs {
    /// JSON file with scenario keys (flags take precedence)
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Fine grid step
    #[arg(long)]
    pub grid_h: Option<f64>,
    /// Fine grid node count, including both ends
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Time step (segment duration for `densify`)
    #[arg(long)]
    pub dt: Option<f64>,
    /// Time steps (segments for `densify`, `N` for the spline model)
    #[arg(long)]
    pub steps: Option<usize>,
    /// CFL constant c in (0, 1] [default: 1.0]
    #[arg(long)]
    pub cfl_c: Option<f64>,
    #[arg(long, value_enum)]
    pub equation: Option<EquationKind>,
    /// Advection speed, or maximum flow speed for `densify` and `model`
    #[arg(long)]
    pub speed: Option<f64>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryKind>,
    /// Coarsening factor s
    #[arg(long)]
    pub coarsen_s: Option<usize>,
    /// Evaluation ticks r per segment
    #[arg(long)]
    pub ticks_r: Option<usize>,
    /// Bound constant A [default: 8]
    #[arg(long)]
    pub bound_a: Option<f64>,
    /// Bound constant B [default: 2]
    #[arg(long)]
    pub bound_b: Option<f64>,
    /// Worker threads; must divide the trajectory count
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: .]
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Feed raw velocities to the Hermite basis instead of velocity * dt
    #[arg(long)]
    pub raw_tangents: bool,
    /// Run the full-size experiment instead of the desk-scale one
    #[arg(long)]
    pub paper_scale: bool,

    /// Trajectory count M
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Timed repetitions per benchmark [default: 5]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Simulated seconds for `model`
    #[arg(long)]
    pub duration: Option<f64>,
    /// Store every k-th level (`simulate`) or compare every k-th step (`compare`)
    #[arg(long)]
    pub store_every: Option<usize>,
    /// Benchmark to run [default: all]
    #[arg(long, value_enum)]
    pub op: Option<BenchOp>,
}

macro_rules! prefer {
    ($cli:ident, $file:ident; $($field:ident),*) => {
        ScenarioArgs {
            config: $cli.config,
            raw_tangents: $cli.raw_tangents || $file.raw_tangents,
            paper_scale: $cli.paper_scale || $file.paper_scale,
            $($field: $cli.$field.or($file.$field),)*
        }
    };
}

impl ScenarioArgs {
    /// Fill keys missing from the command line from the config file, if any.
    pub fn resolve(self) -> anyhow::Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let file: ScenarioArgs = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let cli = self;
        Ok(prefer!(cli, file;
            grid_h, nodes, dt, steps, cfl_c, equation, speed, boundary, coarsen_s,
            ticks_r, bound_a, bound_b, workers, seed, out_dir, trajectories, reps,
            duration, store_every, op))
    }

    pub fn cfl_c(&self) -> f64 {
        self.cfl_c.unwrap_or(1.0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary.map_or(Boundary::Periodic, Boundary::from)
    }

    pub fn equation_or(&self, default: EquationKind) -> Equation {
        match self.equation.unwrap_or(default) {
            EquationKind::Advection => Equation::Advection {
                speed: self.speed.unwrap_or(1.0),
            },
            EquationKind::Burgers => Equation::Burgers,
        }
    }
}

/// A malformed config file, reported with the same exit code as bad flags.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}
