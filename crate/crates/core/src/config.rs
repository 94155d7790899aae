//! Run configuration in TOML with sections `[fluid]`, `[analysis]`,
//! `[grid]`, `[time]`, `[init]`, `[output]`. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::PolarGrid;
use crate::init::InitConfig;
use crate::params::{AnalysisParams, FluidParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub beta: f64,
    pub m_bound: f64,
    pub rho_bar: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { beta: 1.0, m_bound: 1.0, rho_bar: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nr: usize,
    pub ntheta: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nr: 32, ntheta: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_end: f64,
    /// Fixed step; the CFL limit is used when absent.
    pub dt: Option<f64>,
    /// Fraction of the CFL limit used when `dt` is absent.
    pub cfl_fraction: f64,
    /// Steps between checkpoints (0: final state only).
    pub checkpoint_every: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_end: 0.1, dt: None, cfl_fraction: 1.0, checkpoint_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit_plots: bool,
    /// Steps between field snapshots (0: final state only).
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), emit_plots: false, snapshot_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub fluid: FluidParams,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Quantities derived at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derived {
    pub q0: f64,
    pub delta0: f64,
    pub sound_speed: f64,
    pub mean_pressure: f64,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })?;
        cfg.validate().map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Re-checks every cross-field constraint.
    pub fn validate(&self) -> Result<()> {
        self.fluid.validate()?;
        self.analysis_params()?;
        let grid = self.polar_grid()?;
        self.init.validate(grid.radius())?;
        let t = &self.time;
        if !(t.t_end >= 0.0 && t.t_end.is_finite()) {
            return Err(invalid("t_end", format!("{} must be nonnegative", t.t_end)));
        }
        if let Some(dt) = t.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("dt", format!("{dt} must be positive")));
            }
        }
        if !(t.cfl_fraction > 0.0 && t.cfl_fraction <= 1.0) {
            return Err(invalid("cfl_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn analysis_params(&self) -> Result<AnalysisParams> {
        let a = &self.analysis;
        AnalysisParams::new(a.beta, a.m_bound, a.rho_bar, &self.fluid)
    }

    pub fn polar_grid(&self) -> Result<PolarGrid> {
        PolarGrid::new(self.grid.nr, self.grid.ntheta, self.fluid.radius)
    }

    pub fn derived(&self) -> Result<Derived> {
        let a = self.analysis_params()?;
        Ok(Derived {
            q0: a.q0,
            delta0: a.delta0,
            sound_speed: self.fluid.sound_speed(self.fluid.rho_tilde),
            mean_pressure: self.fluid.mean_pressure(),
        })
    }
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    RunConfig::from_toml(&text, path)
}
