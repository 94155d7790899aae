//! `cnsdisc`: simulation driver and verification suites.
//!
//! Exit status: 0 when every asserted check passes, 1 on an assertion
//! failure or a runtime error, 2 on a usage or configuration error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use cnsdisc_core::config::{parse_config, RunConfig};
use cnsdisc_core::io::write_text;
use cnsdisc_core::probe::elliptic_constant_probe;
use cnsdisc_core::run::{all_asserts_pass, checks_csv, run};
use cnsdisc_core::verify::{decomposition_suite, greens_suite, lame_suite, rows_pass, verify_csv, VerifyRow};
use cnsdisc_core::zlotnik::fuzz_check;
use cnsdisc_core::Error;

#[derive(Debug, Parser)]
#[command(name = "cnsdisc", version, about = "Compressible Navier-Stokes on the disc: simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (defaults to the config's, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write plain-text time series next to the diagnostics.
    #[arg(long, global = true)]
    emit_plots: bool,
    /// Grid override, `NrxNtheta`.
    #[arg(long, global = true)]
    grid: Option<GridArg>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the configured run and write diagnostics and checks.
    Simulate,
    /// Green reproduction, harmonic measure and boundary identity (default grid 48x48).
    VerifyGreens,
    /// Manufactured Lamé solution on base, 2x and 4x grids (default base 32x32).
    VerifyLame,
    /// Closure of the flux decomposition and the boundary flux identity (default 64x64).
    VerifyDecomposition {
        /// Time of the mid-simulation snapshot.
        #[arg(long, default_value_t = 0.02)]
        t_mid: f64,
    },
    /// Empirical elliptic constants over a seeded ensemble (default grid 32x32).
    ProbeConstants {
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Randomized check of the ODE comparison bound.
    ZlotnikCheck {
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
}

#[derive(Debug, Clone, Copy)]
struct GridArg(usize, usize);

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NrxNtheta, got `{s}`"))?;
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
        Ok(Self(parse(a)?, parse(b)?))
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Runtime(String),
    Assertion,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::InvalidParameter { .. } | Error::InvalidGrid(_) => Self::Usage(e.to_string()),
            e => Self::Runtime(e.to_string()),
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(GridArg(nr, nt)) = common.grid {
        cfg.grid.nr = nr;
        cfg.grid.ntheta = nt;
    }
    if let Some(seed) = common.seed {
        cfg.init.seed = seed;
    }
    cfg.output.emit_plots |= common.emit_plots;
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn grid_or(common: &Common, default: (usize, usize)) -> (usize, usize) {
    common.grid.map_or(default, |GridArg(a, b)| (a, b))
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn finish_rows(dir: &Path, name: &str, rows: &[VerifyRow]) -> Result<(), Failure> {
    let csv = verify_csv(rows);
    write_text(&dir.join(name), &csv)?;
    emit(&csv);
    if rows_pass(rows) {
        Ok(())
    } else {
        Err(Failure::Assertion)
    }
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.common)?;
    let dir = cfg.output.dir.clone();
    let seed = cli.common.seed.unwrap_or(0);
    match &cli.command {
        Command::Simulate => {
            let outcome = run(&cfg, Some(&dir))?;
            emit(&checks_csv(&outcome.checks));
            eprintln!("{} steps to t = {:e}; outputs in {}", outcome.stats.steps, outcome.final_state.t, dir.display());
            if all_asserts_pass(&outcome.checks) {
                Ok(())
            } else {
                Err(Failure::Assertion)
            }
        }
        Command::VerifyGreens => finish_rows(&dir, "verify_greens.csv", &greens_suite(grid_or(&cli.common, (48, 48)), seed)?),
        Command::VerifyLame => finish_rows(&dir, "verify_lame.csv", &lame_suite(grid_or(&cli.common, (32, 32)), &cfg.fluid)?),
        Command::VerifyDecomposition { t_mid } => {
            if !(*t_mid > 0.0 && t_mid.is_finite()) {
                return Err(Failure::Usage(format!("--t-mid {t_mid} must be positive")));
            }
            let rows = decomposition_suite(grid_or(&cli.common, (64, 64)), &cfg.fluid, seed, *t_mid)?;
            finish_rows(&dir, "verify_decomposition.csv", &rows)
        }
        Command::ProbeConstants { q, samples } => {
            if !(*q >= 1.0 && q.is_finite()) || *samples == 0 {
                return Err(Failure::Usage("--q must be >= 1 and --samples positive".into()));
            }
            let (nr, nt) = grid_or(&cli.common, (32, 32));
            let grid = cnsdisc_core::PolarGrid::new(nr, nt, cfg.fluid.radius)?;
            let text = json(&elliptic_constant_probe(&grid, &cfg.fluid, *q, *samples, seed)?)?;
            write_text(&dir.join("probe_constants.json"), &text)?;
            emit(&format!("{text}\n"));
            Ok(())
        }
        Command::ZlotnikCheck { cases } => {
            let report = fuzz_check(seed, *cases)?;
            let text = json(&report)?;
            write_text(&dir.join("zlotnik_check.json"), &text)?;
            emit(&format!("{text}\n"));
            if report.violations.is_empty() {
                Ok(())
            } else {
                Err(Failure::Assertion)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion) => {
            eprintln!("assertion failure; see the ASSERT rows above");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
