//! Run orchestration: initial data, time stepping, monitors and outputs.

use std::path::Path;

use serde::Serialize;

use crate::config::{Derived, RunConfig};
use crate::error::Result;
use crate::estimates::{fmt, EstimateLedger};
use crate::init::{init_data, InitReport};
use crate::io::{scalar_csv, vector_csv, write_snapshot, write_text, Snapshot};
use crate::solver::{material_derivative, Stepper};
use crate::state::State;

/// Reference value for the wall trace of the velocity.
pub const NO_SLIP_TOL: f64 = 1e-8;
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CheckKind {
    /// Exact identity or scheme invariant; failure changes the exit status.
    Assert,
    /// Estimate with an unknown constant; informational.
    Report,
}

impl CheckKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Assert => "ASSERT",
            Self::Report => "REPORT",
        }
    }
}

/// One row of a check table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub test: String,
    pub kind: CheckKind,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl Check {
    /// `value <= tol`.
    pub fn below(test: impl Into<String>, kind: CheckKind, value: f64, tol: f64) -> Self {
        Self { test: test.into(), kind, value, tolerance: Some(tol), pass: value <= tol }
    }

    pub fn flag(test: impl Into<String>, kind: CheckKind, pass: bool) -> Self {
        Self { test: test.into(), kind, value: f64::from(u8::from(pass)), tolerance: None, pass }
    }
}

pub const CHECK_HEADER: &str = "test,kind,value,tolerance,pass";

pub fn checks_csv(checks: &[Check]) -> String {
    let mut out = format!("{CHECK_HEADER}\n");
    for c in checks {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.test,
            c.kind.as_str(),
            fmt(c.value),
            c.tolerance.map_or_else(String::new, fmt),
            u8::from(c.pass)
        ));
    }
    out
}

/// True when every ASSERT row passes.
pub fn all_asserts_pass(checks: &[Check]) -> bool {
    checks.iter().filter(|c| c.kind == CheckKind::Assert).all(|c| c.pass)
}

/// Running extremes tracked alongside the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub min_rho: f64,
    pub max_no_slip: f64,
    pub finite: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub derived: Derived,
    pub init: InitReport,
    pub ledger: EstimateLedger,
    pub final_state: State,
    pub stats: RunStats,
    pub checks: Vec<Check>,
}

/// Step size for the current state.
fn next_dt(cfg: &RunConfig, stepper: &Stepper, state: &State) -> f64 {
    let remaining = cfg.time.t_end - state.t;
    let dt = cfg.time.dt.unwrap_or_else(|| cfg.time.cfl_fraction * stepper.cfl_limit(state));
    dt.min(remaining)
}

fn is_done(cfg: &RunConfig, t: f64) -> bool {
    t >= cfg.time.t_end - 1e-12 * cfg.time.t_end.max(1.0)
}

fn write_state(dir: &Path, tag: &str, state: &State) -> Result<()> {
    write_snapshot(&dir.join(format!("rho_{tag}.bin")), &Snapshot::scalar(&state.rho))?;
    write_snapshot(&dir.join(format!("u_{tag}.bin")), &Snapshot::vector(&state.u))
}

/// Integrates `cfg` from `t = 0` to `t_end`. With `out`, writes the
/// diagnostics, checks, snapshots and checkpoints there; a failing step
/// leaves the last valid state in `checkpoint/` before the error returns.
pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutcome> {
    cfg.validate()?;
    let grid = cfg.polar_grid()?;
    let analysis = cfg.analysis_params()?;
    let derived = cfg.derived()?;
    let (mut state, init) = init_data(&grid, &cfg.init, &cfg.fluid, &analysis)?;
    let mut stepper = Stepper::new(&grid, &cfg.fluid)?;
    let mut ledger = EstimateLedger::new(&grid, &state, &cfg.fluid, &analysis)?;
    let mut stats = RunStats {
        steps: 0,
        min_rho: state.rho.min(),
        max_no_slip: grid.no_slip_defect(&state.u)?,
        finite: true,
    };
    if let Some(dir) = out {
        write_text(
            &dir.join("init.json"),
            &serde_json::to_string_pretty(&serde_json::json!({
                "grid": [grid.nr(), grid.ntheta()],
                "derived": derived,
                "init": init,
            }))?,
        )?;
        write_state(&dir.join("snapshots"), "000000", &state)?;
    }
    while !is_done(cfg, state.t) {
        let dt = next_dt(cfg, &stepper, &state);
        let advanced = stepper.step(&state, dt).and_then(|next| {
            let u_dot = material_derivative(&grid, &state, &next, dt)?;
            ledger.record_step(&grid, &state, &next, &u_dot)?;
            Ok(next)
        });
        let next = match advanced {
            Ok(next) => next,
            Err(e) => {
                if let Some(dir) = out {
                    write_state(&dir.join("checkpoint"), "last", &state)?;
                    write_text(&dir.join("diagnostics.csv"), &ledger.csv())?;
                }
                return Err(e);
            }
        };
        state = next;
        stats.steps += 1;
        stats.finite &= state.rho.check_finite("density").is_ok() && state.u.check_finite("velocity").is_ok();
        stats.min_rho = stats.min_rho.min(state.rho.min());
        stats.max_no_slip = stats.max_no_slip.max(grid.no_slip_defect(&state.u)?);
        if let Some(dir) = out {
            let every = |n: usize| n > 0 && stats.steps % n == 0;
            if every(cfg.time.checkpoint_every) {
                write_state(&dir.join("checkpoint"), "last", &state)?;
            }
            if every(cfg.output.snapshot_every) {
                write_state(&dir.join("snapshots"), &format!("{:06}", stats.steps), &state)?;
            }
        }
    }
    let checks = run_checks(cfg, &ledger, &stats);
    if let Some(dir) = out {
        write_text(&dir.join("diagnostics.csv"), &ledger.csv())?;
        write_text(&dir.join("checks.csv"), &checks_csv(&checks))?;
        write_state(dir, "final", &state)?;
        write_text(&dir.join("rho_final.csv"), &scalar_csv(&grid, &state.rho)?)?;
        write_text(&dir.join("u_final.csv"), &vector_csv(&grid, &state.u)?)?;
        if cfg.output.emit_plots {
            write_plots(&dir.join("plots"), &ledger)?;
        }
    }
    Ok(RunOutcome { derived, init, ledger, final_state: state, stats, checks })
}

fn run_checks(cfg: &RunConfig, ledger: &EstimateLedger, stats: &RunStats) -> Vec<Check> {
    use CheckKind::{Assert, Report};
    let finite = stats.finite && ledger.rows.iter().all(|r| r.e_kin.is_finite() && r.e_pot.is_finite());
    let mut checks = vec![
        Check::flag("finite", Assert, finite),
        Check::below("mass_drift", Assert, ledger.mass_drift(), MASS_TOL),
        Check { test: "min_rho".into(), kind: Assert, value: stats.min_rho, tolerance: Some(0.0), pass: stats.min_rho >= 0.0 },
        Check::below("no_slip_trace", Report, stats.max_no_slip, NO_SLIP_TOL),
        Check::below("rho_q0_sup", Report, ledger.rho_q0_sup, 1.75 * cfg.analysis.rho_bar),
    ];
    if let Some(last) = ledger.rows.last() {
        checks.push(Check { test: "energy_drift".into(), kind: Report, value: last.energy_drift, tolerance: None, pass: true });
        if let Some(f) = last.flags {
            let names = ["hyp_rho", "hyp_A12", "hyp_A3", "con_rho", "con_A12", "con_A3"];
            checks.extend(names.iter().zip(f.as_array()).map(|(n, b)| Check::flag(*n, Report, b)));
        }
    }
    checks
}

/// Plain-text `t value` files, one per series.
fn write_plots(dir: &Path, ledger: &EstimateLedger) -> Result<()> {
    type Series = (&'static str, fn(&crate::estimates::DiagRow) -> Option<f64>);
    let series: [Series; 9] = [
        ("E_kin", |r| Some(r.e_kin)),
        ("E_pot", |r| Some(r.e_pot)),
        ("A1", |r| Some(r.a1)),
        ("A2", |r| Some(r.a2)),
        ("A3", |r| Some(r.a3)),
        ("rho_q0", |r| Some(r.rho_q0)),
        ("flux_direct", |r| Some(r.flux_direct)),
        ("flux_momentum", |r| r.flux_momentum),
        ("energy_drift", |r| Some(r.energy_drift)),
    ];
    for (name, get) in series {
        let mut text = String::new();
        for r in &ledger.rows {
            if let Some(v) = get(r) {
                text.push_str(&format!("{} {}\n", fmt(r.t), fmt(v)));
            }
        }
        write_text(&dir.join(format!("{name}.txt")), &text)?;
    }
    Ok(())
}
