//! The twelve acceptance criteria. Each test writes one
//! `criterion N: PASS|FAIL` line straight to stderr (so it shows without
//! `--nocapture`) and then asserts the same outcome.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use cnsdisc_core::config::{GridConfig, RunConfig, TimeConfig};
use cnsdisc_core::estimates::density_lq_ode_residual;
use cnsdisc_core::init::{init_data, InitConfig};
use cnsdisc_core::params::{AnalysisParams, FluidParams};
use cnsdisc_core::probe::elliptic_constant_probe;
use cnsdisc_core::run::{all_asserts_pass, run, MASS_TOL, NO_SLIP_TOL};
use cnsdisc_core::solver::Stepper;
use cnsdisc_core::state::State;
use cnsdisc_core::verify::{
    boundary_identity_max, decomposition_suite, harmonic_measure_sampled, lame_suite, mid_sim_init,
    reproduction_error, VerifyRow, HARMONIC_TOL, IDENTITY_TOL, LAME_ORDER, REPRODUCTION_RATIO, REPRODUCTION_TOL,
};
use cnsdisc_core::zlotnik::{brute_force_ode, fuzz_check, zlotnik_bound, Forcing, GFunction, ZlotnikInstance, ORACLE_TOL};
use cnsdisc_core::PolarGrid;

const SEED: u64 = 0;

fn report(n: u32, name: &str, limit_s: u64, start: Instant, pass: bool, detail: String) {
    let elapsed = start.elapsed();
    let in_time = elapsed <= Duration::from_secs(limit_s);
    let ok = pass && in_time;
    let line = format!(
        "criterion {n:>2} {}: {} ({detail}; {:.1} s of {limit_s} s)\n",
        name,
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(ok, "{line}");
}

fn small_e0_init() -> InitConfig {
    InitConfig { target_e0: Some(1e-4), seed: SEED, ..InitConfig::default() }
}

fn row<'a>(rows: &'a [VerifyRow], test: &str, grid: &str) -> &'a VerifyRow {
    rows.iter().find(|r| r.test == test && r.grid == grid).unwrap_or_else(|| panic!("row {test} {grid}"))
}

/// Shared by criteria 5 and 6: base 64x64, one refinement to 128x128.
fn decomposition() -> &'static (Vec<VerifyRow>, Instant) {
    static ROWS: OnceLock<(Vec<VerifyRow>, Instant)> = OnceLock::new();
    ROWS.get_or_init(|| {
        let start = Instant::now();
        (decomposition_suite((64, 64), &FluidParams::default(), SEED, 0.02).unwrap(), start)
    })
}

#[test]
fn c01_green_reproduction() {
    let start = Instant::now();
    let coarse = reproduction_error(&PolarGrid::new(24, 24, 1.0).unwrap()).unwrap();
    let fine = reproduction_error(&PolarGrid::new(48, 48, 1.0).unwrap()).unwrap();
    let ratio = coarse / fine;
    let pass = fine <= REPRODUCTION_TOL && ratio >= REPRODUCTION_RATIO;
    report(1, "green reproduction", 60, start, pass, format!("err48 {fine:.3e} <= {REPRODUCTION_TOL}, ratio {ratio:.2} >= {REPRODUCTION_RATIO}"));
}

#[test]
fn c02_harmonic_measure() {
    let start = Instant::now();
    let defect = harmonic_measure_sampled(20, SEED).unwrap();
    report(2, "harmonic measure", 1, start, defect <= HARMONIC_TOL, format!("max |int P - 1| {defect:.3e} <= {HARMONIC_TOL:e}"));
}

#[test]
fn c03_boundary_identity() {
    let start = Instant::now();
    let r2 = boundary_identity_max(2, 1000, SEED).unwrap();
    let r3 = boundary_identity_max(3, 1000, SEED + 1).unwrap();
    let pass = r2 <= IDENTITY_TOL && r3 <= IDENTITY_TOL;
    report(3, "boundary derivative identity", 1, start, pass, format!("n=2 {r2:.3e}, n=3 {r3:.3e} <= {IDENTITY_TOL:e}"));
}

#[test]
fn c04_lame_manufactured() {
    let start = Instant::now();
    let rows = lame_suite((32, 32), &FluidParams::default()).unwrap();
    let orders: Vec<f64> = rows.iter().filter(|r| r.test == "manufactured_order").map(|r| r.residual).collect();
    let pass = orders.len() == 2 && orders.iter().all(|&o| o >= LAME_ORDER);
    report(4, "lame manufactured order", 300, start, pass, format!("orders 32->64 {:.3}, 64->128 {:.3} >= {LAME_ORDER}", orders[0], orders[1]));
}

#[test]
fn c05_flux_closure() {
    let (rows, start) = decomposition();
    let constant = row(rows, "constant_closure", "64x64");
    let mid = row(rows, "mid_closure", "64x64");
    let mid_fine = row(rows, "mid_closure", "128x128");
    let pass = constant.pass && mid.pass && mid_fine.residual < mid.residual;
    report(
        5,
        "flux decomposition closure",
        600,
        *start,
        pass,
        format!(
            "constant {:.2e} <= 1e-12, mid 64x64 {:.3e} <= 5e-2, 128x128 {:.3e}",
            constant.residual, mid.residual, mid_fine.residual
        ),
    );
}

#[test]
fn c06_boundary_flux_identity() {
    let (rows, start) = decomposition();
    let direct = row(rows, "static_flux_direct", "64x64");
    let momentum = row(rows, "static_flux_momentum", "64x64");
    let gap = row(rows, "flux_gap", "64x64");
    let gap_fine = row(rows, "flux_gap", "128x128");
    let pass = direct.pass && momentum.pass && gap.pass && gap_fine.residual < gap.residual;
    report(
        6,
        "boundary flux identity",
        600,
        *start,
        pass,
        format!(
            "static {:.2e}/{:.2e} <= 1e-12, gap 64x64 {:.3e} <= 0.1, 128x128 {:.3e}",
            direct.residual, momentum.residual, gap.residual, gap_fine.residual
        ),
    );
}

/// `E(T) - E0 + D(T)` for a fixed-step run of `init` on 32x32.
fn energy_drift(dt: f64, t_end: f64) -> f64 {
    let cfg = RunConfig {
        grid: GridConfig { nr: 32, ntheta: 32 },
        time: TimeConfig { t_end, dt: Some(dt), ..TimeConfig::default() },
        init: mid_sim_init(SEED),
        ..RunConfig::default()
    };
    let out = run(&cfg, None).unwrap();
    out.ledger.rows.last().unwrap().energy_drift
}

fn richardson_order(a: f64, b: f64, c: f64) -> f64 {
    ((a - b) / (b - c)).log2()
}

#[test]
fn c07_conservation() {
    let start = Instant::now();
    let fluid = FluidParams::default();
    let grid = PolarGrid::new(128, 128, 1.0).unwrap();
    let analysis = AnalysisParams::new(1.0, 1.0, 2.0, &fluid).unwrap();
    let (mut state, _) = init_data(&grid, &small_e0_init(), &fluid, &analysis).unwrap();
    let mut stepper = Stepper::new(&grid, &fluid).unwrap();
    let mass0 = state.mass(&grid).unwrap();
    let (mut mass_drift, mut min_rho, mut no_slip) = (0.0f64, state.rho.min(), grid.no_slip_defect(&state.u).unwrap());
    for _ in 0..1000 {
        let dt = stepper.cfl_limit(&state);
        state = stepper.step(&state, dt).unwrap();
        mass_drift = mass_drift.max((state.mass(&grid).unwrap() - mass0).abs() / mass0);
        min_rho = min_rho.min(state.rho.min());
        no_slip = no_slip.max(grid.no_slip_defect(&state.u).unwrap());
    }
    let e = [1e-4, 5e-5, 2.5e-5].map(|dt| energy_drift(dt, 0.02));
    let order = richardson_order(e[0], e[1], e[2]);
    let pass = mass_drift <= MASS_TOL && min_rho >= 0.0 && no_slip <= NO_SLIP_TOL && order >= 0.9;
    report(
        7,
        "conservation suite",
        600,
        start,
        pass,
        format!(
            "128x128 x 1000 steps to t = {:.3e}: mass drift {mass_drift:.2e} <= 1e-12, min rho {min_rho:.4}, no-slip {no_slip:.2e} <= 1e-8; energy-law order {order:.3} >= 0.9",
            state.t
        ),
    );
}

#[test]
fn c08_superposition() {
    let start = Instant::now();
    let fluid = FluidParams::default();
    let grid = PolarGrid::new(64, 64, 1.0).unwrap();
    let analysis = AnalysisParams::new(1.0, 1.0, 2.0, &fluid).unwrap();
    let (mut state, _) = init_data(&grid, &mid_sim_init(SEED), &fluid, &analysis).unwrap();
    let mut stepper = Stepper::new(&grid, &fluid).unwrap();
    let (mut w1, mut w2) = (state.u.clone(), state.u.scale(0.0));
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let dt = stepper.cfl_limit(&state);
        let (next, ctx) = stepper.step_with_context(&state, dt).unwrap();
        (w1, w2) = stepper.split_probe_step(&ctx, &w1, &w2).unwrap();
        state = next;
        let gap = grid.lq_norm_vector(&(&state.u - &(&w1 + &w2)), 2.0).unwrap();
        worst = worst.max(gap / grid.lq_norm_vector(&state.u, 2.0).unwrap());
    }
    report(8, "superposition probe", 300, start, worst <= 1e-9, format!("max |u - w1 - w2| / |u| {worst:.2e} <= 1e-9 over 200 steps"));
}

/// Time integral of the signed renormalized residual over a fixed-step run.
fn renormalized_residual(s0: &State, grid: &PolarGrid, fluid: &FluidParams, dt: f64, t_end: f64, alpha: f64) -> f64 {
    let mut stepper = Stepper::new(grid, fluid).unwrap();
    let mut s = s0.clone();
    let mut acc = 0.0;
    for _ in 0..(t_end / dt).round() as usize {
        let next = stepper.step(&s, dt).unwrap();
        acc += dt * density_lq_ode_residual(grid, &s, &next, dt, alpha).unwrap();
        s = next;
    }
    acc
}

#[test]
fn c09_renormalized_identity() {
    let start = Instant::now();
    let fluid = FluidParams::default();
    let grid = PolarGrid::new(32, 32, 1.0).unwrap();
    let analysis = AnalysisParams::new(1.0, 1.0, 2.0, &fluid).unwrap();
    let (s0, _) = init_data(&grid, &mid_sim_init(SEED), &fluid, &analysis).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for alpha in [2.0, analysis.q0] {
        let r = [8e-4, 4e-4, 2e-4].map(|dt| renormalized_residual(&s0, &grid, &fluid, dt, 0.02, alpha));
        let order = richardson_order(r[0], r[1], r[2]);
        pass &= order >= 0.9;
        parts.push(format!("alpha {alpha}: order {order:.3}"));
    }
    report(9, "renormalized density identity", 600, start, pass, format!("{} >= 0.9", parts.join(", ")));
}

#[test]
fn c10_zlotnik() {
    let start = Instant::now();
    let fuzz = fuzz_check(SEED, 100).unwrap();
    let exp = ZlotnikInstance { g: GFunction::Affine { c0: 0.0, c1: 1.0 }, y0: 5.0, b: Forcing::zero(3.0), slack: 0.0 };
    let s = brute_force_ode(&exp, 1e-2).unwrap();
    let e1 = s.t.iter().zip(&s.y).map(|(t, y)| (y - 5.0 * (-t).exp()).abs()).fold(0.0, f64::max);
    let jump = ZlotnikInstance {
        g: GFunction::Constant { c: 0.0 },
        y0: 0.4,
        b: Forcing { knots: vec![0.0, 2.0], slopes: vec![0.0], jumps: vec![(1.0, 0.7)] },
        slack: 0.0,
    };
    let s = brute_force_ode(&jump, 1e-2).unwrap();
    let e2 = (s.max() - zlotnik_bound(0.4, f64::NEG_INFINITY, 0.7)).abs().max((s.at(0.999) - 0.4).abs());
    let lin = ZlotnikInstance { g: GFunction::Affine { c0: 0.0, c1: 1.0 }, y0: 0.0, b: Forcing::linear(8.0, 1.0), slack: 0.0 };
    let s = brute_force_ode(&lin, 1e-2).unwrap();
    let e3 = s.t.iter().zip(&s.y).map(|(t, y)| (y - (1.0 - (-t).exp())).abs()).fold(0.0, f64::max);
    let bounded = s.max() <= zlotnik_bound(0.0, 1.0, 0.0);
    let pass = fuzz.violations.is_empty() && fuzz.max_slack <= ORACLE_TOL && e1 <= 1e-6 && e2 <= 1e-6 && e3 <= 1e-6 && bounded;
    report(
        10,
        "zlotnik fuzz",
        60,
        start,
        pass,
        format!(
            "{} cases, {} violations, max slack {:.2e}; closed forms {e1:.1e}, {e2:.1e}, {e3:.1e} <= 1e-6",
            fuzz.cases,
            fuzz.violations.len(),
            fuzz.max_slack
        ),
    );
}

#[test]
fn c11_elliptic_probes() {
    let start = Instant::now();
    let fluid = FluidParams::default();
    let probe = |n: usize| elliptic_constant_probe(&PolarGrid::new(n, n, 1.0).unwrap(), &fluid, 2.0, 50, SEED).unwrap();
    let (a, b) = (probe(32), probe(64));
    let mut pass = true;
    let mut parts = Vec::new();
    for (x, y) in a.iter().zip(&b) {
        match (x.max_ratio, y.max_ratio) {
            (Some(p), Some(q)) if p.is_finite() && q.is_finite() => {
                let change = (q - p).abs() / p;
                pass &= change <= 0.25;
                parts.push(format!("{} {p:.3}->{q:.3} ({:.1}%)", x.estimate_name, 100.0 * change));
            }
            _ => {
                pass = false;
                parts.push(format!("{} not finite", x.estimate_name));
            }
        }
    }
    report(11, "elliptic-constant probes", 900, start, pass, parts.join(", "));
}

#[test]
fn c12_bootstrap_smoke() {
    let start = Instant::now();
    let cfg = RunConfig {
        grid: GridConfig { nr: 64, ntheta: 64 },
        time: TimeConfig { t_end: 2.0, ..TimeConfig::default() },
        init: small_e0_init(),
        ..RunConfig::default()
    };
    let out = run(&cfg, None).unwrap();
    let rho_bound = 1.75 * cfg.analysis.rho_bar;
    let within = out.ledger.rho_q0_sup <= rho_bound;
    if !within {
        let _ = writeln!(std::io::stderr(), "criterion 12 REPORT: rho_q0 sup {} above {rho_bound}", out.ledger.rho_q0_sup);
    }
    let pass = out.stats.finite && all_asserts_pass(&out.checks) && (out.final_state.t - 2.0).abs() < 1e-9;
    report(
        12,
        "bootstrap smoke run",
        1200,
        start,
        pass,
        format!(
            "{} steps to t = {}, finite {}, mass drift {:.1e}; REPORT rho_q0 sup {:.4} <= {rho_bound} {}",
            out.stats.steps,
            out.final_state.t,
            out.stats.finite,
            out.ledger.mass_drift(),
            out.ledger.rho_q0_sup,
            if within { "holds" } else { "violated" }
        ),
    );
}
