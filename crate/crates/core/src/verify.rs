//! Verification suites shared by the command line and the acceptance
//! target: Green reproduction and kernel identities, Lamé convergence,
//! and closure of the flux decomposition.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::estimates::{boundary_flux_direct, boundary_flux_static, boundary_flux_via_momentum, flux_route_gap, fmt};
use crate::flux::FluxOps;
use crate::greens::BallGreens;
use crate::grid::{BoundaryData, PolarGrid, ScalarField, VectorField};
use crate::init::{init_data, InitConfig};
use crate::lame::{energy_identity, manufactured_error, LameSolver};
use crate::params::{AnalysisParams, FluidParams};
use crate::random::seeded;
use crate::run::CheckKind;
use crate::solver::{material_derivative, Stepper};
use crate::state::State;

/// Direction of the comparison against the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cmp {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Cmp {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::AtMost => "<=",
            Self::AtLeast => ">=",
        }
    }
}

/// One row of a verification table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub test: String,
    pub kind: CheckKind,
    /// Space dimension.
    pub n: usize,
    pub grid: String,
    pub residual: f64,
    pub cmp: Cmp,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerifyRow {
    pub fn new(test: &str, kind: CheckKind, n: usize, grid: String, residual: f64, cmp: Cmp, tolerance: f64) -> Self {
        let pass = match cmp {
            Cmp::AtMost => residual <= tolerance,
            Cmp::AtLeast => residual >= tolerance,
        };
        Self { test: test.into(), kind, n, grid, residual, cmp, tolerance, pass }
    }
}

pub const VERIFY_HEADER: &str = "test,kind,n,grid,residual,cmp,tolerance,pass";

pub fn verify_csv(rows: &[VerifyRow]) -> String {
    let mut out = format!("{VERIFY_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.test,
            r.kind.as_str(),
            r.n,
            r.grid,
            fmt(r.residual),
            r.cmp.as_str(),
            fmt(r.tolerance),
            u8::from(r.pass)
        ));
    }
    out
}

/// True when every ASSERT row passes.
pub fn rows_pass(rows: &[VerifyRow]) -> bool {
    rows.iter().filter(|r| r.kind == CheckKind::Assert).all(|r| r.pass)
}

fn shape(grid: &PolarGrid) -> String {
    format!("{}x{}", grid.nr(), grid.ntheta())
}

pub const REPRODUCTION_TOL: f64 = 0.02;
pub const REPRODUCTION_RATIO: f64 = 1.7;
pub const HARMONIC_TOL: f64 = 1e-8;
pub const HARMONIC_NTHETA: usize = 512;
pub const IDENTITY_TOL: f64 = 1e-12;
pub const LAME_ORDER: f64 = 1.8;
pub const EXACT_TOL: f64 = 1e-12;
pub const MID_CLOSURE_TOL: f64 = 0.05;
pub const FLUX_GAP_TOL: f64 = 0.1;

/// `|H - G(lap H)|_2 / |H|_2` for `H = 1 - r^2`, with the dense quadrature.
pub fn reproduction_error(grid: &PolarGrid) -> Result<f64> {
    let g = BallGreens::disc(grid.radius())?;
    let r2 = grid.radius() * grid.radius();
    let h = ScalarField::from_polar_fn(grid, |r, _| r2 - r * r);
    let lap = ScalarField::constant(grid, -4.0);
    let phi = g.volume_potential(grid, &lap)?;
    Ok(grid.lq_norm(&(&phi - &h), 2.0)? / grid.lq_norm(&h, 2.0)?)
}

/// `max |oint P(x, .) - 1|` over `points`, trapezoid rule on `ntheta` wall nodes.
pub fn harmonic_measure_defect(g: &BallGreens, points: &[[f64; 2]], ntheta: usize) -> Result<f64> {
    let bd = BoundaryData::from_fn(ntheta, g.radius(), |_| 0.0);
    let mut worst: f64 = 0.0;
    for x in points {
        let mut s = 0.0;
        for q in 0..ntheta {
            let t = q as f64 * bd.dtheta();
            s += g.poisson_kernel(x, &[g.radius() * t.cos(), g.radius() * t.sin()])?;
        }
        worst = worst.max((s * bd.line_element() - 1.0).abs());
    }
    Ok(worst)
}

/// Harmonic measure defect on `count` seeded points with `|x| <= 0.8`
/// in the unit disc.
pub fn harmonic_measure_sampled(count: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let points: Vec<[f64; 2]> = (0..count)
        .map(|_| {
            let p = point_in_ball(&mut rng, 2, 0.8);
            [p[0], p[1]]
        })
        .collect();
    harmonic_measure_defect(&BallGreens::disc(1.0)?, &points, HARMONIC_NTHETA)
}

/// Uniform point in the ball of radius `r` in dimension `n`.
fn point_in_ball(rng: &mut impl Rng, n: usize, r: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
        if p.iter().map(|v| v * v).sum::<f64>() < r * r {
            return p;
        }
    }
}

/// Uniform point on the sphere of radius `r` in dimension `n`.
fn point_on_sphere(rng: &mut impl Rng, n: usize, r: f64) -> Vec<f64> {
    loop {
        let p = point_in_ball(rng, n, 1.0);
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return p.into_iter().map(|v| r * v / norm).collect();
        }
    }
}

/// Largest boundary identity residual over `pairs` seeded pairs with
/// `|x| <= 0.8 R` and `|y| = R`.
pub fn boundary_identity_max(dim: usize, pairs: usize, seed: u64) -> Result<f64> {
    let g = BallGreens::new(dim, 1.0)?;
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = point_in_ball(&mut rng, dim, 0.8);
        let y = point_on_sphere(&mut rng, dim, 1.0);
        worst = worst.max(g.boundary_identity_residual(&x, &y));
    }
    Ok(worst)
}

/// Reproduction at `base/2` and `base`, harmonic measure on 20 points,
/// boundary identity on 1000 pairs in dimensions 2 and 3.
pub fn greens_suite(base: (usize, usize), seed: u64) -> Result<Vec<VerifyRow>> {
    use CheckKind::{Assert, Report};
    let fine = PolarGrid::new(base.0, base.1, 1.0)?;
    let coarse = PolarGrid::new((base.0 / 2).max(2), (base.1 / 2).max(4), 1.0)?;
    let (ec, ef) = (reproduction_error(&coarse)?, reproduction_error(&fine)?);
    let mut rows = vec![
        VerifyRow::new("reproduction", Report, 2, shape(&coarse), ec, Cmp::AtMost, REPRODUCTION_TOL),
        VerifyRow::new("reproduction", Assert, 2, shape(&fine), ef, Cmp::AtMost, REPRODUCTION_TOL),
        VerifyRow::new("reproduction_ratio", Assert, 2, shape(&fine), ec / ef, Cmp::AtLeast, REPRODUCTION_RATIO),
    ];
    let hm = harmonic_measure_sampled(20, seed)?;
    rows.push(VerifyRow::new("harmonic_measure", Assert, 2, format!("wall{HARMONIC_NTHETA}"), hm, Cmp::AtMost, HARMONIC_TOL));
    for dim in [2, 3] {
        let r = boundary_identity_max(dim, 1000, seed.wrapping_add(dim as u64))?;
        rows.push(VerifyRow::new("boundary_identity", Assert, dim, "pairs1000".into(), r, Cmp::AtMost, IDENTITY_TOL));
    }
    Ok(rows)
}

/// Observed order `log2(e_coarse / e_fine)`.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Manufactured Lamé errors at `base`, `2 base`, `4 base` with the
/// pairwise orders, and the energy identity on the finest grid.
pub fn lame_suite(base: (usize, usize), fluid: &FluidParams) -> Result<Vec<VerifyRow>> {
    use CheckKind::{Assert, Report};
    fluid.validate_viscosity()?;
    let grids: Vec<PolarGrid> = [1, 2, 4]
        .iter()
        .map(|&m| PolarGrid::new(m * base.0, m * base.1, 1.0))
        .collect::<Result<_>>()?;
    let errs: Vec<f64> = grids.iter().map(|g| manufactured_error(g, fluid.mu, fluid.lambda)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (g, e) in grids.iter().zip(&errs) {
        rows.push(VerifyRow::new("manufactured_l2", Report, 2, shape(g), *e, Cmp::AtMost, 1.0));
    }
    for k in 0..2 {
        let order = observed_order(errs[k], errs[k + 1]);
        rows.push(VerifyRow::new("manufactured_order", Assert, 2, shape(&grids[k + 1]), order, Cmp::AtLeast, LAME_ORDER));
    }
    let finest = &grids[2];
    let f = VectorField::from_fn(finest, |x, y| [(2.0 * y).sin() + x, (x * y).cos()]);
    let u = LameSolver::new(finest, fluid.mu, fluid.lambda)?.solve_rhs(&f)?;
    let (lhs, rhs) = energy_identity(finest, fluid.mu, fluid.lambda, &u, &f)?;
    rows.push(VerifyRow::new("energy_identity", Report, 2, shape(finest), (lhs - rhs).abs() / rhs.abs(), Cmp::AtMost, 1e-2));
    Ok(rows)
}

/// Closure residual on `rho`, `u` with `rho u_dot = L u - grad p`, so the
/// momentum balance holds exactly at the discrete level.
pub fn exact_pair_closure(grid: &PolarGrid, fluid: &FluidParams) -> Result<f64> {
    let ops = FluxOps::new(grid, fluid)?;
    let rho = ScalarField::from_fn(grid, |x, y| 1.0 + 0.2 * (-4.0 * ((x - 0.2).powi(2) + y * y)).exp());
    let u = VectorField::from_fn(grid, |x, y| {
        let s = 1.0 - x * x - y * y;
        [s * (0.3 * x - y), s * (x + 0.5 * y * y)]
    });
    let state = State { rho: rho.clone(), u: u.clone(), t: 0.0 };
    let lu = LameSolver::for_fluid(grid, fluid)?.apply(&u)?;
    let grad_p = grid.gradient(&state.pressure(fluid)?)?;
    let rho_udot = &lu - &grad_p;
    let u_dot = VectorField {
        x: rho_udot.x.zip_map(&rho, |a, r| a / r),
        y: rho_udot.y.zip_map(&rho, |a, r| a / r),
    };
    ops.decompose_flux(&state, &u_dot)?.closure_residual(grid)
}

/// Closure and flux diagnostics at the end of a short run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MidSim {
    pub t: f64,
    pub steps: usize,
    pub closure: f64,
    pub flux_direct: f64,
    pub flux_momentum: f64,
    pub gap: f64,
}

/// Initial data for the mid-simulation checks.
pub fn mid_sim_init(seed: u64) -> InitConfig {
    InitConfig { amplitude: 0.2, velocity_amplitude: 0.3, seed, ..InitConfig::default() }
}

/// Integrates `init` on `grid` to `t_end` at the CFL step and decomposes
/// the flux of the last state with the discrete material derivative.
pub fn mid_simulation(grid: &PolarGrid, fluid: &FluidParams, init: &InitConfig, t_end: f64) -> Result<MidSim> {
    let analysis = AnalysisParams::new(1.0, 1.0, 2.0, fluid)?;
    let (mut state, _) = init_data(grid, init, fluid, &analysis)?;
    let mut stepper = Stepper::new(grid, fluid)?;
    let mut prev = state.clone();
    let mut dt = 0.0;
    let mut steps = 0;
    while steps == 0 || state.t < t_end * (1.0 - 1e-12) {
        dt = stepper.cfl_limit(&state).min((t_end - state.t).max(0.0));
        if !(dt > 0.0) {
            dt = stepper.cfl_limit(&state);
        }
        let next = stepper.step(&state, dt)?;
        prev = std::mem::replace(&mut state, next);
        steps += 1;
    }
    let u_dot = material_derivative(grid, &prev, &state, dt)?;
    let closure = FluxOps::new(grid, fluid)?.decompose_flux(&state, &u_dot)?.closure_residual(grid)?;
    let flux_direct = 0.5 * (boundary_flux_direct(grid, &prev, fluid)? + boundary_flux_direct(grid, &state, fluid)?);
    let flux_momentum = boundary_flux_via_momentum(grid, &prev, &state, dt, fluid)?;
    let gap = flux_route_gap(flux_direct, flux_momentum, grid.radius());
    Ok(MidSim { t: state.t, steps, closure, flux_direct, flux_momentum, gap })
}

/// Constant-state closure, exact-pair closure under refinement, static
/// boundary flux identity, and the mid-simulation closure and flux gap at
/// `base` and `2 base`.
pub fn decomposition_suite(base: (usize, usize), fluid: &FluidParams, seed: u64, t_mid: f64) -> Result<Vec<VerifyRow>> {
    use CheckKind::{Assert, Report};
    let grid = PolarGrid::new(base.0, base.1, fluid.radius)?;
    let fine = PolarGrid::new(2 * base.0, 2 * base.1, fluid.radius)?;
    let mut rows = Vec::new();

    let uniform = State::uniform(&grid, fluid);
    let ops = FluxOps::new(&grid, fluid)?;
    let c = ops.decompose_flux(&uniform, &VectorField::zeros(&grid))?.closure_residual(&grid)?;
    rows.push(VerifyRow::new("constant_closure", Assert, 2, shape(&grid), c, Cmp::AtMost, EXACT_TOL));

    let half = PolarGrid::new((base.0 / 2).max(2), (base.1 / 2).max(4), fluid.radius)?;
    let (pc, pf) = (exact_pair_closure(&half, fluid)?, exact_pair_closure(&grid, fluid)?);
    rows.push(VerifyRow::new("exact_pair_closure", Report, 2, shape(&half), pc, Cmp::AtMost, MID_CLOSURE_TOL));
    rows.push(VerifyRow::new("exact_pair_closure", Assert, 2, shape(&grid), pf, Cmp::AtMost, MID_CLOSURE_TOL));
    rows.push(VerifyRow::new("exact_pair_closure_ratio", Assert, 2, shape(&grid), pc / pf, Cmp::AtLeast, 1.0));

    let expected = -2.0 * PI * fluid.radius * fluid.mean_pressure();
    let scale = expected.abs().max(1.0);
    let direct = boundary_flux_direct(&grid, &uniform, fluid)?;
    let stat = boundary_flux_static(&grid, &uniform, fluid)? / fluid.radius;
    rows.push(VerifyRow::new("static_flux_direct", Assert, 2, shape(&grid), (direct - expected).abs() / scale, Cmp::AtMost, EXACT_TOL));
    rows.push(VerifyRow::new("static_flux_momentum", Assert, 2, shape(&grid), (stat - expected).abs() / scale, Cmp::AtMost, EXACT_TOL));

    let p = ScalarField::from_fn(&grid, |x, y| 1.0 + x * y + (2.0 * x).sin());
    let q = ScalarField::from_fn(&grid, |x, y| (x - y).cos());
    let f = VectorField::from_fn(&grid, |x, y| [x * y, (3.0 * y).sin()]);
    let h = VectorField::from_fn(&grid, |x, y| [y.cos(), x - y * y]);
    let a_lin = &ops.op_a(&(&p.scale(2.0) + &q.scale(-0.5)))? - &(&ops.op_a(&p)?.scale(2.0) + &ops.op_a(&q)?.scale(-0.5));
    let r_lin = &ops.op_r(&(&f.scale(2.0) + &h.scale(-0.5)))? - &(&ops.op_r(&f)?.scale(2.0) + &ops.op_r(&h)?.scale(-0.5));
    rows.push(VerifyRow::new("linearity_a", Assert, 2, shape(&grid), a_lin.max_abs(), Cmp::AtMost, 1e-10));
    rows.push(VerifyRow::new("linearity_r", Assert, 2, shape(&grid), r_lin.max_abs(), Cmp::AtMost, 1e-10));

    let init = mid_sim_init(seed);
    let (m, mf) = (mid_simulation(&grid, fluid, &init, t_mid)?, mid_simulation(&fine, fluid, &init, t_mid)?);
    rows.push(VerifyRow::new("mid_closure", Assert, 2, shape(&grid), m.closure, Cmp::AtMost, MID_CLOSURE_TOL));
    rows.push(VerifyRow::new("mid_closure", Report, 2, shape(&fine), mf.closure, Cmp::AtMost, MID_CLOSURE_TOL));
    rows.push(VerifyRow::new("mid_closure_ratio", Assert, 2, shape(&fine), m.closure / mf.closure, Cmp::AtLeast, 1.0));
    rows.push(VerifyRow::new("flux_gap", Assert, 2, shape(&grid), m.gap, Cmp::AtMost, FLUX_GAP_TOL));
    rows.push(VerifyRow::new("flux_gap", Report, 2, shape(&fine), mf.gap, Cmp::AtMost, FLUX_GAP_TOL));
    rows.push(VerifyRow::new("flux_gap_ratio", Assert, 2, shape(&fine), m.gap / mf.gap, Cmp::AtLeast, 1.0));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_comparisons() {
        let a = VerifyRow::new("a", CheckKind::Assert, 2, "4x4".into(), 2.0, Cmp::AtLeast, 1.7);
        let b = VerifyRow::new("b", CheckKind::Report, 2, "4x4".into(), 2.0, Cmp::AtMost, 1.0);
        assert!(a.pass && !b.pass);
        assert!(rows_pass(&[a.clone(), b.clone()]));
        let csv = verify_csv(&[a]);
        assert_eq!(csv.lines().nth(1).unwrap(), "a,ASSERT,2,4x4,2e0,>=,1.7e0,1");
    }

    #[test]
    fn greens_suite_on_small_grids() {
        let rows = greens_suite((16, 16), 1).unwrap();
        assert_eq!(rows.len(), 6);
        for r in rows.iter().filter(|r| r.test != "reproduction" && r.test != "reproduction_ratio") {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn boundary_identity_is_seeded() {
        assert_eq!(boundary_identity_max(3, 50, 4).unwrap(), boundary_identity_max(3, 50, 4).unwrap());
    }

    #[test]
    fn mid_simulation_small() {
        let grid = PolarGrid::new(16, 16, 1.0).unwrap();
        let m = mid_simulation(&grid, &FluidParams::default(), &mid_sim_init(0), 0.01).unwrap();
        assert!(m.steps > 0 && m.closure.is_finite() && m.gap < 0.1, "{m:?}");
    }
}
