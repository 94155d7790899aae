//! Initial data: a smooth compact density bump on top of `rho_tilde` and a
//! seeded band-limited velocity cut off smoothly before the wall, optionally
//! rescaled to a prescribed initial energy.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimates::energy;
use crate::grid::{PolarGrid, ScalarField, VectorField, Wall};
use crate::lame::frobenius;
use crate::params::{AnalysisParams, FluidParams};
use crate::random::{seeded, BandLimitedVector};
use crate::state::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitFamily {
    Bump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub family: InitFamily,
    /// Signed peak of the density bump before mean correction.
    pub amplitude: f64,
    /// Velocity scale; ignored when `target_e0` is set.
    pub velocity_amplitude: f64,
    pub target_e0: Option<f64>,
    /// Share of `target_e0` carried by the potential energy.
    pub potential_fraction: f64,
    pub center: [f64; 2],
    pub width: f64,
    /// Radius of the disc carrying the initial velocity, as a fraction of `R`.
    pub velocity_support: f64,
    pub kmax: f64,
    pub modes: usize,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            family: InitFamily::Bump,
            amplitude: 0.0,
            velocity_amplitude: 0.0,
            target_e0: None,
            potential_fraction: 0.5,
            center: [0.2, 0.0],
            width: 0.5,
            velocity_support: 0.8,
            kmax: 4.0,
            modes: 6,
            seed: 0,
        }
    }
}

impl InitConfig {
    pub fn validate(&self, radius: f64) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(invalid("amplitude", "must be finite"));
        }
        if !self.velocity_amplitude.is_finite() {
            return Err(invalid("velocity_amplitude", "must be finite"));
        }
        if let Some(e) = self.target_e0 {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(invalid("target_e0", format!("{e} must be nonnegative")));
            }
        }
        if !(0.0..=1.0).contains(&self.potential_fraction) {
            return Err(invalid("potential_fraction", "must lie in [0, 1]"));
        }
        if !(self.width > 0.0) || self.center[0].hypot(self.center[1]) + self.width > radius {
            return Err(invalid("width", "the bump support must lie inside the disc"));
        }
        if !(self.velocity_support > 0.0 && self.velocity_support <= 1.0) {
            return Err(invalid("velocity_support", "must lie in (0, 1]"));
        }
        if !(self.kmax > 0.0) {
            return Err(invalid("kmax", "must be positive"));
        }
        Ok(())
    }
}

/// Norms of the initial data against the assumption bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitReport {
    pub rho_q0: f64,
    pub e0: f64,
    /// `|grad u0|_2` for `beta = 1`, the Gagliardo seminorm otherwise;
    /// `None` when the double sum is above the size guard.
    pub u0_h_beta: Option<f64>,
    pub rho_q0_within_rho_bar: bool,
    pub u0_within_m: Option<bool>,
}

/// `exp(1 - 1/(1 - s^2))` on `s < 1`.
fn bump(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// `rho_tilde + amp phi - mean`, clipped at 0 and rescaled to mean `rho_tilde`.
fn density(grid: &PolarGrid, cfg: &InitConfig, fluid: &FluidParams, amp: f64) -> Result<ScalarField> {
    if amp == 0.0 {
        return Ok(ScalarField::constant(grid, fluid.rho_tilde));
    }
    let [cx, cy] = cfg.center;
    let b = ScalarField::from_fn(grid, |x, y| amp * bump((x - cx).hypot(y - cy) / cfg.width));
    let mean = grid.integrate(&b)? / grid.area();
    let raw = b.map(|v| (fluid.rho_tilde + v - mean).max(0.0));
    let m = grid.integrate(&raw)? / grid.area();
    if !(m > 0.0) {
        return Err(Error::Infeasible("density bump empties the disc".into()));
    }
    Ok(raw.scale(fluid.rho_tilde / m))
}

/// `phi(|x| / r_v) V(x)` with `V` seeded; zero in a wall layer.
fn velocity_shape(grid: &PolarGrid, cfg: &InitConfig) -> VectorField {
    let v = BandLimitedVector::random(&mut seeded(cfg.seed), cfg.kmax, cfg.modes);
    let support = cfg.velocity_support * grid.radius();
    VectorField::from_fn(grid, |x, y| {
        let w = bump(x.hypot(y) / support);
        let [a, b] = v.eval(x, y);
        [w * a, w * b]
    })
}

fn potential(grid: &PolarGrid, fluid: &FluidParams, rho: &ScalarField) -> Result<f64> {
    let s = State { rho: rho.clone(), u: VectorField::zeros(grid), t: 0.0 };
    Ok(energy(grid, &s, fluid)?.potential)
}

/// Bump amplitude with potential energy `target`, keeping the sign of
/// `cfg.amplitude` (positive when it is 0).
fn solve_amplitude(grid: &PolarGrid, cfg: &InitConfig, fluid: &FluidParams, target: f64) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    let sign = if cfg.amplitude < 0.0 { -1.0 } else { 1.0 };
    let p = |s: f64| -> Result<f64> { potential(grid, fluid, &density(grid, cfg, fluid, sign * s)?) };
    let mut hi = if cfg.amplitude != 0.0 { cfg.amplitude.abs() } else { 0.1 * fluid.rho_tilde };
    let mut p_hi = p(hi)?;
    let mut doublings = 0;
    while p_hi < target {
        let next = p(2.0 * hi)?;
        doublings += 1;
        if doublings > 60 || next <= p_hi * (1.0 + 1e-12) {
            return Err(Error::Infeasible(format!(
                "potential energy saturates at {p_hi:e} below the target {target:e}"
            )));
        }
        hi *= 2.0;
        p_hi = next;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(sign * 0.5 * (lo + hi))
}

/// Builds the initial state and its report.
pub fn init_data(
    grid: &PolarGrid,
    cfg: &InitConfig,
    fluid: &FluidParams,
    analysis: &AnalysisParams,
) -> Result<(State, InitReport)> {
    cfg.validate(grid.radius())?;
    let (rho, u) = match cfg.target_e0 {
        None => {
            let rho = density(grid, cfg, fluid, cfg.amplitude)?;
            let u = if cfg.velocity_amplitude == 0.0 {
                VectorField::zeros(grid)
            } else {
                velocity_shape(grid, cfg).scale(cfg.velocity_amplitude)
            };
            (rho, u)
        }
        Some(target) => {
            let amp = solve_amplitude(grid, cfg, fluid, cfg.potential_fraction * target)?;
            let rho = density(grid, cfg, fluid, amp)?;
            let kinetic = target - potential(grid, fluid, &rho)?;
            let shape = velocity_shape(grid, cfg);
            let k_shape = 0.5 * grid.integrate(&(&rho * &shape.norm_sq()))?;
            let u = if kinetic <= 0.0 {
                VectorField::zeros(grid)
            } else if k_shape > 0.0 {
                shape.scale((kinetic / k_shape).sqrt())
            } else {
                return Err(Error::Infeasible("velocity shape carries no kinetic energy".into()));
            };
            (rho, u)
        }
    };
    let state = State::new(grid, rho, u, 0.0)?;
    let report = init_report(grid, &state, fluid, analysis)?;
    Ok((state, report))
}

pub fn init_report(grid: &PolarGrid, state: &State, fluid: &FluidParams, analysis: &AnalysisParams) -> Result<InitReport> {
    let rho_q0 = grid.lq_norm(&state.rho, analysis.q0)?;
    let e0 = energy(grid, state, fluid)?.total;
    let u0_h_beta = if analysis.beta == 1.0 {
        let g = frobenius(&grid.jacobian_with(&state.u, Wall::Zero)?)?;
        Some(grid.integrate(&(&g * &g))?.sqrt())
    } else {
        match grid.gagliardo_seminorm_vector(&state.u, analysis.beta, 2.0) {
            Ok(v) => Some(v.sqrt()),
            Err(Error::SizeGuard { .. }) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(InitReport {
        rho_q0,
        e0,
        u0_h_beta,
        rho_q0_within_rho_bar: rho_q0 <= analysis.rho_bar,
        u0_within_m: u0_h_beta.map(|h| h <= analysis.m_bound),
    })
}
