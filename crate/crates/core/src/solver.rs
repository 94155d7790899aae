//! Time stepping for the isentropic system
//! `rho_t + div(rho u) = 0`, `(rho u)_t + div(rho u ⊗ u) + grad p = mu lap u + lambda grad div u`,
//! `u = 0` on the wall.
//!
//! One step: first-order upwind finite volumes for `rho` and for the
//! convective momentum flux (both driven by the same face mass fluxes),
//! explicit pressure gradient, then the implicit viscous solve
//! `(diag(rho^{n+1}) - dt L) u^{n+1} = m*`.

use std::sync::Arc;

use faer::sparse::linalg::solvers::SymbolicLu;

use crate::error::{invalid, Error, Result};
use crate::grid::{PolarGrid, ScalarField, VectorField, Wall};
use crate::lame::lame_matrix;
use crate::params::FluidParams;
use crate::sparse::{Csr, SparseLu};
use crate::state::State;

/// Velocity is set to zero where `rho` falls below this.
pub const RHO_FLOOR: f64 = 1e-12;

/// Safety factor of the advective-acoustic CFL bound.
pub const CFL_SAFETY: f64 = 0.4;

/// Negative densities above `-NEG_ROUNDOFF * max rho` are rounding noise and
/// are clamped to zero; anything below is an error.
const NEG_ROUNDOFF: f64 = 1e-13;

/// Upwind mass fluxes through every interior face of the polar mesh.
///
/// `radial[k]` is the flux from cell `(i, j)` to `(i + 1, j)`;
/// `angular[k]` from `(i, j)` to `(i, j + 1)`. Wall and pole faces carry
/// no flux.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFluxes {
    pub radial: Vec<f64>,
    pub angular: Vec<f64>,
}

/// `(diag(rho) - dt L) x = b` solved by iterative refinement with a cached
/// factorization of the same operator at a nearby density.
#[derive(Debug, Clone)]
pub struct ImplicitSystem {
    dt: f64,
    diag: Vec<f64>,
    vacuum: Vec<usize>,
    lame: Arc<Csr>,
    precond: Arc<SparseLu>,
}

/// Relative residual targeted by the refinement loop.
const REFINE_TOL: f64 = 1e-13;
const REFINE_MAX_ITERS: usize = 30;

impl ImplicitSystem {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let lx = self.lame.mul_vec(x);
        let mut out: Vec<f64> = x
            .iter()
            .zip(&self.diag)
            .zip(lx)
            .map(|((xi, d), l)| d * xi - self.dt * l)
            .collect();
        for &k in &self.vacuum {
            out[k] = x[k];
        }
        out
    }

    /// Returns the solution and the number of preconditioner solves.
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, usize)> {
        let mut b = b.to_vec();
        for &k in &self.vacuum {
            b[k] = 0.0;
        }
        let bn = norm(&b);
        if bn == 0.0 {
            return Ok((vec![0.0; b.len()], 0));
        }
        let mut x = self.precond.solve(&b)?;
        for iters in 1..=REFINE_MAX_ITERS {
            let ax = self.apply(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            if norm(&r) <= REFINE_TOL * bn {
                return Ok((x, iters));
            }
            let dx = self.precond.solve(&r)?;
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        Err(Error::Solver(format!("implicit refinement did not reach {REFINE_TOL:e} in {REFINE_MAX_ITERS} iterations")))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Everything the linear probe systems need to repeat a step of the main
/// scheme: the transported densities, face fluxes and the implicit operator.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub dt: f64,
    pub rho_old: ScalarField,
    pub rho_new: ScalarField,
    pub fluxes: MassFluxes,
    pub grad_p: VectorField,
    pub system: ImplicitSystem,
}

#[derive(Debug)]
struct Factorization {
    dt: f64,
    diag: Vec<f64>,
    vacuum: Vec<usize>,
    lu: Arc<SparseLu>,
}

/// Reusable stepping machinery for one grid and one fluid.
pub struct Stepper {
    grid: PolarGrid,
    fluid: FluidParams,
    lame: Arc<Csr>,
    symbolic: Option<SymbolicLu<usize>>,
    factor: Option<Factorization>,
}

impl std::fmt::Debug for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper")
            .field("grid", &self.grid.shape())
            .field("fluid", &self.fluid)
            .finish()
    }
}

/// Refactor when the density moved by more than this (relative) since the
/// cached factorization.
const REFACTOR_DRIFT: f64 = 0.1;

/// Same for the time step.
const REFACTOR_DT_DRIFT: f64 = 0.05;

impl Stepper {
    pub fn new(grid: &PolarGrid, fluid: &FluidParams) -> Result<Self> {
        fluid.validate()?;
        if (grid.radius() - fluid.radius).abs() > 1e-14 * fluid.radius {
            return Err(invalid("radius", format!("grid radius {} != fluid radius {}", grid.radius(), fluid.radius)));
        }
        Ok(Self {
            grid: grid.clone(),
            fluid: *fluid,
            lame: Arc::new(lame_matrix(grid, fluid.mu, fluid.lambda)),
            symbolic: None,
            factor: None,
        })
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn fluid(&self) -> &FluidParams {
        &self.fluid
    }

    /// `CFL_SAFETY * min h / (|u| + c)` with `h = min(dr, r_i dtheta)`.
    pub fn cfl_limit(&self, state: &State) -> f64 {
        let g = &self.grid;
        let mut limit = f64::INFINITY;
        for k in 0..g.len() {
            let (i, _) = g.ij(k);
            let h = g.dr().min(g.r(i) * g.dtheta());
            let speed = state.u.x.values()[k].hypot(state.u.y.values()[k])
                + self.fluid.sound_speed(state.rho.values()[k]);
            if speed > 0.0 {
                limit = limit.min(CFL_SAFETY * h / speed);
            }
        }
        limit
    }

    /// Face mass fluxes `rho_upwind * u_n * area`.
    pub fn mass_fluxes(&self, state: &State) -> MassFluxes {
        let g = &self.grid;
        let (nr, nt) = g.shape();
        let (ux, uy, rho) = (state.u.x.values(), state.u.y.values(), state.rho.values());
        let mut radial = vec![0.0; g.len()];
        let mut angular = vec![0.0; g.len()];
        for i in 0..nr {
            for j in 0..nt {
                let k = g.idx(i, j);
                if i + 1 < nr {
                    let kk = g.idx(i + 1, j);
                    let (c, s) = (g.cos(j), g.sin(j));
                    let un = 0.5 * ((ux[k] + ux[kk]) * c + (uy[k] + uy[kk]) * s);
                    let area = (g.r(i) + 0.5 * g.dr()) * g.dtheta();
                    let up = if un >= 0.0 { rho[k] } else { rho[kk] };
                    radial[k] = up * un * area;
                }
                let jj = (j + 1) % nt;
                let kk = g.idx(i, jj);
                let th = g.theta(j) + 0.5 * g.dtheta();
                let (c, s) = (th.cos(), th.sin());
                let un = 0.5 * (-(ux[k] + ux[kk]) * s + (uy[k] + uy[kk]) * c);
                let up = if un >= 0.0 { rho[k] } else { rho[kk] };
                angular[k] = up * un * g.dr();
            }
        }
        MassFluxes { radial, angular }
    }

    /// `-(1/V) sum_faces flux * q_upwind`, the upwind divergence of `q`
    /// carried by the mass fluxes. With `q = 1` this is the density update.
    pub fn transport_divergence(&self, fluxes: &MassFluxes, q: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let (nr, nt) = g.shape();
        let mut acc = vec![0.0; g.len()];
        for i in 0..nr {
            for j in 0..nt {
                let k = g.idx(i, j);
                if i + 1 < nr {
                    let kk = g.idx(i + 1, j);
                    let f = fluxes.radial[k];
                    let up = if f >= 0.0 { k } else { kk };
                    let v = f * q[up];
                    acc[k] -= v;
                    acc[kk] += v;
                }
                let kk = g.idx(i, (j + 1) % nt);
                let f = fluxes.angular[k];
                let up = if f >= 0.0 { k } else { kk };
                let v = f * q[up];
                acc[k] -= v;
                acc[kk] += v;
            }
        }
        for (k, a) in acc.iter_mut().enumerate() {
            *a /= g.weight(k);
        }
        acc
    }

    /// Upwind density update; rounding-level negatives are clamped.
    pub fn transport_density(&self, rho: &ScalarField, fluxes: &MassFluxes, dt: f64) -> Result<ScalarField> {
        let ones = vec![1.0; self.grid.len()];
        let div = self.transport_divergence(fluxes, &ones);
        let scale = rho.max().max(RHO_FLOOR);
        let mut out = Vec::with_capacity(rho.len());
        for (k, (&r, d)) in rho.values().iter().zip(div).enumerate() {
            let v = r + dt * d;
            if v < 0.0 {
                if v < -NEG_ROUNDOFF * scale {
                    return Err(Error::NegativeDensity { index: k, value: v });
                }
                out.push(0.0);
            } else {
                out.push(v);
            }
        }
        ScalarField::from_values(&self.grid, out)
    }

    /// Explicit part of the momentum update applied to a velocity-like field
    /// `w`: `rho_old w - dt/V sum flux w_upwind`.
    fn convect(&self, ctx_rho_old: &ScalarField, fluxes: &MassFluxes, w: &VectorField, dt: f64) -> VectorField {
        let cx = self.transport_divergence(fluxes, w.x.values());
        let cy = self.transport_divergence(fluxes, w.y.values());
        let mut mx = ctx_rho_old.clone();
        let mut my = ctx_rho_old.clone();
        for (k, (a, b)) in mx.values_mut().iter_mut().zip(my.values_mut()).enumerate() {
            *a = *a * w.x.values()[k] + dt * cx[k];
            *b = *b * w.y.values()[k] + dt * cy[k];
        }
        VectorField { x: mx, y: my }
    }

    fn factorize(&mut self, dt: f64, diag: Vec<f64>, vacuum: Vec<usize>) -> Result<()> {
        let mut m = Csr::diag(&diag).add_scaled(1.0, &self.lame, -dt);
        if !vacuum.is_empty() {
            m = m.with_identity_rows(&vacuum);
        }
        if self.symbolic.is_none() {
            self.symbolic = Some(SparseLu::symbolic(&m)?);
        }
        let symbolic = self.symbolic.as_ref().expect("symbolic analysis set above");
        let lu = match SparseLu::factor_with(symbolic, m.clone()) {
            Ok(lu) => lu,
            // the pattern can change when vacuum rows appear; redo the analysis
            Err(_) => {
                let s = SparseLu::symbolic(&m)?;
                let lu = SparseLu::factor_with(&s, m)?;
                self.symbolic = Some(s);
                lu
            }
        };
        self.factor = Some(Factorization {
            dt,
            diag,
            vacuum,
            lu: Arc::new(lu),
        });
        Ok(())
    }

    /// The implicit operator for `rho_new`, reusing the cached factorization
    /// when the vacuum set agrees and `dt` and the density are close.
    fn implicit_system(&mut self, rho_new: &ScalarField, dt: f64) -> Result<ImplicitSystem> {
        let n = self.grid.len();
        let mut diag = Vec::with_capacity(2 * n);
        diag.extend_from_slice(rho_new.values());
        diag.extend_from_slice(rho_new.values());
        let vacuum: Vec<usize> = (0..2 * n).filter(|&k| diag[k] < RHO_FLOOR).collect();
        let reusable = self.factor.as_ref().is_some_and(|f| {
            (dt - f.dt).abs() <= REFACTOR_DT_DRIFT * f.dt
                && f.vacuum == vacuum
                && f.diag.iter().zip(&diag).all(|(a, b)| (a - b).abs() <= REFACTOR_DRIFT * a.max(RHO_FLOOR))
        });
        if !reusable {
            self.factorize(dt, diag.clone(), vacuum.clone())?;
        }
        let f = self.factor.as_ref().expect("factorization set above");
        Ok(ImplicitSystem {
            dt,
            diag,
            vacuum,
            lame: Arc::clone(&self.lame),
            precond: Arc::clone(&f.lu),
        })
    }

    fn solve_implicit(&mut self, system: &mut ImplicitSystem, rho_new: &ScalarField, rhs: &VectorField) -> Result<VectorField> {
        let b = rhs.to_stacked();
        let x = match system.solve(&b) {
            Ok((x, _)) => x,
            Err(_) => {
                // slow refinement: factor the exact operator
                self.factorize(system.dt, system.diag.clone(), system.vacuum.clone())?;
                *system = self.implicit_system(rho_new, system.dt)?;
                system.solve(&b)?.0
            }
        };
        VectorField::from_stacked(&self.grid, &x)
    }

    /// One step; returns the new state and the context for probe systems.
    pub fn step_with_context(&mut self, state: &State, dt: f64) -> Result<(State, StepContext)> {
        self.grid.check(state.rho.shape())?;
        self.grid.check(state.u.shape())?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("{dt} must be positive")));
        }
        let limit = self.cfl_limit(state);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit });
        }
        let fluxes = self.mass_fluxes(state);
        let rho_new = self.transport_density(&state.rho, &fluxes, dt)?;
        let p = state.pressure(&self.fluid)?;
        let grad_p = self.grid.gradient_with(&p, Wall::Extrapolate)?;
        let mut m = self.convect(&state.rho, &fluxes, &state.u, dt);
        m = &m - &grad_p.scale(dt);
        let mut system = self.implicit_system(&rho_new, dt)?;
        let u = self.solve_implicit(&mut system, &rho_new, &m)?;
        let next = State {
            rho: rho_new.clone(),
            u,
            t: state.t + dt,
        };
        let ctx = StepContext {
            dt,
            rho_old: state.rho.clone(),
            rho_new,
            fluxes,
            grad_p,
            system,
        };
        Ok((next, ctx))
    }

    pub fn step(&mut self, state: &State, dt: f64) -> Result<State> {
        Ok(self.step_with_context(state, dt)?.0)
    }

    /// One step of the two linear systems `rho w1_dot = L w1` and
    /// `rho w2_dot + grad p = L w2` with the transport, pressure and
    /// implicit operator of the step that produced `ctx`.
    pub fn split_probe_step(
        &self,
        ctx: &StepContext,
        w1: &VectorField,
        w2: &VectorField,
    ) -> Result<(VectorField, VectorField)> {
        self.grid.check(w1.shape())?;
        self.grid.check(w2.shape())?;
        let m1 = self.convect(&ctx.rho_old, &ctx.fluxes, w1, ctx.dt);
        let m2 = &self.convect(&ctx.rho_old, &ctx.fluxes, w2, ctx.dt) - &ctx.grad_p.scale(ctx.dt);
        let w1 = ctx.system.solve(&m1.to_stacked())?.0;
        let w2 = ctx.system.solve(&m2.to_stacked())?.0;
        Ok((
            VectorField::from_stacked(&self.grid, &w1)?,
            VectorField::from_stacked(&self.grid, &w2)?,
        ))
    }
}

/// `(u_next - u_prev) / dt + (u_next . grad) u_next`.
pub fn material_derivative(grid: &PolarGrid, prev: &State, next: &State, dt: f64) -> Result<VectorField> {
    grid.check(prev.u.shape())?;
    grid.check(next.u.shape())?;
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("{dt} must be positive")));
    }
    let [axx, axy, ayx, ayy] = grid.jacobian_with(&next.u, Wall::Zero)?;
    let (ux, uy) = (&next.u.x, &next.u.y);
    let conv_x = &(ux * &axx) + &(uy * &axy);
    let conv_y = &(ux * &ayx) + &(uy * &ayy);
    let dudt = (&next.u - &prev.u).scale(1.0 / dt);
    Ok(&dudt + &VectorField { x: conv_x, y: conv_y })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fluid() -> FluidParams {
        FluidParams::default()
    }

    fn swirl(grid: &PolarGrid, amp: f64) -> VectorField {
        VectorField::from_fn(grid, |x, y| {
            let s = 1.0 - x * x - y * y;
            [-amp * s * y, amp * s * x]
        })
    }

    #[test]
    fn static_state_is_steady() {
        let grid = PolarGrid::new(12, 16, 1.0).unwrap();
        let mut st = Stepper::new(&grid, &fluid()).unwrap();
        let s0 = State::uniform(&grid, &fluid());
        let s1 = st.step(&s0, 1e-3).unwrap();
        assert!((&s1.rho - &s0.rho).max_abs() <= 1e-14);
        assert!(s1.u.magnitude().max_abs() <= 1e-14);
    }

    #[test]
    fn viscous_decay_without_pressure() {
        let grid = PolarGrid::new(16, 16, 1.0).unwrap();
        let f = FluidParams { a: 1e-12, lambda: 0.0, ..fluid() };
        let mut st = Stepper::new(&grid, &f).unwrap();
        let mut s = State { u: swirl(&grid, 0.1), ..State::uniform(&grid, &f) };
        let ke = |s: &State| grid.integrate(&(&s.rho * &s.u.norm_sq())).unwrap();
        let mut last = ke(&s);
        for _ in 0..10 {
            s = st.step(&s, 1e-3).unwrap();
            let now = ke(&s);
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn mass_is_conserved() {
        let grid = PolarGrid::new(12, 16, 1.0).unwrap();
        let mut st = Stepper::new(&grid, &fluid()).unwrap();
        let rho = ScalarField::from_fn(&grid, |x, y| 1.0 + 0.2 * (-8.0 * ((x - 0.3).powi(2) + y * y)).exp());
        let u = VectorField::from_fn(&grid, |x, y| {
            let s = 1.0 - x * x - y * y;
            [s * (0.3 - y), s * (x + 0.2 * y)]
        });
        let mut s = State::new(&grid, rho, u, 0.0).unwrap();
        let m0 = s.mass(&grid).unwrap();
        for _ in 0..100 {
            let dt = 0.5 * st.cfl_limit(&s);
            s = st.step(&s, dt).unwrap();
        }
        assert!((s.mass(&grid).unwrap() - m0).abs() <= 1e-12 * m0);
        assert!(s.rho.min() >= 0.0);
    }

    #[test]
    fn cfl_violation_is_an_error() {
        let grid = PolarGrid::new(8, 8, 1.0).unwrap();
        let mut st = Stepper::new(&grid, &fluid()).unwrap();
        let s = State::uniform(&grid, &fluid());
        let lim = st.cfl_limit(&s);
        assert!(matches!(st.step(&s, 2.0 * lim), Err(Error::Cfl { .. })));
    }

    #[test]
    fn material_derivative_examples() {
        let grid = PolarGrid::new(8, 8, 1.0).unwrap();
        let s = State { u: swirl(&grid, 1.0), ..State::uniform(&grid, &fluid()) };
        let ud = material_derivative(&grid, &s, &s, 0.1).unwrap();
        let [axx, axy, ayx, ayy] = grid.jacobian_with(&s.u, Wall::Zero).unwrap();
        let cx = &(&s.u.x * &axx) + &(&s.u.y * &axy);
        let cy = &(&s.u.x * &ayx) + &(&s.u.y * &ayy);
        assert!((&ud.x - &cx).max_abs() < 1e-15 && (&ud.y - &cy).max_abs() < 1e-15);
        let z = State::uniform(&grid, &fluid());
        assert_eq!(material_derivative(&grid, &z, &z, 0.1).unwrap().magnitude().max_abs(), 0.0);
    }

    #[test]
    fn material_derivative_of_separable_field() {
        // u = phi(t) U(x), phi(t) = 1 + t, U = (1 - r^2)(x, y)
        let err = |n: usize, dt: f64| {
            let grid = PolarGrid::new(n, n, 1.0).unwrap();
            let uu = |c: f64| VectorField::from_fn(&grid, |x, y| {
                let s = 1.0 - x * x - y * y;
                [c * s * x, c * s * y]
            });
            let t = 0.5;
            let prev = State { u: uu(1.0 + t - dt), ..State::uniform(&grid, &fluid()) };
            let next = State { u: uu(1.0 + t), ..prev.clone() };
            let ud = material_derivative(&grid, &prev, &next, dt).unwrap();
            let phi = 1.0 + t;
            // (U . grad) U = s (s - 2 r^2) (x, y) for U = s (x, y)
            let exact = VectorField::from_fn(&grid, |x, y| {
                let r2 = x * x + y * y;
                let s = 1.0 - r2;
                let c = phi * phi * s * (s - 2.0 * r2);
                [s * x + c * x, s * y + c * y]
            });
            grid.lq_norm_vector(&(&ud - &exact), 2.0).unwrap()
        };
        let (a, b) = (err(16, 1e-3), err(32, 5e-4));
        assert!(b < a && b < 1e-2, "{a} {b}");
    }

    #[test]
    fn probe_systems_superpose() {
        let grid = PolarGrid::new(12, 12, 1.0).unwrap();
        let mut st = Stepper::new(&grid, &fluid()).unwrap();
        let rho = ScalarField::from_fn(&grid, |x, _| 1.0 + 0.1 * x);
        let mut s = State::new(&grid, rho, swirl(&grid, 0.2), 0.0).unwrap();
        let (mut w1, mut w2) = (s.u.clone(), VectorField::zeros(&grid));
        let mut z1 = s.u.scale(2.0);
        let zero = VectorField::zeros(&grid);
        for _ in 0..20 {
            let dt = 0.5 * st.cfl_limit(&s);
            let (next, ctx) = st.step_with_context(&s, dt).unwrap();
            (w1, w2) = st.split_probe_step(&ctx, &w1, &w2).unwrap();
            let (a, _) = st.split_probe_step(&ctx, &z1, &zero).unwrap();
            z1 = a;
            let (still_zero, _) = st.split_probe_step(&ctx, &zero, &zero).unwrap();
            assert_eq!(still_zero.magnitude().max_abs(), 0.0);
            s = next;
        }
        let sum = &w1 + &w2;
        let gap = grid.lq_norm_vector(&(&s.u - &sum), 2.0).unwrap();
        assert!(gap <= 1e-9 * grid.lq_norm_vector(&s.u, 2.0).unwrap());
        // the w1 system is linear
        let lin = grid.lq_norm_vector(&(&z1 - &w1.scale(2.0)), 2.0).unwrap();
        assert!(lin <= 1e-12 * grid.lq_norm_vector(&z1, 2.0).unwrap());
    }
}
