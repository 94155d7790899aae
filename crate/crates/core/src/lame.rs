//! Dirichlet Lamé solver `mu lap u + lambda grad div u = grad g + f`,
//! `u = 0` on the wall, and the velocity splitting `u = v + w`.
//!
//! Unknowns are stacked `[u_x; u_y]`. The divergence of `u` uses the
//! zero-wall closure; the outer gradient does not assume anything about
//! `div u` at the wall and extrapolates.

use crate::error::{Error, Result};
use crate::grid::{PolarGrid, ScalarField, VectorField, Wall};
use crate::params::{validate_viscosity, FluidParams};
use crate::sparse::{Csr, SparseLu};
use crate::state::State;

/// Right-hand side of the Lamé system.
#[derive(Debug, Clone, PartialEq)]
pub enum LameSource {
    Gradient(ScalarField),
    Body(VectorField),
    Both { g: ScalarField, f: VectorField },
}

impl LameSource {
    /// `grad g + f` on the grid.
    pub fn field(&self, grid: &PolarGrid) -> Result<VectorField> {
        match self {
            LameSource::Gradient(g) => grid.gradient_with(g, Wall::Extrapolate),
            LameSource::Body(f) => {
                grid.check(f.shape())?;
                f.check_finite("body force")?;
                Ok(f.clone())
            }
            LameSource::Both { g, f } => {
                grid.check(f.shape())?;
                f.check_finite("body force")?;
                Ok(&grid.gradient_with(g, Wall::Extrapolate)? + f)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LameProblem<'a> {
    pub mu: f64,
    pub lambda: f64,
    pub grid: &'a PolarGrid,
    pub source: LameSource,
}

/// Assembled Lamé operator.
pub fn lame_matrix(grid: &PolarGrid, mu: f64, lambda: f64) -> Csr {
    let lap = grid.laplacian_matrix(Wall::Zero);
    let n = grid.len();
    let zero = Csr::from_rows(n, (0..n).map(|_| Vec::new()));
    let visc = Csr::block2(lap, &zero, &zero, lap);
    if lambda == 0.0 {
        return visc.scale_rows(&vec![mu; 2 * n]);
    }
    let div = Csr::block2(grid.dx_matrix(Wall::Zero), grid.dy_matrix(Wall::Zero), &zero, &zero);
    let grad = Csr::block2(grid.dx_matrix(Wall::Extrapolate), &zero, grid.dy_matrix(Wall::Extrapolate), &zero);
    // grad has a zero second block column, div a zero second block row
    let grad_div = grad.matmul(&div);
    visc.add_scaled(mu, &grad_div, lambda)
}

/// Factorized Lamé operator for one grid and one `(mu, lambda)` pair.
#[derive(Debug)]
pub struct LameSolver {
    grid: PolarGrid,
    mu: f64,
    lambda: f64,
    lu: SparseLu,
}

impl LameSolver {
    pub fn new(grid: &PolarGrid, mu: f64, lambda: f64) -> Result<Self> {
        validate_viscosity(mu, lambda)?;
        let lu = SparseLu::factor(lame_matrix(grid, mu, lambda))?;
        Ok(Self {
            grid: grid.clone(),
            mu,
            lambda,
            lu,
        })
    }

    pub fn for_fluid(grid: &PolarGrid, fluid: &FluidParams) -> Result<Self> {
        Self::new(grid, fluid.mu, fluid.lambda)
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Solves `L u = rhs`.
    pub fn solve_rhs(&self, rhs: &VectorField) -> Result<VectorField> {
        self.grid.check(rhs.shape())?;
        rhs.check_finite("lame right-hand side")?;
        let x = self.lu.solve(&rhs.to_stacked())?;
        VectorField::from_stacked(&self.grid, &x)
    }

    pub fn solve(&self, source: &LameSource) -> Result<VectorField> {
        self.solve_rhs(&source.field(&self.grid)?)
    }

    /// `L u` with the same stencil as the factorization.
    pub fn apply(&self, u: &VectorField) -> Result<VectorField> {
        self.grid.check(u.shape())?;
        VectorField::from_stacked(&self.grid, &self.lu.matrix().mul_vec(&u.to_stacked()))
    }
}

/// One-shot solve; factorizes the operator for this call only.
pub fn lame_solve(p: &LameProblem<'_>) -> Result<VectorField> {
    LameSolver::new(p.grid, p.mu, p.lambda)?.solve(&p.source)
}

/// Both sides of `int mu |grad u|^2 + lambda (div u)^2 = -int source . u`.
pub fn energy_identity(
    grid: &PolarGrid,
    mu: f64,
    lambda: f64,
    u: &VectorField,
    source: &VectorField,
) -> Result<(f64, f64)> {
    let [a, b, c, d] = grid.jacobian_with(u, Wall::Zero)?;
    let grad_sq = &(&(&a * &a) + &(&b * &b)) + &(&(&c * &c) + &(&d * &d));
    let div = grid.divergence_with(u, Wall::Zero)?;
    let lhs = mu * grid.integrate(&grad_sq)? + lambda * grid.integrate(&(&div * &div))?;
    let rhs = -grid.integrate(&source.dot(u))?;
    Ok((lhs, rhs))
}

/// `v = L^{-1} grad p` and `w = L^{-1} (rho u_dot)`.
pub fn split_velocity(
    solver: &LameSolver,
    state: &State,
    u_dot: &VectorField,
    fluid: &FluidParams,
) -> Result<(VectorField, VectorField)> {
    let grid = solver.grid();
    grid.check(u_dot.shape())?;
    let p = state.pressure(fluid)?;
    let v = solver.solve(&LameSource::Gradient(p))?;
    let w = solver.solve(&LameSource::Body(u_dot.scale_by(&state.rho)))?;
    Ok((v, w))
}

/// Pointwise Frobenius norm of a list of components.
pub(crate) fn frobenius(parts: &[ScalarField]) -> Result<ScalarField> {
    let first = parts.first().ok_or_else(|| Error::Format("empty component list".into()))?;
    let mut acc = ScalarField::zeros_like(first);
    for p in parts {
        acc = &acc + &(p * p);
    }
    Ok(acc.map(f64::sqrt))
}

/// `u* = (1 - r^2)(x - y, x + y)` on the unit disc and
/// `f = L u* = -8 mu (-y, x) - 8 (mu + lambda)(x, y)`.
pub fn manufactured_swirl(grid: &PolarGrid, mu: f64, lambda: f64) -> (VectorField, VectorField) {
    let u = VectorField::from_fn(grid, |x, y| {
        let s = 1.0 - x * x - y * y;
        [s * (x - y), s * (x + y)]
    });
    let f = VectorField::from_fn(grid, |x, y| {
        [8.0 * mu * y - 8.0 * (mu + lambda) * x, -8.0 * mu * x - 8.0 * (mu + lambda) * y]
    });
    (u, f)
}

/// Relative L2 error of the discrete solve against [`manufactured_swirl`].
pub fn manufactured_error(grid: &PolarGrid, mu: f64, lambda: f64) -> Result<f64> {
    let (exact, f) = manufactured_swirl(grid, mu, lambda);
    let u = LameSolver::new(grid, mu, lambda)?.solve(&LameSource::Body(f))?;
    Ok(grid.lq_norm_vector(&(&u - &exact), 2.0)? / grid.lq_norm_vector(&exact, 2.0)?)
}
