//! Flow state `(rho, u, t)` and the pressure law.

use crate::error::{Error, Result};
use crate::grid::{PolarGrid, ScalarField, VectorField};
use crate::params::FluidParams;

/// Density, Cartesian velocity and time on a polar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub rho: ScalarField,
    pub u: VectorField,
    pub t: f64,
}

impl State {
    /// Checks shapes, finiteness and `rho >= 0`.
    pub fn new(grid: &PolarGrid, rho: ScalarField, u: VectorField, t: f64) -> Result<Self> {
        grid.check(rho.shape())?;
        grid.check(u.shape())?;
        rho.check_finite("density")?;
        u.check_finite("velocity")?;
        if let Some((index, &value)) = rho.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeDensity { index, value });
        }
        Ok(Self { rho, u, t })
    }

    /// `rho = rho_tilde`, `u = 0`.
    pub fn uniform(grid: &PolarGrid, fluid: &FluidParams) -> Self {
        Self {
            rho: ScalarField::constant(grid, fluid.rho_tilde),
            u: VectorField::zeros(grid),
            t: 0.0,
        }
    }

    pub fn mass(&self, grid: &PolarGrid) -> Result<f64> {
        grid.integrate(&self.rho)
    }

    pub fn pressure(&self, fluid: &FluidParams) -> Result<ScalarField> {
        compute_pressure(&self.rho, fluid)
    }

    /// `rho u`.
    pub fn momentum(&self) -> VectorField {
        self.u.scale_by(&self.rho)
    }
}

/// Pointwise `a rho^gamma`; negative density is an error.
pub fn compute_pressure(rho: &ScalarField, fluid: &FluidParams) -> Result<ScalarField> {
    if let Some((index, &value)) = rho.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeDensity { index, value });
    }
    rho.check_finite("density")?;
    Ok(rho.map(|r| fluid.pressure_of(r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pressure_examples() {
        let grid = PolarGrid::new(4, 8, 1.0).unwrap();
        let f = FluidParams { a: 1.0, gamma: 1.5, ..Default::default() };
        let p = compute_pressure(&ScalarField::constant(&grid, 1.0), &f).unwrap();
        assert!(p.values().iter().all(|&v| v == 1.0));
        let p = compute_pressure(&ScalarField::zeros(&grid), &f).unwrap();
        assert_eq!(p.max_abs(), 0.0);
        let p = compute_pressure(&ScalarField::constant(&grid, 2.0), &f).unwrap();
        assert!((p.max() - 2.828427).abs() < 1e-6);
        let mut rho = ScalarField::constant(&grid, 1.0);
        rho.values_mut()[3] = -1e-3;
        assert!(matches!(compute_pressure(&rho, &f), Err(Error::NegativeDensity { index: 3, .. })));
    }

    #[test]
    fn uniform_state_mass() {
        let grid = PolarGrid::new(8, 16, 2.0).unwrap();
        let f = FluidParams { rho_tilde: 1.5, radius: 2.0, ..Default::default() };
        let s = State::uniform(&grid, &f);
        let m = s.mass(&grid).unwrap();
        assert!((m - 1.5 * std::f64::consts::PI * 4.0).abs() < 1e-12);
    }
}
