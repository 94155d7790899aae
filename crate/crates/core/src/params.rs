//! Physical and analysis-side parameters.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Constants of the isentropic system: viscosities, pressure law
/// `p = a rho^gamma`, disc radius and mean density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidParams {
    pub mu: f64,
    pub lambda: f64,
    pub a: f64,
    pub gamma: f64,
    #[serde(default = "one")]
    pub radius: f64,
    pub rho_tilde: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for FluidParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 0.5,
            a: 1.0,
            gamma: 1.5,
            radius: 1.0,
            rho_tilde: 1.0,
        }
    }
}

impl FluidParams {
    /// Checks `mu > 0`, `mu + lambda >= 0`, `a > 0`, `gamma in (1, 2)`,
    /// `R > 0`, `rho_tilde > 0`.
    pub fn validate(&self) -> Result<()> {
        self.validate_viscosity()?;
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(invalid("a", format!("{} must be positive", self.a)));
        }
        if !(self.gamma > 1.0 && self.gamma < 2.0) {
            return Err(invalid("gamma", format!("{} must lie in (1, 2)", self.gamma)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid("radius", format!("{} must be positive", self.radius)));
        }
        if !(self.rho_tilde > 0.0 && self.rho_tilde.is_finite()) {
            return Err(invalid("rho_tilde", format!("{} must be positive", self.rho_tilde)));
        }
        Ok(())
    }

    /// Only the viscosity constraint; the Lamé solver does not need the
    /// pressure law.
    pub fn validate_viscosity(&self) -> Result<()> {
        validate_viscosity(self.mu, self.lambda)
    }

    pub fn pressure_of(&self, rho: f64) -> f64 {
        self.a * rho.max(0.0).powf(self.gamma)
    }

    /// `p(rho_tilde)`.
    pub fn mean_pressure(&self) -> f64 {
        self.pressure_of(self.rho_tilde)
    }

    /// `sqrt(a gamma rho^(gamma-1))`, with vacuum clamped to zero.
    pub fn sound_speed(&self, rho: f64) -> f64 {
        (self.a * self.gamma * rho.max(0.0).powf(self.gamma - 1.0)).sqrt()
    }

    /// `2 mu / (2 mu + lambda)`, the weight of the pressure part in the
    /// flux decomposition.
    pub fn pressure_weight(&self) -> f64 {
        2.0 * self.mu / (2.0 * self.mu + self.lambda)
    }
}

pub(crate) fn validate_viscosity(mu: f64, lambda: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("{mu} must be positive")));
    }
    if !lambda.is_finite() || mu + lambda < 0.0 {
        return Err(invalid("lambda", format!("mu + lambda = {} must be >= 0", mu + lambda)));
    }
    Ok(())
}

/// Proof-side parameters: regularity `beta`, the initial `H^beta` bound
/// `M`, the density ceiling `rho_bar`, and the derived exponents
/// `q0 = 12 gamma / (gamma - 1)` and `delta0 = (2 beta - 1) / (3 beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisParams {
    pub beta: f64,
    pub m_bound: f64,
    pub rho_bar: f64,
    pub q0: f64,
    pub delta0: f64,
}

impl AnalysisParams {
    pub fn new(beta: f64, m_bound: f64, rho_bar: f64, fluid: &FluidParams) -> Result<Self> {
        if !(beta > 0.5 && beta <= 1.0) {
            return Err(invalid("beta", format!("{beta} must lie in (1/2, 1]")));
        }
        if !(m_bound > 0.0 && m_bound.is_finite()) {
            return Err(invalid("m_bound", format!("{m_bound} must be positive")));
        }
        if !(rho_bar >= fluid.rho_tilde + 1.0) {
            return Err(invalid(
                "rho_bar",
                format!("{rho_bar} must be >= rho_tilde + 1 = {}", fluid.rho_tilde + 1.0),
            ));
        }
        if !(fluid.gamma > 1.0) {
            return Err(invalid("gamma", "q0 needs gamma > 1"));
        }
        Ok(Self {
            beta,
            m_bound,
            rho_bar,
            q0: q0(fluid.gamma),
            delta0: delta0(beta),
        })
    }
}

/// `12 gamma / (gamma - 1)`.
pub fn q0(gamma: f64) -> f64 {
    12.0 * gamma / (gamma - 1.0)
}

/// `(2 beta - 1) / (3 beta)`.
pub fn delta0(beta: f64) -> f64 {
    (2.0 * beta - 1.0) / (3.0 * beta)
}

/// `sigma(t) = min(1, t)`.
pub fn sigma(t: f64) -> f64 {
    t.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_exponents() {
        assert_eq!(q0(1.5), 36.0);
        assert_eq!(delta0(1.0), 1.0 / 3.0);
        // delta0 covers (0, 1/3] on (1/2, 1]
        for b in [0.5001, 0.6, 0.75, 0.9, 1.0] {
            let d = delta0(b);
            assert!(d > 0.0 && d <= 1.0 / 3.0 + 1e-15);
        }
    }

    #[test]
    fn sigma_saturates() {
        assert_eq!(sigma(0.25), 0.25);
        assert_eq!(sigma(1.0), 1.0);
        assert_eq!(sigma(3.0), 1.0);
    }

    #[test]
    fn analysis_constraints() {
        let f = FluidParams::default();
        assert!(AnalysisParams::new(0.5, 1.0, 2.0, &f).is_err());
        assert!(AnalysisParams::new(1.1, 1.0, 2.0, &f).is_err());
        assert!(AnalysisParams::new(1.0, 1.0, 1.5, &f).is_err());
        let a = AnalysisParams::new(1.0, 1.0, 2.0, &f).unwrap();
        assert_eq!(a.q0, 36.0);
    }

    #[test]
    fn fluid_constraints() {
        assert!(FluidParams::default().validate().is_ok());
        let bad = [
            FluidParams { mu: 0.0, ..Default::default() },
            FluidParams { lambda: -1.5, ..Default::default() },
            FluidParams { gamma: 2.0, ..Default::default() },
            FluidParams { gamma: 1.0, ..Default::default() },
            FluidParams { a: 0.0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
        // mu + lambda = 0 is admissible
        assert!(FluidParams { mu: 1.0, lambda: -1.0, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn pressure_examples() {
        let p = FluidParams { a: 1.0, gamma: 1.5, ..Default::default() };
        assert_eq!(p.pressure_of(1.0), 1.0);
        assert_eq!(p.pressure_of(0.0), 0.0);
        assert!((p.pressure_of(2.0) - 2.828427124746190).abs() < 1e-12);
    }
}
