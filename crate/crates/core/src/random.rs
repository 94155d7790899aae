//! Seeded smooth random fields built from a few Cartesian Fourier modes.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{PolarGrid, ScalarField, VectorField};

/// The generator used everywhere a seed appears in a config or CLI flag.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Mode {
    kx: f64,
    ky: f64,
    amp: f64,
    phase: f64,
}

/// `sum_m amp_m cos(k_m . x + phase_m)` with `|k_m| <= kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLimited {
    modes: Vec<Mode>,
}

impl BandLimited {
    /// Amplitudes decay like `1 / (1 + |k|^2)` so the fields stay smooth.
    pub fn random(rng: &mut impl Rng, kmax: f64, nmodes: usize) -> Self {
        let modes = (0..nmodes)
            .map(|_| {
                let k = kmax * rng.gen::<f64>().sqrt();
                let dir = rng.gen_range(0.0..2.0 * PI);
                Mode {
                    kx: k * dir.cos(),
                    ky: k * dir.sin(),
                    amp: rng.gen_range(-1.0..1.0) / (1.0 + k * k),
                    phase: rng.gen_range(0.0..2.0 * PI),
                }
            })
            .collect();
        Self { modes }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| m.amp * (m.kx * x + m.ky * y + m.phase).cos())
            .sum()
    }

    pub fn sample(&self, grid: &PolarGrid) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| self.eval(x, y))
    }
}

/// Pair of independent band-limited components.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLimitedVector {
    pub x: BandLimited,
    pub y: BandLimited,
}

impl BandLimitedVector {
    pub fn random(rng: &mut impl Rng, kmax: f64, nmodes: usize) -> Self {
        let x = BandLimited::random(rng, kmax, nmodes);
        let y = BandLimited::random(rng, kmax, nmodes);
        Self { x, y }
    }

    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        [self.x.eval(x, y), self.y.eval(x, y)]
    }

    pub fn sample(&self, grid: &PolarGrid) -> VectorField {
        VectorField::from_fn(grid, |x, y| self.eval(x, y))
    }
}
