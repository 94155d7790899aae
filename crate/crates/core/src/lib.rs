//! Numerical laboratory for 2D compressible Navier-Stokes on the disc with
//! no-slip walls.

pub mod config;
pub mod error;
pub mod estimates;
pub mod flux;
pub mod greens;
pub mod grid;
pub mod init;
pub mod io;
pub mod lame;
pub mod params;
pub mod probe;
pub mod random;
pub mod run;
pub mod solver;
pub mod sparse;
pub mod state;
pub mod verify;
pub mod zlotnik;

pub use error::{Error, Result};
pub use grid::{BoundaryData, PolarGrid, ScalarField, VectorField, Wall};
