//! Green function of the n-ball, its Poisson kernel, and the volume and
//! boundary potentials `G` and `G_b` on the polar grid.
//!
//! `omega_n` is the volume of the unit n-ball, so `n omega_n` is the area of
//! the unit sphere. With that convention the Poisson kernel
//! `(R^2 - |x|^2) / (n omega_n R |x-y|^n)` integrates to one over the wall
//! and is the normal derivative of [`BallGreens::green_value`].

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::grid::{pairwise_sum, BoundaryData, PolarGrid, ScalarField, VectorField, Wall, DENSE_GUARD_CELLS};
use crate::sparse::SparseLu;

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Green function of the ball of radius `R` in `R^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallGreens {
    dim: usize,
    radius: f64,
    omega: f64,
}

impl BallGreens {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim < 2 {
            return Err(invalid("n", format!("dimension {dim} must be >= 2")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("R", format!("radius {radius} must be positive")));
        }
        Ok(Self {
            dim,
            radius,
            omega: unit_ball_volume(dim),
        })
    }

    /// The unit disc.
    pub fn disc(radius: f64) -> Result<Self> {
        Self::new(2, radius)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Unit-ball volume `omega_n`.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Surface area `n omega_n` of the unit sphere.
    pub fn sphere_area(&self) -> f64 {
        self.dim as f64 * self.omega
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(invalid("point", format!("expected {} coordinates, got {}", self.dim, p.len())));
        }
        Ok(())
    }

    fn check_interior(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let rx = dot(x, x).sqrt();
        if !(rx < self.radius) {
            return Err(Error::OutsideDomain(format!("|x| = {rx} must be < R = {}", self.radius)));
        }
        Ok(rx)
    }

    /// `|R x/|x| - |x| y / R|`, written as
    /// `sqrt(R^2 - 2 x.y + |x|^2 |y|^2 / R^2)` so that `x = 0` gives the
    /// limit `R` without a 0/0.
    pub fn kelvin_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2 = self.radius * self.radius;
        (r2 - 2.0 * dot(x, y) + dot(x, x) * dot(y, y) / r2).max(0.0).sqrt()
    }

    /// `G(x, y)`, negative in the interior, zero for `|y| = R`.
    pub fn green_value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_interior(x)?;
        self.check_point(y)?;
        let ry = dot(y, y).sqrt();
        if ry > self.radius * (1.0 + 1e-12) {
            return Err(Error::OutsideDomain(format!("|y| = {ry} must be <= R = {}", self.radius)));
        }
        let d = dist(x, y);
        if d == 0.0 {
            return Err(Error::Coincident);
        }
        Ok(self.green_unchecked(d, self.kelvin_distance(x, y)))
    }

    fn green_unchecked(&self, d: f64, k: f64) -> f64 {
        if self.dim == 2 {
            (d.ln() - k.ln()) / (2.0 * PI)
        } else {
            let e = 2.0 - self.dim as f64;
            (d.powf(e) - k.powf(e)) / (e * self.sphere_area())
        }
    }

    /// `dG/dn (x, y) = (R^2 - |x|^2) / (n omega_n R |x - y|^n)` for `y` on
    /// the wall.
    pub fn poisson_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let rx = self.check_interior(x)?;
        self.check_point(y)?;
        Ok(self.poisson_unchecked(rx * rx, dist(x, y)))
    }

    fn poisson_unchecked(&self, rx2: f64, d: f64) -> f64 {
        (self.radius * self.radius - rx2) / (self.sphere_area() * self.radius * d.powi(self.dim as i32))
    }

    /// Closed form of `d(grad_x G)/dn` on the wall:
    /// `-2x / (n omega_n R |x-y|^n) - (R^2 - |x|^2)(x - y) / (omega_n R |x-y|^(n+2))`.
    pub fn normal_derivative_of_gradient(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.dim as i32;
        let d = dist(x, y);
        let rr = self.radius * self.radius - dot(x, x);
        let c1 = -2.0 / (self.sphere_area() * self.radius * d.powi(n));
        let c2 = -rr / (self.omega * self.radius * d.powi(n + 2));
        x.iter().zip(y).map(|(&xi, &yi)| c1 * xi + c2 * (xi - yi)).collect()
    }

    /// `|(y - x) . d(grad_x G)/dn - [1 / (n omega_n R |x-y|^(n-2)) + (n-1) dG/dn]|`.
    pub fn boundary_identity_residual(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim as i32;
        let d = dist(x, y);
        let lhs: f64 = self
            .normal_derivative_of_gradient(x, y)
            .iter()
            .zip(x.iter().zip(y))
            .map(|(g, (xi, yi))| (yi - xi) * g)
            .sum();
        let rhs = 1.0 / (self.sphere_area() * self.radius * d.powi(n - 2))
            + (n - 1) as f64 * self.poisson_unchecked(dot(x, x), d);
        (lhs - rhs).abs()
    }

    fn check_grid(&self, grid: &PolarGrid) -> Result<()> {
        if self.dim != 2 {
            return Err(invalid("n", "grid potentials need the disc (n = 2)"));
        }
        if (grid.radius() - self.radius).abs() > 1e-14 * self.radius {
            return Err(invalid("R", format!("grid radius {} != {}", grid.radius(), self.radius)));
        }
        Ok(())
    }

    /// Dense quadrature of `(G H)(x_i) = int G(x_i, y) H(y) dy`.
    ///
    /// The self cell uses the closed-form log integral over the disc of
    /// equal area plus the smooth Kelvin term; cells whose centers are within
    /// two cell diameters of the target (or of its Kelvin image) are
    /// integrated on an 8x8 sub-cell midpoint rule.
    pub fn volume_potential(&self, grid: &PolarGrid, h: &ScalarField) -> Result<ScalarField> {
        self.check_grid(grid)?;
        grid.check(h.shape())?;
        h.check_finite("volume potential density")?;
        if grid.len() > DENSE_GUARD_CELLS {
            return Err(Error::SizeGuard {
                what: "dense volume potential",
                cells: grid.len(),
                limit: DENSE_GUARD_CELLS,
            });
        }
        const SUB: usize = 8;
        let n = grid.len();
        let r2 = self.radius * self.radius;
        let pts: Vec<[f64; 2]> = (0..n).map(|k| grid.point(k)).collect();
        let hv = h.values();
        let (dr, dt) = (grid.dr(), grid.dtheta());
        let diam: Vec<f64> = (0..grid.nr()).map(|i| dr.hypot(grid.r(i) * dt)).collect();
        let mut out = Vec::with_capacity(n);
        let mut terms = Vec::with_capacity(n);
        for (k, &x) in pts.iter().enumerate() {
            let rx2 = x[0] * x[0] + x[1] * x[1];
            let image = [x[0] * r2 / rx2, x[1] * r2 / rx2];
            terms.clear();
            for (m, &y) in pts.iter().enumerate() {
                if hv[m] == 0.0 {
                    continue;
                }
                let (i, j) = grid.ij(m);
                let w = grid.ring_weight(i);
                if m == k {
                    let eps = (w / PI).sqrt();
                    let self_log = 0.5 * eps * eps * eps.ln() - 0.25 * eps * eps;
                    let kelvin = -(self.kelvin_distance(&x, &y)).ln() / (2.0 * PI) * w;
                    terms.push(hv[m] * (self_log + kelvin));
                    continue;
                }
                let near = 2.0 * diam[i];
                let d_direct = (x[0] - y[0]).hypot(x[1] - y[1]);
                let d_image = (image[0] - y[0]).hypot(image[1] - y[1]);
                if d_direct > near && d_image > near {
                    let g = self.green_unchecked(d_direct, self.kelvin_distance(&x, &y));
                    terms.push(g * hv[m] * w);
                    continue;
                }
                let (rc, tc) = (grid.r(i), grid.theta(j));
                let mut acc = 0.0;
                for a in 0..SUB {
                    let rs = rc - 0.5 * dr + (a as f64 + 0.5) * dr / SUB as f64;
                    let ws = rs * dr * dt / (SUB * SUB) as f64;
                    for b in 0..SUB {
                        let ts = tc - 0.5 * dt + (b as f64 + 0.5) * dt / SUB as f64;
                        let ys = [rs * ts.cos(), rs * ts.sin()];
                        let d = (x[0] - ys[0]).hypot(x[1] - ys[1]);
                        acc += self.green_unchecked(d, self.kelvin_distance(&x, &ys)) * ws;
                    }
                }
                terms.push(acc * hv[m]);
            }
            out.push(pairwise_sum(&terms));
        }
        ScalarField::from_values(grid, out)
    }

    /// Harmonic extension `G_b h(x) = oint dG/dn (x, y) h(y) ds_y` at every
    /// grid node.
    ///
    /// `h` is replaced by its trigonometric interpolant sampled on a finer
    /// wall mesh (spacing at most half the distance from the outer ring to
    /// the wall) and the value `h(theta_x)` is subtracted under the integral,
    /// using that the kernel integrates to one.
    pub fn boundary_potential(&self, grid: &PolarGrid, h: &BoundaryData) -> Result<ScalarField> {
        self.check_grid(grid)?;
        if h.is_empty() {
            return Err(invalid("h", "empty boundary data"));
        }
        if let Some(index) = h.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "boundary data", index });
        }
        let interp = TrigInterpolant::new(h.values());
        let d_min = self.radius - grid.r(grid.nr() - 1);
        let min_pts = (4.0 * PI * self.radius / d_min).ceil() as usize;
        let nb = h.len();
        let m = nb * min_pts.div_ceil(nb).max(1);
        let ds = 2.0 * PI * self.radius / m as f64;
        let wall: Vec<([f64; 2], f64)> = (0..m)
            .map(|q| {
                let t = q as f64 * 2.0 * PI / m as f64;
                ([self.radius * t.cos(), self.radius * t.sin()], interp.eval(t))
            })
            .collect();
        let mut out = Vec::with_capacity(grid.len());
        let mut terms = Vec::with_capacity(m);
        for k in 0..grid.len() {
            let x = grid.point(k);
            let (_, j) = grid.ij(k);
            let hx = interp.eval(grid.theta(j));
            let rx2 = x[0] * x[0] + x[1] * x[1];
            terms.clear();
            terms.extend(wall.iter().map(|(y, hy)| {
                let d = (x[0] - y[0]).hypot(x[1] - y[1]);
                self.poisson_unchecked(rx2, d) * (hy - hx) * ds
            }));
            out.push(hx + pairwise_sum(&terms));
        }
        ScalarField::from_values(grid, out)
    }
}

/// Trigonometric interpolant of equispaced periodic samples.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TrigInterpolant {
    pub fn new(samples: &[f64]) -> Self {
        let n = samples.len();
        let kmax = n / 2;
        let mut a = vec![0.0; kmax + 1];
        let mut b = vec![0.0; kmax + 1];
        for k in 0..=kmax {
            let (mut sa, mut sb) = (0.0, 0.0);
            for (j, &v) in samples.iter().enumerate() {
                let t = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                sa += v * t.cos();
                sb += v * t.sin();
            }
            let scale = if k == 0 || (n % 2 == 0 && k == kmax) { 1.0 } else { 2.0 };
            a[k] = scale * sa / n as f64;
            b[k] = scale * sb / n as f64;
        }
        if n % 2 == 0 {
            // the Nyquist sine mode vanishes on the samples
            b[kmax] = 0.0;
        }
        Self { a, b }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .enumerate()
            .map(|(k, (a, b))| {
                let (s, c) = (k as f64 * t).sin_cos();
                a * c + b * s
            })
            .sum()
    }
}

/// Dirichlet-Poisson solver: `phi = G(H)` solves `lap phi = H`, `phi = 0`
/// on the wall. The factorization is computed once per grid.
#[derive(Debug)]
pub struct PoissonSolver {
    grid: PolarGrid,
    lu: SparseLu,
}

impl PoissonSolver {
    pub fn new(grid: &PolarGrid) -> Result<Self> {
        let lu = SparseLu::factor(grid.laplacian_matrix(Wall::Zero).clone())?;
        Ok(Self { grid: grid.clone(), lu })
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn solve(&self, h: &ScalarField) -> Result<ScalarField> {
        self.grid.check(h.shape())?;
        h.check_finite("poisson source")?;
        ScalarField::from_values(&self.grid, self.lu.solve(h.values())?)
    }

    /// Componentwise `G` of a vector field.
    pub fn solve_vector(&self, f: &VectorField) -> Result<VectorField> {
        Ok(VectorField {
            x: self.solve(&f.x)?,
            y: self.solve(&f.y)?,
        })
    }
}

/// Grid version of the volume potential: one Dirichlet-Poisson solve.
pub fn volume_potential_fast(grid: &PolarGrid, h: &ScalarField) -> Result<ScalarField> {
    PoissonSolver::new(grid)?.solve(h)
}
