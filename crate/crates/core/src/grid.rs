//! Cell-centered polar discretization of the disc.
//!
//! Nodes sit at `r_i = (i + 1/2) dr`, `theta_j = j dtheta`; no node touches
//! the pole or the wall. Vector fields store Cartesian components at the
//! polar nodes, which makes the across-pole ghost a plain copy: the value at
//! `(-r_0, theta)` is the value at `(r_0, theta + pi)`.
//!
//! Two wall closures are available for derivative stencils:
//! [`Wall::Extrapolate`] (no boundary data, one-sided second-order) and
//! [`Wall::Zero`] (homogeneous Dirichlet data, polynomial ghost through the
//! wall value).

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use crate::error::{invalid, Error, Result};
use crate::sparse::Csr;

/// Largest grid accepted by the O(N^2) double sums.
pub const DENSE_GUARD_CELLS: usize = 64 * 64;

/// Wall closure used by derivative stencils at `r = R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wall {
    /// No boundary data: the ghost value is extrapolated from the interior.
    Extrapolate,
    /// Homogeneous Dirichlet data: the field vanishes on the wall.
    Zero,
}

#[derive(Debug)]
struct Operators {
    d_dr: [Csr; 2],
    d_dtheta: Csr,
    dx: [Csr; 2],
    dy: [Csr; 2],
    lap: [Csr; 2],
}

fn wall_slot(w: Wall) -> usize {
    match w {
        Wall::Extrapolate => 0,
        Wall::Zero => 1,
    }
}

/// Polar grid of the disc of radius `R`.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    nr: usize,
    ntheta: usize,
    radius: f64,
    dr: f64,
    dtheta: f64,
    r: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    ops: Arc<OnceLock<Operators>>,
}

impl PartialEq for PolarGrid {
    fn eq(&self, other: &Self) -> bool {
        self.nr == other.nr && self.ntheta == other.ntheta && self.radius == other.radius
    }
}

impl PolarGrid {
    /// Builds the grid; `nr >= 2`, `ntheta >= 4` and even, `radius > 0`.
    pub fn new(nr: usize, ntheta: usize, radius: f64) -> Result<Self> {
        if nr < 2 {
            return Err(Error::InvalidGrid(format!("Nr = {nr} must be at least 2")));
        }
        if ntheta < 4 {
            return Err(Error::InvalidGrid(format!("Ntheta = {ntheta} must be at least 4")));
        }
        if ntheta % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "Ntheta = {ntheta} must be even for the across-pole ghost map"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidGrid(format!("radius {radius} must be positive")));
        }
        let dr = radius / nr as f64;
        let dtheta = 2.0 * PI / ntheta as f64;
        let r = (0..nr).map(|i| (i as f64 + 0.5) * dr).collect();
        let (sin, cos) = (0..ntheta).map(|j| (j as f64 * dtheta).sin_cos()).unzip();
        Ok(Self {
            nr,
            ntheta,
            radius,
            dr,
            dtheta,
            r,
            cos,
            sin,
            ops: Arc::new(OnceLock::new()),
        })
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn ntheta(&self) -> usize {
        self.ntheta
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nr, self.ntheta)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.nr * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nr && j < self.ntheta);
        i * self.ntheta + j
    }

    /// `(i, j)` of a flat index.
    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.ntheta, k % self.ntheta)
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.r[i]
    }

    #[inline]
    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta
    }

    #[inline]
    pub fn cos(&self, j: usize) -> f64 {
        self.cos[j]
    }

    #[inline]
    pub fn sin(&self, j: usize) -> f64 {
        self.sin[j]
    }

    /// Column reached by the across-pole map `theta -> theta + pi`.
    #[inline]
    pub fn opposite(&self, j: usize) -> usize {
        (j + self.ntheta / 2) % self.ntheta
    }

    /// Cartesian coordinates of node `k`.
    #[inline]
    pub fn point(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        [self.r[i] * self.cos[j], self.r[i] * self.sin[j]]
    }

    /// Quadrature weight `r_i dr dtheta` of any cell in ring `i`.
    #[inline]
    pub fn ring_weight(&self, i: usize) -> f64 {
        self.r[i] * self.dr * self.dtheta
    }

    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        self.ring_weight(k / self.ntheta)
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k)).collect()
    }

    /// Exact disc area `pi R^2`.
    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    /// Smallest cell width `min(dr, r_0 dtheta)` of ring `i`.
    pub fn cell_width(&self, i: usize) -> f64 {
        self.dr.min(self.r[i] * self.dtheta)
    }

    pub(crate) fn check(&self, shape: (usize, usize)) -> Result<()> {
        if shape != self.shape() {
            return Err(Error::GridMismatch {
                expected: self.shape(),
                found: shape,
            });
        }
        Ok(())
    }

    // ---------------------------------------------------------------------
    // quadrature and norms

    /// `sum_k f_k w_k`.
    pub fn integrate(&self, f: &ScalarField) -> Result<f64> {
        self.check(f.shape())?;
        f.check_finite("integrand")?;
        Ok(self.integrate_unchecked(&f.values))
    }

    pub(crate) fn integrate_unchecked(&self, values: &[f64]) -> f64 {
        let per_ring: Vec<f64> = (0..self.nr)
            .map(|i| pairwise_sum(&values[i * self.ntheta..(i + 1) * self.ntheta]) * self.ring_weight(i))
            .collect();
        pairwise_sum(&per_ring)
    }

    /// `(int |f|^q)^(1/q)`, evaluated with max-scaling so large `q` cannot
    /// overflow.
    pub fn lq_norm(&self, f: &ScalarField, q: f64) -> Result<f64> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(invalid("q", format!("{q} must be a finite number >= 1")));
        }
        self.check(f.shape())?;
        f.check_finite("lq_norm input")?;
        Ok(self.lq_norm_unchecked(&f.values, q))
    }

    pub(crate) fn lq_norm_unchecked(&self, values: &[f64], q: f64) -> f64 {
        let m = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m == 0.0 {
            return 0.0;
        }
        let scaled: Vec<f64> = values.iter().map(|v| (v.abs() / m).powf(q)).collect();
        m * self.integrate_unchecked(&scaled).powf(1.0 / q)
    }

    /// `||v||_q` of the pointwise Euclidean magnitude.
    pub fn lq_norm_vector(&self, v: &VectorField, q: f64) -> Result<f64> {
        self.lq_norm(&v.magnitude(), q)
    }

    /// Double-sum approximation of `int int |f(x)-f(y)|^p / |x-y|^(2+sp)`,
    /// diagonal cells excluded. Returns the `p`-th power of the seminorm.
    pub fn gagliardo_seminorm(&self, f: &ScalarField, s: f64, p: f64) -> Result<f64> {
        self.check(f.shape())?;
        f.check_finite("gagliardo input")?;
        self.gagliardo_impl(s, p, |a, b| (f.values[a] - f.values[b]).abs())
    }

    /// Vector version with the Euclidean difference `|u(x)-u(y)|`.
    pub fn gagliardo_seminorm_vector(&self, v: &VectorField, s: f64, p: f64) -> Result<f64> {
        self.check(v.shape())?;
        v.check_finite("gagliardo input")?;
        self.gagliardo_impl(s, p, |a, b| {
            let dx = v.x.values[a] - v.x.values[b];
            let dy = v.y.values[a] - v.y.values[b];
            dx.hypot(dy)
        })
    }

    fn gagliardo_impl(&self, s: f64, p: f64, diff: impl Fn(usize, usize) -> f64) -> Result<f64> {
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid("s", format!("{s} must lie in (0, 1)")));
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(invalid("p", format!("{p} must be >= 1")));
        }
        if self.len() > DENSE_GUARD_CELLS {
            return Err(Error::SizeGuard {
                what: "gagliardo seminorm",
                cells: self.len(),
                limit: DENSE_GUARD_CELLS,
            });
        }
        let n = self.len();
        let pts: Vec<[f64; 2]> = (0..n).map(|k| self.point(k)).collect();
        let w = self.weights();
        let expo = 0.5 * (2.0 + s * p);
        let mut rows = Vec::with_capacity(n);
        for a in 0..n {
            let mut row = Vec::with_capacity(n);
            for b in 0..n {
                if a == b {
                    continue;
                }
                let d = diff(a, b);
                if d == 0.0 {
                    continue;
                }
                let dx = pts[a][0] - pts[b][0];
                let dy = pts[a][1] - pts[b][1];
                row.push(d.powf(p) / (dx * dx + dy * dy).powf(expo) * w[b]);
            }
            rows.push(pairwise_sum(&row) * w[a]);
        }
        Ok(pairwise_sum(&rows))
    }

    // ---------------------------------------------------------------------
    // differential operators

    fn ops(&self) -> &Operators {
        self.ops.get_or_init(|| self.build_operators())
    }

    /// Radial derivative operator.
    pub fn d_dr_matrix(&self, wall: Wall) -> &Csr {
        &self.ops().d_dr[wall_slot(wall)]
    }

    pub fn d_dtheta_matrix(&self) -> &Csr {
        &self.ops().d_dtheta
    }

    /// Cartesian `d/dx` operator.
    pub fn dx_matrix(&self, wall: Wall) -> &Csr {
        &self.ops().dx[wall_slot(wall)]
    }

    /// Cartesian `d/dy` operator.
    pub fn dy_matrix(&self, wall: Wall) -> &Csr {
        &self.ops().dy[wall_slot(wall)]
    }

    pub fn laplacian_matrix(&self, wall: Wall) -> &Csr {
        &self.ops().lap[wall_slot(wall)]
    }

    pub fn gradient(&self, f: &ScalarField) -> Result<VectorField> {
        self.gradient_with(f, Wall::Extrapolate)
    }

    pub fn gradient_with(&self, f: &ScalarField, wall: Wall) -> Result<VectorField> {
        self.check(f.shape())?;
        f.check_finite("gradient input")?;
        Ok(VectorField {
            x: self.apply(self.dx_matrix(wall), f),
            y: self.apply(self.dy_matrix(wall), f),
        })
    }

    pub fn divergence(&self, v: &VectorField) -> Result<ScalarField> {
        self.divergence_with(v, Wall::Extrapolate)
    }

    pub fn divergence_with(&self, v: &VectorField, wall: Wall) -> Result<ScalarField> {
        self.check(v.shape())?;
        v.check_finite("divergence input")?;
        Ok(self.apply(self.dx_matrix(wall), &v.x) + self.apply(self.dy_matrix(wall), &v.y))
    }

    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.laplacian_with(f, Wall::Extrapolate)
    }

    pub fn laplacian_with(&self, f: &ScalarField, wall: Wall) -> Result<ScalarField> {
        self.check(f.shape())?;
        f.check_finite("laplacian input")?;
        Ok(self.apply(self.laplacian_matrix(wall), f))
    }

    /// Full Jacobian `(d_x v_x, d_y v_x, d_x v_y, d_y v_y)`.
    pub fn jacobian_with(&self, v: &VectorField, wall: Wall) -> Result<[ScalarField; 4]> {
        let gx = self.gradient_with(&v.x, wall)?;
        let gy = self.gradient_with(&v.y, wall)?;
        Ok([gx.x, gx.y, gy.x, gy.y])
    }

    fn apply(&self, m: &Csr, f: &ScalarField) -> ScalarField {
        ScalarField {
            nr: self.nr,
            ntheta: self.ntheta,
            values: m.mul_vec(&f.values),
        }
    }

    /// Coefficients expressing the value at radial index `ii` (which may be
    /// the pole ghost `-1` or the wall ghost `nr`) of column `j`.
    fn radial_neighbor(&self, ii: isize, j: usize, wall: Wall, order: usize) -> Vec<(usize, f64)> {
        let nr = self.nr as isize;
        if ii < 0 {
            vec![(self.idx(0, self.opposite(j)), 1.0)]
        } else if ii < nr {
            vec![(self.idx(ii as usize, j), 1.0)]
        } else {
            match wall {
                // polynomial through the zero wall value and the interior nodes
                Wall::Zero => dirichlet_ghost_weights((order - 1).min(self.nr))
                    .into_iter()
                    .enumerate()
                    .map(|(m, w)| (self.idx(self.nr - 1 - m, j), w))
                    .collect(),
                Wall::Extrapolate => ghost_weights(order.min(self.nr))
                    .into_iter()
                    .enumerate()
                    .map(|(m, w)| (self.idx(self.nr - 1 - m, j), w))
                    .collect(),
            }
        }
    }

    fn build_operators(&self) -> Operators {
        let n = self.len();
        let mk_dr = |wall: Wall| {
            Csr::from_rows(
                n,
                (0..n).map(|k| {
                    let (i, j) = self.ij(k);
                    let c = 0.5 / self.dr;
                    let mut row: Vec<(usize, f64)> = self
                        .radial_neighbor(i as isize + 1, j, wall, 3)
                        .into_iter()
                        .map(|(col, w)| (col, c * w))
                        .collect();
                    row.extend(
                        self.radial_neighbor(i as isize - 1, j, wall, 3)
                            .into_iter()
                            .map(|(col, w)| (col, -c * w)),
                    );
                    row
                }),
            )
        };
        let d_dtheta = Csr::from_rows(
            n,
            (0..n).map(|k| {
                let (i, j) = self.ij(k);
                let c = 0.5 / self.dtheta;
                let jp = (j + 1) % self.ntheta;
                let jm = (j + self.ntheta - 1) % self.ntheta;
                vec![(self.idx(i, jp), c), (self.idx(i, jm), -c)]
            }),
        );
        let d_dr = [mk_dr(Wall::Extrapolate), mk_dr(Wall::Zero)];
        let cart = |dr: &Csr, c_r: &dyn Fn(usize) -> f64, c_t: &dyn Fn(usize, usize) -> f64| {
            let cr: Vec<f64> = (0..n).map(|k| c_r(self.ij(k).1)).collect();
            let ct: Vec<f64> = (0..n)
                .map(|k| {
                    let (i, j) = self.ij(k);
                    c_t(i, j)
                })
                .collect();
            dr.scale_rows(&cr).add_scaled(1.0, &d_dtheta.scale_rows(&ct), 1.0)
        };
        let dx = [0, 1].map(|s| {
            cart(&d_dr[s], &|j| self.cos[j], &|i, j| -self.sin[j] / self.r[i])
        });
        let dy = [0, 1].map(|s| {
            cart(&d_dr[s], &|j| self.sin[j], &|i, j| self.cos[j] / self.r[i])
        });
        let mk_lap = |wall: Wall| {
            Csr::from_rows(
                n,
                (0..n).map(|k| {
                    let (i, j) = self.ij(k);
                    let ri = self.r[i];
                    let r_out = ri + 0.5 * self.dr;
                    let r_in = ri - 0.5 * self.dr;
                    let cr = 1.0 / (ri * self.dr * self.dr);
                    let ct = 1.0 / (ri * ri * self.dtheta * self.dtheta);
                    let jp = (j + 1) % self.ntheta;
                    let jm = (j + self.ntheta - 1) % self.ntheta;
                    let mut row = vec![
                        (k, -cr * (r_out + r_in) - 2.0 * ct),
                        (self.idx(i, jp), ct),
                        (self.idx(i, jm), ct),
                    ];
                    row.extend(
                        self.radial_neighbor(i as isize + 1, j, wall, 4)
                            .into_iter()
                            .map(|(col, w)| (col, cr * r_out * w)),
                    );
                    if i > 0 {
                        row.push((self.idx(i - 1, j), cr * r_in));
                    }
                    row
                }),
            )
        };
        Operators {
            d_dr,
            d_dtheta,
            dx,
            dy,
            lap: [mk_lap(Wall::Extrapolate), mk_lap(Wall::Zero)],
        }
    }

    /// Second-order extrapolation of `f` to the wall at each angle.
    pub fn boundary_trace(&self, f: &ScalarField) -> Result<BoundaryData> {
        self.check(f.shape())?;
        f.check_finite("boundary trace input")?;
        let w = trace_weights(self.nr.min(3));
        let values = (0..self.ntheta)
            .map(|j| {
                w.iter()
                    .enumerate()
                    .map(|(m, c)| c * f.values[self.idx(self.nr - 1 - m, j)])
                    .sum()
            })
            .collect();
        Ok(BoundaryData::new(values, self.radius))
    }

    /// Largest wall value of `|u|` under cubic extrapolation of each
    /// Cartesian component from the four outermost rings.
    pub fn no_slip_defect(&self, u: &VectorField) -> Result<f64> {
        self.check(u.shape())?;
        let w = trace_weights(self.nr.min(4));
        let wall = |f: &ScalarField, j: usize| -> f64 {
            w.iter().enumerate().map(|(m, c)| c * f.values[self.idx(self.nr - 1 - m, j)]).sum()
        };
        Ok((0..self.ntheta)
            .map(|j| wall(&u.x, j).hypot(wall(&u.y, j)))
            .fold(0.0, f64::max))
    }

    /// `int f div v + int grad f . v - oint f v.n`, the discrete
    /// integration-by-parts defect.
    pub fn adjointness_defect(&self, f: &ScalarField, v: &VectorField) -> Result<f64> {
        let div = self.divergence(v)?;
        let grad = self.gradient(f)?;
        let lhs = self.integrate(&(f * &div))? + self.integrate(&grad.dot(v))?;
        let ft = self.boundary_trace(f)?;
        let vn = self.boundary_trace(&v.radial_component(self))?;
        let flux = BoundaryData::new(
            ft.values().iter().zip(vn.values()).map(|(a, b)| a * b).collect(),
            self.radius,
        );
        Ok(lhs - flux.integral())
    }
}

/// Lagrange weights extrapolating to `s = -1/2` from nodes at
/// `s = 1/2, 3/2, ...` (distance inward from the wall in units of `dr`).
fn ghost_weights(k: usize) -> Vec<f64> {
    lagrange_at(-0.5, k)
}

/// Ghost weights for a field vanishing on the wall: interpolation through
/// the wall node `s = 0` (value zero) and `k` interior nodes. The wall node
/// carries no weight since its value is zero.
fn dirichlet_ghost_weights(k: usize) -> Vec<f64> {
    let mut nodes = vec![0.0];
    nodes.extend((0..k).map(|m| m as f64 + 0.5));
    lagrange_weights(-0.5, &nodes)[1..].to_vec()
}

/// Lagrange weights evaluating at the wall `s = 0`.
fn trace_weights(k: usize) -> Vec<f64> {
    lagrange_at(0.0, k)
}

fn lagrange_at(s: f64, k: usize) -> Vec<f64> {
    let nodes: Vec<f64> = (0..k).map(|m| m as f64 + 0.5).collect();
    lagrange_weights(s, &nodes)
}

fn lagrange_weights(s: f64, nodes: &[f64]) -> Vec<f64> {
    let k = nodes.len();
    (0..k)
        .map(|a| {
            (0..k)
                .filter(|&b| b != a)
                .map(|b| (s - nodes[b]) / (nodes[a] - nodes[b]))
                .product()
        })
        .collect()
}

/// Pairwise (cascade) summation; deterministic and order-independent of
/// any threading.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

// -------------------------------------------------------------------------
// fields

/// Per-node real values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    nr: usize,
    ntheta: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &PolarGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &PolarGrid, c: f64) -> Self {
        Self {
            nr: grid.nr,
            ntheta: grid.ntheta,
            values: vec![c; grid.len()],
        }
    }

    /// Values from a function of Cartesian coordinates.
    pub fn from_fn(grid: &PolarGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            nr: grid.nr,
            ntheta: grid.ntheta,
            values: (0..grid.len())
                .map(|k| {
                    let [x, y] = grid.point(k);
                    f(x, y)
                })
                .collect(),
        }
    }

    /// Values from a function of `(r, theta)`.
    pub fn from_polar_fn(grid: &PolarGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            nr: grid.nr,
            ntheta: grid.ntheta,
            values: (0..grid.len())
                .map(|k| {
                    let (i, j) = grid.ij(k);
                    f(grid.r(i), grid.theta(j))
                })
                .collect(),
        }
    }

    /// Wraps raw values; the length must match and all values be finite.
    pub fn from_values(grid: &PolarGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        let f = Self {
            nr: grid.nr,
            ntheta: grid.ntheta,
            values,
        };
        f.check_finite("field")?;
        Ok(f)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nr, self.ntheta)
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            nr: other.nr,
            ntheta: other.ntheta,
            values: vec![0.0; other.values.len()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { what, index }),
            None => Ok(()),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nr: self.nr,
            ntheta: self.ntheta,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "field shape mismatch");
        Self {
            nr: self.nr,
            ntheta: self.ntheta,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Multiplies by the position vector: `(x f, y f)`.
    pub fn times_position(&self, grid: &PolarGrid) -> VectorField {
        VectorField {
            x: self.zip_map(&ScalarField::from_fn(grid, |x, _| x), |a, b| a * b),
            y: self.zip_map(&ScalarField::from_fn(grid, |_, y| y), |a, b| a * b),
        }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Add for ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: ScalarField) -> ScalarField {
        &self + &rhs
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Sub for ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: ScalarField) -> ScalarField {
        &self - &rhs
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, c: f64) -> ScalarField {
        self.scale(c)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

/// Cartesian vector field stored at the polar nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn zeros(grid: &PolarGrid) -> Self {
        Self {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        if x.shape() != y.shape() {
            return Err(Error::GridMismatch {
                expected: x.shape(),
                found: y.shape(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn from_fn(grid: &PolarGrid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let vals: Vec<[f64; 2]> = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.point(k);
                f(x, y)
            })
            .collect();
        Self {
            x: ScalarField {
                nr: grid.nr,
                ntheta: grid.ntheta,
                values: vals.iter().map(|v| v[0]).collect(),
            },
            y: ScalarField {
                nr: grid.nr,
                ntheta: grid.ntheta,
                values: vals.iter().map(|v| v[1]).collect(),
            },
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.x.shape()
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        self.x.check_finite(what)?;
        self.y.check_finite(what)
    }

    pub fn magnitude(&self) -> ScalarField {
        self.x.zip_map(&self.y, f64::hypot)
    }

    pub fn norm_sq(&self) -> ScalarField {
        self.x.zip_map(&self.y, |a, b| a * a + b * b)
    }

    pub fn dot(&self, other: &VectorField) -> ScalarField {
        &(&self.x * &other.x) + &(&self.y * &other.y)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            x: self.x.scale(c),
            y: self.y.scale(c),
        }
    }

    /// Multiplies both components by a scalar field.
    pub fn scale_by(&self, s: &ScalarField) -> Self {
        Self {
            x: &self.x * s,
            y: &self.y * s,
        }
    }

    /// `x . v` with `x` the position vector.
    pub fn dot_position(&self, grid: &PolarGrid) -> ScalarField {
        self.dot(&VectorField::from_fn(grid, |x, y| [x, y]))
    }

    /// Component along `e_r` at each node.
    pub fn radial_component(&self, grid: &PolarGrid) -> ScalarField {
        let mut out = ScalarField::zeros(grid);
        for k in 0..grid.len() {
            let j = k % grid.ntheta;
            out.values[k] = self.x.values[k] * grid.cos[j] + self.y.values[k] * grid.sin[j];
        }
        out
    }

    /// Component along `e_theta` at each node.
    pub fn angular_component(&self, grid: &PolarGrid) -> ScalarField {
        let mut out = ScalarField::zeros(grid);
        for k in 0..grid.len() {
            let j = k % grid.ntheta;
            out.values[k] = -self.x.values[k] * grid.sin[j] + self.y.values[k] * grid.cos[j];
        }
        out
    }

    /// Stacked `[x; y]` values.
    pub fn to_stacked(&self) -> Vec<f64> {
        let mut v = self.x.values.clone();
        v.extend_from_slice(&self.y.values);
        v
    }

    pub fn from_stacked(grid: &PolarGrid, v: &[f64]) -> Result<Self> {
        let n = grid.len();
        if v.len() != 2 * n {
            return Err(Error::InvalidGrid(format!("stacked vector has {} values, expected {}", v.len(), 2 * n)));
        }
        Ok(Self {
            x: ScalarField::from_values(grid, v[..n].to_vec())?,
            y: ScalarField::from_values(grid, v[n..].to_vec())?,
        })
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        VectorField {
            x: &self.x + &rhs.x,
            y: &self.y + &rhs.y,
        }
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        VectorField {
            x: &self.x - &rhs.x,
            y: &self.y - &rhs.y,
        }
    }
}

/// Values on the wall `r = R` at the grid angles, with line element
/// `R dtheta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    values: Vec<f64>,
    radius: f64,
    dtheta: f64,
}

impl BoundaryData {
    pub fn new(values: Vec<f64>, radius: f64) -> Self {
        let dtheta = 2.0 * PI / values.len() as f64;
        Self {
            values,
            radius,
            dtheta,
        }
    }

    /// Samples `h(theta)` at `n` equispaced angles starting at 0.
    pub fn from_fn(n: usize, radius: f64, h: impl Fn(f64) -> f64) -> Self {
        let dtheta = 2.0 * PI / n as f64;
        Self::new((0..n).map(|j| h(j as f64 * dtheta)).collect(), radius)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    /// Line element `R dtheta`.
    pub fn line_element(&self) -> f64 {
        self.radius * self.dtheta
    }

    /// `oint h ds` by the periodic trapezoid rule.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.line_element()
    }
}
