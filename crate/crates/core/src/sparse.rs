//! Compressed-row sparse operators and a sparse LU wrapper.
//!
//! Discrete differential operators are stored row-wise so that the explicit
//! application used by the monitors and the assembled matrices used by the
//! implicit solvers come from the same stencil coefficients.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Row-compressed sparse matrix over `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl Csr {
    /// Builds a matrix from per-row `(column, value)` lists. Duplicate
    /// columns within a row are summed; exact zeros are kept so that the
    /// sparsity pattern only depends on the stencil.
    pub fn from_rows<I>(ncols: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = Vec<(usize, f64)>>,
    {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < ncols);
                if last == Some(c) {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: indptr.len() - 1,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        Self::from_rows(d.len(), d.iter().enumerate().map(|(i, &v)| vec![(i, v)]))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b]
            .iter()
            .copied()
            .zip(self.data[a..b].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mul_vec");
        (0..self.nrows)
            .map(|i| self.row(i).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows, "dimension mismatch in matmul");
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let rows = (0..self.nrows).map(|i| {
            let mut cols = Vec::new();
            for (k, a) in self.row(i) {
                for (c, b) in other.row(k) {
                    if mark[c] != i {
                        mark[c] = i;
                        acc[c] = 0.0;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.into_iter().map(|c| (c, acc[c])).collect::<Vec<_>>()
        });
        let rows: Vec<_> = rows.collect();
        Csr::from_rows(other.ncols, rows)
    }

    /// `a * self + b * other`, union of patterns.
    pub fn add_scaled(&self, a: f64, other: &Csr, b: f64) -> Csr {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Csr::from_rows(
            self.ncols,
            (0..self.nrows).map(|i| {
                self.row(i)
                    .map(|(c, v)| (c, a * v))
                    .chain(other.row(i).map(|(c, v)| (c, b * v)))
                    .collect()
            }),
        )
    }

    /// `diag(s) * self`.
    pub fn scale_rows(&self, s: &[f64]) -> Csr {
        assert_eq!(s.len(), self.nrows);
        let mut out = self.clone();
        for (i, &si) in s.iter().enumerate() {
            for v in &mut out.data[out.indptr[i]..out.indptr[i + 1]] {
                *v *= si;
            }
        }
        out
    }

    /// 2x2 block matrix `[a b; c d]`.
    pub fn block2(a: &Csr, b: &Csr, c: &Csr, d: &Csr) -> Csr {
        assert_eq!(a.nrows, b.nrows);
        assert_eq!(c.nrows, d.nrows);
        assert_eq!(a.ncols, c.ncols);
        assert_eq!(b.ncols, d.ncols);
        let off = a.ncols;
        let top = (0..a.nrows).map(|i| {
            a.row(i)
                .chain(b.row(i).map(|(col, v)| (col + off, v)))
                .collect::<Vec<_>>()
        });
        let bottom = (0..c.nrows).map(|i| {
            c.row(i)
                .chain(d.row(i).map(|(col, v)| (col + off, v)))
                .collect::<Vec<_>>()
        });
        Csr::from_rows(a.ncols + b.ncols, top.chain(bottom).collect::<Vec<_>>())
    }

    /// Replaces row `i` by the unit row `e_i`.
    pub fn with_identity_rows(&self, rows: &[usize]) -> Csr {
        let mut replace = vec![false; self.nrows];
        for &r in rows {
            replace[r] = true;
        }
        Csr::from_rows(
            self.ncols,
            (0..self.nrows).map(|i| {
                if replace[i] {
                    // keep the pattern, zero the values
                    self.row(i)
                        .map(|(c, _)| (c, 0.0))
                        .chain(std::iter::once((i, 1.0)))
                        .collect()
                } else {
                    self.row(i).collect()
                }
            }),
        )
    }

    fn triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(c, v)| Triplet::new(i, c, v)))
            .collect()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &self.triplets())
            .map_err(|e| Error::Solver(format!("assembly failed: {e:?}")))
    }
}

/// Sparse LU factorization with a residual check on every solve.
pub struct SparseLu {
    matrix: Csr,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu")
            .field("n", &self.matrix.nrows)
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

/// Relative residual accepted from a direct solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;
const REFINE_SWEEPS: usize = 3;

impl SparseLu {
    pub fn factor(matrix: Csr) -> Result<Self> {
        let symbolic = Self::symbolic(&matrix)?;
        Self::factor_with(&symbolic, matrix)
    }

    /// Symbolic analysis, reusable for any matrix with the same pattern.
    pub fn symbolic(matrix: &Csr) -> Result<SymbolicLu<usize>> {
        if matrix.nrows != matrix.ncols {
            return Err(Error::Solver("matrix is not square".into()));
        }
        let a = matrix.to_faer()?;
        SymbolicLu::try_new(a.symbolic()).map_err(|e| Error::Solver(format!("{e:?}")))
    }

    pub fn factor_with(symbolic: &SymbolicLu<usize>, matrix: Csr) -> Result<Self> {
        let a = matrix.to_faer()?;
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), a.as_ref())
            .map_err(|e| Error::Solver(format!("singular assembly: {e:?}")))?;
        Ok(Self { matrix, lu })
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.nrows;
        if b.len() != n {
            return Err(Error::Solver(format!("rhs length {} != {}", b.len(), n)));
        }
        let solve = |v: &[f64]| -> Vec<f64> {
            let sol = self.lu.solve(&Mat::<f64>::from_fn(n, 1, |i, _| v[i]));
            (0..n).map(|i| sol[(i, 0)]).collect()
        };
        let mut x = solve(b);
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Solver(format!("non-finite solution entry {k} (singular assembly)")));
        }
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = bn.max(f64::MIN_POSITIVE);
        let residual = |x: &[f64]| -> Vec<f64> { self.matrix.mul_vec(x).iter().zip(b).map(|(p, q)| q - p).collect() };
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut r = residual(&x);
        let mut res = norm(&r);
        // refinement sweeps for ill-conditioned fine grids
        for _ in 0..REFINE_SWEEPS {
            if res / scale <= 1e-2 * SOLVE_RESIDUAL_TOL {
                break;
            }
            let dx = solve(&r);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let rc = residual(&cand);
            let nc = norm(&rc);
            if !(nc < res) {
                break;
            }
            (x, r, res) = (cand, rc, nc);
        }
        if bn > 0.0 && res / scale > SOLVE_RESIDUAL_TOL {
            return Err(Error::Solver(format!(
                "relative residual {:e} above {:e}",
                res / scale,
                SOLVE_RESIDUAL_TOL
            )));
        }
        Ok(x)
    }
}
