use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Square compressed-row matrix with sorted, merged column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Duplicates are summed in input order, so equal inputs give bit-equal
    /// results.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            t.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        CsrMatrix::from_triplets(self.n, t)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn norm_max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// Rows and columns restricted to `keep` (old index per new index).
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut t = Vec::new();
        for (new_i, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    t.push((new_i, map[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), t)
    }
}

/// Choice of linear solver for the reduced symmetric system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinearSolver {
    /// Sparse Cholesky.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Cg { tol: f64, max_iter: usize },
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::Direct
    }
}

impl LinearSolver {
    pub fn cg() -> Self {
        LinearSolver::Cg {
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

/// A factorized (or preconditioned) symmetric positive-definite matrix.
pub enum Factor {
    Direct(faer::sparse::linalg::solvers::Llt<usize, f64>),
    Cg {
        a: CsrMatrix,
        inv_diag: Vec<f64>,
        tol: f64,
        max_iter: usize,
    },
}

impl Factor {
    pub fn new(a: &CsrMatrix, solver: LinearSolver) -> Result<Self> {
        match solver {
            LinearSolver::Direct => {
                let t: Vec<Triplet<usize, usize, f64>> = (0..a.n)
                    .flat_map(|i| {
                        a.row(i)
                            .filter(move |&(j, _)| j <= i)
                            .map(move |(j, v)| Triplet::new(i, j, v))
                    })
                    .collect();
                let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &t)
                    .map_err(|e| Error::Solver(format!("sparse matrix construction: {e:?}")))?;
                let llt = m
                    .sp_cholesky(Side::Lower)
                    .map_err(|e| Error::Solver(format!("Cholesky factorization failed ({e:?}); is every connected region constrained?")))?;
                Ok(Factor::Direct(llt))
            }
            LinearSolver::Cg { tol, max_iter } => {
                let mut inv_diag = Vec::with_capacity(a.n);
                for i in 0..a.n {
                    let d = a.get(i, i);
                    if !(d > 0.0) {
                        return Err(Error::Solver(format!(
                            "non-positive diagonal {d:e} at row {i}"
                        )));
                    }
                    inv_diag.push(1.0 / d);
                }
                Ok(Factor::Cg {
                    a: a.clone(),
                    inv_diag,
                    tol,
                    max_iter,
                })
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Factor::Direct(llt) => {
                let mut rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
                llt.solve_in_place(rhs.as_mut());
                let x: Vec<f64> = (0..b.len()).map(|i| rhs[(i, 0)]).collect();
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Solver(
                        "direct solve produced non-finite values".into(),
                    ));
                }
                Ok(x)
            }
            Factor::Cg {
                a,
                inv_diag,
                tol,
                max_iter,
            } => pcg(a, inv_diag, b, *tol, *max_iter),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(a: &CsrMatrix, inv_diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let bn = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = a.matvec(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= tol * bn {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!(
        "conjugate gradients did not reach relative residual {tol:e} in {max_iter} iterations (at {:.3e})",
        dot(&r, &r).sqrt() / bn
    )))
}
