//! Dense kernels: Cholesky, triangular solves, the column interpolative
//! decomposition and symmetric eigensolvers.

use faer::linalg::solvers::Solve;
use faer::linalg::triangular_solve;
use faer::{Mat, MatMut, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
///
/// The upper factor `G = Lᵀ` gives the `A = Gᵀ G` convention.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    llt: faer::linalg::solvers::Llt<f64>,
}

pub fn cholesky(a: MatRef<'_, f64>) -> Result<CholeskyFactor> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    a.llt(Side::Lower)
        .map(|llt| CholeskyFactor { llt })
        .map_err(|e| match e {
            faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index } => {
                Error::NotPositiveDefinite { pivot: index }
            }
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriangularSide {
    /// Solve `L x = b`.
    Forward,
    /// Solve `Lᵀ x = b`.
    Backward,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.llt.L().nrows()
    }

    pub fn l(&self) -> MatRef<'_, f64> {
        self.llt.L()
    }

    /// `x <- L⁻¹ x`.
    pub fn forward_in_place(&self, x: &mut [f64]) {
        let l = self.llt.L();
        let n = l.nrows();
        for j in 0..n {
            let col = l.col(j);
            let xj = x[j] / col[j];
            x[j] = xj;
            if xj != 0.0 {
                for i in j + 1..n {
                    x[i] -= xj * col[i];
                }
            }
        }
    }

    /// `x <- L⁻ᵀ x`.
    pub fn backward_in_place(&self, x: &mut [f64]) {
        let l = self.llt.L();
        let n = l.nrows();
        for j in (0..n).rev() {
            let col = l.col(j);
            let mut s = x[j];
            for i in j + 1..n {
                s -= col[i] * x[i];
            }
            x[j] = s / col[j];
        }
    }

    /// `x <- A⁻¹ x`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.forward_in_place(x);
        self.backward_in_place(x);
    }

    pub fn solve_mat(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        self.llt.solve(rhs)
    }

    /// `B <- L⁻¹ B`.
    pub fn forward_mat_in_place(&self, b: MatMut<'_, f64>) {
        triangular_solve::solve_lower_triangular_in_place(self.llt.L(), b, Par::Seq);
    }

    /// `B <- L⁻ᵀ B`.
    pub fn backward_mat_in_place(&self, b: MatMut<'_, f64>) {
        triangular_solve::solve_upper_triangular_in_place(self.llt.L().transpose(), b, Par::Seq);
    }

    /// Explicit inverse `A⁻¹`.
    pub fn inverse(&self) -> Mat<f64> {
        self.solve_mat(Mat::<f64>::identity(self.dim(), self.dim()).as_ref())
    }

    /// Stored reals (lower triangle).
    pub fn stored_len(&self) -> usize {
        let n = self.dim();
        n * (n + 1) / 2
    }
}

pub fn solve_triangular(
    factor: &CholeskyFactor,
    rhs: &[f64],
    side: TriangularSide,
) -> Result<Vec<f64>> {
    Error::check_len(factor.dim(), rhs.len())?;
    let mut x = rhs.to_vec();
    match side {
        TriangularSide::Forward => factor.forward_in_place(&mut x),
        TriangularSide::Backward => factor.backward_in_place(&mut x),
    }
    Ok(x)
}

/// Column interpolative decomposition `B[:, r] ≈ B[:, s] T`.
#[derive(Debug, Clone)]
pub struct IdResult {
    pub skeleton: Vec<usize>,
    pub redundant: Vec<usize>,
    /// `|s| x |r|` interpolation matrix.
    pub interp: Mat<f64>,
}

impl IdResult {
    pub fn rank(&self) -> usize {
        self.skeleton.len()
    }

    /// `‖B[:,r] − B[:,s] T‖_F / ‖B[:,r]‖_F` (zero when `r` is empty).
    pub fn relative_error(&self, b: MatRef<'_, f64>) -> f64 {
        if self.redundant.is_empty() {
            return 0.0;
        }
        let br = Mat::from_fn(b.nrows(), self.redundant.len(), |i, j| b[(i, self.redundant[j])]);
        let bs = Mat::from_fn(b.nrows(), self.skeleton.len(), |i, j| b[(i, self.skeleton[j])]);
        let approx = &bs * &self.interp;
        let denom = br.norm_l2();
        let diff = (&br - &approx).norm_l2();
        if denom == 0.0 {
            diff
        } else {
            diff / denom
        }
    }
}

/// Interpolative decomposition by column-pivoted Householder QR, truncated at
/// the first pivot whose remaining column norm is `<= eps * |R_11|`.
/// Pivot ties go to the lowest column index.
pub fn interpolative_decomposition(b: MatRef<'_, f64>, eps: f64) -> Result<IdResult> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::config(format!("ID tolerance must lie in (0, 1) (got {eps})")));
    }
    let (m, n) = (b.nrows(), b.ncols());
    if n == 0 {
        return Err(Error::config("ID needs at least one column"));
    }
    // column-major working copy
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| b[(i, j)]).collect()).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    let mut exact = norms.clone();
    let max_steps = m.min(n);
    let mut rank = 0;
    let mut first = 0.0;
    let mut v = vec![0.0; m];

    while rank < max_steps {
        // pivot: largest remaining norm, lowest index on ties
        let (mut piv, mut best) = (rank, -1.0);
        for (j, &nrm) in norms.iter().enumerate().skip(rank) {
            if nrm > best {
                best = nrm;
                piv = j;
            }
        }
        let pivot_norm = best.max(0.0).sqrt();
        if rank == 0 {
            first = pivot_norm;
            if first == 0.0 {
                break;
            }
        } else if pivot_norm <= eps * first {
            break;
        }
        if piv != rank {
            cols.swap(rank, piv);
            perm.swap(rank, piv);
            norms.swap(rank, piv);
            exact.swap(rank, piv);
        }
        // Householder reflector for column `k` below the diagonal
        let k = rank;
        v[k..m].copy_from_slice(&cols[k][k..m]);
        let alpha = dot(&v[k..m], &v[k..m]).sqrt();
        let beta = if v[k] >= 0.0 { -alpha } else { alpha };
        v[k] -= beta;
        let vnorm_sq = dot(&v[k..m], &v[k..m]);
        cols[k][k] = beta;
        cols[k][k + 1..m].fill(0.0);
        if vnorm_sq > 0.0 {
            for col in cols.iter_mut().skip(k + 1) {
                let f = 2.0 * dot(&v[k..m], &col[k..m]) / vnorm_sq;
                if f != 0.0 {
                    for (c, vi) in col[k..m].iter_mut().zip(&v[k..m]) {
                        *c -= f * vi;
                    }
                }
            }
        }
        // downdate trailing norms, recomputing when cancellation is severe
        for j in k + 1..n {
            let r = cols[j][k];
            let updated = norms[j] - r * r;
            if updated <= 1e-8 * exact[j] {
                let s = dot(&cols[j][k + 1..m], &cols[j][k + 1..m]);
                norms[j] = s;
                exact[j] = s;
            } else {
                norms[j] = updated;
            }
        }
        rank += 1;
    }

    // T = R11⁻¹ R12 by back substitution
    let nr = n - rank;
    let mut interp = Mat::<f64>::zeros(rank, nr);
    for c in 0..nr {
        let rhs = &cols[rank + c];
        for i in (0..rank).rev() {
            let mut s = rhs[i];
            for l in i + 1..rank {
                s -= cols[l][i] * interp[(l, c)];
            }
            interp[(i, c)] = s / cols[i][i];
        }
    }
    Ok(IdResult {
        skeleton: perm[..rank].to_vec(),
        redundant: perm[rank..].to_vec(),
        interp,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ascending eigenvalues of a symmetric matrix (lower triangle is read).
pub fn sym_eigs(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))
}

/// Ascending eigenvalues and the matching orthonormal eigenvectors (columns).
pub fn sym_eigh(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let vals = (0..a.nrows()).map(|i| evd.S()[i]).collect();
    Ok((vals, evd.U().to_owned()))
}
