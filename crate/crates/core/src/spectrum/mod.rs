//! Spectra of the preconditioned matrix `T⁻¹A`.
//!
//! With `T⁻¹ = G Gᵀ` (Cholesky), `T⁻¹A` is similar to the symmetric matrix
//! `Gᵀ A G`, so its spectrum is real and computed by a symmetric solver.
//! Eigenvectors map back as `x = G y`.

mod lanczos;

use std::io::Write;

use faer::Mat;
use serde::Serialize;

pub use lanczos::{lanczos_extremes, LanczosOptions, LanczosResult};

use crate::dense::{cholesky, sym_eigh, sym_eigs};
use crate::error::{Error, Result};
use crate::fast_matvec::ToeplitzMatvec;
use crate::geometry::{Decomposition, Grid};
use crate::kernel::{KernelOperator, DEFAULT_DENSE_LIMIT};
use crate::precond::{Backend, BuildOptions, Preconditioner, PreconditionerKind};

/// Eigenvalues within this distance of `λ_max` count toward its multiplicity.
pub const MULTIPLICITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMethod {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub num_subdomains: usize,
    pub kind: PreconditionerKind,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Ascending; the full spectrum for dense runs, Ritz values for Lanczos.
    pub eigenvalues: Vec<f64>,
    /// Only available from dense runs.
    pub multiplicity_at_max: Option<usize>,
    pub method: SpectrumMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    /// Largest `N` handled densely; Lanczos beyond.
    pub dense_limit: usize,
    pub lanczos: LanczosOptions,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            dense_limit: DEFAULT_DENSE_LIMIT,
            lanczos: LanczosOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremal {
    Min,
    Max,
}

/// Count of eigenvalues within `tol` of `value`.
pub fn multiplicity_at(report: &SpectrumReport, value: f64, tol: f64) -> usize {
    report.eigenvalues.iter().filter(|&&l| (l - value).abs() <= tol).count()
}

/// Lower factor of `T⁻¹` with explicit zeros above the diagonal, and `Gᵀ A G`.
fn symmetrized(op: &KernelOperator, precond: &Preconditioner) -> Result<(Mat<f64>, Mat<f64>)> {
    let t = precond.dense_inverse()?;
    let chol = cholesky(t.as_ref()).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot } => Error::Numerical(format!(
            "preconditioner is not numerically positive definite (pivot {pivot})"
        )),
        other => other,
    })?;
    drop(t);
    let n = op.len();
    let lf = chol.l();
    let g = Mat::from_fn(n, n, |i, j| if i >= j { lf[(i, j)] } else { 0.0 });
    drop(chol);
    let a = op.assemble_full();
    let ag = &a * &g;
    drop(a);
    let mut b = g.transpose() * &ag;
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    Ok((g, b))
}

fn dense_limit_check(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::config(format!(
            "N = {n} exceeds the dense spectrum limit of {limit}"
        )));
    }
    Ok(())
}

pub fn preconditioned_spectrum(
    op: &KernelOperator,
    precond: &Preconditioner,
    options: &SpectrumOptions,
) -> Result<SpectrumReport> {
    let n = op.len();
    Error::check_len(n, crate::fast_matvec::LinearOperator::len(precond))?;
    if n > options.dense_limit {
        let tm = ToeplitzMatvec::new(op);
        let lz = lanczos_extremes(&tm, precond, options.lanczos)?;
        if !lz.converged {
            return Err(Error::Numerical(format!(
                "Lanczos did not converge in {} iterations",
                lz.iterations
            )));
        }
        return Ok(SpectrumReport {
            n,
            num_subdomains: precond.num_subdomains(),
            kind: precond.kind(),
            lambda_min: lz.lambda_min,
            lambda_max: lz.lambda_max,
            eigenvalues: lz.ritz_values,
            multiplicity_at_max: None,
            method: SpectrumMethod::Lanczos,
        });
    }
    let (_, b) = symmetrized(op, precond)?;
    let eigenvalues = sym_eigs(b.as_ref())?;
    let lambda_min = eigenvalues[0];
    let lambda_max = *eigenvalues.last().expect("non-empty spectrum");
    let mut report = SpectrumReport {
        n,
        num_subdomains: precond.num_subdomains(),
        kind: precond.kind(),
        lambda_min,
        lambda_max,
        eigenvalues,
        multiplicity_at_max: None,
        method: SpectrumMethod::Dense,
    };
    report.multiplicity_at_max = Some(multiplicity_at(&report, lambda_max, MULTIPLICITY_TOL));
    Ok(report)
}

/// Unit eigenvector of `T⁻¹A` for its smallest or largest eigenvalue, with
/// the largest-magnitude entry positive. Within a degenerate eigenspace any
/// member may be returned.
pub fn extremal_eigenvector(
    op: &KernelOperator,
    precond: &Preconditioner,
    which: Extremal,
    dense_limit: usize,
) -> Result<(f64, Vec<f64>)> {
    let n = op.len();
    dense_limit_check(n, dense_limit)?;
    let (g, b) = symmetrized(op, precond)?;
    let (vals, vecs) = sym_eigh(b.as_ref())?;
    let k = match which {
        Extremal::Min => 0,
        Extremal::Max => n - 1,
    };
    let y = vecs.col(k);
    let mut x = vec![0.0; n];
    for j in 0..n {
        let yj = y[j];
        if yj != 0.0 {
            let col = g.col(j);
            for i in j..n {
                x[i] += col[i] * yj;
            }
        }
    }
    normalize_and_fix_sign(&mut x);
    Ok((vals[k], x))
}

fn normalize_and_fix_sign(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (mut big, mut sign) = (0.0, 1.0);
    for &v in x.iter() {
        if v.abs() > big {
            big = v.abs();
            sign = v.signum();
        }
    }
    let s = sign / norm;
    x.iter_mut().for_each(|v| *v *= s);
}

/// Negate the entries outside the first subdomain: `(x₁, x₂) -> (x₁, -x₂)`.
pub fn mirror(decomposition: &Decomposition, v: &[f64]) -> Vec<f64> {
    let first = &decomposition.subdomains()[0].indices;
    let mut out: Vec<f64> = v.iter().map(|x| -x).collect();
    for &i in first {
        out[i] = v[i];
    }
    out
}

/// Largest defect `|λ_k + λ_{N+1-k} - 2|` of the spectrum of the block
/// Jacobi preconditioned matrix for a split into two disjoint subdomains.
pub fn jacobi_pairing_check(op: &KernelOperator, decomposition: &Decomposition, dense_limit: usize) -> Result<f64> {
    if decomposition.len() != 2 {
        return Err(Error::config("pairing check needs exactly two subdomains"));
    }
    let (a, b) = (&decomposition.subdomains()[0].indices, &decomposition.subdomains()[1].indices);
    if a.len() + b.len() != op.len() {
        return Err(Error::config("pairing check needs non-overlapping subdomains"));
    }
    dense_limit_check(op.len(), dense_limit)?;
    let p = Preconditioner::build(op, decomposition, Backend::Exact, BuildOptions { dense_limit })?;
    let report = preconditioned_spectrum(op, &p, &SpectrumOptions {
        dense_limit,
        ..Default::default()
    })?;
    let ev = &report.eigenvalues;
    let n = ev.len();
    Ok((0..n).map(|k| (ev[k] + ev[n - 1 - k] - 2.0).abs()).fold(0.0, f64::max))
}

/// Write `x,y[,z],value` rows for a grid-indexed field.
pub fn write_field_csv(grid: &Grid, values: &[f64], mut out: impl Write) -> Result<()> {
    Error::check_len(grid.len(), values.len())?;
    let dim = grid.dim();
    let io = |e: std::io::Error| Error::Numerical(format!("write failed: {e}"));
    let header = ["x", "y", "z"][..dim.max(2)].join(",");
    writeln!(out, "{header},value").map_err(io)?;
    for (i, v) in values.iter().enumerate() {
        let p = grid.point(i);
        let coords: Vec<String> = (0..dim.max(2)).map(|a| format!("{}", p[a])).collect();
        writeln!(out, "{},{v:e}", coords.join(",")).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DecompositionKind;
    use crate::kernel::PointLayout;

    fn exact(op: &KernelOperator, d: &Decomposition) -> Preconditioner {
        Preconditioner::build(op, d, Backend::Exact, BuildOptions::default()).unwrap()
    }

    fn spectrum(dim: usize, n: usize, m: usize, w: usize, kind: DecompositionKind) -> SpectrumReport {
        let g = Grid::new(dim, n).unwrap();
        // the tabulated 2D values use nodal distances
        let layout = if dim == 2 { PointLayout::Nodal } else { PointLayout::Centered };
        let op = KernelOperator::with_layout(&g, layout).unwrap();
        let d = Decomposition::new(&g, m, w, kind).unwrap();
        preconditioned_spectrum(&op, &exact(&op, &d), &SpectrumOptions::default()).unwrap()
    }

    #[test]
    fn small_table_rows() {
        let j = spectrum(2, 8, 2, 0, DecompositionKind::Jacobi);
        assert!((j.lambda_max - 2.8479).abs() < 2e-3 && (j.lambda_min - 0.1695).abs() < 2e-3);
        let s = spectrum(2, 8, 2, 1, DecompositionKind::Schwarz);
        assert!((s.lambda_max - 4.0).abs() < 1e-8 && (s.lambda_min - 0.8209).abs() < 2e-3);
        assert_eq!(s.multiplicity_at_max, Some(4));
        assert_eq!(s.method, SpectrumMethod::Dense);
        assert_eq!(multiplicity_at(&s, 100.0, 1e-8), 0);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let s3 = spectrum(3, 4, 2, 1, DecompositionKind::Schwarz);
        assert!((s3.lambda_max - 8.0).abs() < 1e-8 && (s3.lambda_min - 0.9750).abs() < 2e-3);
    }

    #[test]
    fn pairing_in_one_and_two_dimensions() {
        for (dim, n) in [(1, 32), (2, 8), (1, 2)] {
            let g = Grid::new(dim, n).unwrap();
            let op = KernelOperator::new(&g).unwrap();
            let d = Decomposition::halves(&g).unwrap();
            let defect = jacobi_pairing_check(&op, &d, DEFAULT_DENSE_LIMIT).unwrap();
            assert!(defect <= 1e-8, "dim {dim} n {n}: {defect}");
        }
        let g = Grid::new(2, 8).unwrap();
        let op = KernelOperator::new(&g).unwrap();
        let d = Decomposition::new(&g, 2, 0, DecompositionKind::Jacobi).unwrap();
        assert!(jacobi_pairing_check(&op, &d, DEFAULT_DENSE_LIMIT).is_err());
    }

    #[test]
    fn mirrored_extremal_vectors() {
        let g = Grid::new(1, 32).unwrap();
        let op = KernelOperator::new(&g).unwrap();
        let d = Decomposition::halves(&g).unwrap();
        let p = exact(&op, &d);
        let (lmin, vmin) = extremal_eigenvector(&op, &p, Extremal::Min, 4096).unwrap();
        let (lmax, vmax) = extremal_eigenvector(&op, &p, Extremal::Max, 4096).unwrap();
        assert!((lmin + lmax - 2.0).abs() < 1e-8);
        let norm = vmin.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let m = mirror(&d, &vmax);
        let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff = |s: f64| {
            m.iter()
                .zip(&vmin)
                .map(|(a, b)| (a / scale - s * b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        assert!(diff(1.0).min(diff(-1.0)) <= 1e-6);
    }

    #[test]
    fn schwarz_top_vector_lives_on_shared_points() {
        let g = Grid::new(2, 8).unwrap();
        let op = KernelOperator::new(&g).unwrap();
        let d = Decomposition::new(&g, 2, 1, DecompositionKind::Schwarz).unwrap();
        let (l, v) = extremal_eigenvector(&op, &exact(&op, &d), Extremal::Max, 4096).unwrap();
        assert!((l - 4.0).abs() < 1e-8);
        let shared = d.shared_by_all();
        for (i, x) in v.iter().enumerate() {
            if !shared.contains(&i) {
                assert!(x.abs() <= 1e-8, "entry {i} = {x}");
            }
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let g = Grid::new(2, 16).unwrap();
        let op = KernelOperator::new(&g).unwrap();
        let d = Decomposition::new(&g, 4, 1, DecompositionKind::Cbd).unwrap();
        let p = exact(&op, &d);
        let dense = preconditioned_spectrum(&op, &p, &SpectrumOptions::default()).unwrap();
        let lz = preconditioned_spectrum(&op, &p, &SpectrumOptions {
            dense_limit: 100,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(lz.method, SpectrumMethod::Lanczos);
        assert!((lz.lambda_min - dense.lambda_min).abs() < 1e-6);
        assert!((lz.lambda_max - dense.lambda_max).abs() < 1e-6);
    }

    #[test]
    fn field_csv() {
        let g = Grid::new(2, 2).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&g, &[1.0, 2.0, 3.0, 4.0], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,value");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0.25,0.25,"));
        assert!(write_field_csv(&g, &[1.0], Vec::new()).is_err());
    }
}
