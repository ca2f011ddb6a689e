//! `O(N log N)` products with the operator via circulant embedding of its
//! multilevel Toeplitz structure.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::MAX_DIM;
use crate::kernel::KernelOperator;

/// Anything that can compute `y = A x`.
pub trait LinearOperator: Sync {
    fn len(&self) -> usize;

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()>;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.len()];
        self.apply_into(x, &mut y)?;
        Ok(y)
    }
}

/// Circulant embedding of the operator in a `(2n)^d` periodic array.
pub struct ToeplitzMatvec {
    dim: usize,
    n: usize,
    symbol: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ToeplitzMatvec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToeplitzMatvec")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

impl ToeplitzMatvec {
    pub fn new(op: &KernelOperator) -> Self {
        let grid = op.grid();
        let (dim, n) = (grid.dim(), grid.n_per_dim());
        let size = 2 * n;
        let total = size.pow(dim as u32);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);

        let mut symbol = vec![Complex::new(0.0, 0.0); total];
        'outer: for (k, slot) in symbol.iter_mut().enumerate() {
            let mut off = [0usize; MAX_DIM];
            let mut rest = k;
            for o in off.iter_mut().take(dim) {
                let ka = rest % size;
                rest /= size;
                *o = match ka.cmp(&n) {
                    std::cmp::Ordering::Less => ka,
                    std::cmp::Ordering::Equal => continue 'outer,
                    std::cmp::Ordering::Greater => size - ka,
                };
            }
            *slot = Complex::new(op.offset_entry(&off), 0.0);
        }
        let mut tm = Self {
            dim,
            n,
            symbol,
            forward,
            inverse,
        };
        let mut sym = std::mem::take(&mut tm.symbol);
        tm.transform(&mut sym, false);
        tm.symbol = sym;
        tm
    }

    /// Points per axis of the periodic embedding.
    pub fn embedding_size(&self) -> usize {
        2 * self.n
    }

    /// Spectral symbol (FFT of the embedded generator).
    pub fn symbol(&self) -> &[Complex<f64>] {
        &self.symbol
    }

    fn transform(&self, data: &mut [Complex<f64>], inverse: bool) {
        let size = 2 * self.n;
        let plan = if inverse { &self.inverse } else { &self.forward };
        let mut line = vec![Complex::new(0.0, 0.0); size];
        let mut scratch = vec![Complex::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let total = data.len();
        for axis in 0..self.dim {
            let stride = size.pow(axis as u32);
            for base in 0..total {
                // visit each line once: the axis coordinate of `base` must be zero
                if (base / stride) % size != 0 {
                    continue;
                }
                for (t, l) in line.iter_mut().enumerate() {
                    *l = data[base + t * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (t, l) in line.iter().enumerate() {
                    data[base + t * stride] = *l;
                }
            }
        }
    }

    fn embed_index(&self, i: usize) -> usize {
        let size = 2 * self.n;
        let mut rest = i;
        let mut out = 0;
        let mut stride = 1;
        for _ in 0..self.dim {
            out += (rest % self.n) * stride;
            rest /= self.n;
            stride *= size;
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.len()];
        self.apply_into(v, &mut y)?;
        Ok(y)
    }
}

impl LinearOperator for ToeplitzMatvec {
    fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n_pts = self.len();
        Error::check_len(n_pts, x.len())?;
        Error::check_len(n_pts, y.len())?;
        let mut buf = vec![Complex::new(0.0, 0.0); self.symbol.len()];
        for (i, &xi) in x.iter().enumerate() {
            buf[self.embed_index(i)] = Complex::new(xi, 0.0);
        }
        self.transform(&mut buf, false);
        for (b, s) in buf.iter_mut().zip(&self.symbol) {
            *b *= s;
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / self.symbol.len() as f64;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = buf[self.embed_index(i)].re * scale;
        }
        Ok(())
    }
}

/// Dense matrix as a [`LinearOperator`]; used for small problems and tests.
pub struct DenseOperator {
    pub matrix: faer::Mat<f64>,
}

impl LinearOperator for DenseOperator {
    fn len(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.matrix.nrows();
        Error::check_len(n, x.len())?;
        Error::check_len(n, y.len())?;
        y.fill(0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let col = self.matrix.col(j);
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += col[i] * xj;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_product(op: &KernelOperator, v: &[f64]) -> Vec<f64> {
        (0..op.len())
            .map(|i| (0..op.len()).map(|j| op.entry(i, j) * v[j]).sum())
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn embedding_and_dc() {
        let op = KernelOperator::new(&Grid::new(2, 2).unwrap()).unwrap();
        let tm = ToeplitzMatvec::new(&op);
        assert_eq!(tm.embedding_size(), 4);
        assert_eq!(tm.symbol().len(), 16);
        // DC = sum of generator: lags -1, 0, 1 per axis (lag ±2 is the zero slot)
        let mut dc = 0.0;
        for a in 0..2usize {
            for b in 0..2usize {
                let mult = if a == 0 { 1.0 } else { 2.0 } * if b == 0 { 1.0 } else { 2.0 };
                dc += mult * op.offset_entry(&[a, b, 0]);
            }
        }
        assert!((tm.symbol()[0].re - dc).abs() < 1e-14);
        assert!(tm.symbol()[0].im.abs() < 1e-14);
    }

    #[test]
    fn zero_and_unit_vectors() {
        let op = KernelOperator::new(&Grid::new(2, 8).unwrap()).unwrap();
        let tm = ToeplitzMatvec::new(&op);
        assert!(tm.matvec(&vec![0.0; 64]).unwrap().iter().all(|&x| x == 0.0));
        let mut e = vec![0.0; 64];
        e[0] = 1.0;
        let col = tm.matvec(&e).unwrap();
        for (i, c) in col.iter().enumerate() {
            assert!((c - op.entry(i, 0)).abs() < 1e-14);
        }
        assert!(tm.matvec(&[1.0]).is_err());
    }

    #[test]
    fn matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (dim, n) in [(1, 32), (2, 32), (3, 8)] {
            let op = KernelOperator::new(&Grid::new(dim, n).unwrap()).unwrap();
            let tm = ToeplitzMatvec::new(&op);
            let v: Vec<f64> = (0..op.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let err = rel_err(&tm.matvec(&v).unwrap(), &dense_product(&op, &v));
            assert!(err < 1e-12, "dim {dim} n {n}: {err}");
        }
    }

    #[test]
    fn symbol_is_real() {
        // real, even generator => real symbol
        let op = KernelOperator::new(&Grid::new(3, 4).unwrap()).unwrap();
        let tm = ToeplitzMatvec::new(&op);
        let scale = tm.symbol().iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(tm.symbol().iter().all(|c| c.im.abs() < 1e-12 * scale));
    }
}
