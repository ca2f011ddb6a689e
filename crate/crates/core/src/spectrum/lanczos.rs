//! Extremal eigenvalues of `T⁻¹A` by Lanczos in the `A` inner product, for
//! problems too large for dense eigensolvers.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::sym_eigh;
use crate::error::{Error, Result};
use crate::fast_matvec::LinearOperator;

/// Steps over which Ritz-value drift is measured.
pub const STALL_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub max_iters: usize,
    /// An extreme is settled once its Ritz residual, or its drift over the
    /// last [`STALL_WINDOW`] steps, is below `tol * |θ|`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iters: 400,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub ritz_values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Each step costs one application of `a` and one of `t_inv`; the basis and
/// its image under `a` are kept for full reorthogonalization.
pub fn lanczos_extremes(
    a: &dyn LinearOperator,
    t_inv: &dyn LinearOperator,
    options: LanczosOptions,
) -> Result<LanczosResult> {
    let n = a.len();
    Error::check_len(n, t_inv.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut av = a.apply(&v)?;
    let norm = dot(&v, &av).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Numerical("start vector has non-positive A-norm".into()));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    av.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let max_iters = options.max_iters.min(n);
    let mut result = None;
    let mut extremes: Vec<(f64, f64)> = Vec::new();
    for k in 0..max_iters {
        let mut z = t_inv.apply(&av)?;
        let a_k = dot(&z, &av);
        basis.push(v);
        images.push(av);
        alpha.push(a_k);
        // two passes of classical Gram-Schmidt in the A inner product
        for _ in 0..2 {
            for (q, aq) in basis.iter().zip(&images) {
                let c = dot(&z, aq);
                z.iter_mut().zip(q).for_each(|(zi, qi)| *zi -= c * qi);
            }
        }
        let az = a.apply(&z)?;
        let b2 = dot(&z, &az);
        if !b2.is_finite() {
            return Err(Error::Numerical("non-finite value in Lanczos iteration".into()));
        }
        let b = b2.max(0.0).sqrt();

        let m = alpha.len();
        let tri = Mat::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let (vals, vecs) = sym_eigh(tri.as_ref())?;
        let res_lo = b * vecs[(m - 1, 0)].abs();
        let res_hi = b * vecs[(m - 1, m - 1)].abs();
        let (lo, hi) = (vals[0], vals[m - 1]);
        extremes.push((lo, hi));
        // in a tight cluster the Ritz value settles long before the vector does
        let drift = extremes
            .len()
            .checked_sub(STALL_WINDOW + 1)
            .map(|i| extremes[i])
            .map(|(l0, h0)| ((l0 - lo).abs(), (h0 - hi).abs()));
        let settled = |res: f64, d: Option<f64>, theta: f64| {
            let bound = options.tol * theta.abs();
            res <= bound || d.is_some_and(|d| d <= bound)
        };
        let done = settled(res_lo, drift.map(|d| d.0), lo) && settled(res_hi, drift.map(|d| d.1), hi);
        let exhausted = b <= 1e-14 * alpha.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        if done || exhausted || k + 1 == max_iters {
            result = Some(LanczosResult {
                lambda_min: vals[0],
                lambda_max: vals[m - 1],
                ritz_values: vals,
                iterations: m,
                converged: done || exhausted,
            });
            break;
        }
        beta.push(b);
        v = z.iter().map(|x| x / b).collect();
        av = az.iter().map(|x| x / b).collect();
    }
    result.ok_or_else(|| Error::Numerical("Lanczos produced no iterations".into()))
}
