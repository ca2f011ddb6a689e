//! Preconditioned conjugate gradients with the residual bookkeeping used in
//! the experiment tables.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fast_matvec::LinearOperator;

/// Iterations inspected by the stagnation test.
pub const STAGNATION_WINDOW: usize = 30;
/// Minimum relative improvement of the best residual across one window.
pub const STAGNATION_FACTOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcgReport {
    pub n_it: usize,
    pub achieved_residual: f64,
    pub t_pcg: f64,
    /// Mean seconds per preconditioner application.
    pub t_s: f64,
    /// Relative residuals, starting with the initial guess.
    pub residual_history: Vec<f64>,
    pub stagnated: bool,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn stagnating(history: &[f64]) -> bool {
    let k = history.len();
    if k <= STAGNATION_WINDOW {
        return false;
    }
    let split = k - STAGNATION_WINDOW;
    let before = history[..split].iter().copied().fold(f64::INFINITY, f64::min);
    let recent = history[split..].iter().copied().fold(f64::INFINITY, f64::min);
    recent > (1.0 - STAGNATION_FACTOR) * before
}

/// Solves `A u = f` from `u = 0`, returning the iterate and a report.
///
/// Stops at relative residual `tol`, on stagnation, or after `max_iters`.
pub fn solve(
    a: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    f: &[f64],
    options: PcgOptions,
) -> Result<(Vec<f64>, PcgReport)> {
    let n = a.len();
    Error::check_len(n, f.len())?;
    Error::check_len(n, precond.len())?;
    if !(options.tol > 0.0 && options.tol < 1.0) {
        return Err(Error::config(format!("tol must lie in (0, 1), got {}", options.tol)));
    }
    let start = Instant::now();
    let mut precond_time = 0.0;
    let mut precond_calls = 0usize;
    let mut apply_precond = |r: &[f64], z: &mut [f64]| -> Result<()> {
        let t = Instant::now();
        precond.apply_into(r, z)?;
        precond_time += t.elapsed().as_secs_f64();
        precond_calls += 1;
        Ok(())
    };

    let f_norm = norm(f);
    let mut u = vec![0.0; n];
    let mut history = vec![1.0];
    let finish = |history: Vec<f64>, stagnated: bool, converged: bool, pt: f64, pc: usize| PcgReport {
        n_it: history.len() - 1,
        achieved_residual: *history.last().unwrap_or(&0.0),
        t_pcg: start.elapsed().as_secs_f64(),
        t_s: if pc == 0 { 0.0 } else { pt / pc as f64 },
        residual_history: history,
        stagnated,
        converged,
    };
    if f_norm == 0.0 {
        history[0] = 0.0;
        return Ok((u, finish(history, false, true, 0.0, 0)));
    }

    let mut r = f.to_vec();
    let mut z = vec![0.0; n];
    apply_precond(&r, &mut z)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut stagnated = false;
    let mut converged = false;
    for _ in 0..options.max_iters {
        a.apply_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        let alpha = rz / pap;
        if !alpha.is_finite() || pap <= 0.0 {
            return Err(Error::Numerical(format!(
                "PCG breakdown after {} iterations (p'Ap = {pap:e})",
                history.len() - 1
            )));
        }
        for i in 0..n {
            u[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / f_norm;
        if !rel.is_finite() {
            return Err(Error::Numerical("non-finite residual in PCG".into()));
        }
        history.push(rel);
        if rel <= options.tol {
            converged = true;
            break;
        }
        if stagnating(&history) {
            stagnated = true;
            break;
        }
        apply_precond(&r, &mut z)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    drop(apply_precond);
    Ok((u, finish(history, stagnated, converged, precond_time, precond_calls)))
}

/// Right-hand side construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    /// `f` drawn i.i.d. standard normal from the seed.
    Random,
    /// `f = A u` with a seeded standard normal `u`, so the true error is known.
    Manufactured,
    Ones,
    /// One real per line.
    File(std::path::PathBuf),
}

impl std::str::FromStr for Rhs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Rhs::Random),
            "ones" => Ok(Rhs::Ones),
            "manufactured" => Ok(Rhs::Manufactured),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(Rhs::File(path.into())),
                _ => Err(Error::config(format!("unknown rhs mode '{s}' (random|manufactured|ones|file:PATH)"))),
            },
        }
    }
}

impl std::fmt::Display for Rhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rhs::Random => f.write_str("random"),
            Rhs::Manufactured => f.write_str("manufactured"),
            Rhs::Ones => f.write_str("ones"),
            Rhs::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Seeded standard normal vector.
pub fn random_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(k, l)| {
            l.parse::<f64>()
                .map_err(|e| Error::config(format!("{} line {}: {e}", path.display(), k + 1)))
        })
        .collect()
}

impl Rhs {
    /// Builds `f`; for [`Rhs::Manufactured`] the exact solution is returned too.
    pub fn build(&self, a: &dyn LinearOperator, seed: u64) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let n = a.len();
        match self {
            Rhs::Random => Ok((random_vector(n, seed), None)),
            Rhs::Manufactured => {
                let u = random_vector(n, seed);
                Ok((a.apply(&u)?, Some(u)))
            }
            Rhs::Ones => Ok((vec![1.0; n], None)),
            Rhs::File(path) => {
                let f = read_vector(path)?;
                Error::check_len(n, f.len())?;
                Ok((f, None))
            }
        }
    }
}
