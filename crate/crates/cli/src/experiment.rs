//! Drives geometry, operator, preconditioner and solver for one configuration.

use std::time::Instant;

use serde::Serialize;

use iedd_core::fast_matvec::ToeplitzMatvec;
use iedd_core::geometry::{Decomposition, Grid};
use iedd_core::pcg::{self, PcgOptions};
use iedd_core::precond::{Backend, BuildOptions, Preconditioner, PreconditionerKind};
use iedd_core::rskel::ProxyConfig;
use iedd_core::spectrum::{self, Extremal, LanczosOptions, SpectrumMethod, SpectrumOptions};
use iedd_core::{Error, KernelOperator};

use crate::config::{BackendChoice, ExperimentConfig, Which};

/// Everything returned by [`run_spectrum`] besides the config echo.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    #[serde(flatten)]
    pub config: ExperimentConfig,
    #[serde(rename = "N")]
    pub n_total: usize,
    #[serde(rename = "M")]
    pub partitions: usize,
    #[serde(rename = "D")]
    pub subdomains: usize,
    pub lambda_max: Option<f64>,
    pub lambda_min: Option<f64>,
    pub multiplicity_at_max: Option<usize>,
    pub method: Option<SpectrumMethod>,
    pub error: Option<String>,
}

/// One row of a solver performance table.
#[derive(Debug, Clone, Serialize)]
pub struct SolveRow {
    #[serde(flatten)]
    pub config: ExperimentConfig,
    #[serde(rename = "N")]
    pub n_total: usize,
    #[serde(rename = "M")]
    pub partitions: usize,
    #[serde(rename = "D")]
    pub subdomains: usize,
    #[serde(rename = "S")]
    pub skeleton: Option<usize>,
    pub t_f: Option<f64>,
    /// Gigabytes, from factor accounting (not RSS).
    pub m_f: Option<f64>,
    pub t_s: Option<f64>,
    pub n_it: Option<usize>,
    pub t_pcg: Option<f64>,
    pub achieved_residual: Option<f64>,
    pub stagnated: Option<bool>,
    pub true_error: Option<f64>,
    pub error: Option<String>,
}

/// A failed row keeps the distinction between bad input and numerics.
#[derive(Debug, Clone, PartialEq)]
pub struct RowFailure {
    pub message: String,
    pub numerical: bool,
}

impl From<Error> for RowFailure {
    fn from(e: Error) -> Self {
        Self {
            numerical: e.is_numerical(),
            message: e.to_string(),
        }
    }
}

fn partitions(config: &ExperimentConfig) -> usize {
    match config.kind {
        PreconditionerKind::None => 1,
        _ => config.m.pow(config.dim as u32),
    }
}

/// Rounds to three significant digits.
pub fn three_digits(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(2 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

pub fn build_operator(config: &ExperimentConfig) -> iedd_core::Result<KernelOperator> {
    KernelOperator::with_layout(&Grid::new(config.dim, config.n)?, config.layout)
}

pub fn build_preconditioner(op: &KernelOperator, config: &ExperimentConfig) -> iedd_core::Result<Preconditioner> {
    let backend = match config.backend {
        BackendChoice::Exact => Backend::Exact,
        BackendChoice::Rskel => Backend::Rskel {
            eps: config.eps,
            proxy: ProxyConfig::default(),
        },
    };
    match config.kind {
        PreconditionerKind::None => Ok(Preconditioner::none(op.len())),
        PreconditionerKind::RsGlobal => Preconditioner::rs_global(op, config.m, config.eps, ProxyConfig::default()),
        _ => {
            let kind = config.decomposition_kind().expect("lattice kind");
            let d = Decomposition::new(op.grid(), config.m, config.overlap_width, kind)?;
            let options = BuildOptions {
                dense_limit: config.dense_limit,
            };
            Preconditioner::build(op, &d, backend, options)
        }
    }
}

fn spectrum_options(config: &ExperimentConfig) -> SpectrumOptions {
    SpectrumOptions {
        dense_limit: config.spectrum_dense_limit,
        lanczos: LanczosOptions {
            max_iters: config.lanczos_max_iters,
            tol: config.lanczos_tol,
            seed: config.seed,
        },
    }
}

/// Extremal eigenvalues of `T⁻¹A`; optionally also an extremal eigenvector.
pub fn spectrum_with_vector(
    config: &ExperimentConfig,
    which: Option<Which>,
) -> Result<(SpectrumRow, Option<Vec<f64>>), RowFailure> {
    let op = build_operator(config)?;
    let precond = build_preconditioner(&op, config)?;
    let report = spectrum::preconditioned_spectrum(&op, &precond, &spectrum_options(config))?;
    let vector = match which {
        Some(w) => {
            let which = match w {
                Which::Min => Extremal::Min,
                Which::Max => Extremal::Max,
            };
            let (_, v) = spectrum::extremal_eigenvector(&op, &precond, which, config.spectrum_dense_limit)?;
            Some(v)
        }
        None => None,
    };
    let row = SpectrumRow {
        config: config.clone(),
        n_total: op.len(),
        partitions: partitions(config),
        subdomains: precond.num_subdomains().max(1),
        lambda_max: Some(report.lambda_max),
        lambda_min: Some(report.lambda_min),
        multiplicity_at_max: report.multiplicity_at_max,
        method: Some(report.method),
        error: None,
    };
    Ok((row, vector))
}

fn failed_spectrum(config: &ExperimentConfig, failure: &RowFailure) -> SpectrumRow {
    SpectrumRow {
        config: config.clone(),
        n_total: config.n.pow(config.dim as u32),
        partitions: partitions(config),
        subdomains: 0,
        lambda_max: None,
        lambda_min: None,
        multiplicity_at_max: None,
        method: None,
        error: Some(failure.message.clone()),
    }
}

/// Always yields a row; failures are recorded in its `error` field.
pub fn run_spectrum(config: &ExperimentConfig) -> (SpectrumRow, Option<RowFailure>) {
    match spectrum_with_vector(config, None) {
        Ok((row, _)) => (row, None),
        Err(f) => (failed_spectrum(config, &f), Some(f)),
    }
}

fn solve_inner(config: &ExperimentConfig) -> Result<SolveRow, RowFailure> {
    let op = build_operator(config)?;
    let matvec = ToeplitzMatvec::new(&op);
    let start = Instant::now();
    let precond = build_preconditioner(&op, config)?;
    let t_f = start.elapsed().as_secs_f64();
    let (f, exact) = config.rhs_mode()?.build(&matvec, config.seed)?;
    let options = PcgOptions {
        tol: config.tol,
        max_iters: config.max_iters,
    };
    let (u, report) = pcg::solve(&matvec, &precond, &f, options)?;
    let true_error = exact.map(|x| {
        let num: f64 = u.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = x.iter().map(|b| b * b).sum();
        (num / den).sqrt()
    });
    let stats = precond.stats();
    Ok(SolveRow {
        config: config.clone(),
        n_total: op.len(),
        partitions: partitions(config),
        subdomains: precond.num_subdomains().max(1),
        skeleton: Some(stats.max_skeleton_count()),
        t_f: Some(t_f),
        m_f: Some(three_digits(stats.memory_bytes as f64 / 1e9)),
        t_s: Some(report.t_s),
        n_it: Some(report.n_it),
        t_pcg: Some(report.t_pcg),
        achieved_residual: Some(report.achieved_residual),
        stagnated: Some(report.stagnated),
        true_error,
        error: None,
    })
}

/// Always yields a row; failures are recorded in its `error` field.
pub fn run_solve(config: &ExperimentConfig) -> (SolveRow, Option<RowFailure>) {
    match solve_inner(config) {
        Ok(row) => (row, None),
        Err(f) => {
            let row = SolveRow {
                config: config.clone(),
                n_total: config.n.pow(config.dim as u32),
                partitions: partitions(config),
                subdomains: 0,
                skeleton: None,
                t_f: None,
                m_f: None,
                t_s: None,
                n_it: None,
                t_pcg: None,
                achieved_residual: None,
                stagnated: None,
                true_error: None,
                error: Some(f.message.clone()),
            };
            (row, Some(f))
        }
    }
}
