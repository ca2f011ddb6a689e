//! Command-line arguments and the per-row experiment configuration.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use iedd_core::geometry::{Grid, Partitioning};
use iedd_core::pcg::Rhs;
use iedd_core::precond::PreconditionerKind;
use iedd_core::{Decomposition, DecompositionKind, PointLayout};

/// Comma-separated sweep values; an empty string is an empty sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<T>().map_err(|e| format!("'{t}': {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}

#[derive(Debug, Parser)]
#[command(name = "iedd", version, about = "Domain-decomposition preconditioners for volume integral equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extremal eigenvalues of the preconditioned matrix.
    Spectrum(SweepArgs),
    /// PCG solves with timing and memory figures.
    Solve(SweepArgs),
    /// Check stored reference values.
    Golden(GoldenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Exact,
    Rskel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Min,
    Max,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Points per dimension (comma list).
    #[arg(long, default_value = "16")]
    pub n: List<usize>,
    /// Partitions per dimension (comma list); leaf boxes per dimension for rs-global.
    #[arg(long, default_value = "2")]
    pub m: List<usize>,
    #[arg(long, default_value = "cbd")]
    pub precond: List<PreconditionerKind>,
    #[arg(long, value_enum, default_value_t = BackendChoice::Exact)]
    pub backend: BackendChoice,
    #[arg(long, default_value = "1e-3")]
    pub eps: List<f64>,
    #[arg(long, default_value = "1")]
    pub overlap: List<usize>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// random | manufactured | ones | file:PATH
    #[arg(long, default_value = "random")]
    pub rhs: Rhs,
    /// Where kernel distances are measured: centered | nodal.
    #[arg(long, default_value = "centered")]
    pub layout: PointLayout,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Rows evaluated concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Largest subproblem factored densely.
    #[arg(long, default_value_t = iedd_core::kernel::DEFAULT_DENSE_LIMIT)]
    pub dense_limit: usize,
    /// Largest N whose spectrum is computed densely; Lanczos beyond.
    #[arg(long, default_value_t = iedd_core::kernel::DEFAULT_DENSE_LIMIT)]
    pub spectrum_dense_limit: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub lanczos_tol: f64,
    #[arg(long, default_value_t = 400)]
    pub lanczos_max_iters: usize,
    /// Dump an extremal eigenvector of the first row as `x,y[,z],value`.
    #[arg(long, requires = "eigvec_out")]
    pub eigvec: Option<Which>,
    #[arg(long)]
    pub eigvec_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GoldenArgs {
    /// Suites to run; `all` selects every suite.
    pub suites: Vec<String>,
    /// Print the available suites and exit.
    #[arg(long)]
    pub list: bool,
    /// Reference values to use instead of the built-in tables.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// One fully specified experiment; echoed into every output row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub n: usize,
    pub m: usize,
    pub kind: PreconditionerKind,
    pub backend: BackendChoice,
    pub eps: f64,
    pub overlap_width: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub rhs: String,
    pub layout: PointLayout,
    pub dense_limit: usize,
    pub spectrum_dense_limit: usize,
    pub lanczos_tol: f64,
    pub lanczos_max_iters: usize,
}

impl ExperimentConfig {
    /// A configuration with the documented defaults.
    pub fn new(dim: usize, n: usize, m: usize, kind: PreconditionerKind) -> Self {
        Self {
            dim,
            n,
            m,
            kind,
            backend: BackendChoice::Exact,
            eps: 1e-3,
            overlap_width: if kind == PreconditionerKind::Jacobi { 0 } else { 1 },
            tol: 1e-12,
            max_iters: 1000,
            seed: 0,
            rhs: Rhs::Random.to_string(),
            layout: PointLayout::Centered,
            dense_limit: iedd_core::kernel::DEFAULT_DENSE_LIMIT,
            spectrum_dense_limit: iedd_core::kernel::DEFAULT_DENSE_LIMIT,
            lanczos_tol: 1e-8,
            lanczos_max_iters: 400,
        }
    }

    pub fn decomposition_kind(&self) -> Option<DecompositionKind> {
        match self.kind {
            PreconditionerKind::Jacobi => Some(DecompositionKind::Jacobi),
            PreconditionerKind::Schwarz => Some(DecompositionKind::Schwarz),
            PreconditionerKind::Cbd => Some(DecompositionKind::Cbd),
            PreconditionerKind::None | PreconditionerKind::RsGlobal => None,
        }
    }

    pub fn rhs_mode(&self) -> iedd_core::Result<Rhs> {
        self.rhs.parse()
    }

    /// Checks everything that can be checked without factorizing.
    pub fn validate(&self) -> Result<(), String> {
        let grid = Grid::new(self.dim, self.n).map_err(|e| e.to_string())?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        let uses_rs = self.kind == PreconditionerKind::RsGlobal
            || (self.backend == BackendChoice::Rskel && self.kind == PreconditionerKind::Cbd);
        if uses_rs && !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(format!("eps must lie in (0, 1), got {}", self.eps));
        }
        let rhs = self.rhs_mode().map_err(|e| e.to_string())?;
        if let Rhs::File(path) = &rhs {
            let len = iedd_core::pcg::read_vector(path).map_err(|e| e.to_string())?.len();
            if len != grid.len() {
                return Err(format!("{} holds {len} values, expected {}", path.display(), grid.len()));
            }
        }
        if self.kind == PreconditionerKind::None {
            return Ok(());
        }
        Partitioning::new(&grid, self.m).map_err(|e| e.to_string())?;
        if self.kind == PreconditionerKind::RsGlobal {
            if !self.m.is_power_of_two() {
                return Err(format!("rs-global needs a power-of-two m, got {}", self.m));
            }
            return Ok(());
        }
        if self.backend == BackendChoice::Rskel && self.kind == PreconditionerKind::Cbd {
            if self.m % 2 != 0 || !(self.m / 2).is_power_of_two() {
                return Err(format!("rskel CBD needs m = 2·2^k, got {}", self.m));
            }
            return Ok(());
        }
        let kind = self.decomposition_kind().expect("lattice kind");
        let d = Decomposition::new(&grid, self.m, self.overlap_width, kind).map_err(|e| e.to_string())?;
        if let Some(big) = d.subdomains().iter().map(|s| s.indices.len()).max() {
            if big > self.dense_limit {
                return Err(format!(
                    "largest subdomain has {big} points, above the dense limit {}; use --backend rskel",
                    self.dense_limit
                ));
            }
        }
        Ok(())
    }
}

impl SweepArgs {
    /// Cartesian product of the sweep lists, in nesting order
    /// n, m, precond, overlap, eps.
    pub fn configs(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &n in &self.n.0 {
            for &m in &self.m.0 {
                for &kind in &self.precond.0 {
                    for &w in &self.overlap.0 {
                        for &eps in &self.eps.0 {
                            let mut c = ExperimentConfig::new(self.dim, n, m, kind);
                            c.backend = self.backend;
                            c.eps = eps;
                            c.overlap_width = if kind == PreconditionerKind::Jacobi { 0 } else { w };
                            c.tol = self.tol;
                            c.max_iters = self.max_iters;
                            c.seed = self.seed;
                            c.rhs = self.rhs.to_string();
                            c.layout = self.layout;
                            c.dense_limit = self.dense_limit;
                            c.spectrum_dense_limit = self.spectrum_dense_limit;
                            c.lanczos_tol = self.lanczos_tol;
                            c.lanczos_max_iters = self.lanczos_max_iters;
                            out.push(c);
                        }
                    }
                }
            }
        }
        out
    }
}
