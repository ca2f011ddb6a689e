//! Reference values transcribed from published tables, and the checks that
//! compare fresh runs against them.

use serde::{Deserialize, Serialize};

use iedd_core::precond::PreconditionerKind;
use iedd_core::PointLayout;

use crate::config::{BackendChoice, ExperimentConfig};
use crate::experiment::{run_solve, run_spectrum, SolveRow, SpectrumRow};

const GOLDEN_JSON: &str = include_str!("../goldens/reference_tables.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteCommand {
    Spectrum,
    Solve,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Overrides {
    pub dim: Option<usize>,
    pub layout: Option<PointLayout>,
    pub backend: Option<BackendChoice>,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Tolerance {
    /// Absolute tolerance on eigenvalues.
    pub lambda: Option<f64>,
    /// Allowed deviation in iteration counts.
    pub n_it: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GoldenRow {
    #[serde(flatten)]
    pub overrides: Overrides,
    pub n: usize,
    pub m: usize,
    pub kind: PreconditionerKind,
    pub overlap: Option<usize>,
    pub lambda_max: Option<f64>,
    pub lambda_min: Option<f64>,
    pub n_it: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Suite {
    pub name: String,
    pub command: SuiteCommand,
    pub description: String,
    /// Not part of `all`; rows may be known to deviate.
    #[serde(default)]
    pub extended: bool,
    #[serde(default)]
    pub defaults: Overrides,
    pub tolerance: Tolerance,
    pub rows: Vec<GoldenRow>,
}

#[derive(Debug, Deserialize)]
struct GoldenFile {
    suites: Vec<Suite>,
}

/// One compared quantity.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: String,
    pub case: String,
    pub quantity: String,
    pub expected: f64,
    pub actual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub error: Option<String>,
}

/// Checks of one suite plus the raw rows they were computed from.
#[derive(Debug, Clone, Default)]
pub struct SuiteOutcome {
    pub checks: Vec<Check>,
    pub spectrum_rows: Vec<SpectrumRow>,
    pub solve_rows: Vec<SolveRow>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn load_suites() -> Result<Vec<Suite>, String> {
    parse_suites(GOLDEN_JSON)
}

pub fn parse_suites(json: &str) -> Result<Vec<Suite>, String> {
    serde_json::from_str::<GoldenFile>(json)
        .map(|f| f.suites)
        .map_err(|e| format!("golden file is malformed: {e}"))
}

impl GoldenRow {
    pub fn config(&self, defaults: &Overrides) -> ExperimentConfig {
        let pick = |a: &Overrides| (a.dim, a.layout, a.backend, a.eps);
        let (dim, layout, backend, eps) = pick(&self.overrides);
        let (d_dim, d_layout, d_backend, d_eps) = pick(defaults);
        let mut c = ExperimentConfig::new(dim.or(d_dim).unwrap_or(2), self.n, self.m, self.kind);
        c.layout = layout.or(d_layout).unwrap_or_default();
        c.backend = backend.or(d_backend).unwrap_or(BackendChoice::Exact);
        if let Some(e) = eps.or(d_eps) {
            c.eps = e;
        }
        if let Some(w) = self.overlap {
            c.overlap_width = w;
        }
        c
    }
}

fn label(c: &ExperimentConfig) -> String {
    format!("{}D n={} m={} {} w={} {}", c.dim, c.n, c.m, c.kind, c.overlap_width, c.layout)
}

fn compare(
    suite: &str,
    case: &str,
    quantity: &str,
    expected: f64,
    actual: Option<f64>,
    tolerance: f64,
    error: &Option<String>,
) -> Check {
    let pass = actual.is_some_and(|a| (a - expected).abs() <= tolerance);
    Check {
        suite: suite.to_string(),
        case: case.to_string(),
        quantity: quantity.to_string(),
        expected,
        actual,
        tolerance,
        pass,
        error: error.clone(),
    }
}

pub fn run_suite(suite: &Suite) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let lambda_tol = suite.tolerance.lambda.unwrap_or(2e-3);
    let it_tol = suite.tolerance.n_it.unwrap_or(2) as f64;
    for row in &suite.rows {
        let config = row.config(&suite.defaults);
        let case = label(&config);
        match suite.command {
            SuiteCommand::Spectrum => {
                let (r, _) = run_spectrum(&config);
                if let Some(e) = row.lambda_max {
                    out.checks
                        .push(compare(&suite.name, &case, "lambda_max", e, r.lambda_max, lambda_tol, &r.error));
                }
                if let Some(e) = row.lambda_min {
                    out.checks
                        .push(compare(&suite.name, &case, "lambda_min", e, r.lambda_min, lambda_tol, &r.error));
                }
                out.spectrum_rows.push(r);
            }
            SuiteCommand::Solve => {
                let (r, _) = run_solve(&config);
                if let Some(e) = row.n_it {
                    let actual = r.n_it.map(|k| k as f64);
                    out.checks
                        .push(compare(&suite.name, &case, "n_it", e as f64, actual, it_tol, &r.error));
                }
                out.solve_rows.push(r);
            }
        }
    }
    out
}

/// Resolves suite names; `all` expands to every non-extended suite.
pub fn select<'a>(suites: &'a [Suite], names: &[String]) -> Result<Vec<&'a Suite>, String> {
    let mut picked: Vec<&Suite> = Vec::new();
    for name in names {
        if name == "all" {
            picked.extend(suites.iter().filter(|s| !s.extended));
            continue;
        }
        match suites.iter().find(|s| &s.name == name) {
            Some(s) => picked.push(s),
            None => {
                let known: Vec<&str> = suites.iter().map(|s| s.name.as_str()).collect();
                return Err(format!("unknown suite '{name}' (known: {}, all)", known.join(", ")));
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    picked.retain(|s| seen.insert(s.name.clone()));
    Ok(picked)
}
