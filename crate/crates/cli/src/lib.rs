//! Experiment runner behind the `iedd` binary: parameter sweeps for spectra
//! and PCG solves, and checks against stored reference tables.

pub mod config;
pub mod experiment;
pub mod golden;
pub mod output;

use std::io::Write;

use rayon::prelude::*;

use config::{Cli, Command, ExperimentConfig, GoldenArgs, SweepArgs};
use experiment::{RowFailure, SolveRow, SpectrumRow};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const NUMERICAL: i32 = 2;
    pub const GOLDEN_MISMATCH: i32 = 3;
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map(|pool| pool.install(f))
        .map_err(|e| e.to_string())
}

fn failure_code(failures: &[Option<RowFailure>]) -> i32 {
    let failed: Vec<&RowFailure> = failures.iter().flatten().collect();
    if failed.is_empty() {
        exit::SUCCESS
    } else if failed.iter().any(|f| f.numerical) {
        exit::NUMERICAL
    } else {
        exit::CONFIG
    }
}

fn validate_all(configs: &[ExperimentConfig]) -> Result<(), String> {
    for (i, c) in configs.iter().enumerate() {
        c.validate().map_err(|e| format!("row {i} ({}D n={} m={} {}): {e}", c.dim, c.n, c.m, c.kind))?;
    }
    Ok(())
}

fn echo(command: &str, configs: &[ExperimentConfig]) -> serde_json::Value {
    serde_json::json!({ "command": command, "rows": configs })
}

fn spectrum(args: &SweepArgs) -> i32 {
    let configs = args.configs();
    if let Err(e) = validate_all(&configs) {
        eprintln!("error: {e}");
        return exit::CONFIG;
    }
    let results: Vec<(SpectrumRow, Option<RowFailure>)> =
        match in_pool(args.jobs, || configs.par_iter().map(experiment::run_spectrum).collect()) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                return exit::CONFIG;
            }
        };
    let (rows, failures): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    for (row, f) in rows.iter().zip(&failures) {
        if let Some(f) = f {
            eprintln!("row {}D n={} m={} {} failed: {}", row.config.dim, row.config.n, row.config.m, row.config.kind, f.message);
        }
    }
    let mut code = failure_code(&failures);
    if let (Some(which), Some(path), Some(first)) = (args.eigvec, &args.eigvec_out, configs.first()) {
        match experiment::spectrum_with_vector(first, Some(which)) {
            Ok((_, Some(v))) => {
                let grid = iedd_core::Grid::new(first.dim, first.n).expect("validated grid");
                let written = std::fs::File::create(path)
                    .map_err(|e| e.to_string())
                    .and_then(|file| iedd_core::spectrum::write_field_csv(&grid, &v, file).map_err(|e| e.to_string()));
                if let Err(e) = written {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    code = code.max(exit::CONFIG);
                }
            }
            Ok((_, None)) => {}
            Err(f) => {
                eprintln!("eigenvector failed: {}", f.message);
                code = code.max(if f.numerical { exit::NUMERICAL } else { exit::CONFIG });
            }
        }
    }
    if let Err(e) = output::emit(&rows, args.format, &echo("spectrum", &configs), args.out.as_deref()) {
        eprintln!("error: cannot write output: {e}");
        return exit::CONFIG;
    }
    code
}

fn solve(args: &SweepArgs) -> i32 {
    let configs = args.configs();
    if let Err(e) = validate_all(&configs) {
        eprintln!("error: {e}");
        return exit::CONFIG;
    }
    let results: Vec<(SolveRow, Option<RowFailure>)> =
        match in_pool(args.jobs, || configs.par_iter().map(experiment::run_solve).collect()) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                return exit::CONFIG;
            }
        };
    let (rows, failures): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    for (row, f) in rows.iter().zip(&failures) {
        if let Some(f) = f {
            eprintln!("row {}D n={} m={} {} failed: {}", row.config.dim, row.config.n, row.config.m, row.config.kind, f.message);
        }
    }
    if let Err(e) = output::emit(&rows, args.format, &echo("solve", &configs), args.out.as_deref()) {
        eprintln!("error: cannot write output: {e}");
        return exit::CONFIG;
    }
    failure_code(&failures)
}

fn golden(args: &GoldenArgs) -> i32 {
    let loaded = match &args.file {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| format!("cannot read {}: {e}", p.display()))
            .and_then(|text| golden::parse_suites(&text)),
        None => golden::load_suites(),
    };
    let suites = match loaded {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    if args.list {
        let mut out = std::io::stdout().lock();
        for s in &suites {
            let tag = if s.extended { " [extended]" } else { "" };
            let _ = writeln!(out, "{}{tag}: {}", s.name, s.description);
        }
        return exit::SUCCESS;
    }
    if args.suites.is_empty() {
        eprintln!("usage: iedd golden <SUITE>... (see --list; `all` runs every standard suite)");
        return exit::CONFIG;
    }
    let picked = match golden::select(&suites, &args.suites) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    let mut checks = Vec::new();
    for suite in picked {
        let outcome = golden::run_suite(suite);
        let verdict = if outcome.passed() { "pass" } else { "FAIL" };
        eprintln!("{}: {verdict} ({} checks)", suite.name, outcome.checks.len());
        checks.extend(outcome.checks);
    }
    let echo = serde_json::json!({ "command": "golden", "suites": args.suites });
    if let Err(e) = output::emit(&checks, args.format, &echo, args.out.as_deref()) {
        eprintln!("error: cannot write output: {e}");
        return exit::CONFIG;
    }
    if checks.iter().all(|c| c.pass) {
        exit::SUCCESS
    } else {
        exit::GOLDEN_MISMATCH
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match &cli.command {
        Command::Spectrum(args) => spectrum(args),
        Command::Solve(args) => solve(args),
        Command::Golden(args) => golden(args),
    }
}
