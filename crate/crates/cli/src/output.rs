//! CSV and JSON writers; every file starts with the tool version and the
//! command line configuration.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::experiment::{SolveRow, SpectrumRow};
use crate::golden::Check;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rows with a fixed column layout.
pub trait Tabular {
    fn header() -> Vec<&'static str>;
    fn record(&self) -> Vec<String>;
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

const CONFIG_COLUMNS: [&str; 16] = [
    "dim",
    "n",
    "m",
    "kind",
    "backend",
    "eps",
    "overlap_width",
    "tol",
    "max_iters",
    "seed",
    "rhs",
    "layout",
    "dense_limit",
    "spectrum_dense_limit",
    "lanczos_tol",
    "lanczos_max_iters",
];

fn config_record(c: &ExperimentConfig) -> Vec<String> {
    let backend = match c.backend {
        crate::config::BackendChoice::Exact => "exact",
        crate::config::BackendChoice::Rskel => "rskel",
    };
    vec![
        c.dim.to_string(),
        c.n.to_string(),
        c.m.to_string(),
        c.kind.to_string(),
        backend.to_string(),
        c.eps.to_string(),
        c.overlap_width.to_string(),
        c.tol.to_string(),
        c.max_iters.to_string(),
        c.seed.to_string(),
        c.rhs.clone(),
        c.layout.to_string(),
        c.dense_limit.to_string(),
        c.spectrum_dense_limit.to_string(),
        c.lanczos_tol.to_string(),
        c.lanczos_max_iters.to_string(),
    ]
}

impl Tabular for SpectrumRow {
    fn header() -> Vec<&'static str> {
        let mut h = vec!["N", "D", "M", "kind", "overlap_width", "lambda_max", "lambda_min", "multiplicity_at_max", "method", "error"];
        h.extend(CONFIG_COLUMNS.iter().filter(|c| !matches!(**c, "kind" | "overlap_width")));
        h
    }

    fn record(&self) -> Vec<String> {
        let method = self.method.map(|m| match m {
            iedd_core::spectrum::SpectrumMethod::Dense => "dense",
            iedd_core::spectrum::SpectrumMethod::Lanczos => "lanczos",
        });
        let mut r = vec![
            self.n_total.to_string(),
            self.subdomains.to_string(),
            self.partitions.to_string(),
            self.config.kind.to_string(),
            self.config.overlap_width.to_string(),
            opt(&self.lambda_max),
            opt(&self.lambda_min),
            opt(&self.multiplicity_at_max),
            opt(&method),
            opt(&self.error),
        ];
        r.extend(
            config_record(&self.config)
                .into_iter()
                .zip(CONFIG_COLUMNS)
                .filter(|(_, c)| !matches!(*c, "kind" | "overlap_width"))
                .map(|(v, _)| v),
        );
        r
    }
}

impl Tabular for SolveRow {
    fn header() -> Vec<&'static str> {
        let mut h = vec![
            "N",
            "M",
            "D",
            "S",
            "t_f",
            "m_f",
            "t_s",
            "n_it",
            "t_pcg",
            "achieved_residual",
            "stagnated",
            "true_error",
            "error",
        ];
        h.extend(CONFIG_COLUMNS);
        h
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.n_total.to_string(),
            self.partitions.to_string(),
            self.subdomains.to_string(),
            opt(&self.skeleton),
            opt(&self.t_f),
            opt(&self.m_f),
            opt(&self.t_s),
            opt(&self.n_it),
            opt(&self.t_pcg),
            opt(&self.achieved_residual),
            opt(&self.stagnated),
            opt(&self.true_error),
            opt(&self.error),
        ];
        r.extend(config_record(&self.config));
        r
    }
}

impl Tabular for Check {
    fn header() -> Vec<&'static str> {
        vec!["suite", "case", "quantity", "expected", "actual", "tolerance", "pass", "error"]
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.suite.clone(),
            self.case.clone(),
            self.quantity.clone(),
            self.expected.to_string(),
            opt(&self.actual),
            self.tolerance.to_string(),
            self.pass.to_string(),
            opt(&self.error),
        ]
    }
}

#[derive(Serialize)]
struct JsonDocument<'a, T> {
    tool: &'static str,
    version: &'static str,
    config: &'a serde_json::Value,
    rows: &'a [T],
}

/// Writes `rows` with a header carrying the version and `echo`.
pub fn write_rows<T: Tabular + Serialize>(
    rows: &[T],
    format: Format,
    echo: &serde_json::Value,
    mut out: impl Write,
) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "# iedd {VERSION}")?;
            writeln!(out, "# config {echo}")?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(T::header())?;
            for row in rows {
                w.write_record(row.record())?;
            }
            w.flush()?;
        }
        Format::Json => {
            let doc = JsonDocument {
                tool: "iedd",
                version: VERSION,
                config: echo,
                rows,
            };
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// [`write_rows`] to a file, or to stdout when `path` is `None`.
pub fn emit<T: Tabular + Serialize>(
    rows: &[T],
    format: Format,
    echo: &serde_json::Value,
    path: Option<&Path>,
) -> std::io::Result<()> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p)?;
            let mut buf = std::io::BufWriter::new(file);
            write_rows(rows, format, echo, &mut buf)?;
            buf.flush()
        }
        None => write_rows(rows, format, echo, std::io::stdout().lock()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::run_spectrum;
    use iedd_core::precond::PreconditionerKind;

    #[test]
    fn header_matches_record_width() {
        let (row, _) = run_spectrum(&ExperimentConfig::new(2, 4, 2, PreconditionerKind::Jacobi));
        assert_eq!(SpectrumRow::header().len(), row.record().len());
        let mut buf = Vec::new();
        write_rows(&[row], Format::Csv, &serde_json::json!({"x": 1}), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# iedd {VERSION}"));
        assert_eq!(lines[1], "# config {\"x\":1}");
        assert!(lines[2].starts_with("N,D,M,kind,overlap_width,lambda_max"));
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn json_document() {
        let rows: Vec<SpectrumRow> = Vec::new();
        let mut buf = Vec::new();
        write_rows(&rows, Format::Json, &serde_json::json!({}), &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["version"], VERSION);
        assert_eq!(v["rows"].as_array().unwrap().len(), 0);
    }
}
