use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tailcross::simulate::{ExperimentRow, Method, Outcome};
use tailcross::EstimatorKind;

use crate::error::{CliError, Result};

pub const RESULT_HEADER: [&str; 10] = [
    "scenario",
    "param",
    "repeat",
    "method",
    "estimator",
    "estimate",
    "carried_max",
    "ground_truth",
    "mse",
    "degenerate_count",
];

pub const PER_CONDITIONAL_HEADER: [&str; 6] = [
    "param",
    "repeat",
    "draw",
    "threshold",
    "estimate",
    "degenerate_count",
];

pub const NON_POSITIVE: &str = "non-positive";
pub const FAILED: &str = "estimation-failed";

/// Decimal rendering rounded to 9 significant digits.
pub fn fmt_real(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    rounded.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_results<W: Write>(w: W, rows: &[ExperimentRow]) -> std::io::Result<()> {
    let mut out = writer(w);
    out.write_record(RESULT_HEADER)?;
    for r in rows {
        let (estimate, carried) = match &r.outcome {
            Outcome::Estimate(v) => (fmt_real(*v), String::new()),
            Outcome::NonPositive(v) => (NON_POSITIVE.to_string(), fmt_real(*v)),
            Outcome::Failed(_) => (FAILED.to_string(), String::new()),
        };
        out.write_record([
            r.scenario.clone(),
            opt(r.param),
            r.repeat.to_string(),
            r.method.name().to_string(),
            r.estimator.name().to_string(),
            estimate,
            carried,
            opt(r.ground_truth),
            opt(r.mse),
            r.degenerate_count.to_string(),
        ])?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerConditionalRow {
    pub param: f64,
    pub repeat: usize,
    pub draw: usize,
    pub threshold: f64,
    pub estimate: Option<f64>,
    pub degenerate_count: usize,
}

pub fn write_per_conditional<W: Write>(w: W, rows: &[PerConditionalRow]) -> std::io::Result<()> {
    let mut out = writer(w);
    out.write_record(PER_CONDITIONAL_HEADER)?;
    for r in rows {
        out.write_record([
            fmt_real(r.param),
            r.repeat.to_string(),
            r.draw.to_string(),
            fmt_real(r.threshold),
            opt(r.estimate),
            r.degenerate_count.to_string(),
        ])?;
    }
    out.flush()
}

fn schema_error(path: &Path, line: u64, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_table(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let found = rdr
        .headers()
        .map_err(|e| schema_error(path, 1, e.to_string()))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(schema_error(
            path,
            1,
            format!("schema mismatch: expected header {}", header.join(",")),
        ));
    }
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| {
                schema_error(path, e.position().map_or(0, |p| p.line()), e.to_string())
            })?;
            Ok((r.position().map_or(0, |p| p.line()), r))
        })
        .collect()
}

fn field_real(path: &Path, line: u64, name: &str, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| schema_error(path, line, format!("{name}: '{s}' is not a real number")))
}

fn field_count(path: &Path, line: u64, name: &str, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| schema_error(path, line, format!("{name}: '{s}' is not a count")))
}

pub fn read_results(path: &Path) -> Result<Vec<ExperimentRow>> {
    read_table(path, &RESULT_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let method: Method = r[3]
                .parse()
                .map_err(|e| schema_error(path, line, format!("{e}")))?;
            let estimator: EstimatorKind = r[4]
                .parse()
                .map_err(|e| schema_error(path, line, format!("{e}")))?;
            let outcome = match &r[5] {
                NON_POSITIVE => {
                    Outcome::NonPositive(field_real(path, line, "carried_max", &r[6])?.ok_or_else(
                        || schema_error(path, line, "non-positive row without carried_max"),
                    )?)
                }
                FAILED => Outcome::Failed(FAILED.into()),
                s => Outcome::Estimate(
                    field_real(path, line, "estimate", s)?
                        .ok_or_else(|| schema_error(path, line, "empty estimate"))?,
                ),
            };
            Ok(ExperimentRow {
                scenario: r[0].to_string(),
                param: field_real(path, line, "param", &r[1])?,
                repeat: field_count(path, line, "repeat", &r[2])?,
                method,
                estimator,
                outcome,
                ground_truth: field_real(path, line, "ground_truth", &r[7])?,
                mse: field_real(path, line, "mse", &r[8])?,
                degenerate_count: field_count(path, line, "degenerate_count", &r[9])?,
            })
        })
        .collect()
}

pub fn read_per_conditional(path: &Path) -> Result<Vec<PerConditionalRow>> {
    read_table(path, &PER_CONDITIONAL_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let req = |name: &str, s: &str| {
                field_real(path, line, name, s)?
                    .ok_or_else(|| schema_error(path, line, format!("{name} is empty")))
            };
            Ok(PerConditionalRow {
                param: req("param", &r[0])?,
                repeat: field_count(path, line, "repeat", &r[1])?,
                draw: field_count(path, line, "draw", &r[2])?,
                threshold: req("threshold", &r[3])?,
                estimate: field_real(path, line, "estimate", &r[4])?,
                degenerate_count: field_count(path, line, "degenerate_count", &r[5])?,
            })
        })
        .collect()
}

/// Writes to `path`, or stdout when no path is given.
pub fn emit(
    path: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    match path {
        Some(p) => {
            let mut buf = Vec::new();
            write(&mut buf).map_err(|e| CliError::io(p, e))?;
            std::fs::write(p, buf).map_err(|e| CliError::io(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, P: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub argv: Vec<String>,
    pub seed: u64,
    pub parallelism: usize,
    pub parameters: &'a P,
    pub outputs: Vec<PathBuf>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn write_manifest<P: Serialize>(out: &Path, manifest: &Manifest<'_, P>) -> Result<()> {
    let path = manifest_path(out);
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| CliError::usage(format!("manifest serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_real(0.1), "0.1");
        assert_eq!(fmt_real(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_real(-123456.789012), "-123456.789");
        assert_eq!(fmt_real(2.0), "2");
        assert_eq!(fmt_real(0.0), "0");
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![
            ExperimentRow {
                scenario: "baseline".into(),
                param: Some(-2.0),
                repeat: 0,
                method: Method::Cte,
                estimator: EstimatorKind::Pickands,
                outcome: Outcome::NonPositive(-0.25),
                ground_truth: Some(-0.633),
                mse: None,
                degenerate_count: 2,
            },
            ExperimentRow {
                scenario: "baseline".into(),
                param: Some(1.0),
                repeat: 1,
                method: Method::Pot,
                estimator: EstimatorKind::Dedh,
                outcome: Outcome::Estimate(0.5),
                ground_truth: None,
                mse: Some(0.125),
                degenerate_count: 0,
            },
        ];
        let file = tempfile::NamedTempFile::new().unwrap();
        write_results(std::fs::File::create(file.path()).unwrap(), &rows).unwrap();
        let text = std::fs::read_to_string(file.path()).unwrap();
        assert!(text.starts_with("scenario,param,repeat,method,estimator,estimate,carried_max,"));
        assert!(!text.contains('\r'));
        assert_eq!(read_results(file.path()).unwrap(), rows);
    }
}
