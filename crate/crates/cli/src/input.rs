use std::path::Path;

use tailcross::ConditionalSamples;

use crate::error::{CliError, Result};

/// Samples grouped by the first column, groups in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSamples {
    pub labels: Vec<String>,
    pub groups: Vec<ConditionalSamples>,
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_real(path: &Path, line: u64, field: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("'{field}' is not a real number"),
    })?;
    if !v.is_finite() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("'{field}' is not finite"),
        });
    }
    Ok(v)
}

/// Reads a one-column file (a single group) or a two-column file of
/// `group-id,value` rows. Blank lines are skipped.
pub fn read_samples(path: &Path) -> Result<GroupedSamples> {
    let mut labels: Vec<String> = Vec::new();
    let mut groups: Vec<ConditionalSamples> = Vec::new();
    let mut width = None;
    for record in reader(path)?.records() {
        let record = record.map_err(|e| parse_error(path, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!(
                    "expected {} columns, found {}",
                    width.unwrap_or(0),
                    record.len()
                ),
            });
        }
        let (label, value) = match record.len() {
            1 => ("", &record[0]),
            2 => (&record[0], &record[1]),
            n => {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected 1 or 2 columns, found {n}"),
                })
            }
        };
        let value = parse_real(path, line, value)?;
        let idx = match labels.iter().position(|l| l == label) {
            Some(i) => i,
            None => {
                labels.push(label.to_string());
                groups.push(ConditionalSamples::new(groups.len() as u64, Vec::new()));
                groups.len() - 1
            }
        };
        groups[idx].samples.push(value);
    }
    if groups.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no samples".into(),
        });
    }
    Ok(GroupedSamples { labels, groups })
}

/// Reads a univariate series: one real per line.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let grouped = read_samples(path)?;
    if grouped.labels.len() != 1 || !grouped.labels[0].is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "a series file has exactly one column".into(),
        });
    }
    Ok(grouped
        .groups
        .into_iter()
        .next()
        .map(|g| g.samples)
        .unwrap_or_default())
}

fn parse_error(path: &Path, e: &csv::Error) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn one_and_two_columns() {
        let one = read_samples(file("1.5\n2\n\n3e2\n").path()).unwrap();
        assert_eq!(one.groups.len(), 1);
        assert_eq!(one.groups[0].samples, vec![1.5, 2.0, 300.0]);
        let two = read_samples(file("b,1\na,2\nb,3\n").path()).unwrap();
        assert_eq!(two.labels, vec!["b", "a"]);
        assert_eq!(two.groups[0].samples, vec![1.0, 3.0]);
        assert_eq!(two.groups[1].id, 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = read_samples(file("1\n2\nx\n").path()).unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 3, .. }), "{err}");
        let err = read_samples(file("1\n2,3\n").path()).unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 2, .. }), "{err}");
        let err = read_samples(file("").path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(read_series(file("a,1\n").path()).is_err());
    }
}
