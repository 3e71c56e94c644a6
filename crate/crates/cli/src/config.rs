use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "TAILCROSS_SEED";
pub const DEFAULT_SEED: u64 = 1;

/// Fills flags left unset from a JSON config file. Unknown keys are rejected.
pub fn layer<T: Serialize + DeserializeOwned + Clone>(
    flags: &T,
    config: Option<&Path>,
) -> Result<T> {
    let Some(path) = config else {
        return Ok(flags.clone());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    let Value::Object(file) = file else {
        return Err(CliError::usage(format!(
            "{}: config must be a JSON object",
            path.display()
        )));
    };
    let Value::Object(mut merged) = serde_json::to_value(flags).map_err(internal)? else {
        return Err(CliError::usage("flags did not serialize to an object"));
    };
    merge(&mut merged, file, path)?;
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn merge(flags: &mut Map<String, Value>, file: Map<String, Value>, path: &Path) -> Result<()> {
    for (key, value) in file {
        match flags.get_mut(&key) {
            None => {
                return Err(CliError::usage(format!(
                    "{}: unknown config key '{key}'",
                    path.display()
                )));
            }
            Some(slot) if slot.is_null() => *slot = value,
            Some(_) => {}
        }
    }
    Ok(())
}

fn internal(e: serde_json::Error) -> CliError {
    CliError::usage(format!("internal configuration error: {e}"))
}

/// Seed precedence after layering: flag or config, then environment, then default.
pub fn resolve_seed(layered: Option<u64>) -> Result<u64> {
    if let Some(s) = layered {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|e| CliError::usage(format!("{SEED_ENV}='{v}': {e}"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::SimulateArgs;
    use std::io::Write;

    #[test]
    fn flags_override_config() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(
            file,
            r#"{{"seed": 5, "repeats": 3, "M": 1000, "xi-max-grid": [-1, 2]}}"#
        )
        .unwrap();
        let flags = SimulateArgs {
            repeats: Some(7),
            ..Default::default()
        };
        let got = layer(&flags, Some(file.path())).unwrap();
        assert_eq!(got.repeats, Some(7));
        assert_eq!(got.common.seed, Some(5));
        assert_eq!(got.m, Some(1000));
        assert_eq!(got.xi_max_grid.unwrap().0, vec![-1.0, 2.0]);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"repeatz": 5}}"#).unwrap();
        let err = layer(&SimulateArgs::default(), Some(file.path())).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
