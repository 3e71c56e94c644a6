use std::path::Path;

use serde::Serialize;
use tailcross::{EstimatorConfig, EstimatorKind, KRule};

use crate::error::{CliError, Result};
use crate::output::{write_manifest, Manifest};

pub mod estimate;
pub mod experiment;
pub mod plot;
pub mod simulate;

/// Resolved run-wide settings.
#[derive(Debug, Clone)]
pub struct Context {
    pub seed: u64,
    pub parallelism: usize,
    pub argv: Vec<String>,
}

impl Context {
    pub fn manifest<P: Serialize>(
        &self,
        command: &str,
        out: &Path,
        params: &P,
        extra: &[&Path],
    ) -> Result<()> {
        let mut outputs = vec![out.to_path_buf()];
        outputs.extend(extra.iter().map(|p| p.to_path_buf()));
        write_manifest(
            out,
            &Manifest {
                tool: "tailcross",
                version: env!("CARGO_PKG_VERSION"),
                command,
                argv: self.argv.clone(),
                seed: self.seed,
                parallelism: self.parallelism,
                parameters: params,
                outputs,
            },
        )
    }
}

pub fn estimator_config(name: Option<&str>, k_frac: Option<f64>) -> Result<EstimatorConfig> {
    let kind: EstimatorKind = name.unwrap_or("pickands").parse().map_err(usage)?;
    let mut cfg = EstimatorConfig::new(kind);
    if let Some(q) = k_frac {
        cfg = cfg.with_k_rule(KRule::Fraction(q));
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

pub fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::usage(e.to_string())
}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| CliError::usage(format!("missing required flag --{flag}")))
}

pub fn positive(value: usize, flag: &str) -> Result<usize> {
    if value == 0 {
        return Err(CliError::usage(format!("--{flag} must be positive")));
    }
    Ok(value)
}
