use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "tailcross",
    version,
    about = "Tail shape estimation and cross-tail experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the tail shape of samples read from a CSV file.
    Estimate(EstimateArgs),
    /// Run pooled and cross-tail estimation on a simulated marginal.
    Simulate(SimulateArgs),
    /// Sweep a regression model and estimate the tails of its predictions.
    Experiment(ExperimentArgs),
    /// Render a results table as SVG.
    Plot(PlotArgs),
}

/// Flags shared by every command. `--config` names a JSON object whose keys
/// are flag names; flags given on the command line win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Common {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// One column of values, or two columns (group id, value).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// pot, cte or ncte.
    #[arg(long)]
    pub method: Option<String>,
    /// pickands or dedh.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Fraction of each group used as the top block.
    #[arg(long = "k-frac")]
    pub k_frac: Option<f64>,
    /// Number of random splits per group.
    #[arg(long)]
    pub p: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// baseline, shifted, finite-mixture, uniform-rate-exponential or log-corrected-pareto.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long = "xi-max", allow_negative_numbers = true)]
    pub xi_max: Option<f64>,
    /// Comma-separated xi_max values.
    #[arg(long = "xi-max-grid", allow_hyphen_values = true)]
    pub xi_max_grid: Option<FloatList>,
    /// Pooled sample budget; defaults to K x N.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// Conditionals per cross-tail repeat.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Samples per conditional.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub estimator: Option<String>,
    /// Comma-separated list of pot, cte, ncte.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long = "k-frac")]
    pub k_frac: Option<f64>,
    /// Finite-mixture component weights.
    #[arg(long)]
    pub weights: Option<FloatList>,
    /// Finite-mixture component shapes.
    #[arg(long)]
    pub shapes: Option<FloatList>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// gp or poly.
    #[arg(long)]
    pub model: Option<String>,
    /// Single-column series; a synthetic series is used when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Synthetic series kind: ar1 or sine-plus-noise.
    #[arg(long)]
    pub series: Option<String>,
    /// Synthetic series length.
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long = "length-scales")]
    pub length_scales: Option<FloatList>,
    /// Comma list or inclusive range such as 1..9.
    #[arg(long)]
    pub degrees: Option<DegreeList>,
    #[arg(long = "train-size")]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub splits: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long = "k-frac")]
    pub k_frac: Option<f64>,
    /// Also write per-draw thresholds and estimates to this CSV.
    #[arg(long = "per-conditional")]
    pub per_conditional: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PlotArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Results CSV (per-conditional CSV for threshold-scatter).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// grid-lines, mse-overlay or threshold-scatter.
    #[arg(long)]
    pub kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(FloatList)
    }
}

impl fmt::Display for FloatList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(f64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DegreeList(pub Vec<u32>);

impl FromStr for DegreeList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("'{t}': {e}"));
        if let Some((lo, hi)) = s.split_once("..") {
            let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
            if lo > hi {
                return Err(format!("empty range {s}"));
            }
            return Ok(DegreeList((lo..=hi).collect()));
        }
        s.split(',')
            .map(num)
            .collect::<Result<Vec<_>, _>>()
            .map(DegreeList)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_parse() {
        assert_eq!(
            "-4,-2,0.5".parse::<FloatList>().unwrap().0,
            vec![-4.0, -2.0, 0.5]
        );
        assert_eq!("1..4".parse::<DegreeList>().unwrap().0, vec![1, 2, 3, 4]);
        assert_eq!("2,5".parse::<DegreeList>().unwrap().0, vec![2, 5]);
        assert!("5..1".parse::<DegreeList>().is_err());
        assert!("a,1".parse::<FloatList>().is_err());
    }
}
