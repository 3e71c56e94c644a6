use std::path::PathBuf;

use serde::Serialize;
use tailcross::models::{
    harness_repeats, synthetic_series, window, GpConfig, HarnessConfig, ModelSpec, PolyConfig,
    SeriesKind, TimeSeriesDataset,
};
use tailcross::simulate::{ExperimentRow, Method, Outcome};
use tailcross::{Purpose, RngStream, TailError};

use super::{estimator_config, positive, required, usage, Context};
use crate::args::ExperimentArgs;
use crate::error::{CliError, Result};
use crate::input::read_series;
use crate::output::{emit, write_per_conditional, write_results, PerConditionalRow};

pub const DEFAULT_LENGTH_SCALES: [f64; 5] = [0.05, 0.2, 1.0, 3.0, 10.0];
/// 2002 values give 2000 windows of width 2.
pub const DEFAULT_SERIES_LENGTH: usize = 2002;
pub const WINDOW: usize = 2;

#[derive(Debug, Serialize)]
struct Resolved {
    data: Option<PathBuf>,
    series: Option<SeriesKind>,
    length: usize,
    models: Vec<ModelSpec>,
    harness: HarnessConfig,
}

fn series_kind(name: &str) -> Result<SeriesKind> {
    match name {
        "ar1" => Ok(SeriesKind::ar1()),
        "sine-plus-noise" => Ok(SeriesKind::sine_plus_noise()),
        other => Err(CliError::usage(format!("unknown series '{other}'"))),
    }
}

fn resolve(args: &ExperimentArgs) -> Result<Resolved> {
    let models = match args.model.as_deref().unwrap_or("gp") {
        "gp" => {
            if args.degrees.is_some() {
                return Err(CliError::usage("--degrees applies to --model poly"));
            }
            let scales = args
                .length_scales
                .as_ref()
                .map_or(DEFAULT_LENGTH_SCALES.to_vec(), |l| l.0.clone());
            scales
                .into_iter()
                .map(|l| ModelSpec::Gp(GpConfig::new(l)))
                .collect()
        }
        "poly" => {
            if args.length_scales.is_some() {
                return Err(CliError::usage("--length-scales applies to --model gp"));
            }
            let degrees = args
                .degrees
                .as_ref()
                .map_or((1..=9).collect(), |d| d.0.clone());
            degrees
                .into_iter()
                .map(|d| ModelSpec::Krr(PolyConfig::new(d)))
                .collect()
        }
        other => return Err(CliError::usage(format!("unknown model '{other}'"))),
    };
    let series = match (&args.data, args.series.as_deref()) {
        (Some(_), Some(_)) => return Err(CliError::usage("give either --data or --series")),
        (Some(_), None) => None,
        (None, name) => Some(series_kind(name.unwrap_or("sine-plus-noise"))?),
    };
    let defaults = HarnessConfig::default();
    Ok(Resolved {
        data: args.data.clone(),
        series,
        length: args.length.unwrap_or(DEFAULT_SERIES_LENGTH),
        models,
        harness: HarnessConfig {
            train_size: positive(args.train_size.unwrap_or(defaults.train_size), "train-size")?,
            draws: positive(args.draws.unwrap_or(defaults.draws), "draws")?,
            splits: positive(args.splits.unwrap_or(defaults.splits), "splits")?,
            estimator: estimator_config(args.estimator.as_deref(), args.k_frac)?,
            repeats: args.repeats.unwrap_or(defaults.repeats),
        },
    })
}

fn failed(e: &TailError) -> (Outcome, usize) {
    match e {
        TailError::EstimationFailed { degenerate } => (Outcome::Failed(e.to_string()), *degenerate),
        _ => (Outcome::Failed(e.to_string()), 0),
    }
}

pub fn run(args: &ExperimentArgs, ctx: &Context) -> Result<Vec<ExperimentRow>> {
    let out = required(args.common.out.clone(), "out")?;
    let r = resolve(args)?;
    let dataset = match (&r.data, r.series) {
        (Some(path), _) => TimeSeriesDataset {
            name: path
                .file_stem()
                .map_or_else(|| "series".into(), |s| s.to_string_lossy().into_owned()),
            values: read_series(path)?,
        },
        (None, Some(kind)) => synthetic_series(
            kind,
            r.length,
            &RngStream::new(ctx.seed, Purpose::Series, 0, 0),
        )?,
        (None, None) => return Err(CliError::usage("no data source")),
    };
    let data = window(&dataset, WINDOW).map_err(usage)?;
    r.harness.validate(&data).map_err(usage)?;

    let mut rows = Vec::new();
    let mut per_conditional = Vec::new();
    for model in &r.models {
        let param = model.param();
        for (repeat, res) in harness_repeats(&data, model, &r.harness, ctx.seed)
            .into_iter()
            .enumerate()
        {
            let row = |method, outcome, degenerate_count, mse| ExperimentRow {
                scenario: dataset.name.clone(),
                param: Some(param),
                repeat,
                method,
                estimator: r.harness.estimator.kind,
                outcome,
                ground_truth: None,
                mse,
                degenerate_count,
            };
            match res {
                Ok(h) => {
                    rows.push(row(
                        Method::Cte,
                        Outcome::from(h.cte.verdict),
                        h.cte.degenerate_splits(),
                        Some(h.mse),
                    ));
                    let (pot, pot_degenerate) = match &h.pooled {
                        Ok(e) => (Outcome::Estimate(e.value), e.degenerate),
                        Err(e) => failed(e),
                    };
                    rows.push(row(Method::Pot, pot, pot_degenerate, Some(h.mse)));
                    for (c, threshold) in h.cte.per_conditional.iter().zip(&h.thresholds) {
                        per_conditional.push(PerConditionalRow {
                            param,
                            repeat,
                            draw: c.id as usize,
                            threshold: *threshold,
                            estimate: c.estimate,
                            degenerate_count: c.degenerate_splits,
                        });
                    }
                }
                Err(e @ (TailError::InvalidConfig(_) | TailError::Domain(_))) => {
                    return Err(usage(e))
                }
                Err(e) => {
                    let (outcome, degenerate) = failed(&e);
                    rows.push(row(Method::Cte, outcome.clone(), degenerate, None));
                    rows.push(row(Method::Pot, outcome, 0, None));
                }
            }
        }
    }
    emit(Some(&out), |w| write_results(w, &rows))?;
    let mut extra = Vec::new();
    if let Some(path) = &args.per_conditional {
        emit(Some(path), |w| write_per_conditional(w, &per_conditional))?;
        extra.push(path.as_path());
    }
    ctx.manifest("experiment", &out, &r, &extra)?;
    Ok(rows)
}
