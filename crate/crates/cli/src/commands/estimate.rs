use std::path::PathBuf;

use serde::Serialize;
use tailcross::simulate::{ExperimentRow, Method, Outcome};
use tailcross::{cte, pooled_pot, EstimatorConfig, RngStream};

use super::{estimator_config, positive, required, usage, Context};
use crate::args::EstimateArgs;
use crate::error::Result;
use crate::input::read_samples;
use crate::output::{emit, write_results};

#[derive(Debug, Serialize)]
struct Resolved {
    data: PathBuf,
    method: Method,
    estimator: EstimatorConfig,
    p: usize,
}

pub fn run(args: &EstimateArgs, ctx: &Context) -> Result<Vec<ExperimentRow>> {
    let data = required(args.data.clone(), "data")?;
    let method: Method = args
        .method
        .as_deref()
        .unwrap_or("pot")
        .parse()
        .map_err(usage)?;
    let p = positive(args.p.unwrap_or(1), "p")?;
    let estimator = estimator_config(args.estimator.as_deref(), args.k_frac)?;
    let resolved = Resolved {
        data: data.clone(),
        method,
        estimator,
        p,
    };

    let input = read_samples(&data)?;
    let rng = RngStream::root(ctx.seed);
    let scenario = data.file_stem().map_or_else(
        || "samples".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    let (method, outcome, degenerate) = match method {
        Method::Pot => {
            let est = pooled_pot(&input.groups, &estimator.with_splits(p), &rng)?;
            (Method::Pot, Outcome::Estimate(est.value), est.degenerate)
        }
        Method::Cte | Method::Ncte => {
            let splits = if method == Method::Ncte { 1 } else { p };
            let res = cte(&input.groups, splits, &estimator, &rng)?;
            let label = if splits == 1 {
                Method::Ncte
            } else {
                Method::Cte
            };
            (label, Outcome::from(res.verdict), res.degenerate_splits())
        }
    };
    let rows = vec![ExperimentRow {
        scenario,
        param: None,
        repeat: 0,
        method,
        estimator: estimator.kind,
        outcome,
        ground_truth: None,
        mse: None,
        degenerate_count: degenerate,
    }];
    emit(args.common.out.as_deref(), |w| write_results(w, &rows))?;
    if let Some(out) = &args.common.out {
        ctx.manifest("estimate", out, &resolved, &[])?;
    }
    Ok(rows)
}
