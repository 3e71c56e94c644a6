use serde::Serialize;
use tailcross::simulate::{
    default_latent, run_cte_experiment, run_pot_experiment, Budget, ExperimentRow,
    MarginalScenario, Method, PowerComponent, RunSpec,
};
use tailcross::EstimatorConfig;

use super::{estimator_config, positive, required, usage, Context};
use crate::args::SimulateArgs;
use crate::error::{CliError, Result};
use crate::output::{emit, write_results};

pub const DEFAULT_K: usize = 100;
pub const DEFAULT_N: usize = 10_000;
pub const DEFAULT_P: usize = 10;
pub const DEFAULT_REPEATS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ScenarioKind {
    Baseline,
    Shifted,
    FiniteMixture,
    UniformRateExponential,
    LogCorrectedPareto,
}

impl std::str::FromStr for ScenarioKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "baseline" => ScenarioKind::Baseline,
            "shifted" => ScenarioKind::Shifted,
            "finite-mixture" => ScenarioKind::FiniteMixture,
            "uniform-rate-exponential" => ScenarioKind::UniformRateExponential,
            "log-corrected-pareto" => ScenarioKind::LogCorrectedPareto,
            other => return Err(CliError::usage(format!("unknown scenario '{other}'"))),
        })
    }
}

#[derive(Debug, Serialize)]
struct Resolved {
    scenario: ScenarioKind,
    xi_max_grid: Vec<f64>,
    methods: Vec<Method>,
    m: usize,
    k: usize,
    n: usize,
    p: usize,
    repeats: usize,
    estimator: EstimatorConfig,
    weights: Vec<f64>,
    shapes: Vec<f64>,
}

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    let mut out: Vec<Method> = Vec::new();
    for part in s.split(',') {
        let m: Method = part.trim().parse().map_err(usage)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

fn resolve(args: &SimulateArgs) -> Result<Resolved> {
    let scenario: ScenarioKind = required(args.scenario.as_deref(), "scenario")?.parse()?;
    let field = matches!(scenario, ScenarioKind::Baseline | ScenarioKind::Shifted);
    let xi_max_grid = match (&args.xi_max_grid, args.xi_max) {
        (Some(_), Some(_)) => return Err(CliError::usage("give either --xi-max or --xi-max-grid")),
        (Some(g), None) => g.0.clone(),
        (None, Some(x)) => vec![x],
        (None, None) if field => {
            return Err(CliError::usage(
                "missing required flag --xi-max or --xi-max-grid",
            ))
        }
        (None, None) => Vec::new(),
    };
    if !field && !xi_max_grid.is_empty() {
        return Err(CliError::usage(
            "--xi-max applies only to the baseline and shifted scenarios",
        ));
    }
    let (weights, shapes) = match scenario {
        ScenarioKind::FiniteMixture => {
            let w = required(args.weights.clone(), "weights")?.0;
            let s = required(args.shapes.clone(), "shapes")?.0;
            if w.len() != s.len() {
                return Err(CliError::usage(
                    "--weights and --shapes must have the same length",
                ));
            }
            (w, s)
        }
        _ if args.weights.is_some() || args.shapes.is_some() => {
            return Err(CliError::usage(
                "--weights and --shapes apply only to finite-mixture",
            ))
        }
        _ => (Vec::new(), Vec::new()),
    };
    let k = if scenario == ScenarioKind::FiniteMixture {
        if args.k.is_some() {
            return Err(CliError::usage(
                "finite-mixture uses its components as conditionals; drop --K",
            ));
        }
        weights.len()
    } else {
        positive(args.k.unwrap_or(DEFAULT_K), "K")?
    };
    let n = positive(args.n.unwrap_or(DEFAULT_N), "N")?;
    Ok(Resolved {
        scenario,
        xi_max_grid,
        methods: parse_methods(args.method.as_deref().unwrap_or("pot"))?,
        m: positive(args.m.unwrap_or(k * n), "M")?,
        k,
        n,
        p: positive(args.p.unwrap_or(DEFAULT_P), "p")?,
        repeats: args.repeats.unwrap_or(DEFAULT_REPEATS),
        estimator: estimator_config(args.estimator.as_deref(), args.k_frac)?,
        weights,
        shapes,
    })
}

fn scenarios(r: &Resolved, seed: u64) -> Result<Vec<MarginalScenario>> {
    Ok(match r.scenario {
        ScenarioKind::Baseline | ScenarioKind::Shifted => {
            let latent = default_latent(seed)?;
            r.xi_max_grid
                .iter()
                .map(|&x| {
                    if r.scenario == ScenarioKind::Baseline {
                        MarginalScenario::baseline(x, latent.clone())
                    } else {
                        MarginalScenario::shifted(x, latent.clone())
                    }
                })
                .collect()
        }
        ScenarioKind::FiniteMixture => {
            let comps = r
                .weights
                .iter()
                .zip(&r.shapes)
                .map(|(&weight, &shape)| PowerComponent { weight, shape })
                .collect();
            vec![MarginalScenario::finite_mixture(comps)?]
        }
        ScenarioKind::UniformRateExponential => vec![MarginalScenario::UniformRateExponential],
        ScenarioKind::LogCorrectedPareto => vec![MarginalScenario::LogCorrectedPareto],
    })
}

pub fn run(args: &SimulateArgs, ctx: &Context) -> Result<Vec<ExperimentRow>> {
    let out = required(args.common.out.clone(), "out")?;
    let r = resolve(args)?;
    let mut rows = Vec::new();
    for scenario in scenarios(&r, ctx.seed)? {
        for method in &r.methods {
            let spec = |budget, p| RunSpec {
                budget,
                p,
                repeats: r.repeats,
                estimator: r.estimator,
                seed: ctx.seed,
            };
            rows.extend(match method {
                Method::Pot => {
                    run_pot_experiment(&scenario, &spec(Budget::Pooled { m: r.m }, r.p))?
                }
                Method::Cte => run_cte_experiment(
                    &scenario,
                    &spec(Budget::Conditional { k: r.k, n: r.n }, r.p),
                )?,
                Method::Ncte => {
                    run_cte_experiment(&scenario, &spec(Budget::Conditional { k: r.k, n: r.n }, 1))?
                }
            });
        }
    }
    emit(Some(&out), |w| write_results(w, &rows))?;
    ctx.manifest("simulate", &out, &r, &[])?;
    Ok(rows)
}
