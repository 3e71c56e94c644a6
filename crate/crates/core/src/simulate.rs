//! Synthetic marginals `F(x) = ∫ f(z) F_z(x) dz` and the pooled-vs-cross-tail
//! experiments run on them.
//!
//! The field scenarios draw a latent `z` from a Gaussian mixture, map it to a
//! conditional shape `xi_z`, and sample a GPD (`xi_z <= 0`, scale 1) or a
//! pure power tail (`xi_z > 0`). The shifted variant translates every
//! power-tail draw by `xi_z^-4`, so light conditionals sit far from the
//! origin.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cte::{cte, ConditionalSamples, CteResult, CteVerdict};
use crate::distributions::{
    exponential_draw, AnalyticMarginal, GaussianMixture, GpdParams, ParetoTail,
};
use crate::error::{Result, TailError};
use crate::estimators::{split_average, EstimatorConfig, EstimatorKind, MIN_SAMPLES};
use crate::rng::{Purpose, RngStream};

/// Constants of the conditional-shape field `xi_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiFieldParams {
    pub n: f64,
    pub m: f64,
    pub k: f64,
    pub b: f64,
    pub a: f64,
    pub xi_max: f64,
}

impl XiFieldParams {
    pub fn new(xi_max: f64) -> Self {
        let b = 5.76;
        Self {
            n: 1.0,
            m: 2.0,
            k: 2.0,
            b,
            a: -3.0 * b - 3.80,
            xi_max,
        }
    }

    pub fn d(&self) -> f64 {
        1.0 / (7.0 / 8.0 * self.xi_max + 29.0 / 8.0)
    }

    pub fn c(&self) -> f64 {
        self.d() * self.xi_max + 3.0
    }
}

/// `xi_z = (((n z + 2 m^2 + k z^3) e^-|z| + a) / b + c) / d`.
pub fn xi_z(z: f64, field: &XiFieldParams) -> f64 {
    let poly = field.n * z + 2.0 * field.m * field.m + field.k * z * z * z;
    ((poly * (-z.abs()).exp() + field.a) / field.b + field.c()) / field.d()
}

pub const FIELD_GRID_LO: f64 = -10.0;
pub const FIELD_GRID_HI: f64 = 10.0;
pub const FIELD_GRID_STEP: f64 = 1e-3;

/// Number of Gaussian components in the default latent mixture.
pub const LATENT_COMPONENTS: usize = 30;

/// The latent mixture used by the field scenarios, drawn from its own stream
/// so it depends on the seed alone.
pub fn default_latent(seed: u64) -> Result<GaussianMixture> {
    GaussianMixture::random_latent(
        &RngStream::new(seed, Purpose::LatentMixture, 0, 0),
        LATENT_COMPONENTS,
    )
}

/// Maximum of `xi_z` over `lo, lo + step, ..., hi`.
pub fn xi_field_max(field: &XiFieldParams, lo: f64, hi: f64, step: f64) -> Result<f64> {
    if !(lo < hi) || !(step > 0.0) {
        return Err(TailError::Domain(format!(
            "bad grid [{lo}, {hi}] step {step}"
        )));
    }
    let count = ((hi - lo) / step).round() as usize;
    Ok((0..=count)
        .map(|i| xi_z((lo + i as f64 * step).min(hi), field))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerComponent {
    pub weight: f64,
    pub shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MarginalScenario {
    Baseline {
        field: XiFieldParams,
        latent: GaussianMixture,
    },
    Shifted {
        field: XiFieldParams,
        latent: GaussianMixture,
    },
    /// Finite mixture of power tails; its conditionals are the components.
    FiniteMixture {
        components: Vec<PowerComponent>,
    },
    UniformRateExponential,
    LogCorrectedPareto,
}

/// One conditional distribution of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Conditional {
    Gpd { shape: f64 },
    Pareto { shape: f64, shift: f64 },
    Exponential { rate: f64 },
}

impl Conditional {
    /// Tail shape of this conditional.
    pub fn shape(&self) -> f64 {
        match *self {
            Conditional::Gpd { shape } | Conditional::Pareto { shape, .. } => shape,
            Conditional::Exponential { .. } => 0.0,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Conditional::Gpd { shape } => GpdParams { shape, scale: 1.0 }.draw(rng),
            Conditional::Pareto { shape, shift } => ParetoTail { shape }.draw(rng) + shift,
            Conditional::Exponential { rate } => exponential_draw(rate, rng),
        }
    }

    pub fn sample(&self, rng: &RngStream, n: usize) -> Vec<f64> {
        let mut r = rng.rng();
        (0..n).map(|_| self.draw(&mut r)).collect()
    }
}

fn field_conditional(field: &XiFieldParams, z: f64, shifted: bool) -> Conditional {
    let shape = xi_z(z, field);
    if shape <= 0.0 {
        Conditional::Gpd { shape }
    } else {
        let shift = if shifted { shape.powi(-4) } else { 0.0 };
        Conditional::Pareto { shape, shift }
    }
}

/// Draw counts by conditional family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCounts {
    pub gpd: usize,
    pub pareto: usize,
    pub other: usize,
}

impl MarginalScenario {
    pub fn baseline(xi_max: f64, latent: GaussianMixture) -> Self {
        MarginalScenario::Baseline {
            field: XiFieldParams::new(xi_max),
            latent,
        }
    }

    pub fn shifted(xi_max: f64, latent: GaussianMixture) -> Self {
        MarginalScenario::Shifted {
            field: XiFieldParams::new(xi_max),
            latent,
        }
    }

    pub fn finite_mixture(components: Vec<PowerComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(TailError::InvalidConfig(
                "finite mixture needs a component".into(),
            ));
        }
        for c in &components {
            if !(c.weight > 0.0) || !(c.shape > 0.0) {
                return Err(TailError::InvalidConfig(format!("bad component {c:?}")));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(TailError::InvalidConfig(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(MarginalScenario::FiniteMixture { components })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MarginalScenario::Baseline { .. } => "baseline",
            MarginalScenario::Shifted { .. } => "shifted",
            MarginalScenario::FiniteMixture { .. } => "finite-mixture",
            MarginalScenario::UniformRateExponential => "uniform-rate-exponential",
            MarginalScenario::LogCorrectedPareto => "log-corrected-pareto",
        }
    }

    pub fn xi_max(&self) -> Option<f64> {
        match self {
            MarginalScenario::Baseline { field, .. } | MarginalScenario::Shifted { field, .. } => {
                Some(field.xi_max)
            }
            _ => None,
        }
    }

    /// Tail shape the experiments are scored against: the numeric maximum
    /// of the field, the heaviest component, or the analytic marginal shape.
    pub fn ground_truth(&self) -> f64 {
        match self {
            MarginalScenario::Baseline { field, .. } | MarginalScenario::Shifted { field, .. } => {
                xi_field_max(field, FIELD_GRID_LO, FIELD_GRID_HI, FIELD_GRID_STEP)
                    .expect("default grid is valid")
            }
            MarginalScenario::FiniteMixture { components } => components
                .iter()
                .map(|c| c.shape)
                .fold(f64::NEG_INFINITY, f64::max),
            // marginal survival decays like 1/x in both cases
            MarginalScenario::UniformRateExponential | MarginalScenario::LogCorrectedPareto => 1.0,
        }
    }

    /// Key folded into every substream so results do not depend on where a
    /// cell sits in a grid.
    fn cell_key(&self) -> u64 {
        self.xi_max().map_or(0, f64::to_bits)
    }

    fn draw_conditional<R: Rng + ?Sized>(&self, rng: &mut R) -> Conditional {
        match self {
            MarginalScenario::Baseline { field, latent } => {
                field_conditional(field, latent.draw(rng), false)
            }
            MarginalScenario::Shifted { field, latent } => {
                field_conditional(field, latent.draw(rng), true)
            }
            MarginalScenario::FiniteMixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = components[components.len() - 1];
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        chosen = *c;
                        break;
                    }
                }
                Conditional::Pareto {
                    shape: chosen.shape,
                    shift: 0.0,
                }
            }
            MarginalScenario::UniformRateExponential => Conditional::Exponential {
                rate: 1.0 - rng.random::<f64>(),
            },
            // z - 1 ~ Exp(1), conditional survival x^-z
            MarginalScenario::LogCorrectedPareto => Conditional::Pareto {
                shape: 1.0 / (1.0 + exponential_draw(1.0, rng)),
                shift: 0.0,
            },
        }
    }

    /// The conditionals used by cross-tail experiments: the components for a
    /// finite mixture, otherwise `k` latent draws.
    pub fn conditionals(&self, k: usize, rng: &RngStream) -> Vec<Conditional> {
        match self {
            MarginalScenario::FiniteMixture { components } => components
                .iter()
                .map(|c| Conditional::Pareto {
                    shape: c.shape,
                    shift: 0.0,
                })
                .collect(),
            _ => {
                let mut r = rng.rng();
                (0..k).map(|_| self.draw_conditional(&mut r)).collect()
            }
        }
    }
}

/// `count` draws from the marginal, tallied by conditional family.
pub fn sample_marginal_counted(
    scenario: &MarginalScenario,
    count: usize,
    rng: &RngStream,
) -> Result<(Vec<f64>, BranchCounts)> {
    let mut r = rng.rng();
    let mut counts = BranchCounts::default();
    let mut out = Vec::with_capacity(count);
    match scenario {
        MarginalScenario::UniformRateExponential => {
            out = AnalyticMarginal::UniformRateExponential.sample(rng, count)?;
            counts.other = count;
        }
        MarginalScenario::LogCorrectedPareto => {
            out = AnalyticMarginal::LogCorrectedPareto.sample(rng, count)?;
            counts.other = count;
        }
        _ => {
            for _ in 0..count {
                let c = scenario.draw_conditional(&mut r);
                match c {
                    Conditional::Gpd { .. } => counts.gpd += 1,
                    Conditional::Pareto { .. } => counts.pareto += 1,
                    Conditional::Exponential { .. } => counts.other += 1,
                }
                out.push(c.draw(&mut r));
            }
        }
    }
    Ok((out, counts))
}

pub fn sample_marginal(
    scenario: &MarginalScenario,
    count: usize,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    sample_marginal_counted(scenario, count, rng).map(|(xs, _)| xs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Budget {
    /// `m` draws from the marginal, estimated together.
    Pooled { m: usize },
    /// `k` conditionals with `n` draws each.
    Conditional { k: usize, n: usize },
}

impl Budget {
    pub fn total(&self) -> usize {
        match *self {
            Budget::Pooled { m } => m,
            Budget::Conditional { k, n } => k * n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub budget: Budget,
    pub p: usize,
    pub repeats: usize,
    pub estimator: EstimatorConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pot,
    Cte,
    Ncte,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Pot => "pot",
            Method::Cte => "cte",
            Method::Ncte => "ncte",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = TailError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pot" => Ok(Method::Pot),
            "cte" => Ok(Method::Cte),
            "ncte" => Ok(Method::Ncte),
            other => Err(TailError::InvalidConfig(format!(
                "unknown method '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Estimate(f64),
    NonPositive(f64),
    Failed(String),
}

impl Outcome {
    /// Plotted value: the estimate, or the carried maximum.
    pub fn value(&self) -> Option<f64> {
        match self {
            Outcome::Estimate(v) | Outcome::NonPositive(v) => Some(*v),
            Outcome::Failed(_) => None,
        }
    }
}

impl From<CteVerdict> for Outcome {
    fn from(v: CteVerdict) -> Self {
        match v {
            CteVerdict::Positive(x) => Outcome::Estimate(x),
            CteVerdict::NonPositive(x) => Outcome::NonPositive(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub scenario: String,
    pub param: Option<f64>,
    pub repeat: usize,
    pub method: Method,
    pub estimator: EstimatorKind,
    pub outcome: Outcome,
    pub ground_truth: Option<f64>,
    pub mse: Option<f64>,
    pub degenerate_count: usize,
}

fn check_group_size(per_set: usize, p: usize) -> Result<()> {
    if p == 0 {
        return Err(TailError::InvalidConfig(
            "split count must be at least 1".into(),
        ));
    }
    if per_set / p < MIN_SAMPLES {
        return Err(TailError::InsufficientSamples {
            needed: MIN_SAMPLES * p,
            got: per_set,
        });
    }
    Ok(())
}

/// Pooled estimation: each repeat draws `m` marginal samples and split-averages
/// them with `p` groups.
pub fn run_pot_experiment(
    scenario: &MarginalScenario,
    spec: &RunSpec,
) -> Result<Vec<ExperimentRow>> {
    let Budget::Pooled { m } = spec.budget else {
        return Err(TailError::InvalidConfig(
            "pooled experiment needs an M budget".into(),
        ));
    };
    spec.estimator.validate()?;
    check_group_size(m, spec.p)?;
    let truth = scenario.ground_truth();
    let root = RngStream::root(spec.seed);
    let key = scenario.cell_key();

    (0..spec.repeats)
        .into_par_iter()
        .map(|repeat| {
            let stream = root.derive(Purpose::Samples, repeat as u64, key);
            let xs = sample_marginal(scenario, m, &stream)?;
            let est = split_average(
                &xs,
                spec.p,
                &spec.estimator,
                &stream.derive(Purpose::Split, 0, 0),
            );
            let (outcome, degenerate) = match est {
                Ok(e) => (Outcome::Estimate(e.value), e.degenerate),
                Err(TailError::EstimationFailed { degenerate }) => {
                    (Outcome::Failed("estimation failed".into()), degenerate)
                }
                Err(e) => (Outcome::Failed(e.to_string()), 0),
            };
            Ok(ExperimentRow {
                scenario: scenario.name().to_string(),
                param: scenario.xi_max(),
                repeat,
                method: Method::Pot,
                estimator: spec.estimator.kind,
                outcome,
                ground_truth: Some(truth),
                mse: None,
                degenerate_count: degenerate,
            })
        })
        .collect()
}

/// One cross-tail repeat, with the true shapes of the sampled conditionals.
#[derive(Debug, Clone, PartialEq)]
pub struct CteRepeat {
    pub result: Result<CteResult>,
    pub conditional_shapes: Vec<f64>,
}

impl CteRepeat {
    /// Largest true shape among the sampled conditionals.
    pub fn sampled_max_shape(&self) -> f64 {
        self.conditional_shapes
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn run_cte_repeat(
    scenario: &MarginalScenario,
    spec: &RunSpec,
    repeat: usize,
) -> Result<CteRepeat> {
    let Budget::Conditional { k, n } = spec.budget else {
        return Err(TailError::InvalidConfig(
            "cross-tail experiment needs a K x N budget".into(),
        ));
    };
    if k == 0 {
        return Err(TailError::InvalidConfig("K must be at least 1".into()));
    }
    spec.estimator.validate()?;
    check_group_size(n, spec.p)?;
    let stream =
        RngStream::root(spec.seed).derive(Purpose::Conditional, repeat as u64, scenario.cell_key());
    let conds = scenario.conditionals(k, &stream.derive(Purpose::Latent, 0, 0));
    let samples: Vec<ConditionalSamples> = conds
        .par_iter()
        .enumerate()
        .map(|(j, c)| {
            ConditionalSamples::new(
                j as u64,
                c.sample(&stream.derive(Purpose::Samples, j as u64, 0), n),
            )
        })
        .collect();
    let result = cte(
        &samples,
        spec.p,
        &spec.estimator,
        &stream.derive(Purpose::Split, 0, 0),
    );
    Ok(CteRepeat {
        result,
        conditional_shapes: conds.iter().map(Conditional::shape).collect(),
    })
}

/// Cross-tail estimation: each repeat draws `k` conditionals (the components
/// for a finite mixture), `n` samples from each, and takes the maximum of the
/// split-averaged estimates.
pub fn run_cte_experiment(
    scenario: &MarginalScenario,
    spec: &RunSpec,
) -> Result<Vec<ExperimentRow>> {
    let truth = scenario.ground_truth();
    let method = if spec.p == 1 {
        Method::Ncte
    } else {
        Method::Cte
    };
    (0..spec.repeats)
        .into_par_iter()
        .map(|repeat| {
            let rep = run_cte_repeat(scenario, spec, repeat)?;
            let (outcome, degenerate) = match rep.result {
                Ok(r) => {
                    let d = r.degenerate_splits();
                    (Outcome::from(r.verdict), d)
                }
                Err(TailError::EstimationFailed { degenerate }) => {
                    (Outcome::Failed("estimation failed".into()), degenerate)
                }
                Err(e) => return Err(e),
            };
            Ok(ExperimentRow {
                scenario: scenario.name().to_string(),
                param: scenario.xi_max(),
                repeat,
                method,
                estimator: spec.estimator.kind,
                outcome,
                ground_truth: Some(truth),
                mse: None,
                degenerate_count: degenerate,
            })
        })
        .collect()
}
