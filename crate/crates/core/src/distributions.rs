//! Distribution families used by the estimators and experiments, with
//! closed-form CDFs and quantiles and inverse-transform samplers.
//!
//! Samplers draw `u` uniformly on `[0, 1)` and only ever evaluate the
//! survival `1 - u`, which is never zero, so heavy tails stay finite.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};
use crate::rng::RngStream;

/// Shapes this close to zero use the exponential / Gumbel branch.
pub const SHAPE_ZERO_TOL: f64 = 1e-9;

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(TailError::domain(format!("probability {p} outside [0, 1)")));
    }
    Ok(())
}

/// Generalized Pareto distribution with location zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    pub shape: f64,
    pub scale: f64,
}

impl GpdParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !shape.is_finite() {
            return Err(TailError::domain(format!(
                "GPD shape {shape} is not finite"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(TailError::domain(format!(
                "GPD scale {scale} must be positive"
            )));
        }
        Ok(Self { shape, scale })
    }

    fn is_exponential(&self) -> bool {
        self.shape.abs() < SHAPE_ZERO_TOL
    }

    /// Right endpoint of the support (`+inf` unless the shape is negative).
    pub fn upper_endpoint(&self) -> f64 {
        if self.shape < 0.0 && !self.is_exponential() {
            -self.scale / self.shape
        } else {
            f64::INFINITY
        }
    }

    pub fn cdf(&self, w: f64) -> Result<f64> {
        if w.is_nan() || w < 0.0 || w > self.upper_endpoint() {
            return Err(TailError::domain(format!("w = {w} outside GPD support")));
        }
        if self.is_exponential() {
            return Ok(-(-w / self.scale).exp_m1());
        }
        let t = self.shape * w / self.scale;
        if t <= -1.0 {
            // upper endpoint for negative shape
            return Ok(1.0);
        }
        Ok(-(-(t.ln_1p()) / self.shape).exp_m1())
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.quantile_unchecked(p))
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        let log_surv = (-p).ln_1p();
        if self.is_exponential() {
            -self.scale * log_surv
        } else {
            self.scale * (-self.shape * log_surv).exp_m1() / self.shape
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile_unchecked(rng.random::<f64>())
    }

    pub fn sample(&self, rng: &RngStream, n: usize) -> Vec<f64> {
        let mut r = rng.rng();
        (0..n).map(|_| self.draw(&mut r)).collect()
    }
}

/// Pure power-law tail `F(x) = 1 - x^(-1/shape)` on `(1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoTail {
    pub shape: f64,
}

impl ParetoTail {
    pub fn new(shape: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(TailError::domain(format!(
                "Pareto shape {shape} must be positive"
            )));
        }
        Ok(Self { shape })
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x < 1.0 {
            return Err(TailError::domain(format!("x = {x} below Pareto support")));
        }
        Ok(-(-x.ln() / self.shape).exp_m1())
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x <= 1.0 {
            1.0
        } else {
            x.powf(-1.0 / self.shape)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.quantile_unchecked(p))
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        (-self.shape * (-p).ln_1p()).exp()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile_unchecked(rng.random::<f64>())
    }

    pub fn sample(&self, rng: &RngStream, n: usize) -> Vec<f64> {
        let mut r = rng.rng();
        (0..n).map(|_| self.draw(&mut r)).collect()
    }
}

/// `n` samples of `ParetoTail(shape)`; rejects non-positive shapes.
pub fn pareto_tail_sample(shape: f64, rng: &RngStream, n: usize) -> Result<Vec<f64>> {
    Ok(ParetoTail::new(shape)?.sample(rng, n))
}

/// Generalized extreme value distribution, `G(x) = exp(-(1 + shape(a x + b))^(-1/shape))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub shape: f64,
    pub a: f64,
    pub b: f64,
}

impl GevParams {
    pub fn new(shape: f64, a: f64, b: f64) -> Result<Self> {
        if !shape.is_finite() || !b.is_finite() {
            return Err(TailError::domain("GEV shape and b must be finite"));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(TailError::domain(format!("GEV a = {a} must be positive")));
        }
        Ok(Self { shape, a, b })
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(TailError::domain("x is NaN"));
        }
        let lin = self.a * x + self.b;
        if self.shape.abs() < SHAPE_ZERO_TOL {
            return Ok((-(-lin).exp()).exp());
        }
        let t = 1.0 + self.shape * lin;
        if !(t > 0.0) {
            return Err(TailError::domain(format!(
                "1 + shape(ax + b) = {t} is not positive"
            )));
        }
        Ok((-t.powf(-1.0 / self.shape)).exp())
    }

    /// Inverse CDF on the open interval `(0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(TailError::domain(format!("probability {p} outside (0, 1)")));
        }
        let e = -p.ln();
        let lin = if self.shape.abs() < SHAPE_ZERO_TOL {
            -e.ln()
        } else {
            (-self.shape * e.ln()).exp_m1() / self.shape
        };
        Ok((lin - self.b) / self.a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: f64,
    pub stddev: f64,
    pub weight: f64,
}

/// Finite mixture of Gaussians, used as the latent density `f(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
    cumulative: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(TailError::domain("mixture needs at least one component"));
        }
        let mut total = 0.0;
        let mut cumulative = Vec::with_capacity(components.len());
        for c in &components {
            if !(c.stddev > 0.0) || !(c.weight > 0.0) || !c.mean.is_finite() {
                return Err(TailError::domain(format!(
                    "invalid mixture component {c:?}"
                )));
            }
            total += c.weight;
            cumulative.push(total);
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(TailError::domain(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(Self {
            components,
            cumulative,
        })
    }

    /// Equal-weight mixture of `count` Gaussians with means uniform on
    /// `[-5, 5]` and standard deviations uniform on `[0, 4]`. Standard
    /// deviations below `1e-6` are redrawn.
    pub fn random_latent(rng: &RngStream, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(TailError::domain(
                "latent mixture needs at least one component",
            ));
        }
        let mut r = rng.rng();
        let weight = 1.0 / count as f64;
        let mut components = Vec::with_capacity(count);
        for _ in 0..count {
            let mean = r.random_range(-5.0..5.0);
            let stddev = loop {
                let s: f64 = 4.0 * r.random::<f64>();
                if s >= 1e-6 {
                    break s;
                }
            };
            components.push(MixtureComponent {
                mean,
                stddev,
                weight,
            });
        }
        // Renormalise the last weight so the sum is exact.
        let rest: f64 = components[..count - 1].iter().map(|c| c.weight).sum();
        components[count - 1].weight = 1.0 - rest;
        Self::new(components)
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.components.len() - 1);
        let c = &self.components[idx];
        let z: f64 = rng.sample(StandardNormal);
        c.mean + c.stddev * z
    }

    pub fn sample(&self, rng: &RngStream, n: usize) -> Vec<f64> {
        let mut r = rng.rng();
        (0..n).map(|_| self.draw(&mut r)).collect()
    }
}

/// Marginals with a known closed form, used to probe regularity assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnalyticMarginal {
    /// `u ~ U(0,1)`, then `W | u ~ Exp(rate = u)`. Every conditional is
    /// light-tailed; the marginal survival is `(1 - e^-w)/w`.
    UniformRateExponential,
    /// Survival `x^-1 / (1 + ln x)` on `[1, inf)`: a `1/z`-shape Pareto
    /// mixture over `z - 1 ~ Exp(1)`.
    LogCorrectedPareto,
}

/// Survival function of [`AnalyticMarginal::LogCorrectedPareto`].
pub fn log_corrected_pareto_survival(x: f64) -> f64 {
    if x <= 1.0 {
        return 1.0;
    }
    let t = x.ln();
    (-t).exp() / (1.0 + t)
}

const LOG_PARETO_LOG_BRACKET: f64 = 64.0;
const LOG_PARETO_MAX_ITER: usize = 200;
const LOG_PARETO_REL_TOL: f64 = 1e-10;

/// Solves `log_corrected_pareto_survival(x) = s` for `x` by bisection on `ln x` over
/// `[0, 64]`, i.e. `x` in `[1, e^64]`.
pub fn log_corrected_pareto_inverse_survival(s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(TailError::domain(format!("survival {s} outside (0, 1]")));
    }
    if s == 1.0 {
        return Ok(1.0);
    }
    let surv_log = |t: f64| (-t).exp() / (1.0 + t);
    let (mut lo, mut hi) = (0.0_f64, LOG_PARETO_LOG_BRACKET);
    if surv_log(hi) > s {
        return Err(TailError::Internal(format!(
            "survival {s} below the inversion bracket"
        )));
    }
    for _ in 0..LOG_PARETO_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if surv_log(mid) > s {
            lo = mid;
        } else {
            hi = mid;
        }
        // width in ln x is the relative width in x
        if hi - lo <= LOG_PARETO_REL_TOL {
            return Ok((0.5 * (lo + hi)).exp());
        }
    }
    Err(TailError::Internal(format!(
        "log-corrected Pareto inversion did not converge for survival {s}"
    )))
}

impl AnalyticMarginal {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self {
            AnalyticMarginal::UniformRateExponential => {
                let rate = 1.0 - rng.random::<f64>();
                Ok(exponential_draw(rate, rng))
            }
            AnalyticMarginal::LogCorrectedPareto => {
                log_corrected_pareto_inverse_survival(1.0 - rng.random::<f64>())
            }
        }
    }

    pub fn sample(&self, rng: &RngStream, n: usize) -> Result<Vec<f64>> {
        let mut r = rng.rng();
        (0..n).map(|_| self.draw(&mut r)).collect()
    }
}

/// One exponential draw with the given rate.
pub fn exponential_draw<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    -(-rng.random::<f64>()).ln_1p() / rate
}

pub fn analytic_marginal_sample(
    kind: AnalyticMarginal,
    rng: &RngStream,
    n: usize,
) -> Result<Vec<f64>> {
    kind.sample(rng, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;
    use approx::assert_abs_diff_eq;

    fn stream(seed: u64) -> RngStream {
        RngStream::new(seed, Purpose::Samples, 0, 0)
    }

    fn empirical_quantile(mut xs: Vec<f64>, p: f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        xs[((p * xs.len() as f64).ceil() as usize).saturating_sub(1)]
    }

    #[test]
    fn gpd_cdf_examples() {
        let g = GpdParams::new(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(g.cdf(1.0).unwrap(), 0.5, epsilon = 1e-15);
        let e = GpdParams::new(0.0, 1.0).unwrap();
        assert_eq!(e.cdf(0.0).unwrap(), 0.0);
        let b = GpdParams::new(-0.5, 1.0).unwrap();
        assert_eq!(b.cdf(2.0).unwrap(), 1.0);
    }

    #[test]
    fn gpd_cdf_rejects_outside_support() {
        let b = GpdParams::new(-0.5, 1.0).unwrap();
        assert!(matches!(b.cdf(2.5), Err(TailError::Domain(_))));
        assert!(matches!(b.cdf(-0.1), Err(TailError::Domain(_))));
        assert!(GpdParams::new(0.3, 0.0).is_err());
    }

    #[test]
    fn gpd_quantile_examples() {
        let g = GpdParams::new(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(g.quantile(0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(g.quantile(0.0).unwrap(), 0.0);
        let e = GpdParams::new(0.0, 1.0).unwrap();
        let p = 1.0 - (-2.0f64).exp();
        assert_abs_diff_eq!(e.quantile(p).unwrap(), 2.0, epsilon = 1e-12);
        assert!(g.quantile(1.0).is_err());
        assert!(g.quantile(-0.1).is_err());
    }

    #[test]
    fn near_zero_shape_uses_exponential_branch() {
        let tiny = GpdParams::new(5e-10, 1.0).unwrap();
        let exp = GpdParams::new(0.0, 1.0).unwrap();
        assert_eq!(tiny.quantile(0.7).unwrap(), exp.quantile(0.7).unwrap());
    }

    #[test]
    fn gpd_sample_matches_quantile() {
        let g = GpdParams::new(0.5, 1.0).unwrap();
        assert!(g.sample(&stream(1), 0).is_empty());
        let xs = g.sample(&stream(1), 1_000_000);
        let q = empirical_quantile(xs, 0.9);
        let expect = g.quantile(0.9).unwrap();
        assert!((q / expect - 1.0).abs() < 0.02, "{q} vs {expect}");
        assert_eq!(g.sample(&stream(9), 100), g.sample(&stream(9), 100));
    }

    #[test]
    fn negative_shape_samples_stay_below_endpoint() {
        let g = GpdParams::new(-0.5, 2.0).unwrap();
        let end = g.upper_endpoint();
        assert!(g
            .sample(&stream(3), 200_000)
            .iter()
            .all(|&x| x < end && x >= 0.0));
    }

    #[test]
    fn pareto_examples() {
        let p = ParetoTail::new(1.0).unwrap();
        assert_eq!(p.quantile(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(p.quantile(0.5).unwrap(), 2.0, epsilon = 1e-14);
        assert!(pareto_tail_sample(0.0, &stream(0), 3).is_err());
        assert!(pareto_tail_sample(-1.0, &stream(0), 3).is_err());

        let xs = pareto_tail_sample(0.5, &stream(5), 1_000_000).unwrap();
        assert!(xs.iter().all(|&x| x > 1.0));
        let frac = xs.iter().filter(|&&x| x > 100.0).count() as f64 / xs.len() as f64;
        assert!((frac / 1e-4 - 1.0).abs() < 0.2, "tail fraction {frac}");
    }

    #[test]
    fn gev_examples() {
        let gumbel = GevParams::new(0.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(gumbel.cdf(0.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        let frechet = GevParams::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(frechet.cdf(f64::INFINITY).unwrap(), 1.0);
        assert_abs_diff_eq!(frechet.cdf(1e12).unwrap(), 1.0, epsilon = 1e-11);
        assert_abs_diff_eq!(frechet.cdf(0.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert!(frechet.cdf(-2.0).is_err());
    }

    #[test]
    fn mixture_examples() {
        let degenerate = GaussianMixture::new(vec![MixtureComponent {
            mean: 0.0,
            stddev: 1e-12,
            weight: 1.0,
        }])
        .unwrap();
        assert!(degenerate
            .sample(&stream(0), 1000)
            .iter()
            .all(|x| x.abs() < 1e-9));
        assert!(degenerate.sample(&stream(0), 0).is_empty());

        let latent = GaussianMixture::random_latent(&stream(11), 30).unwrap();
        assert_eq!(latent.components().len(), 30);
        assert!(latent
            .components()
            .iter()
            .all(|c| (-5.0..5.0).contains(&c.mean) && c.stddev >= 1e-6 && c.stddev <= 4.0));
        let xs = latent.sample(&stream(12), 1_000_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(
            (mean - latent.mean()).abs() < 0.1,
            "{mean} vs {}",
            latent.mean()
        );
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        let c = |w| MixtureComponent {
            mean: 0.0,
            stddev: 1.0,
            weight: w,
        };
        assert!(GaussianMixture::new(vec![c(0.5), c(0.4)]).is_err());
        assert!(GaussianMixture::new(vec![]).is_err());
        assert!(GaussianMixture::new(vec![MixtureComponent {
            mean: 0.0,
            stddev: 0.0,
            weight: 1.0
        }])
        .is_err());
    }

    #[test]
    fn log_corrected_pareto_inversion() {
        assert_eq!(log_corrected_pareto_inverse_survival(1.0).unwrap(), 1.0);
        for &s in &[0.9, 0.5, 1e-3, 1e-9, 1e-16] {
            let x = log_corrected_pareto_inverse_survival(s).unwrap();
            assert!(
                (log_corrected_pareto_survival(x) / s - 1.0).abs() < 1e-9,
                "s = {s}"
            );
        }
        assert!(log_corrected_pareto_inverse_survival(0.0).is_err());
        assert!(log_corrected_pareto_inverse_survival(1e-40).is_err());
    }

    #[test]
    fn log_corrected_pareto_empirical_survival() {
        let xs =
            analytic_marginal_sample(AnalyticMarginal::LogCorrectedPareto, &stream(21), 1_000_000)
                .unwrap();
        let x0 = std::f64::consts::E - 1.0;
        let emp = xs.iter().filter(|&&x| x > x0).count() as f64 / xs.len() as f64;
        let expect = log_corrected_pareto_survival(x0);
        assert!((emp / expect - 1.0).abs() < 0.02, "{emp} vs {expect}");
    }
}
