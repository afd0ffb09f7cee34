//! Moderate-deviation and normal-approximation confidence intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Family;
use crate::numerics::rng::{merge_moments, par_chunks, Moments};
use crate::numerics::{normal_quantile, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    /// Half-width `σ √(2|ln(α/2)|) / √n`, from the exponential main term.
    ModerateDeviation,
    /// Half-width `x_{α/2} σ / √n` with `Φ(−x_{α/2}) = α/2`.
    Normal,
}

impl IntervalMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntervalMethod::ModerateDeviation => "moderate_deviation",
            IntervalMethod::Normal => "normal",
        }
    }
}

impl fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntervalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moderate_deviation" | "md" => Ok(IntervalMethod::ModerateDeviation),
            "normal" => Ok(IntervalMethod::Normal),
            other => Err(Error::Config(format!("unknown interval method `{other}`"))),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_scale(sigma: f64, n: u64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    Ok(())
}

/// `√(2|ln(α/2)|)`
pub fn md_quantile(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((2.0 * (0.5 * alpha).ln().abs()).sqrt())
}

/// `x_{α/2}` with `Φ(−x_{α/2}) = α/2`.
pub fn normal_two_sided_quantile(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(-normal_quantile(0.5 * alpha)?)
}

pub fn md_half_width(sigma: f64, n: u64, alpha: f64) -> Result<f64> {
    check_scale(sigma, n)?;
    Ok(md_quantile(alpha)? * sigma / (n as f64).sqrt())
}

pub fn normal_half_width(sigma: f64, n: u64, alpha: f64) -> Result<f64> {
    check_scale(sigma, n)?;
    Ok(normal_two_sided_quantile(alpha)? * sigma / (n as f64).sqrt())
}

pub fn half_width(method: IntervalMethod, sigma: f64, n: u64, alpha: f64) -> Result<f64> {
    match method {
        IntervalMethod::ModerateDeviation => md_half_width(sigma, n, alpha),
        IntervalMethod::Normal => normal_half_width(sigma, n, alpha),
    }
}

/// Factor by which the sample size must grow for the moderate-deviation
/// interval to be as narrow as the normal one.
pub fn sample_size_ratio(alpha: f64) -> Result<f64> {
    Ok((md_quantile(alpha)? / normal_two_sided_quantile(alpha)?).powi(2))
}

/// A symmetric interval `(center − half_width, center + half_width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub center: f64,
    pub half_width: f64,
    pub alpha: f64,
    pub method: IntervalMethod,
}

impl IntervalSpec {
    pub fn new(center: f64, sigma: f64, n: u64, alpha: f64, method: IntervalMethod) -> Result<Self> {
        Ok(IntervalSpec {
            center,
            half_width: half_width(method, sigma, n, alpha)?,
            alpha,
            method,
        })
    }

    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    /// Open-interval membership.
    pub fn covers(&self, theta: f64) -> bool {
        (theta - self.center).abs() < self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageResult {
    pub alpha: f64,
    pub method: IntervalMethod,
    pub n: u64,
    pub sigma: f64,
    pub half_width: f64,
    pub coverage: f64,
    pub std_error: f64,
    pub n_trials: u64,
}

/// Fraction of `n_trials` samples of size `n` whose interval around the
/// maximum likelihood estimate covers `θ`. `σ = I(θ)^{-1/2}` is taken as
/// known. Equal streams give equal estimates for every method, so wider
/// intervals never cover less.
pub fn coverage_sim(
    family: &dyn Family,
    theta: f64,
    n: u64,
    alpha: f64,
    method: IntervalMethod,
    n_trials: u64,
    stream: &RngStream,
) -> Result<CoverageResult> {
    if family.param_dim() != 1 || family.obs_dim() != 1 {
        return Err(Error::domain("coverage simulation needs a one-parameter family"));
    }
    if !family.theta_domain().contains(&[theta]) {
        return Err(Error::domain(format!("θ = {theta} is outside the parameter domain")));
    }
    if n_trials < 2 {
        return Err(Error::domain("coverage simulation needs at least 2 trials"));
    }
    let sigma = family.fisher(&[theta])?.get(0, 0).powf(-0.5);
    let width = half_width(method, sigma, n, alpha)?;
    let parts = par_chunks(stream, n_trials as usize, |s, count| -> Result<Moments> {
        let mut m = Moments::default();
        let mut sample = vec![0.0; n as usize];
        for _ in 0..count {
            for x in sample.iter_mut() {
                family.sample(&[theta], s, std::slice::from_mut(x));
            }
            let est = family.mle(&sample)?.theta[0];
            m.push(if (est - theta).abs() < width { 1.0 } else { 0.0 });
        }
        Ok(m)
    });
    let m = merge_moments(parts.into_iter().collect::<Result<Vec<_>>>()?);
    let coverage = m.mean();
    Ok(CoverageResult {
        alpha,
        method,
        n,
        sigma,
        half_width: width,
        coverage,
        std_error: (coverage * (1.0 - coverage) / n_trials as f64).sqrt(),
        n_trials,
    })
}
