//! Parametric families `P_θ`: densities, samplers, scores, Fisher
//! information, Hellinger distances and maximum likelihood.

mod a2;
mod builtin;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numerics::linalg::{cholesky, spd_inverse};
use crate::numerics::quadrature::{integrate_half_line_vec, integrate_real_line_vec, integrate_vec, Tolerance};
use crate::numerics::{RngStream, SpdMatrix};
use crate::tilting::TiltableDistribution;

pub use a2::{check_a2, default_u_grid, A2Report, A2Row};
pub use builtin::{Bernoulli, ExponentialRate, GaussianLocation, GaussianMeanVector};

/// Relative accuracy of integrals over the observation space.
const OBS_REL: f64 = 1e-10;

/// Margin kept between clipped estimates and the boundary of `Θ₀`.
pub const CLIP_MARGIN: f64 = 1e-6;

const MLE_MAX_ITER: usize = 100;

/// Where observations live; also fixes the dominating measure
/// (counting for finite supports, Lebesgue otherwise).
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Finite(Vec<Vec<f64>>),
    Interval { lo: f64, hi: f64 },
    Euclidean(usize),
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Support::Finite(atoms) => write!(f, "finite set of {} points (counting measure)", atoms.len()),
            Support::Interval { lo, hi } => write!(f, "interval ({lo}, {hi}) (Lebesgue measure)"),
            Support::Euclidean(d) => write!(f, "R^{d} (Lebesgue measure)"),
        }
    }
}

/// An open box of parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn unbounded(d: usize) -> Self {
        ParamBox {
            lo: vec![f64::NEG_INFINITY; d],
            hi: vec![f64::INFINITY; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && theta.iter().zip(self.lo.iter().zip(&self.hi)).all(|(t, (l, h))| l < t && t < h)
    }

    /// Projects into the box shrunk by `margin`; reports whether anything moved.
    pub fn clip(&self, theta: &mut [f64], margin: f64) -> bool {
        let mut clipped = false;
        for ((t, l), h) in theta.iter_mut().zip(&self.lo).zip(&self.hi) {
            let (a, b) = (l + margin, h - margin);
            if !(*t >= a) {
                *t = a;
                clipped = true;
            } else if *t > b {
                *t = b;
                clipped = true;
            }
        }
        clipped
    }

    /// A central interior point, used as a default starting value.
    pub fn interior_point(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| match (l.is_finite(), h.is_finite()) {
                (true, true) => 0.5 * (l + h),
                (true, false) => l + 1.0,
                (false, true) => h - 1.0,
                (false, false) => 0.0,
            })
            .collect()
    }
}

/// Result of a maximum likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleFit {
    pub theta: Vec<f64>,
    /// The unconstrained maximizer fell outside `Θ₀` and was clipped.
    pub clipped: bool,
    pub iterations: usize,
}

/// A parametric family with finite Fisher information.
///
/// Required methods describe the model; the rest have numeric defaults
/// that built-ins override with closed forms. Samples are stored flat,
/// `obs_dim` numbers per observation.
pub trait Family: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;
    fn param_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn theta_domain(&self) -> ParamBox;
    fn support(&self) -> Support;

    /// `ln f(x, θ)`, `−∞` off the support.
    fn log_density(&self, x: &[f64], theta: &[f64]) -> f64;

    /// Writes one draw from `P_θ` into `x`.
    fn sample(&self, theta: &[f64], stream: &mut RngStream, x: &mut [f64]);

    /// Smoothness exponent of the local expansion.
    fn lambda(&self) -> f64 {
        1.0
    }

    fn sample_space(&self) -> String {
        self.support().to_string()
    }

    /// Center and spread of `P_θ`, used to map the real line for quadrature.
    fn location_hint(&self, _theta: &[f64]) -> (f64, f64) {
        (0.0, 1.0)
    }

    /// Score `φ_θ(x) = ∇_θ ln f(x, θ)` by central differences.
    fn score(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; theta.len()];
        let mut t = theta.to_vec();
        let domain = self.theta_domain();
        for i in 0..theta.len() {
            let room = (theta[i] - domain.lo[i]).min(domain.hi[i] - theta[i]);
            let step = (1e-6 * (1.0 + theta[i].abs())).min(0.5 * room);
            t[i] = theta[i] + step;
            let up = self.log_density(x, &t);
            t[i] = theta[i] - step;
            let down = self.log_density(x, &t);
            t[i] = theta[i];
            out[i] = (up - down) / (2.0 * step);
        }
        out
    }

    /// `I(θ) = E_θ φ_θ φ_θ'` by quadrature over the support.
    fn fisher(&self, theta: &[f64]) -> Result<SpdMatrix> {
        let d = self.param_dim();
        let raw = integrate_nu(self, theta, d * d, &|x, out| {
            let lf = self.log_density(x, theta);
            if lf == f64::NEG_INFINITY {
                out.fill(0.0);
                return;
            }
            let f = lf.exp();
            let s = self.score(x, theta);
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] = f * s[i] * s[j];
                }
            }
        })?;
        SpdMatrix::new(d, symmetrize(d, raw))
    }

    /// `ρ²(θ1, θ2) = ∫ (f^{1/2}(·, θ1) − f^{1/2}(·, θ2))² dν`.
    fn hellinger_sq(&self, theta1: &[f64], theta2: &[f64]) -> Result<f64> {
        let v = integrate_nu(self, theta1, 1, &|x, out| {
            let a = (0.5 * self.log_density(x, theta1)).exp();
            let b = (0.5 * self.log_density(x, theta2)).exp();
            out[0] = (a - b) * (a - b);
        })?;
        Ok(v[0])
    }

    /// Fisher scoring on `Σ φ_θ(x_s) = 0`, clipped to `Θ₀`.
    fn mle(&self, samples: &[f64]) -> Result<MleFit> {
        newton_mle(self, samples, self.theta_domain().interior_point())
    }

    /// The observation law at `θ` as a tiltable distribution, when one is
    /// available in closed form.
    fn tiltable(&self, _theta: &[f64]) -> Option<TiltableDistribution> {
        None
    }
}

/// `∫ g dν` over the support of `family`; `g` writes `m` components.
///
/// A first pass with default tolerances sizes the integral; the second
/// pass uses an absolute tolerance relative to that size, so tiny
/// integrals keep their relative accuracy without chasing rounding noise
/// in the tails.
pub fn integrate_nu<F: Family + ?Sized>(
    family: &F,
    theta: &[f64],
    m: usize,
    g: &dyn Fn(&[f64], &mut [f64]),
) -> Result<Vec<f64>> {
    let first = integrate_nu_with(family, theta, m, g, Tolerance::default())?;
    let size = first.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if size == 0.0 || matches!(family.support(), Support::Finite(_)) {
        return Ok(first);
    }
    integrate_nu_with(family, theta, m, g, Tolerance { abs: OBS_REL * size, rel: OBS_REL })
}

fn integrate_nu_with<F: Family + ?Sized>(
    family: &F,
    theta: &[f64],
    m: usize,
    g: &dyn Fn(&[f64], &mut [f64]),
    tol: Tolerance,
) -> Result<Vec<f64>> {
    match family.support() {
        Support::Finite(atoms) => {
            let mut total = vec![0.0; m];
            let mut out = vec![0.0; m];
            for a in &atoms {
                g(a, &mut out);
                for (t, o) in total.iter_mut().zip(&out) {
                    *t += o;
                }
            }
            Ok(total)
        }
        Support::Interval { lo, hi } => {
            let h = |x: f64, out: &mut [f64]| g(&[x], out);
            let (center, scale) = family.location_hint(theta);
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => integrate_vec(h, lo, hi, m, tol),
                (true, false) => integrate_half_line_vec(|x, out: &mut [f64]| h(lo + x, out), scale, m, tol),
                (false, true) => integrate_half_line_vec(|x, out: &mut [f64]| h(hi - x, out), scale, m, tol),
                (false, false) => integrate_real_line_vec(h, center, scale, m, tol),
            }
        }
        Support::Euclidean(d) => Err(Error::Quadrature(format!(
            "no quadrature rule for {d}-dimensional observations of {}",
            family.name()
        ))),
    }
}

fn symmetrize(d: usize, mut data: Vec<f64>) -> Vec<f64> {
    for i in 0..d {
        for j in 0..i {
            let avg = 0.5 * (data[i * d + j] + data[j * d + i]);
            data[i * d + j] = avg;
            data[j * d + i] = avg;
        }
    }
    data
}

fn check_samples<F: Family + ?Sized>(family: &F, samples: &[f64]) -> Result<usize> {
    let k = family.obs_dim();
    if samples.is_empty() || !samples.len().is_multiple_of(k) {
        return Err(Error::domain(format!(
            "expected a non-empty sample of {k}-dimensional observations, got {} numbers",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("samples must be finite"));
    }
    Ok(samples.len() / k)
}

fn log_likelihood<F: Family + ?Sized>(family: &F, samples: &[f64], theta: &[f64]) -> f64 {
    samples.chunks(family.obs_dim()).map(|x| family.log_density(x, theta)).sum()
}

/// Fisher scoring from `start` with step halving on the log-likelihood.
pub fn newton_mle<F: Family + ?Sized>(family: &F, samples: &[f64], start: Vec<f64>) -> Result<MleFit> {
    let n = check_samples(family, samples)?;
    let domain = family.theta_domain();
    check_dim(family.param_dim(), start.len())?;
    let mut theta = start;
    let mut ll = log_likelihood(family, samples, &theta);
    if !ll.is_finite() {
        return Err(Error::domain("sample lies outside the support at the starting value"));
    }
    let mut trace = Vec::new();
    let mut clipped = false;
    for it in 1..=MLE_MAX_ITER {
        let mut grad = vec![0.0; theta.len()];
        for x in samples.chunks(family.obs_dim()) {
            for (g, s) in grad.iter_mut().zip(family.score(x, &theta)) {
                *g += s / n as f64;
            }
        }
        let info = family.fisher(&theta)?;
        let step = cholesky(&info)?.solve(&grad);
        let step_norm = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        trace.push(step_norm);
        if step_norm <= 1e-10 * (1.0 + theta.iter().map(|t| t * t).sum::<f64>().sqrt()) {
            return Ok(MleFit {
                theta,
                clipped,
                iterations: it,
            });
        }
        let mut scale = 1.0;
        loop {
            let mut cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + scale * s).collect();
            let was_clipped = domain.clip(&mut cand, CLIP_MARGIN);
            let cand_ll = log_likelihood(family, samples, &cand);
            if cand_ll >= ll - 1e-12 * ll.abs() {
                if was_clipped && cand == theta {
                    // pinned at the boundary: the maximizer is outside Θ₀
                    return Ok(MleFit {
                        theta,
                        clipped: true,
                        iterations: it,
                    });
                }
                clipped = was_clipped;
                theta = cand;
                ll = cand_ll;
                break;
            }
            scale *= 0.5;
            if scale < 1e-12 {
                return Err(Error::NonConvergence {
                    what: "maximum likelihood line search",
                    iterations: it,
                    trace,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        what: "maximum likelihood scoring",
        iterations: MLE_MAX_ITER,
        trace,
    })
}

/// JSON family specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    GaussianLocation {
        #[serde(default = "one")]
        sigma2: f64,
    },
    GaussianMeanVector {
        cov: Vec<Vec<f64>>,
    },
    Bernoulli {},
    ExponentialRate {},
}

fn one() -> f64 {
    1.0
}

impl FamilySpec {
    pub fn build(&self) -> Result<Arc<dyn Family>> {
        Ok(match self {
            FamilySpec::GaussianLocation { sigma2 } => Arc::new(GaussianLocation::new(*sigma2)?),
            FamilySpec::GaussianMeanVector { cov } => Arc::new(GaussianMeanVector::new(SpdMatrix::from_rows(cov)?)?),
            FamilySpec::Bernoulli {} => Arc::new(Bernoulli),
            FamilySpec::ExponentialRate {} => Arc::new(ExponentialRate),
        })
    }
}

/// Built-in family by name with default parameters.
pub fn builtin(name: &str) -> Result<Arc<dyn Family>> {
    let spec: FamilySpec = serde_json::from_value(serde_json::json!({ "family": name }))
        .map_err(|_| Error::domain(format!("unknown family `{name}`")))?;
    spec.build()
}

/// Estimator names accepted in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    SampleMean,
    Mle,
}

pub type PluginFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// An estimator `θ̂(X_1, …, X_n)`, a pure function of the sample.
#[derive(Clone)]
pub enum Estimator {
    SampleMean,
    Mle,
    Plugin(PluginFn),
}

impl fmt::Debug for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::SampleMean => f.write_str("SampleMean"),
            Estimator::Mle => f.write_str("Mle"),
            Estimator::Plugin(_) => f.write_str("Plugin(..)"),
        }
    }
}

impl From<EstimatorKind> for Estimator {
    fn from(k: EstimatorKind) -> Self {
        match k {
            EstimatorKind::SampleMean => Estimator::SampleMean,
            EstimatorKind::Mle => Estimator::Mle,
        }
    }
}

impl Estimator {
    /// Linear in the observations, so that tilting the sum is exact.
    pub fn is_linear(&self) -> bool {
        matches!(self, Estimator::SampleMean)
    }

    pub fn estimate(&self, family: &dyn Family, samples: &[f64]) -> Result<Vec<f64>> {
        match self {
            Estimator::SampleMean => {
                let n = check_samples(family, samples)?;
                let k = family.obs_dim();
                let mut mean = vec![0.0; k];
                for x in samples.chunks(k) {
                    for (m, v) in mean.iter_mut().zip(x) {
                        *m += v;
                    }
                }
                Ok(mean.into_iter().map(|m| m / n as f64).collect())
            }
            Estimator::Mle => Ok(family.mle(samples)?.theta),
            Estimator::Plugin(f) => {
                check_samples(family, samples)?;
                Ok(f(samples))
            }
        }
    }
}

/// `I(θ)^{1/2}` and `I(θ)^{-1}` helpers used by the experiments.
pub fn inverse_fisher(family: &dyn Family, theta: &[f64]) -> Result<SpdMatrix> {
    spd_inverse(&family.fisher(theta)?)
}
