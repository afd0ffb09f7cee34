use std::f64::consts::PI;

use super::{check_samples, Family, MleFit, ParamBox, Support, CLIP_MARGIN};
use crate::error::{Error, Result};
use crate::numerics::linalg::{cholesky, spd_inverse, CholeskyFactor};
use crate::numerics::{RngStream, SpdMatrix};
use crate::tilting::TiltableDistribution;

/// `N(θ, σ²)` with known variance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLocation {
    sigma2: f64,
}

impl GaussianLocation {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::domain(format!("variance must be positive, got {sigma2}")));
        }
        Ok(GaussianLocation { sigma2 })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

impl Family for GaussianLocation {
    fn name(&self) -> &str {
        "gaussian_location"
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn theta_domain(&self) -> ParamBox {
        ParamBox::unbounded(1)
    }

    fn support(&self) -> Support {
        Support::Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    fn log_density(&self, x: &[f64], theta: &[f64]) -> f64 {
        let z = x[0] - theta[0];
        -0.5 * z * z / self.sigma2 - 0.5 * (2.0 * PI * self.sigma2).ln()
    }

    fn sample(&self, theta: &[f64], stream: &mut RngStream, x: &mut [f64]) {
        x[0] = theta[0] + self.sigma2.sqrt() * stream.normal();
    }

    fn location_hint(&self, theta: &[f64]) -> (f64, f64) {
        (theta[0], self.sigma2.sqrt())
    }

    fn score(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        vec![(x[0] - theta[0]) / self.sigma2]
    }

    fn fisher(&self, _theta: &[f64]) -> Result<SpdMatrix> {
        SpdMatrix::scalar(1.0 / self.sigma2)
    }

    fn hellinger_sq(&self, theta1: &[f64], theta2: &[f64]) -> Result<f64> {
        let u = theta1[0] - theta2[0];
        Ok(-2.0 * (-u * u / (8.0 * self.sigma2)).exp_m1())
    }

    fn mle(&self, samples: &[f64]) -> Result<MleFit> {
        let n = check_samples(self, samples)?;
        Ok(MleFit {
            theta: vec![samples.iter().sum::<f64>() / n as f64],
            clipped: false,
            iterations: 0,
        })
    }

    fn tiltable(&self, theta: &[f64]) -> Option<TiltableDistribution> {
        TiltableDistribution::gaussian(theta.to_vec(), SpdMatrix::scalar(self.sigma2).ok()?).ok()
    }
}

/// `N_d(θ, Σ)` with known covariance.
#[derive(Debug, Clone)]
pub struct GaussianMeanVector {
    cov: SpdMatrix,
    precision: SpdMatrix,
    chol: CholeskyFactor,
    ln_norm: f64,
}

impl GaussianMeanVector {
    pub fn new(cov: SpdMatrix) -> Result<Self> {
        let chol = cholesky(&cov)?;
        let precision = spd_inverse(&cov)?;
        let ln_norm = -0.5 * (cov.dim() as f64 * (2.0 * PI).ln() + chol.ln_det());
        Ok(GaussianMeanVector {
            cov,
            precision,
            chol,
            ln_norm,
        })
    }

    pub fn isotropic(d: usize) -> Self {
        Self::new(SpdMatrix::identity(d)).expect("identity covariance")
    }

    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }

    fn mahalanobis_sq(&self, u: &[f64]) -> f64 {
        self.precision.quad_form(u)
    }
}

impl Family for GaussianMeanVector {
    fn name(&self) -> &str {
        "gaussian_mean_vector"
    }

    fn param_dim(&self) -> usize {
        self.cov.dim()
    }

    fn obs_dim(&self) -> usize {
        self.cov.dim()
    }

    fn theta_domain(&self) -> ParamBox {
        ParamBox::unbounded(self.cov.dim())
    }

    fn support(&self) -> Support {
        match self.cov.dim() {
            1 => Support::Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            },
            d => Support::Euclidean(d),
        }
    }

    fn log_density(&self, x: &[f64], theta: &[f64]) -> f64 {
        let z: Vec<f64> = x.iter().zip(theta).map(|(a, b)| a - b).collect();
        self.ln_norm - 0.5 * self.mahalanobis_sq(&z)
    }

    fn sample(&self, theta: &[f64], stream: &mut RngStream, x: &mut [f64]) {
        let mut z = vec![0.0; theta.len()];
        stream.fill_normal(&mut z);
        for ((xi, t), l) in x.iter_mut().zip(theta).zip(self.chol.mul_vec(&z)) {
            *xi = t + l;
        }
    }

    fn location_hint(&self, theta: &[f64]) -> (f64, f64) {
        (theta[0], self.cov.get(0, 0).sqrt())
    }

    fn score(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = x.iter().zip(theta).map(|(a, b)| a - b).collect();
        self.precision.mul_vec(&z)
    }

    fn fisher(&self, _theta: &[f64]) -> Result<SpdMatrix> {
        Ok(self.precision.clone())
    }

    fn hellinger_sq(&self, theta1: &[f64], theta2: &[f64]) -> Result<f64> {
        let u: Vec<f64> = theta1.iter().zip(theta2).map(|(a, b)| a - b).collect();
        Ok(-2.0 * (-self.mahalanobis_sq(&u) / 8.0).exp_m1())
    }

    fn mle(&self, samples: &[f64]) -> Result<MleFit> {
        let n = check_samples(self, samples)?;
        let d = self.cov.dim();
        let mut mean = vec![0.0; d];
        for x in samples.chunks(d) {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        Ok(MleFit {
            theta: mean.into_iter().map(|m| m / n as f64).collect(),
            clipped: false,
            iterations: 0,
        })
    }

    fn tiltable(&self, theta: &[f64]) -> Option<TiltableDistribution> {
        TiltableDistribution::gaussian(theta.to_vec(), self.cov.clone()).ok()
    }
}

/// Bernoulli with success probability `θ ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Bernoulli;

impl Family for Bernoulli {
    fn name(&self) -> &str {
        "bernoulli"
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn theta_domain(&self) -> ParamBox {
        ParamBox {
            lo: vec![0.0],
            hi: vec![1.0],
        }
    }

    fn support(&self) -> Support {
        Support::Finite(vec![vec![0.0], vec![1.0]])
    }

    fn log_density(&self, x: &[f64], theta: &[f64]) -> f64 {
        let p = theta[0];
        if x[0] == 1.0 {
            p.ln()
        } else if x[0] == 0.0 {
            (-p).ln_1p()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn sample(&self, theta: &[f64], stream: &mut RngStream, x: &mut [f64]) {
        x[0] = if stream.uniform() < theta[0] { 1.0 } else { 0.0 };
    }

    fn score(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let p = theta[0];
        vec![(x[0] - p) / (p * (1.0 - p))]
    }

    fn fisher(&self, theta: &[f64]) -> Result<SpdMatrix> {
        let p = theta[0];
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("bernoulli parameter {p} outside (0, 1)")));
        }
        SpdMatrix::scalar(1.0 / (p * (1.0 - p)))
    }

    fn hellinger_sq(&self, theta1: &[f64], theta2: &[f64]) -> Result<f64> {
        let (p, q) = (theta1[0], theta2[0]);
        // 2 − 2(√(pq) + √((1−p)(1−q))), written as a sum of squares
        let a = p.sqrt() - q.sqrt();
        let b = (1.0 - p).sqrt() - (1.0 - q).sqrt();
        Ok(a * a + b * b)
    }

    fn mle(&self, samples: &[f64]) -> Result<MleFit> {
        let n = check_samples(self, samples)?;
        if samples.iter().any(|x| *x != 0.0 && *x != 1.0) {
            return Err(Error::domain("bernoulli samples must be 0 or 1"));
        }
        let mut theta = vec![samples.iter().sum::<f64>() / n as f64];
        let clipped = self.theta_domain().clip(&mut theta, CLIP_MARGIN);
        Ok(MleFit {
            theta,
            clipped,
            iterations: 0,
        })
    }

    fn tiltable(&self, theta: &[f64]) -> Option<TiltableDistribution> {
        TiltableDistribution::discrete(vec![vec![0.0], vec![1.0]], vec![1.0 - theta[0], theta[0]]).ok()
    }
}

/// Exponential with rate `θ > 0`, density `θ e^{−θx}` on `x ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExponentialRate;

impl Family for ExponentialRate {
    fn name(&self) -> &str {
        "exponential_rate"
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn theta_domain(&self) -> ParamBox {
        ParamBox {
            lo: vec![0.0],
            hi: vec![f64::INFINITY],
        }
    }

    fn support(&self) -> Support {
        Support::Interval {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    fn log_density(&self, x: &[f64], theta: &[f64]) -> f64 {
        if x[0] < 0.0 {
            return f64::NEG_INFINITY;
        }
        theta[0].ln() - theta[0] * x[0]
    }

    fn sample(&self, theta: &[f64], stream: &mut RngStream, x: &mut [f64]) {
        x[0] = -(-stream.uniform()).ln_1p() / theta[0];
    }

    fn location_hint(&self, theta: &[f64]) -> (f64, f64) {
        (1.0 / theta[0], 1.0 / theta[0])
    }

    fn score(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        vec![1.0 / theta[0] - x[0]]
    }

    fn fisher(&self, theta: &[f64]) -> Result<SpdMatrix> {
        if !(theta[0] > 0.0) {
            return Err(Error::domain(format!("exponential rate {} must be positive", theta[0])));
        }
        SpdMatrix::scalar(1.0 / (theta[0] * theta[0]))
    }

    fn hellinger_sq(&self, theta1: &[f64], theta2: &[f64]) -> Result<f64> {
        let (a, b) = (theta1[0], theta2[0]);
        // 2 − 4√(ab)/(a+b) = 2(√a − √b)²/(a+b)
        let diff = a.sqrt() - b.sqrt();
        Ok(2.0 * diff * diff / (a + b))
    }

    fn mle(&self, samples: &[f64]) -> Result<MleFit> {
        let n = check_samples(self, samples)?;
        if samples.iter().any(|x| *x < 0.0) {
            return Err(Error::domain("exponential samples must be non-negative"));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let mut theta = vec![if mean > 0.0 { 1.0 / mean } else { f64::INFINITY }];
        let clipped = self.theta_domain().clip(&mut theta, CLIP_MARGIN);
        if !theta[0].is_finite() {
            return Err(Error::domain("all exponential samples are zero; the likelihood has no maximizer"));
        }
        Ok(MleFit {
            theta,
            clipped,
            iterations: 0,
        })
    }
}
