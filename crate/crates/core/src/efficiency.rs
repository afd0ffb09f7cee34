//! Efficiency experiments: the deviation probability of an estimator
//! against the Gaussian exit probability at moderate-deviation scales.
//!
//! For a family `P_θ`, an estimator `θ̂_n`, a body `Ω` and a scale `b_n`
//! the numerator is `P_θ(A(θ̂_n − θ) ∉ b_nΩ)` with `A = I^{1/2}(θ0)` and
//! the denominator is `P(ζ ∉ √n b_n Ω)` for a standard Gaussian `ζ`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_dim, Error, Result};
use crate::exit::{
    binomial_estimate, exit_asymptotic, exit_ball_exact, exit_is, ExitProbEstimate, Method, DEFAULT_REGIME_GUARD,
};
use crate::geometry::{nearest_boundary, BodySpec, ConvexBody};
use crate::models::{Estimator, EstimatorKind, Family, FamilySpec};
use crate::numerics::linalg::{spd_inverse, spd_sqrt};
use crate::numerics::rng::{merge_moments, par_chunks, Moments};
use crate::numerics::special::ln_gamma_unchecked;
use crate::numerics::{ln_normal_cdf, RngStream, SpdMatrix};

/// Largest sample size handled by binomial enumeration.
pub const MAX_ENUMERATION_N: u64 = 100_000;
/// Minimum number of importance samples for a denominator.
pub const DENOMINATOR_IS_SAMPLES: usize = 100_000;
/// Grid points are pulled inside the open window by this factor.
const WINDOW_SHRINK: f64 = 1.0 - 1e-9;
/// Below this estimated probability the log bound switches to importance sampling.
const IS_SWITCH: f64 = 1e-4;
const DENOMINATOR_STREAM_BASE: u64 = 1 << 31;

fn one() -> f64 {
    1.0
}

fn default_grid_points() -> usize {
    5
}

/// `b_n = c · n^{−γ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnRule {
    #[serde(default = "one")]
    pub c: f64,
    pub gamma: f64,
}

impl BnRule {
    pub fn b_n(&self, n: u64) -> f64 {
        self.c * (n as f64).powf(-self.gamma)
    }
}

/// `C_n = c0 · √(ln n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnRule {
    #[serde(default = "one")]
    pub c0: f64,
}

impl Default for CnRule {
    fn default() -> Self {
        CnRule { c0: 1.0 }
    }
}

impl CnRule {
    pub fn c_n(&self, n: u64) -> f64 {
        self.c0 * (n as f64).ln().max(0.0).sqrt()
    }
}

/// How the numerator is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Enumeration when exact, otherwise importance sampling if requested
    /// and available, otherwise direct simulation.
    #[default]
    Auto,
    Mc,
    Is,
    Enumeration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_trials: u64,
    #[serde(default)]
    pub use_is: bool,
    #[serde(default)]
    pub engine: Engine,
}

/// A full efficiency experiment, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    pub estimator: EstimatorKind,
    pub theta0: Vec<f64>,
    pub body: BodySpec,
    pub bn_rule: BnRule,
    pub n_grid: Vec<u64>,
    #[serde(default)]
    pub cn_rule: CnRule,
    /// Radii per axis direction, counting the centre.
    #[serde(default = "default_grid_points")]
    pub theta_grid_points: usize,
    pub mc: McConfig,
    pub master_seed: u64,
}

/// A validated configuration with its built objects.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub family: Arc<dyn Family>,
    pub estimator: Estimator,
    pub body: ConvexBody,
    /// `I^{1/2}(θ0)`
    pub scaling: SpdMatrix,
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks the side conditions of the experiment and builds its parts.
    pub fn prepare(&self) -> Result<Prepared> {
        let family = self.family.build()?;
        let d = family.param_dim();
        let mut warnings = Vec::new();
        let BnRule { c, gamma } = self.bn_rule;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("bn_rule.c must be positive, got {c}")));
        }
        if !(gamma > 0.0 && gamma < 0.5) {
            return Err(Error::Config(format!("bn_rule.gamma must lie in (0, 1/2), got {gamma}")));
        }
        let lambda = family.lambda();
        if gamma <= 1.0 / (2.0 + lambda) {
            warnings.push(format!(
                "gamma = {gamma} ≤ 1/(2+λ) = {:.4}: n·b_n^(2+λ) does not tend to 0",
                1.0 / (2.0 + lambda)
            ));
        }
        if !(self.cn_rule.c0 > 0.0 && self.cn_rule.c0.is_finite()) {
            return Err(Error::Config("cn_rule.c0 must be positive".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::Config("n_grid must be a non-empty list of positive sample sizes".into()));
        }
        if self.theta_grid_points == 0 {
            return Err(Error::Config("theta_grid_points must be at least 1".into()));
        }
        if self.mc.n_trials < 2 {
            return Err(Error::Config("mc.n_trials must be at least 2".into()));
        }
        check_dim(d, self.theta0.len())?;
        if !family.theta_domain().contains(&self.theta0) {
            return Err(Error::domain(format!("theta0 = {:?} is outside the parameter domain", self.theta0)));
        }
        let body = ConvexBody::from_spec(&self.body)?;
        check_dim(d, body.dim())?;
        let scaling = spd_sqrt(&family.fisher(&self.theta0)?)?;
        Ok(Prepared {
            family,
            estimator: self.estimator.into(),
            body,
            scaling,
            warnings,
        })
    }
}

/// `θ0` plus points at radii `j/(m−1) · C_n b_n` along both directions of
/// each axis, kept strictly inside the window and the parameter domain.
pub fn theta_grid(family: &dyn Family, theta0: &[f64], radius: f64, points: usize) -> Vec<Vec<f64>> {
    let domain = family.theta_domain();
    let mut out = vec![theta0.to_vec()];
    if points < 2 {
        return out;
    }
    for j in 1..points {
        let r = radius * WINDOW_SHRINK * j as f64 / (points - 1) as f64;
        for axis in 0..theta0.len() {
            for sign in [-1.0, 1.0] {
                let mut t = theta0.to_vec();
                t[axis] += sign * r;
                if domain.contains(&t) {
                    out.push(t);
                }
            }
        }
    }
    out
}

/// One deviation probability `P_θ(A(θ̂_n − θ) ∉ b_nΩ)`.
#[derive(Debug, Clone, Copy)]
pub struct DeviationProblem<'a> {
    pub family: &'a dyn Family,
    pub estimator: &'a Estimator,
    pub theta: &'a [f64],
    pub n: u64,
    pub b_n: f64,
    pub body: &'a ConvexBody,
    pub scaling: &'a SpdMatrix,
}

impl DeviationProblem<'_> {
    fn check(&self) -> Result<()> {
        let d = self.family.param_dim();
        check_dim(d, self.theta.len())?;
        check_dim(d, self.body.dim())?;
        check_dim(d, self.scaling.dim())?;
        if self.n == 0 {
            return Err(Error::domain("sample size must be positive"));
        }
        if !(self.b_n > 0.0 && self.b_n.is_finite()) {
            return Err(Error::domain(format!("b_n must be positive, got {}", self.b_n)));
        }
        if !self.family.theta_domain().contains(self.theta) {
            return Err(Error::domain(format!("θ = {:?} is outside the parameter domain", self.theta)));
        }
        Ok(())
    }

    fn exits(&self, estimate: &[f64]) -> bool {
        let diff: Vec<f64> = estimate.iter().zip(self.theta).map(|(a, b)| (a - b) / self.b_n).collect();
        !self.body.contains_unchecked(&self.scaling.mul_vec(&diff))
    }

    fn enumerable(&self) -> bool {
        self.family.name() == "bernoulli"
            && matches!(self.estimator, Estimator::SampleMean | Estimator::Mle)
            && self.n <= MAX_ENUMERATION_N
    }

    fn tiltable(&self) -> bool {
        self.estimator.is_linear() && self.family.tiltable(self.theta).is_some()
    }
}

/// Chooses and runs the numerator engine; falls back to direct simulation
/// with a warning when importance sampling is unavailable.
pub fn numerator(problem: &DeviationProblem<'_>, mc: &McConfig, stream: &RngStream) -> Result<ExitProbEstimate> {
    problem.check()?;
    let mut warnings = Vec::new();
    let engine = match mc.engine {
        Engine::Enumeration if !problem.enumerable() => {
            return Err(Error::Config(format!(
                "enumeration needs the bernoulli family, a sample-mean or MLE estimator and n ≤ {MAX_ENUMERATION_N}"
            )))
        }
        Engine::Is | Engine::Auto if (mc.use_is || mc.engine == Engine::Is) && !problem.tiltable() => {
            if problem.enumerable() && mc.engine == Engine::Auto {
                Engine::Enumeration
            } else {
                warnings.push(
                    "importance sampling needs a linear estimator and a tiltable family; using direct Monte Carlo"
                        .to_string(),
                );
                Engine::Mc
            }
        }
        Engine::Auto if problem.enumerable() => Engine::Enumeration,
        Engine::Auto if mc.use_is => Engine::Is,
        Engine::Auto => Engine::Mc,
        e => e,
    };
    let mut est = match engine {
        Engine::Enumeration => numerator_enumeration(problem)?,
        Engine::Is => numerator_is(problem, mc.n_trials as usize, stream)?,
        _ => numerator_mc(problem, mc.n_trials as usize, stream)?,
    };
    est.warnings.extend(warnings);
    Ok(est)
}

/// Direct simulation of `n_trials` samples of size `n`.
pub fn numerator_mc(problem: &DeviationProblem<'_>, n_trials: usize, stream: &RngStream) -> Result<ExitProbEstimate> {
    problem.check()?;
    if n_trials < 2 {
        return Err(Error::domain("direct simulation needs at least 2 trials"));
    }
    let k = problem.family.obs_dim();
    let n = problem.n as usize;
    let parts = par_chunks(stream, n_trials, |s, count| -> Result<Moments> {
        let mut m = Moments::default();
        let mut sample = vec![0.0; n * k];
        for _ in 0..count {
            for x in sample.chunks_mut(k) {
                problem.family.sample(problem.theta, s, x);
            }
            let est = problem.estimator.estimate(problem.family, &sample)?;
            m.push(if problem.exits(&est) { 1.0 } else { 0.0 });
        }
        Ok(m)
    });
    let m = merge_moments(parts.into_iter().collect::<Result<Vec<_>>>()?);
    Ok(binomial_estimate(&m, Method::Mc, Some(stream.master_seed())))
}

/// Exact binomial sum for Bernoulli frequencies.
pub fn numerator_enumeration(problem: &DeviationProblem<'_>) -> Result<ExitProbEstimate> {
    problem.check()?;
    if !problem.enumerable() {
        return Err(Error::domain("binomial enumeration is not available for this problem"));
    }
    let n = problem.n;
    let p = problem.theta[0];
    let domain = problem.family.theta_domain();
    let clip = matches!(problem.estimator, Estimator::Mle);
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let ln_nf = ln_gamma_unchecked(n as f64 + 1.0);
    let mut terms = Vec::new();
    for k in 0..=n {
        let mut est = [k as f64 / n as f64];
        if clip {
            domain.clip(&mut est, crate::models::CLIP_MARGIN);
        }
        if problem.exits(&est) {
            let kf = k as f64;
            terms.push(
                ln_nf - ln_gamma_unchecked(kf + 1.0) - ln_gamma_unchecked((n - k) as f64 + 1.0)
                    + kf * ln_p
                    + (n - k) as f64 * ln_q,
            );
        }
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_value = if max == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    };
    Ok(ExitProbEstimate::from_log(log_value.min(0.0), Method::Exact))
}

/// Importance sampling for the sample mean: each trial draws its whole
/// sample from the observation law tilted toward one nearest boundary
/// point (chosen uniformly), and is weighted by the mixture likelihood
/// ratio, which depends on the sample only through its sum.
pub fn numerator_is(problem: &DeviationProblem<'_>, n_trials: usize, stream: &RngStream) -> Result<ExitProbEstimate> {
    problem.check()?;
    if n_trials < 2 {
        return Err(Error::domain("importance sampling needs at least 2 trials"));
    }
    if !problem.estimator.is_linear() {
        return Err(Error::domain("importance sampling needs a linear estimator"));
    }
    let dist = problem
        .family
        .tiltable(problem.theta)
        .ok_or_else(|| Error::domain("the observation law has no tiltable form"))?;
    let d = dist.dim();
    let offset: Vec<f64> = dist.center().iter().zip(problem.theta).map(|(m, t)| m - t).collect();
    let inv = spd_inverse(problem.scaling)?;
    let points = nearest_boundary(problem.body)?;
    let mut tilts = Vec::new();
    for p in &points.representative_points {
        let target: Vec<f64> = inv.mul_vec(p).iter().zip(&offset).map(|(x, o)| problem.b_n * x - o).collect();
        let sol = dist.solve_tilt(&target)?;
        tilts.push((sol.h, sol.ln_phi));
    }
    let samplers = tilts.iter().map(|(h, _)| dist.tilted_sampler(h)).collect::<Result<Vec<_>>>()?;
    let n = problem.n as f64;
    let ln_j = (tilts.len() as f64).ln();
    let parts = par_chunks(stream, n_trials, |s, count| {
        let mut m = Moments::default();
        let mut y = vec![0.0; d];
        let mut sum = vec![0.0; d];
        let mut logs = vec![0.0; tilts.len()];
        for _ in 0..count {
            let j = ((s.uniform() * samplers.len() as f64) as usize).min(samplers.len() - 1);
            sum.fill(0.0);
            for _ in 0..problem.n {
                samplers[j].draw(s, &mut y);
                for (a, b) in sum.iter_mut().zip(&y) {
                    *a += b;
                }
            }
            let est: Vec<f64> = dist.center().iter().zip(&sum).map(|(c, v)| c + v / n).collect();
            if !problem.exits(&est) {
                m.push(0.0);
                continue;
            }
            for (l, (h, ln_phi)) in logs.iter_mut().zip(&tilts) {
                *l = h.iter().zip(&sum).map(|(a, b)| a * b).sum::<f64>() - n * ln_phi;
            }
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln() - ln_j;
            m.push((-lse).exp());
        }
        m
    });
    let m = merge_moments(parts);
    let value = m.mean();
    Ok(ExitProbEstimate {
        value,
        log_value: value.ln(),
        method: Method::Is,
        std_error: m.std_error(),
        n_samples: m.count,
        seed: Some(stream.master_seed()),
        warnings: Vec::new(),
        constant: None,
    })
}

/// `P(ζ ∉ √n b_n Ω)`: exact for balls, the asymptotic formula with an
/// importance-sampling cross-check for ellipsoids in the asymptotic
/// regime, importance sampling otherwise.
pub fn denominator(body: &ConvexBody, n: u64, b_n: f64, samples: usize, stream: &RngStream) -> Result<ExitProbEstimate> {
    if n == 0 || !(b_n > 0.0 && b_n.is_finite()) {
        return Err(Error::domain(format!("need n ≥ 1 and b_n > 0, got n={n}, b_n={b_n}")));
    }
    let t = (n as f64).sqrt() * b_n;
    let samples = samples.max(DENOMINATOR_IS_SAMPLES);
    match body {
        ConvexBody::Ball { dim, r } => exit_ball_exact(*dim, t, *r),
        ConvexBody::Ellipsoid { .. } => {
            let depth = t * nearest_boundary(body)?.min_distance;
            if depth < DEFAULT_REGIME_GUARD {
                return exit_is(body, t, samples, stream);
            }
            let mut asym = exit_asymptotic(body, t, DEFAULT_REGIME_GUARD)?;
            let is = exit_is(body, t, samples, stream)?;
            let gap = (asym.value - is.value).abs();
            if gap > (3.0 * is.std_error).max(0.05 * asym.value) {
                asym.warnings.push(format!(
                    "importance-sampling cross-check {:.6e} ± {:.2e} disagrees with the asymptotic value",
                    is.value, is.std_error
                ));
            }
            Ok(asym)
        }
        ConvexBody::Generic { .. } => exit_is(body, t, samples, stream),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: u64,
    pub b_n: f64,
    pub c_n: f64,
    pub theta: Vec<f64>,
    pub numerator: Option<ExitProbEstimate>,
    pub denominator: Option<ExitProbEstimate>,
    pub ratio: Option<f64>,
    pub ratio_std_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSummary {
    pub n: u64,
    pub b_n: f64,
    pub c_n: f64,
    /// `√n · b_n`
    pub t: f64,
    pub ratio_at_theta0: Option<f64>,
    /// Largest ratio over the θ-grid; a lower bound on the supremum over
    /// the window.
    pub sup_ratio: Option<f64>,
    pub sup_ratio_std_error: Option<f64>,
    pub sup_theta: Option<Vec<f64>>,
    /// `sup_ratio ≥ 1 − 3 · std_error`
    pub sup_at_least_one: bool,
    pub failed_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub master_seed: u64,
    pub warnings: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub summary: Vec<NSummary>,
}

/// Lower-case hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of the canonical (key-sorted, compact) JSON form.
pub fn canonical_hash<T: Serialize>(value: &T) -> Result<String> {
    let canonical = serde_json::to_string(&serde_json::to_value(value)?)?;
    Ok(sha256_hex(canonical.as_bytes()))
}

fn ratio_of(num: &ExitProbEstimate, den: &ExitProbEstimate) -> Result<(f64, f64)> {
    if den.log_value == f64::NEG_INFINITY {
        return Err(Error::domain("denominator underflowed to zero"));
    }
    let ratio = (num.log_value - den.log_value).exp();
    if !ratio.is_finite() {
        return Err(Error::domain("ratio is not finite"));
    }
    let rel = (num.relative_error().powi(2) + den.relative_error().powi(2)).sqrt();
    Ok((ratio, if ratio == 0.0 { num.std_error / den.value } else { ratio * rel }))
}

/// Runs the experiment over `n_grid` × θ-grid. Only configuration errors
/// abort; failures in individual cells are recorded in their rows.
pub fn efficiency_sweep(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let prep = config.prepare()?;
    let family = prep.family.as_ref();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (ni, &n) in config.n_grid.iter().enumerate() {
        let b_n = config.bn_rule.b_n(n);
        let c_n = config.cn_rule.c_n(n);
        let den_stream = RngStream::new(config.master_seed, DENOMINATOR_STREAM_BASE + ni as u64);
        let den = denominator(&prep.body, n, b_n, config.mc.n_trials as usize, &den_stream);
        let grid = theta_grid(family, &config.theta0, c_n * b_n, config.theta_grid_points);
        let first_row = rows.len();
        for (ti, theta) in grid.iter().enumerate() {
            let cell = ((ni as u64) << 16) + ti as u64 + 1;
            let problem = DeviationProblem {
                family,
                estimator: &prep.estimator,
                theta,
                n,
                b_n,
                body: &prep.body,
                scaling: &prep.scaling,
            };
            let outcome = den.as_ref().map_err(|e| e.to_string()).and_then(|den| {
                let num = numerator(&problem, &config.mc, &RngStream::new(config.master_seed, cell))
                    .map_err(|e| e.to_string())?;
                let (ratio, se) = ratio_of(&num, den).map_err(|e| e.to_string())?;
                Ok((num, den.clone(), ratio, se))
            });
            rows.push(match outcome {
                Ok((num, den, ratio, se)) => ReportRow {
                    n,
                    b_n,
                    c_n,
                    theta: theta.clone(),
                    numerator: Some(num),
                    denominator: Some(den),
                    ratio: Some(ratio),
                    ratio_std_error: Some(se),
                    error: None,
                },
                Err(msg) => ReportRow {
                    n,
                    b_n,
                    c_n,
                    theta: theta.clone(),
                    numerator: None,
                    denominator: den.as_ref().ok().cloned(),
                    ratio: None,
                    ratio_std_error: None,
                    error: Some(msg),
                },
            });
        }
        let cells = &rows[first_row..];
        let best = cells
            .iter()
            .filter_map(|r| Some((r.ratio?, r.ratio_std_error?, &r.theta)))
            .fold(None, |acc: Option<(f64, f64, &Vec<f64>)>, c| match acc {
                Some(a) if a.0 >= c.0 => Some(a),
                _ => Some(c),
            });
        summary.push(NSummary {
            n,
            b_n,
            c_n,
            t: (n as f64).sqrt() * b_n,
            ratio_at_theta0: cells[0].ratio,
            sup_ratio: best.map(|b| b.0),
            sup_ratio_std_error: best.map(|b| b.1),
            sup_theta: best.map(|b| b.2.clone()),
            sup_at_least_one: best.is_some_and(|(r, se, _)| r >= 1.0 - 3.0 * se),
            failed_rows: cells.iter().filter(|r| r.error.is_some()).count(),
        });
    }
    Ok(ExperimentReport {
        config: config.clone(),
        config_hash: canonical_hash(config)?,
        master_seed: config.master_seed,
        warnings: prep.warnings,
        rows,
        summary,
    })
}

/// Normalized log deviation probability against `−I(θ0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BahadurResult {
    pub n: u64,
    pub b_n: f64,
    pub probability: ExitProbEstimate,
    /// `(½ n b_n²)^{-1} ln P_θ0(|θ̂_n − θ0| > b_n)`
    pub normalized_log: f64,
    /// `−I(θ0)`
    pub bound: f64,
    pub slack: f64,
    /// Soft check `normalized_log ≥ bound − 0.5`.
    pub consistent: bool,
}

/// Evaluates the logarithmic deviation bound for a one-parameter family.
/// Gaussian families with the sample mean or MLE use the exact normal
/// tail; otherwise the numerator engines run with `A = 1` and the unit
/// interval, switching to importance sampling for small probabilities.
pub fn bahadur_log_bound(
    family: &dyn Family,
    theta0: f64,
    estimator: &Estimator,
    n: u64,
    b_n: f64,
    mc: &McConfig,
    stream: &RngStream,
) -> Result<BahadurResult> {
    if family.param_dim() != 1 {
        return Err(Error::domain("the logarithmic bound is evaluated for one-parameter families"));
    }
    let info = family.fisher(&[theta0])?.get(0, 0);
    let gaussian = matches!(family.name(), "gaussian_location" | "gaussian_mean_vector")
        && matches!(estimator, Estimator::SampleMean | Estimator::Mle);
    let probability = if gaussian {
        if n == 0 || !(b_n > 0.0) {
            return Err(Error::domain("need n ≥ 1 and b_n > 0"));
        }
        let z = (n as f64).sqrt() * b_n * info.sqrt();
        ExitProbEstimate::from_log(std::f64::consts::LN_2 + ln_normal_cdf(-z), Method::Exact)
    } else {
        let body = ConvexBody::ball(1, 1.0)?;
        let unit = SpdMatrix::identity(1);
        let problem = DeviationProblem {
            family,
            estimator,
            theta: &[theta0],
            n,
            b_n,
            body: &body,
            scaling: &unit,
        };
        let mut est = numerator(&problem, mc, stream)?;
        if est.method == Method::Mc && est.value < IS_SWITCH && problem.tiltable() {
            est = numerator_is(&problem, mc.n_trials as usize, &stream.child(u32::MAX as u64))?;
        }
        est
    };
    if probability.value == 0.0 && probability.log_value == f64::NEG_INFINITY {
        return Err(Error::NoSolution(
            "deviation probability estimate is zero; increase the trials or enable importance sampling".into(),
        ));
    }
    let normalized_log = probability.log_value / (0.5 * n as f64 * b_n * b_n);
    let bound = -info;
    Ok(BahadurResult {
        n,
        b_n,
        probability,
        normalized_log,
        bound,
        slack: normalized_log - bound,
        consistent: normalized_log >= bound - 0.5,
    })
}
