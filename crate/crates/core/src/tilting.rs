//! Conjugate (exponentially tilted) distributions.
//!
//! For a centered random vector `X ~ F` the tilted law is
//! `F_h(dx) = φ(h)^{-1} e^{h·x} F(dx)` with `φ(h) = E e^{h·X}`. Its mean
//! `m(h)` and covariance `σ(h)` drive the mean-matching solve `m(h) = v`
//! and importance sampling of sums.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numerics::linalg::{cholesky, CholeskyFactor};
use crate::numerics::quadrature::{integrate_box, Tolerance};
use crate::numerics::rng::par_chunks;
use crate::numerics::{RngStream, SpdMatrix};

const NEWTON_MAX_ITER: usize = 50;
const DIVERGENCE_LIMIT: f64 = 1e8;
const POLISH_STEPS: usize = 3;
const DENSITY_TOL: Tolerance = Tolerance { abs: 1e-15, rel: 1e-12 };

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A density on an axis-aligned box, integrated cell by cell.
#[derive(Clone)]
pub struct BoundedDensity {
    lo: Vec<f64>,
    hi: Vec<f64>,
    density: DensityFn,
    /// Upper bound of the (unnormalized) density, used for rejection sampling.
    fmax: f64,
    /// Partition of the box on which the density is smooth.
    cells: Vec<(Vec<f64>, Vec<f64>)>,
    norm: f64,
}

impl fmt::Debug for BoundedDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundedDensity")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("fmax", &self.fmax)
            .field("cells", &self.cells.len())
            .finish()
    }
}

impl BoundedDensity {
    /// A smooth density `f` on `[lo, hi]`, bounded above by `fmax`.
    /// `f` need not be normalized.
    pub fn from_fn(lo: Vec<f64>, hi: Vec<f64>, fmax: f64, f: DensityFn) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() || lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::domain("density box must be non-empty and finite"));
        }
        if !(fmax > 0.0 && fmax.is_finite()) {
            return Err(Error::domain("density bound must be positive"));
        }
        let cells = vec![(lo.clone(), hi.clone())];
        let mut out = BoundedDensity {
            lo,
            hi,
            density: f,
            fmax,
            cells,
            norm: 1.0,
        };
        out.norm = out.integrate(&vec![0.0; out.lo.len()], 0.0, 1)?[0];
        if !(out.norm > 0.0) {
            return Err(Error::domain("density integrates to zero"));
        }
        Ok(out)
    }

    /// Multilinear interpolation of `table` on a regular grid over the box.
    /// `shape[i]` grid points along axis `i` (endpoints included), table in
    /// row-major order.
    pub fn from_table(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        let d = lo.len();
        check_dim(d, hi.len())?;
        check_dim(d, shape.len())?;
        if shape.iter().any(|n| *n < 2) {
            return Err(Error::domain("table needs at least 2 points per axis"));
        }
        check_dim(shape.iter().product(), table.len())?;
        if table.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain("table values must be finite and non-negative"));
        }
        let fmax = table.iter().copied().fold(0.0, f64::max);
        let grid = Arc::new(Grid {
            lo: lo.clone(),
            hi: hi.clone(),
            shape: shape.clone(),
            table,
        });
        let g = Arc::clone(&grid);
        let mut out = Self::from_fn(lo.clone(), hi.clone(), fmax, Arc::new(move |x: &[f64]| g.eval(x)))?;
        out.cells = grid.cells();
        out.norm = out.integrate(&vec![0.0; d], 0.0, 1)?[0];
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// `∫ f(x) e^{h·x − shift} [1, x, x x'] dx` over the box, truncated to
    /// the first `m` components.
    fn integrate(&self, h: &[f64], shift: f64, m: usize) -> Result<Vec<f64>> {
        let d = self.dim();
        let integrand = |x: &[f64], out: &mut [f64]| {
            let w = (self.density)(x) * (h.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - shift).exp();
            fill_moments(x, w, d, m, out);
        };
        let mut total = vec![0.0; m];
        for (lo, hi) in &self.cells {
            let part = integrate_box(&integrand, lo, hi, m, DENSITY_TOL)?;
            for (t, p) in total.iter_mut().zip(part) {
                *t += p;
            }
        }
        Ok(total)
    }
}

fn fill_moments(x: &[f64], w: f64, d: usize, m: usize, out: &mut [f64]) {
    out[0] = w;
    if m == 1 {
        return;
    }
    for i in 0..d {
        out[1 + i] = w * x[i];
    }
    if m == 1 + d {
        return;
    }
    let mut idx = 1 + d;
    for i in 0..d {
        for j in i..d {
            out[idx] = w * x[i] * x[j];
            idx += 1;
        }
    }
}

#[derive(Debug)]
struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    shape: Vec<usize>,
    table: Vec<f64>,
}

impl Grid {
    fn eval(&self, x: &[f64]) -> f64 {
        let d = self.lo.len();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for i in 0..d {
            let cells = (self.shape[i] - 1) as f64;
            let pos = ((x[i] - self.lo[i]) / (self.hi[i] - self.lo[i]) * cells).clamp(0.0, cells);
            let b = (pos.floor() as usize).min(self.shape[i] - 2);
            base[i] = b;
            frac[i] = pos - b as f64;
        }
        let mut value = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut flat = 0;
            for i in 0..d {
                let bit = (corner >> i) & 1;
                weight *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
                flat = flat * self.shape[i] + base[i] + bit;
            }
            if weight != 0.0 {
                value += weight * self.table[flat];
            }
        }
        value
    }

    fn cells(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let d = self.lo.len();
        let counts: Vec<usize> = self.shape.iter().map(|n| n - 1).collect();
        let total: usize = counts.iter().product();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut lo = vec![0.0; d];
            let mut hi = vec![0.0; d];
            for i in (0..d).rev() {
                let c = rem % counts[i];
                rem /= counts[i];
                let step = (self.hi[i] - self.lo[i]) / counts[i] as f64;
                lo[i] = self.lo[i] + c as f64 * step;
                hi[i] = lo[i] + step;
            }
            out.push((lo, hi));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub enum TiltKind {
    Gaussian { cov: SpdMatrix, chol: CholeskyFactor },
    /// Centered atoms with their probabilities.
    Discrete { atoms: Vec<Vec<f64>>, probs: Vec<f64> },
    BoundedDensity(BoundedDensity),
}

/// A distribution shifted to mean zero, with its original mean kept in
/// `center`. All operations act on the centered variable.
#[derive(Debug, Clone)]
pub struct TiltableDistribution {
    dim: usize,
    center: Vec<f64>,
    kind: TiltKind,
    /// Largest `|x|` over the centered support (infinite for Gaussians).
    support_radius: f64,
    /// Tilt magnitudes below this keep `φ(h)` finite.
    mgf_domain: f64,
}

/// JSON distribution specification for the `tilt` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    Discrete {
        atoms: Vec<Atom>,
    },
    Density {
        #[serde(rename = "box")]
        bounds: Vec<[f64; 2]>,
        table: Vec<f64>,
        #[serde(default)]
        shape: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub prob: f64,
}

impl TiltableDistribution {
    pub fn gaussian(mean: Vec<f64>, cov: SpdMatrix) -> Result<Self> {
        check_dim(cov.dim(), mean.len())?;
        let chol = cholesky(&cov)?;
        Ok(TiltableDistribution {
            dim: mean.len(),
            center: mean,
            kind: TiltKind::Gaussian { cov, chol },
            support_radius: f64::INFINITY,
            mgf_domain: f64::INFINITY,
        })
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        Self::gaussian(vec![0.0; dim], SpdMatrix::identity(dim)).expect("identity covariance")
    }

    /// Atoms need not be centered or normalized; both are enforced here.
    pub fn discrete(points: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        check_dim(points.len(), probs.len())?;
        if points.is_empty() {
            return Err(Error::domain("discrete distribution needs at least one atom"));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::domain("atoms must have positive dimension"));
        }
        for p in &points {
            check_dim(dim, p.len())?;
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::domain("atom probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::domain("atom probabilities sum to zero"));
        }
        // drop null atoms: they are outside the support
        let (points, probs): (Vec<_>, Vec<_>) =
            points.into_iter().zip(probs).filter(|(_, p)| *p > 0.0).map(|(x, p)| (x, p / total)).unzip();
        let mut center = vec![0.0; dim];
        for (x, p) in points.iter().zip(&probs) {
            for (c, xi) in center.iter_mut().zip(x) {
                *c += p * xi;
            }
        }
        let atoms: Vec<Vec<f64>> =
            points.iter().map(|x| x.iter().zip(&center).map(|(a, c)| a - c).collect()).collect();
        let support_radius = atoms.iter().map(|a| norm(a)).fold(0.0, f64::max);
        Ok(TiltableDistribution {
            dim,
            center,
            kind: TiltKind::Discrete { atoms, probs },
            support_radius,
            mgf_domain: f64::INFINITY,
        })
    }

    pub fn bounded_density(density: BoundedDensity) -> Result<Self> {
        let d = density.dim();
        let raw = density.integrate(&vec![0.0; d], 0.0, 1 + d)?;
        let center: Vec<f64> = raw[1..].iter().map(|v| v / raw[0]).collect();
        let support_radius = (0..(1usize << d))
            .map(|corner| {
                (0..d)
                    .map(|i| {
                        let v = if (corner >> i) & 1 == 1 { density.hi[i] } else { density.lo[i] };
                        (v - center[i]).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        Ok(TiltableDistribution {
            dim: d,
            center,
            kind: TiltKind::BoundedDensity(density),
            support_radius,
            mgf_domain: f64::INFINITY,
        })
    }

    pub fn from_spec(spec: &DistSpec) -> Result<Self> {
        match spec {
            DistSpec::Gaussian { mean, cov } => Self::gaussian(mean.clone(), SpdMatrix::from_rows(cov)?),
            DistSpec::Discrete { atoms } => Self::discrete(
                atoms.iter().map(|a| a.point.clone()).collect(),
                atoms.iter().map(|a| a.prob).collect(),
            ),
            DistSpec::Density { bounds, table, shape } => {
                let lo = bounds.iter().map(|b| b[0]).collect();
                let hi = bounds.iter().map(|b| b[1]).collect();
                let shape = match shape {
                    Some(s) => s.clone(),
                    None if bounds.len() == 1 => vec![table.len()],
                    None => return Err(Error::domain("multi-dimensional density tables need a shape")),
                };
                Self::bounded_density(BoundedDensity::from_table(lo, hi, shape, table.clone())?)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Mean of the original (uncentered) distribution.
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn kind(&self) -> &TiltKind {
        &self.kind
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn mgf_domain(&self) -> f64 {
        self.mgf_domain
    }

    fn check_tilt(&self, h: &[f64]) -> Result<()> {
        check_dim(self.dim, h.len())?;
        let n = norm(h);
        if !n.is_finite() || n >= self.mgf_domain {
            return Err(Error::domain(format!("tilt |h| = {n} outside the mgf domain {}", self.mgf_domain)));
        }
        Ok(())
    }

    /// `ln φ(h)`, tilted mean and tilted covariance (row-major) in one pass.
    pub fn moments(&self, h: &[f64]) -> Result<TiltMoments> {
        self.check_tilt(h)?;
        let d = self.dim;
        let m = match &self.kind {
            TiltKind::Gaussian { cov, .. } => TiltMoments {
                ln_phi: 0.5 * cov.quad_form(h),
                mean: cov.mul_vec(h),
                cov: cov.as_slice().to_vec(),
            },
            TiltKind::Discrete { atoms, probs } => {
                let logits: Vec<f64> = atoms.iter().map(|a| dot(h, a)).collect();
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = logits.iter().zip(probs).map(|(l, p)| p * (l - max).exp()).collect();
                let z: f64 = weights.iter().sum();
                let mut mean = vec![0.0; d];
                let mut second = vec![0.0; d * d];
                for (a, w) in atoms.iter().zip(&weights) {
                    let w = w / z;
                    for i in 0..d {
                        mean[i] += w * a[i];
                        for j in 0..d {
                            second[i * d + j] += w * a[i] * a[j];
                        }
                    }
                }
                TiltMoments {
                    ln_phi: max + z.ln(),
                    cov: covariance(&mean, &second),
                    mean,
                }
            }
            TiltKind::BoundedDensity(dens) => {
                // work in centered coordinates: x = y − center
                let hc = dot(h, &self.center);
                let shift = dens.lo.iter().zip(&dens.hi).zip(h).map(|((l, u), hi)| (hi * l).max(hi * u)).sum::<f64>();
                let m = 1 + d + d * (d + 1) / 2;
                let raw = dens.integrate(h, shift, m)?;
                let z = raw[0];
                if !(z > 0.0) {
                    return Err(Error::Quadrature("tilted mass vanished".into()));
                }
                let raw_mean: Vec<f64> = raw[1..=d].iter().map(|v| v / z).collect();
                let mut second = vec![0.0; d * d];
                let mut idx = 1 + d;
                for i in 0..d {
                    for j in i..d {
                        second[i * d + j] = raw[idx] / z;
                        second[j * d + i] = raw[idx] / z;
                        idx += 1;
                    }
                }
                let cov = covariance(&raw_mean, &second);
                TiltMoments {
                    ln_phi: z.ln() + shift - hc - dens.norm.ln(),
                    mean: raw_mean.iter().zip(&self.center).map(|(a, c)| a - c).collect(),
                    cov,
                }
            }
        };
        if !m.ln_phi.is_finite() {
            return Err(Error::domain("moment generating function is not finite at this tilt"));
        }
        Ok(m)
    }

    /// `φ(h) = E e^{h·X}`.
    pub fn mgf(&self, h: &[f64]) -> Result<f64> {
        Ok(self.moments(h)?.ln_phi.exp())
    }

    pub fn ln_mgf(&self, h: &[f64]) -> Result<f64> {
        Ok(self.moments(h)?.ln_phi)
    }

    /// `m(h) = E_h X_h`.
    pub fn tilted_mean(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.moments(h)?.mean)
    }

    /// `σ(h) = Var X_h`.
    pub fn tilted_cov(&self, h: &[f64]) -> Result<SpdMatrix> {
        SpdMatrix::new(self.dim, symmetrize(self.dim, self.moments(h)?.cov))
    }

    fn outside_support_box(&self, v: &[f64]) -> bool {
        match &self.kind {
            TiltKind::Gaussian { .. } => false,
            TiltKind::Discrete { atoms, .. } => (0..self.dim).any(|i| {
                let lo = atoms.iter().map(|a| a[i]).fold(f64::INFINITY, f64::min);
                let hi = atoms.iter().map(|a| a[i]).fold(f64::NEG_INFINITY, f64::max);
                !(lo < v[i] && v[i] < hi)
            }),
            TiltKind::BoundedDensity(dens) => (0..self.dim).any(|i| {
                !(dens.lo[i] - self.center[i] < v[i] && v[i] < dens.hi[i] - self.center[i])
            }),
        }
    }

    /// Solves `m(h) = v` by damped Newton from `h₀ = v`.
    pub fn solve_tilt(&self, v: &[f64]) -> Result<TiltSolution> {
        check_dim(self.dim, v.len())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("target mean must be finite"));
        }
        if self.outside_support_box(v) {
            return Err(Error::NoSolution(format!("target {v:?} is not inside the support hull")));
        }
        let target_tol = 1e-10 * (1.0 + norm(v));
        let mut h = v.to_vec();
        let mut mom = self.moments(&h)?;
        let mut resid = residual(&mom.mean, v);
        let mut trace = vec![resid];
        let mut iterations = 0;
        while resid > target_tol {
            if iterations == NEWTON_MAX_ITER {
                return Err(Error::NonConvergence {
                    what: "tilt Newton iteration",
                    iterations,
                    trace,
                });
            }
            iterations += 1;
            let cov = SpdMatrix::new(self.dim, symmetrize(self.dim, mom.cov.clone())).map_err(|_| {
                Error::NoSolution(format!("tilted covariance degenerate at h = {h:?}; target likely outside the support hull"))
            })?;
            let gap: Vec<f64> = v.iter().zip(&mom.mean).map(|(a, b)| a - b).collect();
            let step = cholesky(&cov)?.solve(&gap);
            let mut scale = 1.0;
            loop {
                let cand: Vec<f64> = h.iter().zip(&step).map(|(a, s)| a + scale * s).collect();
                if let Ok(next) = self.moments(&cand) {
                    let r = residual(&next.mean, v);
                    if r < resid || scale < 1e-12 {
                        h = cand;
                        mom = next;
                        resid = r;
                        break;
                    }
                }
                scale *= 0.5;
                if scale < 1e-12 {
                    return Err(Error::NonConvergence {
                        what: "tilt Newton line search",
                        iterations,
                        trace,
                    });
                }
            }
            trace.push(resid);
            if norm(&h) > DIVERGENCE_LIMIT {
                return Err(Error::NoSolution(format!("tilt diverged; target {v:?} outside the support hull")));
            }
        }
        // polish: full steps kept only while they help
        for _ in 0..POLISH_STEPS {
            let Ok(cov) = SpdMatrix::new(self.dim, symmetrize(self.dim, mom.cov.clone())) else {
                break;
            };
            let gap: Vec<f64> = v.iter().zip(&mom.mean).map(|(a, b)| a - b).collect();
            let step = cholesky(&cov)?.solve(&gap);
            let cand: Vec<f64> = h.iter().zip(&step).map(|(a, s)| a + s).collect();
            match self.moments(&cand) {
                Ok(next) if residual(&next.mean, v) < resid => {
                    resid = residual(&next.mean, v);
                    h = cand;
                    mom = next;
                }
                _ => break,
            }
        }
        let tilted_cov = SpdMatrix::new(self.dim, symmetrize(self.dim, mom.cov))?;
        let rate = dot(&h, v) - mom.ln_phi;
        Ok(TiltSolution {
            v: v.to_vec(),
            phi: mom.ln_phi.exp(),
            ln_phi: mom.ln_phi,
            h,
            tilted_cov,
            rate,
            iterations,
        })
    }

    /// Draws `n` points from `F_h` with log likelihood ratios
    /// `ln dF/dF_h (x) = ln φ(h) − h·x`.
    pub fn sample_tilted(&self, h: &[f64], n: usize, stream: &RngStream) -> Result<WeightedSample> {
        let mom = self.moments(h)?;
        let d = self.dim;
        let ln_phi = mom.ln_phi;
        let sampler = TiltedSampler::new(self, h, &mom)?;
        let parts = par_chunks(stream, n, |s, count| {
            let mut pts = Vec::with_capacity(count * d);
            let mut lws = Vec::with_capacity(count);
            let mut x = vec![0.0; d];
            for _ in 0..count {
                sampler.draw(s, &mut x);
                lws.push(ln_phi - dot(h, &x));
                pts.extend_from_slice(&x);
            }
            (pts, lws)
        });
        let mut points = Vec::with_capacity(n * d);
        let mut log_weights = Vec::with_capacity(n);
        for (p, w) in parts {
            points.extend(p);
            log_weights.extend(w);
        }
        Ok(WeightedSample {
            dim: d,
            points,
            log_weights,
        })
    }

    /// A reusable sampler for `F_h`, for callers running their own loops.
    pub fn tilted_sampler(&self, h: &[f64]) -> Result<TiltedSampler<'_>> {
        let mom = self.moments(h)?;
        TiltedSampler::new(self, h, &mom)
    }
}

/// Draws single points from a tilted law.
pub struct TiltedSampler<'a> {
    dist: &'a TiltableDistribution,
    h: Vec<f64>,
    mean: Vec<f64>,
    cumulative: Vec<f64>,
    shift: f64,
}

impl<'a> TiltedSampler<'a> {
    fn new(dist: &'a TiltableDistribution, h: &[f64], mom: &TiltMoments) -> Result<Self> {
        let mut cumulative = Vec::new();
        let mut shift = 0.0;
        match &dist.kind {
            TiltKind::Discrete { atoms, probs } => {
                let mut acc = 0.0;
                for (a, p) in atoms.iter().zip(probs) {
                    acc += p * (dot(h, a) - mom.ln_phi).exp();
                    cumulative.push(acc);
                }
            }
            TiltKind::BoundedDensity(dens) => {
                shift = dens.lo.iter().zip(&dens.hi).zip(h).map(|((l, u), hi)| (hi * l).max(hi * u)).sum();
            }
            TiltKind::Gaussian { .. } => {}
        }
        Ok(TiltedSampler {
            dist,
            h: h.to_vec(),
            mean: mom.mean.clone(),
            cumulative,
            shift,
        })
    }

    /// Writes one centered draw into `x`.
    pub fn draw(&self, s: &mut RngStream, x: &mut [f64]) {
        match &self.dist.kind {
            TiltKind::Gaussian { chol, .. } => {
                let mut z = vec![0.0; self.dist.dim];
                s.fill_normal(&mut z);
                let lz = chol.mul_vec(&z);
                for ((xi, m), l) in x.iter_mut().zip(&self.mean).zip(lz) {
                    *xi = m + l;
                }
            }
            TiltKind::Discrete { atoms, .. } => {
                let total = *self.cumulative.last().expect("non-empty");
                let u = s.uniform() * total;
                let idx = self.cumulative.partition_point(|c| *c <= u).min(atoms.len() - 1);
                x.copy_from_slice(&atoms[idx]);
            }
            TiltKind::BoundedDensity(dens) => loop {
                let mut y = vec![0.0; self.dist.dim];
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = dens.lo[i] + s.uniform() * (dens.hi[i] - dens.lo[i]);
                }
                let accept = (dens.density)(&y) / dens.fmax * (dot(&self.h, &y) - self.shift).exp();
                if s.uniform() < accept {
                    for ((xi, yi), c) in x.iter_mut().zip(&y).zip(&self.dist.center) {
                        *xi = yi - c;
                    }
                    break;
                }
            },
        }
    }
}

/// Output of [`TiltableDistribution::moments`].
#[derive(Debug, Clone, PartialEq)]
pub struct TiltMoments {
    pub ln_phi: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltSolution {
    pub v: Vec<f64>,
    pub h: Vec<f64>,
    pub phi: f64,
    pub ln_phi: f64,
    pub tilted_cov: SpdMatrix,
    /// Legendre value `h·v − ln φ(h)`, non-negative and ≈ |v|²/2 near 0.
    pub rate: f64,
    pub iterations: usize,
}

impl TiltSolution {
    /// `−h·v + ln φ(h)`, the negated rate.
    pub fn lambda(&self) -> f64 {
        -self.rate
    }
}

/// Points from a tilted law with their log likelihood ratios back to the
/// base law.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub dim: usize,
    pub points: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl WeightedSample {
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Reweighted estimate of `E g(X)` under the base law, with its
    /// standard error.
    pub fn estimate<G: Fn(&[f64]) -> f64>(&self, g: G) -> (f64, f64) {
        let n = self.len() as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..self.len() {
            let v = self.log_weights[i].exp() * g(self.point(i));
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n;
        let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(m: &[f64], v: &[f64]) -> f64 {
    m.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

fn covariance(mean: &[f64], second: &[f64]) -> Vec<f64> {
    let d = mean.len();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = second[i * d + j] - mean[i] * mean[j];
        }
    }
    out
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::Moments;

    fn bernoulli_half() -> TiltableDistribution {
        TiltableDistribution::discrete(vec![vec![-0.5], vec![0.5]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn mgf_examples() {
        let g = TiltableDistribution::standard_gaussian(1);
        assert!((g.mgf(&[1.0]).unwrap() - 0.5f64.exp()).abs() < 1e-15);
        let b = bernoulli_half();
        assert!((b.mgf(&[0.8]).unwrap() - 0.4f64.cosh()).abs() < 1e-15);
        assert_eq!(b.mgf(&[0.0]).unwrap(), 1.0);
        assert!(g.mgf(&[f64::NAN]).is_err());
    }

    #[test]
    fn tilted_mean_examples() {
        let g = TiltableDistribution::standard_gaussian(2);
        assert_eq!(g.tilted_mean(&[0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
        let b = bernoulli_half();
        let m = b.tilted_mean(&[0.8473]).unwrap()[0];
        assert!((m - 0.5 * 0.42365f64.tanh()).abs() < 1e-12);
        assert!((m - 0.2).abs() < 1e-4);
        assert!(b.tilted_mean(&[0.0]).unwrap()[0].abs() < 1e-16);
        assert!((b.tilted_cov(&[0.0]).unwrap().get(0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn uncentered_inputs_are_centered() {
        let b = TiltableDistribution::discrete(vec![vec![0.0], vec![1.0]], vec![0.7, 0.3]).unwrap();
        assert!((b.center()[0] - 0.3).abs() < 1e-15);
        assert!(b.tilted_mean(&[0.0]).unwrap()[0].abs() < 1e-15);
        let g = TiltableDistribution::gaussian(vec![2.0], SpdMatrix::scalar(4.0).unwrap()).unwrap();
        assert_eq!(g.tilted_mean(&[0.5]).unwrap(), vec![2.0]);
    }

    #[test]
    fn solve_tilt_examples() {
        let g = TiltableDistribution::standard_gaussian(2);
        let sol = g.solve_tilt(&[0.3, -0.2]).unwrap();
        assert!((sol.h[0] - 0.3).abs() < 1e-14 && (sol.h[1] + 0.2).abs() < 1e-14);
        assert!((sol.rate - 0.065).abs() < 1e-14);
        assert!((sol.lambda() + 0.065).abs() < 1e-14);

        // bisection oracle on m(h) = ½ tanh(h/2) = 0.2
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 0.5 * (0.5 * mid).tanh() < 0.2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let sol = bernoulli_half().solve_tilt(&[0.2]).unwrap();
        assert!((sol.h[0] - lo).abs() < 1e-9);
        assert!((sol.h[0] - 0.847_297_860_387_203_8).abs() < 1e-9);

        assert!(matches!(bernoulli_half().solve_tilt(&[0.6]), Err(Error::NoSolution(_))));
        assert!(matches!(bernoulli_half().solve_tilt(&[0.5]), Err(Error::NoSolution(_))));
    }

    #[test]
    fn solve_tilt_near_hull_boundary() {
        let b = bernoulli_half();
        for v in [0.45, 0.49, 0.499, -0.499] {
            let sol = b.solve_tilt(&[v]).unwrap();
            let m = b.tilted_mean(&sol.h).unwrap()[0];
            assert!((m - v).abs() <= 1e-10 * (1.0 + v.abs()), "v={v}");
        }
    }

    #[test]
    fn discrete_two_dim_hull() {
        // square with corners (±1, ±1)
        let pts = vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
        let d = TiltableDistribution::discrete(pts, vec![0.25; 4]).unwrap();
        let sol = d.solve_tilt(&[0.5, -0.3]).unwrap();
        // independent coordinates: h_i = atanh(v_i)
        assert!((sol.h[0] - 0.5f64.atanh()).abs() < 1e-9);
        assert!((sol.h[1] + 0.3f64.atanh()).abs() < 1e-9);
        assert!(d.solve_tilt(&[1.5, 0.0]).is_err());
    }

    fn fd_jacobian_check(dist: &TiltableDistribution, h: &[f64]) {
        let d = dist.dim();
        let cov = dist.tilted_cov(h).unwrap();
        let step = 1e-4;
        for j in 0..d {
            let mut hp = h.to_vec();
            let mut hm = h.to_vec();
            hp[j] += step;
            hm[j] -= step;
            let mp = dist.tilted_mean(&hp).unwrap();
            let mm = dist.tilted_mean(&hm).unwrap();
            for i in 0..d {
                let fd = (mp[i] - mm[i]) / (2.0 * step);
                let exact = cov.get(i, j);
                let scale = cov.max_abs();
                assert!((fd - exact).abs() <= 1e-5 * scale, "({i},{j}) fd={fd} exact={exact}");
            }
        }
    }

    #[test]
    fn jacobian_matches_tilted_covariance() {
        fd_jacobian_check(&TiltableDistribution::standard_gaussian(2), &[0.4, -1.1]);
        let cov = SpdMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 0.5]]).unwrap();
        fd_jacobian_check(&TiltableDistribution::gaussian(vec![0.0, 1.0], cov).unwrap(), &[0.2, 0.7]);
        for h in [-2.0, -0.3, 0.0, 0.8, 3.0] {
            fd_jacobian_check(&bernoulli_half(), &[h]);
        }
    }

    #[test]
    fn gaussian_rate_is_half_square() {
        let g = TiltableDistribution::standard_gaussian(3);
        for i in 0..20 {
            let v = [0.1 * i as f64, -0.05 * i as f64, 0.02];
            let sol = g.solve_tilt(&v).unwrap();
            let half_sq = 0.5 * v.iter().map(|x| x * x).sum::<f64>();
            assert!((sol.rate - half_sq).abs() < 1e-10);
        }
    }

    #[test]
    fn small_v_expansion() {
        // Rademacher (unit variance): h(v) = atanh v = v + v³/3 + …
        let rad = TiltableDistribution::discrete(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        // uniform on [−√3, √3] (unit variance) as a tabulated density
        let s3 = 3f64.sqrt();
        let unif = TiltableDistribution::bounded_density(
            BoundedDensity::from_table(vec![-s3], vec![s3], vec![2], vec![1.0, 1.0]).unwrap(),
        )
        .unwrap();
        // fitted once on this grid and frozen
        const C: f64 = 0.04;
        for dist in [&rad, &unif] {
            for i in 1..=20 {
                let v = 0.005 * i as f64;
                let h = dist.solve_tilt(&[v]).unwrap().h[0];
                assert!((h - v).abs() <= C * v * v, "v={v} h={h}");
            }
        }
    }

    #[test]
    fn bounded_density_uniform() {
        let unif = TiltableDistribution::bounded_density(
            BoundedDensity::from_table(vec![0.0], vec![2.0], vec![3], vec![1.0, 1.0, 1.0]).unwrap(),
        )
        .unwrap();
        assert!((unif.center()[0] - 1.0).abs() < 1e-12);
        // centered uniform on [−1, 1]: φ(h) = sinh(h)/h
        for h in [0.3f64, 1.0, 4.0] {
            let exact = h.sinh() / h;
            assert!((unif.mgf(&[h]).unwrap() / exact - 1.0).abs() < 1e-8);
        }
        assert!((unif.tilted_cov(&[0.0]).unwrap().get(0, 0) - 1.0 / 3.0).abs() < 1e-10);
        fd_jacobian_check(&unif, &[0.7]);
        let sol = unif.solve_tilt(&[0.4]).unwrap();
        assert!((unif.tilted_mean(&sol.h).unwrap()[0] - 0.4).abs() < 1e-10 * 1.4);
        assert!(unif.solve_tilt(&[1.2]).is_err());
    }

    #[test]
    fn bounded_density_two_dim() {
        // f(x, y) ∝ 1 + x on [0,1]²  (table is exact for bilinear f)
        let dens = BoundedDensity::from_table(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2], vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        let d = TiltableDistribution::bounded_density(dens).unwrap();
        // E x = ∫ x(1+x) / ∫(1+x) = (1/2 + 1/3)/(3/2) = 5/9
        assert!((d.center()[0] - 5.0 / 9.0).abs() < 1e-12);
        assert!((d.center()[1] - 0.5).abs() < 1e-12);
        fd_jacobian_check(&d, &[0.3, -0.5]);
    }

    #[test]
    fn sample_tilted_gaussian_mean() {
        let g = TiltableDistribution::standard_gaussian(2);
        let s = g.sample_tilted(&[1.0, 0.0], 100_000, &RngStream::new(8, 0)).unwrap();
        let tol = 3.0 / (100_000f64).sqrt();
        let mut mx = Moments::default();
        let mut my = Moments::default();
        for i in 0..s.len() {
            mx.push(s.point(i)[0]);
            my.push(s.point(i)[1]);
        }
        assert!((mx.mean() - 1.0).abs() < tol);
        assert!(my.mean().abs() < tol);
    }

    #[test]
    fn sample_tilted_bernoulli_mean() {
        let b = bernoulli_half();
        let sol = b.solve_tilt(&[0.2]).unwrap();
        let s = b.sample_tilted(&sol.h, 100_000, &RngStream::new(9, 0)).unwrap();
        let mut m = Moments::default();
        for i in 0..s.len() {
            m.push(s.point(i)[0]);
        }
        assert!((m.mean() - 0.2).abs() < 3.0 * m.std_error());
    }

    #[test]
    fn reweighting_reproduces_base_expectation() {
        // base: standard gaussian, g = 1{X > 0.3}
        let g = TiltableDistribution::standard_gaussian(1);
        let s = g.sample_tilted(&[0.5], 100_000, &RngStream::new(10, 0)).unwrap();
        let (est, se) = s.estimate(|x| if x[0] > 0.3 { 1.0 } else { 0.0 });
        let mut direct = Moments::default();
        let mut rs = RngStream::new(10, 99);
        for _ in 0..100_000 {
            direct.push(if rs.normal() > 0.3 { 1.0 } else { 0.0 });
        }
        let combined = (se * se + direct.std_error().powi(2)).sqrt();
        assert!((est - direct.mean()).abs() < 3.0 * combined);

        // bounded density: uniform, tail P(X > 0.8) = 0.1 on [−1, 1]
        let unif = TiltableDistribution::bounded_density(
            BoundedDensity::from_table(vec![-1.0], vec![1.0], vec![2], vec![1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let s = unif.sample_tilted(&[2.0], 50_000, &RngStream::new(11, 0)).unwrap();
        let (est, se) = s.estimate(|x| if x[0] > 0.8 { 1.0 } else { 0.0 });
        assert!((est - 0.1).abs() < 3.0 * se);
    }

    #[test]
    fn spec_parsing() {
        let spec: DistSpec = serde_json::from_str(r#"{"kind":"discrete","atoms":[{"point":[-0.5],"prob":0.5},{"point":[0.5],"prob":0.5}]}"#).unwrap();
        let d = TiltableDistribution::from_spec(&spec).unwrap();
        assert!((d.mgf(&[0.8]).unwrap() - 0.4f64.cosh()).abs() < 1e-15);
        let spec: DistSpec = serde_json::from_str(r#"{"kind":"gaussian","mean":[0,0],"cov":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(TiltableDistribution::from_spec(&spec).unwrap().dim(), 2);
        let spec: DistSpec = serde_json::from_str(r#"{"kind":"density","box":[[-1,1]],"table":[1,1,1]}"#).unwrap();
        assert_eq!(TiltableDistribution::from_spec(&spec).unwrap().dim(), 1);
    }
}
