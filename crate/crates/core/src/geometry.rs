//! Central-symmetric convex deviation sets and their nearest boundary points.
//!
//! Membership is always the open interior: a point on the boundary is *not*
//! contained, so `x ∉ tΩ` is the closed exit event.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numerics::linalg::MAX_DIM;
use crate::numerics::RngStream;

/// Membership and support-function oracle for a body without closed form.
///
/// Both functions must be pure; `support(u)` is `sup { u·x : x ∈ Ω }`.
pub trait BodyOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> bool;
    fn support(&self, u: &[f64]) -> f64;
}

#[derive(Debug, Clone)]
pub enum ConvexBody {
    /// `{ |x| < r }`
    Ball { dim: usize, r: f64 },
    /// `{ Σ σ_i² x_i² < r² }` with `σ_1 ≥ … ≥ σ_d > 0`.
    Ellipsoid { sigma: Vec<f64>, r: f64 },
    /// `scale · Ω_oracle`
    Generic { oracle: Arc<dyn BodyOracle>, scale: f64 },
}

/// JSON body specification accepted by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Ball { dim: usize, r: f64 },
    Ellipsoid { sigma: Vec<f64>, r: f64 },
}

fn check_body_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::domain(format!("body dimension must be in 1..={MAX_DIM}, got {dim}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

impl ConvexBody {
    pub fn ball(dim: usize, r: f64) -> Result<Self> {
        check_body_dim(dim)?;
        check_positive("ball radius", r)?;
        Ok(ConvexBody::Ball { dim, r })
    }

    pub fn ellipsoid(sigma: Vec<f64>, r: f64) -> Result<Self> {
        check_body_dim(sigma.len())?;
        check_positive("ellipsoid level", r)?;
        for s in &sigma {
            check_positive("ellipsoid weight", *s)?;
        }
        if sigma.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::domain(format!(
                "ellipsoid weights must be sorted in descending order, got {sigma:?}"
            )));
        }
        Ok(ConvexBody::Ellipsoid { sigma, r })
    }

    pub fn generic(oracle: Arc<dyn BodyOracle>) -> Result<Self> {
        check_body_dim(oracle.dim())?;
        Ok(ConvexBody::Generic { oracle, scale: 1.0 })
    }

    pub fn from_spec(spec: &BodySpec) -> Result<Self> {
        match spec {
            BodySpec::Ball { dim, r } => Self::ball(*dim, *r),
            BodySpec::Ellipsoid { sigma, r } => Self::ellipsoid(sigma.clone(), *r),
        }
    }

    /// The serializable description, if the body has one.
    pub fn to_spec(&self) -> Option<BodySpec> {
        match self {
            ConvexBody::Ball { dim, r } => Some(BodySpec::Ball { dim: *dim, r: *r }),
            ConvexBody::Ellipsoid { sigma, r } => Some(BodySpec::Ellipsoid {
                sigma: sigma.clone(),
                r: *r,
            }),
            ConvexBody::Generic { .. } => None,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Ball { dim, .. } => *dim,
            ConvexBody::Ellipsoid { sigma, .. } => sigma.len(),
            ConvexBody::Generic { oracle, .. } => oracle.dim(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(self.contains_unchecked(x))
    }

    /// Membership without the dimension check, for hot sampling loops.
    pub fn contains_unchecked(&self, x: &[f64]) -> bool {
        match self {
            ConvexBody::Ball { r, .. } => x.iter().map(|v| v * v).sum::<f64>() < r * r,
            ConvexBody::Ellipsoid { sigma, r } => {
                sigma.iter().zip(x).map(|(s, v)| s * s * v * v).sum::<f64>() < r * r
            }
            ConvexBody::Generic { oracle, scale } => {
                let y: Vec<f64> = x.iter().map(|v| v / scale).collect();
                oracle.contains(&y)
            }
        }
    }

    /// `t·Ω`.
    pub fn scale(&self, t: f64) -> Result<Self> {
        check_positive("scale factor", t)?;
        Ok(match self {
            ConvexBody::Ball { dim, r } => ConvexBody::Ball { dim: *dim, r: r * t },
            ConvexBody::Ellipsoid { sigma, r } => ConvexBody::Ellipsoid {
                sigma: sigma.clone(),
                r: r * t,
            },
            ConvexBody::Generic { oracle, scale } => ConvexBody::Generic {
                oracle: Arc::clone(oracle),
                scale: scale * t,
            },
        })
    }

    /// Support function `sup { u·x : x ∈ Ω }`.
    pub fn support(&self, u: &[f64]) -> f64 {
        match self {
            ConvexBody::Ball { r, .. } => r * norm(u),
            ConvexBody::Ellipsoid { sigma, r } => {
                r * sigma.iter().zip(u).map(|(s, v)| (v / s).powi(2)).sum::<f64>().sqrt()
            }
            ConvexBody::Generic { oracle, scale } => scale * oracle.support(u),
        }
    }

    /// Distance from the origin to the boundary along unit direction `u`.
    pub fn radial_distance(&self, u: &[f64]) -> Result<f64> {
        match self {
            ConvexBody::Ball { r, .. } => Ok(*r),
            ConvexBody::Ellipsoid { sigma, r } => {
                Ok(r / sigma.iter().zip(u).map(|(s, v)| s * s * v * v).sum::<f64>().sqrt())
            }
            ConvexBody::Generic { .. } => self.radial_bisection(u),
        }
    }

    fn radial_bisection(&self, u: &[f64]) -> Result<f64> {
        let upper = self.support(u);
        if !upper.is_finite() {
            return Err(Error::domain("body is unbounded (infinite support function)"));
        }
        // ρ(u)·u lies in the closure, so ρ(u) ≤ h(u)
        let mut lo = 0.0;
        let mut hi = upper * (1.0 + 1e-12) + f64::MIN_POSITIVE;
        let mut x = vec![0.0; u.len()];
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            for (xi, ui) in x.iter_mut().zip(u) {
                *xi = mid * ui;
            }
            if self.contains_unchecked(&x) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    v.iter_mut().for_each(|x| *x /= n);
}

/// Points of `∂Ω` nearest the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPointSet {
    pub min_distance: f64,
    pub representative_points: Vec<Vec<f64>>,
    /// 0 for an isolated antipodal pair, `k − 1` for a `(k−1)`-sphere.
    pub component_dimension: usize,
    /// Orthonormal basis of the subspace containing the attaining set.
    pub span: Vec<Vec<f64>>,
}

impl BoundaryPointSet {
    fn axis_aligned(dim: usize, k: usize, distance: f64) -> Self {
        let mut reps = Vec::with_capacity(2 * k);
        let mut span = Vec::with_capacity(k);
        for i in 0..k {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            let y: Vec<f64> = e.iter().map(|v| v * distance).collect();
            reps.push(y.iter().map(|v| -v).collect());
            reps.push(y);
            span.push(e);
        }
        BoundaryPointSet {
            min_distance: distance,
            representative_points: reps,
            component_dimension: k - 1,
            span,
        }
    }
}

/// Relative tolerance for treating leading ellipsoid weights as tied.
pub const MULTIPLICITY_TOL: f64 = 1e-9;

/// Multiplicity of the largest ellipsoid weight.
pub fn leading_multiplicity(sigma: &[f64]) -> usize {
    let s1 = sigma[0];
    sigma.iter().take_while(|s| (s1 - **s) <= MULTIPLICITY_TOL * s1).count()
}

const GENERIC_DIRECTIONS: usize = 2_000;
const GENERIC_SEED: u64 = 0x6e65_6172_6573_7421;

/// The nearest-boundary set `M = { x ∈ ∂Ω : |x| = inf_{y ∈ ∂Ω} |y| }`.
pub fn nearest_boundary(body: &ConvexBody) -> Result<BoundaryPointSet> {
    match body {
        ConvexBody::Ball { dim, r } => Ok(BoundaryPointSet::axis_aligned(*dim, *dim, *r)),
        ConvexBody::Ellipsoid { sigma, r } => {
            let k = leading_multiplicity(sigma);
            Ok(BoundaryPointSet::axis_aligned(sigma.len(), k, r / sigma[0]))
        }
        ConvexBody::Generic { .. } => generic_nearest_boundary(body),
    }
}

fn generic_nearest_boundary(body: &ConvexBody) -> Result<BoundaryPointSet> {
    let d = body.dim();
    if !body.contains_unchecked(&vec![0.0; d]) {
        return Err(Error::domain("body does not contain the origin in its interior"));
    }
    let mut stream = RngStream::new(GENERIC_SEED, 0);
    let mut best_dir = vec![0.0; d];
    let mut best = f64::INFINITY;
    let mut u = vec![0.0; d];
    for i in 0..GENERIC_DIRECTIONS {
        if i < 2 * d {
            // always probe the coordinate axes
            u.iter_mut().for_each(|v| *v = 0.0);
            u[i / 2] = if i % 2 == 0 { 1.0 } else { -1.0 };
        } else {
            stream.fill_normal(&mut u);
            normalize(&mut u);
        }
        let rho = body.radial_distance(&u)?;
        if rho < best {
            best = rho;
            best_dir.copy_from_slice(&u);
        }
    }
    if !(best > 0.0) {
        return Err(Error::domain("body has zero inradius"));
    }
    // pattern search on the sphere
    let mut step = 0.1;
    while step > 1e-10 {
        let mut improved = false;
        for axis in 0..d {
            for sign in [1.0, -1.0] {
                let mut cand = best_dir.clone();
                cand[axis] += sign * step;
                normalize(&mut cand);
                let rho = body.radial_distance(&cand)?;
                if rho < best {
                    best = rho;
                    best_dir = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let y: Vec<f64> = best_dir.iter().map(|v| v * best).collect();
    let minus: Vec<f64> = y.iter().map(|v| -v).collect();
    Ok(BoundaryPointSet {
        min_distance: norm(&y),
        representative_points: vec![y, minus],
        component_dimension: 0,
        span: vec![best_dir],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Pass,
    Fail,
    Unknown,
}

/// Outcome of checking convexity/symmetry (B1), smoothness (B2) and
/// strict curvature (B3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BAssumptionReport {
    pub b1: Check,
    pub b2: Check,
    pub b3: Check,
    /// Range of principal curvature magnitudes of `∂Ω`, when known.
    pub curvature_bounds: Option<[f64; 2]>,
    /// Every principal curvature strictly positive in the outward-bending
    /// sense, when known.
    pub strictly_convex: Option<bool>,
    pub symmetry_probes: usize,
    pub symmetry_violations: usize,
    pub convexity_violations: usize,
}

const SYMMETRY_PROBES: usize = 10_000;

pub fn validate_b_assumptions(body: &ConvexBody) -> BAssumptionReport {
    let d = body.dim();
    // bounding box from the support function along the axes
    let mut half_widths = vec![0.0; d];
    for (i, w) in half_widths.iter_mut().enumerate() {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        let plus = body.support(&e);
        e[i] = -1.0;
        let minus = body.support(&e);
        *w = 1.5 * plus.abs().max(minus.abs());
    }
    let bounded = half_widths.iter().all(|w| w.is_finite() && *w > 0.0);

    let mut symmetry_violations = 0;
    let mut convexity_violations = 0;
    if bounded {
        let mut stream = RngStream::new(GENERIC_SEED, 1);
        let mut x = vec![0.0; d];
        let mut neg = vec![0.0; d];
        let mut prev_inside: Option<Vec<f64>> = None;
        for _ in 0..SYMMETRY_PROBES {
            for (xi, w) in x.iter_mut().zip(&half_widths) {
                *xi = (2.0 * stream.uniform() - 1.0) * w;
            }
            for (n, v) in neg.iter_mut().zip(&x) {
                *n = -v;
            }
            let inside = body.contains_unchecked(&x);
            if inside != body.contains_unchecked(&neg) {
                symmetry_violations += 1;
            }
            if inside {
                if let Some(p) = &prev_inside {
                    let mid: Vec<f64> = p.iter().zip(&x).map(|(a, b)| 0.5 * (a + b)).collect();
                    if !body.contains_unchecked(&mid) {
                        convexity_violations += 1;
                    }
                }
                prev_inside = Some(x.clone());
            }
        }
    }
    let b1 = if bounded && symmetry_violations == 0 && convexity_violations == 0 {
        Check::Pass
    } else {
        Check::Fail
    };

    let (b2, b3, curvature_bounds, strictly_convex) = match body {
        // a 0-dimensional boundary: both conditions hold vacuously
        _ if d == 1 && !matches!(body, ConvexBody::Generic { .. }) => {
            (Check::Pass, Check::Pass, None, None)
        }
        ConvexBody::Ball { r, .. } => (Check::Pass, Check::Pass, Some([1.0 / r, 1.0 / r]), Some(true)),
        ConvexBody::Ellipsoid { sigma, r } => {
            // semi-axes a_i = r/σ_i; curvatures lie in [a_min/a_max², a_max/a_min²]
            let a_max = r / sigma[sigma.len() - 1];
            let a_min = r / sigma[0];
            let lo = a_min / (a_max * a_max);
            let hi = a_max / (a_min * a_min);
            let ok = lo > 0.0 && hi.is_finite();
            let c = if ok { Check::Pass } else { Check::Fail };
            (Check::Pass, c, Some([lo, hi]), Some(ok))
        }
        ConvexBody::Generic { .. } => (Check::Unknown, Check::Unknown, None, None),
    };

    BAssumptionReport {
        b1,
        b2,
        b3,
        curvature_bounds,
        strictly_convex,
        symmetry_probes: if bounded { SYMMETRY_PROBES } else { 0 },
        symmetry_violations,
        convexity_violations,
    }
}

/// Axis-aligned box `{ lo < x < hi }`, an intersection of half-spaces.
#[derive(Debug, Clone)]
pub struct BoxBody {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BodyOracle for BoxBody {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l < v && v < h)
    }

    fn support(&self, u: &[f64]) -> f64 {
        u.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (l, h))| (v * l).max(v * h)).sum()
    }
}

/// `{ Σ |x_i|^p < r^p }` for `p ≥ 1`.
#[derive(Debug, Clone)]
pub struct LpBall {
    pub dim: usize,
    pub p: f64,
    pub r: f64,
}

impl BodyOracle for LpBall {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter().map(|v| v.abs().powf(self.p)).sum::<f64>() < self.r.powf(self.p)
    }

    fn support(&self, u: &[f64]) -> f64 {
        if self.p == 1.0 {
            return self.r * u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        }
        let q = self.p / (self.p - 1.0);
        self.r * u.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn membership_examples() {
        let ball = ConvexBody::ball(3, 1.0).unwrap();
        assert!(ball.contains(&[0.0, 0.0, 0.0]).unwrap());
        assert!(!ball.contains(&[1.0, 0.0, 0.0]).unwrap());
        let ell = ConvexBody::ellipsoid(vec![1.0, 0.5], 1.0).unwrap();
        assert!(!ell.contains(&[0.0, 2.0001]).unwrap());
        assert!(ell.contains(&[0.0, 1.9999]).unwrap());
        assert!(matches!(ball.contains(&[0.0, 0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ball_symmetry_on_random_points() {
        let ball = ConvexBody::ball(4, 1.0).unwrap();
        let mut s = RngStream::new(5, 0);
        for _ in 0..1_000 {
            let mut x = vec![0.0; 4];
            s.fill_normal(&mut x);
            x.iter_mut().for_each(|v| *v *= 0.6);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            assert_eq!(ball.contains(&x).unwrap(), ball.contains(&neg).unwrap());
        }
    }

    #[test]
    fn construction_errors() {
        assert!(ConvexBody::ellipsoid(vec![0.5, 1.0], 1.0).is_err());
        assert!(ConvexBody::ellipsoid(vec![1.0, -0.5], 1.0).is_err());
        assert!(ConvexBody::ball(0, 1.0).is_err());
        assert!(ConvexBody::ball(2, 0.0).is_err());
        assert!(ConvexBody::ball(2, 1.0).unwrap().scale(0.0).is_err());
    }

    #[test]
    fn scaling_examples() {
        match ConvexBody::ball(2, 1.0).unwrap().scale(3.0).unwrap() {
            ConvexBody::Ball { r, .. } => assert_eq!(r, 3.0),
            _ => unreachable!(),
        }
        match ConvexBody::ellipsoid(vec![2.0, 1.0], 1.5).unwrap().scale(2.0).unwrap() {
            ConvexBody::Ellipsoid { sigma, r } => {
                assert_eq!(sigma, vec![2.0, 1.0]);
                assert_eq!(r, 3.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn generic_scaling_matches_oracle() {
        let body = ConvexBody::generic(Arc::new(LpBall { dim: 2, p: 4.0, r: 1.0 })).unwrap();
        let mut s = RngStream::new(11, 0);
        for _ in 0..1_000 {
            let x = [2.0 * s.normal(), 2.0 * s.normal()];
            let t = 0.1 + 3.0 * s.uniform();
            let scaled = body.scale(t).unwrap();
            let direct = body.contains(&[x[0] / t, x[1] / t]).unwrap();
            assert_eq!(scaled.contains(&x).unwrap(), direct);
        }
    }

    #[test]
    fn nearest_boundary_examples() {
        let m = nearest_boundary(&ConvexBody::ball(3, 2.0).unwrap()).unwrap();
        assert_eq!(m.min_distance, 2.0);
        assert_eq!(m.component_dimension, 2);

        let m = nearest_boundary(&ConvexBody::ellipsoid(vec![1.0, 0.5], 1.0).unwrap()).unwrap();
        assert_eq!(m.min_distance, 1.0);
        assert_eq!(m.component_dimension, 0);
        assert_eq!(m.representative_points, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);

        let m = nearest_boundary(&ConvexBody::ellipsoid(vec![1.0, 1.0, 0.5], 1.0).unwrap()).unwrap();
        assert_eq!(m.min_distance, 1.0);
        assert_eq!(m.component_dimension, 1);
    }

    #[test]
    fn generic_nearest_boundary_finds_inradius() {
        // box [-1, 1] x [-3, 3]: nearest points ±e_1
        let b = ConvexBody::generic(Arc::new(BoxBody {
            lo: vec![-1.0, -3.0],
            hi: vec![1.0, 3.0],
        }))
        .unwrap();
        let m = nearest_boundary(&b).unwrap();
        assert!((m.min_distance - 1.0).abs() < 1e-10);
        // L4 ball: inradius along the axes is r
        let l4 = ConvexBody::generic(Arc::new(LpBall { dim: 3, p: 4.0, r: 2.0 })).unwrap();
        let m = nearest_boundary(&l4).unwrap();
        assert!((m.min_distance - 2.0).abs() < 1e-10);
        // L1 ball: inradius r/√d along the diagonals
        let l1 = ConvexBody::generic(Arc::new(LpBall { dim: 2, p: 1.0, r: 1.0 })).unwrap();
        let m = nearest_boundary(&l1).unwrap();
        assert!((m.min_distance - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn generic_errors() {
        let shifted = ConvexBody::generic(Arc::new(BoxBody {
            lo: vec![0.5, -1.0],
            hi: vec![2.0, 1.0],
        }))
        .unwrap();
        assert!(nearest_boundary(&shifted).is_err());
    }

    fn representatives_on_boundary(body: &ConvexBody) {
        let m = nearest_boundary(body).unwrap();
        for y in &m.representative_points {
            assert!((norm(y) - m.min_distance).abs() <= 1e-10 * m.min_distance.max(1.0));
            let shrunk: Vec<f64> = y.iter().map(|v| v * (1.0 - 1e-9)).collect();
            let grown: Vec<f64> = y.iter().map(|v| v * (1.0 + 1e-9)).collect();
            assert!(body.contains(&shrunk).unwrap());
            assert!(!body.contains(&grown).unwrap());
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            assert!(m
                .representative_points
                .iter()
                .any(|z| z.iter().zip(&neg).all(|(a, b)| (a - b).abs() < 1e-12)));
        }
    }

    #[test]
    fn boundary_sandwich_and_negation_closure() {
        representatives_on_boundary(&ConvexBody::ball(3, 1.7).unwrap());
        representatives_on_boundary(&ConvexBody::ellipsoid(vec![2.0, 2.0, 0.3], 1.1).unwrap());
        representatives_on_boundary(&ConvexBody::generic(Arc::new(LpBall { dim: 2, p: 3.0, r: 1.0 })).unwrap());
        representatives_on_boundary(
            &ConvexBody::generic(Arc::new(BoxBody {
                lo: vec![-2.0, -0.5],
                hi: vec![2.0, 0.5],
            }))
            .unwrap(),
        );
    }

    #[test]
    fn b_assumption_examples() {
        let rep = validate_b_assumptions(&ConvexBody::ball(3, 2.0).unwrap());
        assert_eq!((rep.b1, rep.b2, rep.b3), (Check::Pass, Check::Pass, Check::Pass));
        assert_eq!(rep.curvature_bounds, Some([0.5, 0.5]));

        let rep = validate_b_assumptions(&ConvexBody::ellipsoid(vec![1.0, 0.5], 1.0).unwrap());
        assert_eq!((rep.b1, rep.b2, rep.b3), (Check::Pass, Check::Pass, Check::Pass));
        // semi-axes 1 and 2: curvatures 1/4 at (0, ±2), 2 at (±1, 0)
        assert_eq!(rep.curvature_bounds, Some([0.25, 2.0]));

        let asym = ConvexBody::generic(Arc::new(BoxBody {
            lo: vec![-2.0, -1.0],
            hi: vec![1.0, 1.0],
        }))
        .unwrap();
        let rep = validate_b_assumptions(&asym);
        assert_eq!(rep.b1, Check::Fail);
        assert!(rep.symmetry_violations > 0);
        assert_eq!(rep.b2, Check::Unknown);

        let sym = ConvexBody::generic(Arc::new(BoxBody {
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
        }))
        .unwrap();
        assert_eq!(validate_b_assumptions(&sym).b1, Check::Pass);
    }

    #[test]
    fn ellipse_curvature_oracle() {
        // curvature of x²/a² + y²/b² = 1 at parameter s
        let (a, b) = (1.0f64, 2.0f64);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..10_000 {
            let s = i as f64 * std::f64::consts::TAU / 10_000.0;
            let k = a * b / ((b * s.cos()).powi(2) + (a * s.sin()).powi(2)).powf(1.5);
            lo = lo.min(k);
            hi = hi.max(k);
        }
        let rep = validate_b_assumptions(&ConvexBody::ellipsoid(vec![1.0, 0.5], 1.0).unwrap());
        let [clo, chi] = rep.curvature_bounds.unwrap();
        assert!((clo - lo).abs() < 1e-9 && (chi - hi).abs() < 1e-9);
    }

    #[test]
    fn spec_round_trip() {
        let json = r#"{"kind":"ellipsoid","sigma":[1.0,0.5],"r":1.0}"#;
        let spec: BodySpec = serde_json::from_str(json).unwrap();
        let body = ConvexBody::from_spec(&spec).unwrap();
        assert_eq!(body.to_spec().unwrap(), spec);
        let bad: BodySpec = serde_json::from_str(r#"{"kind":"ellipsoid","sigma":[0.5,1.0],"r":1.0}"#).unwrap();
        assert!(ConvexBody::from_spec(&bad).is_err());
    }

    proptest! {
        #[test]
        fn scaling_consistency(x0 in -3.0f64..3.0, x1 in -3.0f64..3.0, t in 0.05f64..20.0) {
            for body in [
                ConvexBody::ball(2, 1.3).unwrap(),
                ConvexBody::ellipsoid(vec![1.0, 0.4], 0.9).unwrap(),
            ] {
                let scaled = body.scale(t).unwrap();
                prop_assert_eq!(scaled.contains(&[t * x0, t * x1]).unwrap(), body.contains(&[x0, x1]).unwrap());
                let a = nearest_boundary(&scaled).unwrap().min_distance;
                let b = nearest_boundary(&body).unwrap().min_distance;
                prop_assert!((a - t * b).abs() <= 1e-10 * a);
            }
        }
    }
}
