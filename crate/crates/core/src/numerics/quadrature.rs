//! Adaptive Gauss–Legendre quadrature for vector-valued integrands.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 10;
const MAX_DEPTH: usize = 40;

fn nodes() -> &'static [(f64, f64); ORDER] {
    static NODES: OnceLock<[(f64, f64); ORDER]> = OnceLock::new();
    NODES.get_or_init(|| {
        let mut out = [(0.0, 0.0); ORDER];
        let n = ORDER as f64;
        for (i, slot) in out.iter_mut().enumerate() {
            // Newton on P_n starting from the Chebyshev-like guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=ORDER {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

/// Tolerances for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-13, rel: 1e-10 }
    }
}

fn fixed_rule<F>(f: &F, a: f64, b: f64, m: usize, scratch: &mut [f64]) -> Vec<f64>
where
    F: Fn(f64, &mut [f64]),
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = vec![0.0; m];
    for &(x, w) in nodes() {
        f(mid + half * x, scratch);
        for (s, v) in acc.iter_mut().zip(scratch.iter()) {
            *s += w * half * v;
        }
    }
    acc
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Integrates an `m`-component function over `[a, b]`.
pub fn integrate_vec<F>(f: F, a: f64, b: f64, m: usize, tol: Tolerance) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    let mut scratch = vec![0.0; m];
    let whole = fixed_rule(&f, a, b, m, &mut scratch);
    let mut out = vec![0.0; m];
    recurse(&f, a, b, whole, m, tol, 0, &mut scratch, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    whole: Vec<f64>,
    m: usize,
    tol: Tolerance,
    depth: usize,
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()>
where
    F: Fn(f64, &mut [f64]),
{
    let mid = 0.5 * (a + b);
    let left = fixed_rule(f, a, mid, m, scratch);
    let right = fixed_rule(f, mid, b, m, scratch);
    let refined: Vec<f64> = left.iter().zip(&right).map(|(l, r)| l + r).collect();
    let diff = refined.iter().zip(&whole).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if !diff.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    if diff <= tol.abs.max(tol.rel * max_abs(&refined)) {
        for (o, v) in out.iter_mut().zip(&refined) {
            *o += v;
        }
        return Ok(());
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}] after {MAX_DEPTH} bisections (error {diff:e})"
        )));
    }
    // sqrt(2) rather than 2: keeps the absolute floor meaningful at depth
    let sub = Tolerance { abs: tol.abs * std::f64::consts::FRAC_1_SQRT_2, rel: tol.rel };
    recurse(f, a, mid, left, m, sub, depth + 1, scratch, out)?;
    recurse(f, mid, b, right, m, sub, depth + 1, scratch, out)
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_vec(|x, out| out[0] = f(x), a, b, 1, tol).map(|v| v[0])
}

/// Integral over the real line via `x = c + s·u/(1 − u²)`.
pub fn integrate_real_line_vec<F>(f: F, center: f64, scale: f64, m: usize, tol: Tolerance) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    let g = |u: f64, out: &mut [f64]| {
        let den = 1.0 - u * u;
        let x = center + scale * u / den;
        let jac = scale * (1.0 + u * u) / (den * den);
        f(x, out);
        for v in out.iter_mut() {
            *v = if *v == 0.0 { 0.0 } else { *v * jac };
        }
    };
    // split at zero so the symmetric halves adapt independently
    let mut lo = integrate_vec(g, -1.0, 0.0, m, tol)?;
    let hi = integrate_vec(g, 0.0, 1.0, m, tol)?;
    for (a, b) in lo.iter_mut().zip(hi) {
        *a += b;
    }
    Ok(lo)
}

/// Integral over `[0, ∞)` via `x = s·u/(1 − u)`.
pub fn integrate_half_line_vec<F>(f: F, scale: f64, m: usize, tol: Tolerance) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    let g = |u: f64, out: &mut [f64]| {
        let den = 1.0 - u;
        let x = scale * u / den;
        let jac = scale / (den * den);
        f(x, out);
        for v in out.iter_mut() {
            *v = if *v == 0.0 { 0.0 } else { *v * jac };
        }
    };
    integrate_vec(g, 0.0, 1.0, m, tol)
}

/// Nested adaptive integration over an axis-aligned box.
pub fn integrate_box<F>(f: &F, lo: &[f64], hi: &[f64], m: usize, tol: Tolerance) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    box_axis(f, lo, hi, 0, &vec![0.0; lo.len()], m, tol)
}

fn box_axis<F>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    axis: usize,
    point: &[f64],
    m: usize,
    tol: Tolerance,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    if axis + 1 == lo.len() {
        let base = point.to_vec();
        return integrate_vec(
            |x, out| {
                let mut p = base.clone();
                p[axis] = x;
                f(&p, out);
            },
            lo[axis],
            hi[axis],
            m,
            tol,
        );
    }
    // inner integrals are computed eagerly; errors surface through the cell
    let failure = std::cell::RefCell::new(None);
    let base = point.to_vec();
    let outer = integrate_vec(
        |x, out| {
            let mut p = base.clone();
            p[axis] = x;
            match box_axis(f, lo, hi, axis + 1, &p, m, tol) {
                Ok(v) => out.copy_from_slice(&v),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    out.iter_mut().for_each(|o| *o = 0.0);
                }
            }
        },
        lo[axis],
        hi[axis],
        m,
        tol,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(outer),
    }
}
