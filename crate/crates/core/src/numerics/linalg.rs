//! Small symmetric positive-definite matrices (d ≤ 16).

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub const MAX_DIM: usize = 16;

/// A symmetric positive-definite matrix stored row-major.
///
/// Construction checks symmetry (1e-12 relative) and positive definiteness
/// via a Cholesky factorization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SpdMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SpdMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::domain(format!("matrix dimension must be in 1..={MAX_DIM}, got {dim}")));
        }
        check_dim(dim * dim, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("matrix entries must be finite"));
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            for j in 0..i {
                if (data[i * dim + j] - data[j * dim + i]).abs() > 1e-12 * scale {
                    return Err(Error::domain(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let m = SpdMatrix { dim, data };
        cholesky_factor(&m)?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            check_dim(dim, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim]).expect("identity is SPD")
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, v) in diag.iter().enumerate() {
            data[i * dim + i] = *v;
        }
        Self::new(dim, data)
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::new(1, vec![v])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        self.data
            .chunks(self.dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x' M x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn mul(&self, other: &SpdMatrix) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|k| self.get(i, k) * other.get(k, j)).sum();
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_nalgebra()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    // Rebuilds from a computed product, symmetrizing away rounding noise.
    fn from_computed(dim: usize, mut data: Vec<f64>) -> Result<Self> {
        for i in 0..dim {
            for j in 0..i {
                let avg = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = avg;
                data[j * dim + i] = avg;
            }
        }
        Self::new(dim, data)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SpdMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SpdMatrix> for Vec<Vec<f64>> {
    fn from(m: SpdMatrix) -> Self {
        m.rows()
    }
}

/// Lower-triangular Cholesky factor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    data: Vec<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// `L x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..=i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Solves `L L' x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let s: f64 = (0..i).map(|j| self.get(i, j) * y[j]).sum();
            y[i] = (b[i] - s) / self.get(i, i);
        }
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|j| self.get(j, i) * x[j]).sum();
            x[i] = (y[i] - s) / self.get(i, i);
        }
        x
    }

    pub fn ln_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.get(i, i).ln()).sum::<f64>()
    }
}

fn cholesky_factor(m: &SpdMatrix) -> Result<CholeskyFactor> {
    let d = m.dim;
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let pivot = m.get(i, i) - s;
                if !(pivot > 0.0) {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: pivot });
                }
                l[i * d + i] = pivot.sqrt();
            } else {
                l[i * d + j] = (m.get(i, j) - s) / l[j * d + j];
            }
        }
    }
    Ok(CholeskyFactor { dim: d, data: l })
}

/// Cholesky factorization `M = L L'`.
pub fn cholesky(m: &SpdMatrix) -> Result<CholeskyFactor> {
    cholesky_factor(m)
}

/// The symmetric positive-definite square root.
pub fn spd_sqrt(m: &SpdMatrix) -> Result<SpdMatrix> {
    spd_power(m, 0.5)
}

/// Symmetric `M^p` through the eigendecomposition.
pub fn spd_power(m: &SpdMatrix, p: f64) -> Result<SpdMatrix> {
    let d = m.dim;
    if d == 1 {
        return SpdMatrix::scalar(m.data[0].powf(p));
    }
    let eig = SymmetricEigen::new(m.to_nalgebra());
    let mut data = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            data[i * d + j] = (0..d)
                .map(|k| eig.eigenvectors[(i, k)] * eig.eigenvalues[k].powf(p) * eig.eigenvectors[(j, k)])
                .sum();
        }
    }
    SpdMatrix::from_computed(d, data)
}

/// Inverse through the Cholesky factor.
pub fn spd_inverse(m: &SpdMatrix) -> Result<SpdMatrix> {
    let d = m.dim;
    let l = cholesky_factor(m)?;
    let mut data = vec![0.0; d * d];
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        let col = l.solve(&e);
        for i in 0..d {
            data[i * d + j] = col[i];
        }
    }
    SpdMatrix::from_computed(d, data)
}
