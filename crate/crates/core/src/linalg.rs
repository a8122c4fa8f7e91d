//! Small dense linear algebra for the posterior engine.
//!
//! Matrices are square, row-major `f64`. Dimensions in this crate are the
//! embedding size (tens of coordinates), so plain loops are fine.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

pub(crate) fn check_dim(expected: usize, v: &[f64]) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got: v.len(),
        })
    }
}

/// Sum of a list of equal-length vectors. Returns zeros for an empty list.
pub fn sum_vectors<'a, I>(d: usize, vs: I) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = vec![0.0; d];
    for v in vs {
        check_dim(d, v)?;
        axpy(1.0, v, &mut out);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = *v;
        }
        m
    }

    /// Builds from row-major data; `data.len()` must be `n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `self += x xᵀ`
    pub fn add_outer(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.n..(i + 1) * self.n];
            axpy(xi, x, row);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if libm::fabs(a - b) > tol * (1.0 + libm::fabs(a).max(libm::fabs(b))) {
                    return false;
                }
            }
        }
        true
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(norm_sq(&self.data))
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::factor(self)
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SquareMatrix) -> Result<Self> {
        let n = a.n;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = a.get(j, j);
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let ljj = libm::sqrt(diag);
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn identity(n: usize) -> Self {
        let m = SquareMatrix::identity(n);
        Self { n, l: m.data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    pub fn min_diagonal(&self) -> f64 {
        (0..self.n)
            .map(|i| self.get(i, i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Solves `Lᵀ y = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Solves `A y = b` with `A = L Lᵀ`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `xᵀ A⁻¹ x`, computed as `‖L⁻¹ x‖²`.
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        norm_sq(&self.solve_lower(x))
    }

    /// `L Lᵀ`
    pub fn reconstruct(&self) -> SquareMatrix {
        let n = self.n;
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in 0..=j {
                    s += self.l[i * n + k] * self.l[j * n + k];
                }
                m.set(i, j, s);
                m.set(j, i, s);
            }
        }
        m
    }

    /// In-place rank-one update: afterwards `L Lᵀ = A + x xᵀ`. O(n²).
    pub fn rank_one_update(&mut self, x: &[f64]) -> Result<()> {
        let n = self.n;
        let mut w = x.to_vec();
        for k in 0..n {
            let lkk = self.l[k * n + k];
            let r = libm::hypot(lkk, w[k]);
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let c = r / lkk;
            let s = w[k] / lkk;
            self.l[k * n + k] = r;
            for i in (k + 1)..n {
                let lik = (self.l[i * n + k] + s * w[i]) / c;
                w[i] = c * w[i] - s * lik;
                self.l[i * n + k] = lik;
            }
        }
        Ok(())
    }
}

/// Sherman–Morrison update of an explicit inverse: `A⁻¹ ← (A + x xᵀ)⁻¹`.
pub fn sherman_morrison_update(inv: &mut SquareMatrix, x: &[f64]) {
    let ax = inv.mul_vec(x);
    let denom = 1.0 + dot(x, &ax);
    let n = inv.dim();
    for i in 0..n {
        for j in 0..n {
            let v = inv.get(i, j) - ax[i] * ax[j] / denom;
            inv.set(i, j, v);
        }
    }
}
