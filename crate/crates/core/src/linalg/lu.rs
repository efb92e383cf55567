//! LU factorisation with partial pivoting, shared by the real and complex
//! solvers.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub(crate) trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    const ZERO: Self;
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Solves `a · x = b` in place (row-major `n × n` and `n × k`), returning `x`.
/// A pivot below `1e-12` of the largest entry of `a` counts as singular.
pub(crate) fn lu_solve<T: Scalar>(mut a: Vec<T>, n: usize, mut b: Vec<T>, k: usize) -> Result<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n * k);
    let scale = a.iter().fold(0.0f64, |acc, x| acc.max(x.modulus()));
    if scale == 0.0 {
        return Err(Error::Singular("zero matrix".into()));
    }
    for col in 0..n {
        let (piv, pmod) = (col..n)
            .map(|r| (r, a[r * n + col].modulus()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmod <= 1e-12 * scale {
            return Err(Error::Singular(format!("pivot {pmod:.3e} in column {col}")));
        }
        if piv != col {
            for j in 0..n {
                a.swap(piv * n + j, col * n + j);
            }
            for j in 0..k {
                b.swap(piv * k + j, col * k + j);
            }
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f.modulus() == 0.0 {
                continue;
            }
            for j in col..n {
                a[r * n + j] = a[r * n + j] - f * a[col * n + j];
            }
            for j in 0..k {
                b[r * k + j] = b[r * k + j] - f * b[col * k + j];
            }
        }
    }
    let mut x = vec![T::ZERO; n * k];
    for j in 0..k {
        for i in (0..n).rev() {
            let mut acc = b[i * k + j];
            for l in i + 1..n {
                acc = acc - a[i * n + l] * x[l * k + j];
            }
            x[i * k + j] = acc / a[i * n + i];
        }
    }
    Ok(x)
}

/// Solves `a · x = b` for square `a`.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || a.rows() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "solve with a {:?} and b {:?}",
            a.shape(),
            b.shape()
        )));
    }
    a.ensure_finite("solve matrix")?;
    b.ensure_finite("solve right-hand side")?;
    let x = lu_solve(a.as_slice().to_vec(), a.rows(), b.as_slice().to_vec(), b.cols())?;
    Matrix::from_vec(b.rows(), b.cols(), x)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve(a, &Matrix::identity(a.rows()))
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("determinant of a {:?} matrix", a.shape())));
    }
    a.ensure_finite("determinant input")?;
    let n = a.rows();
    let mut m = a.as_slice().to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).fold(col, |best, r| if m[r * n + col].abs() > m[best * n + col].abs() { r } else { best });
        let d = m[piv * n + col];
        if d == 0.0 {
            return Ok(0.0);
        }
        if piv != col {
            for j in 0..n {
                m.swap(piv * n + j, col * n + j);
            }
            det = -det;
        }
        det *= d;
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            for j in col..n {
                m[r * n + j] -= f * m[col * n + j];
            }
        }
    }
    Ok(det)
}

/// Dense complex matrix, used for transfer-function values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }
}

/// Solves `a · x = b` for complex square `a` given row-major.
pub(crate) fn complex_solve(a: Vec<Complex64>, n: usize, b: Vec<Complex64>, k: usize) -> Result<ComplexMatrix> {
    let data = lu_solve(a, n, b, k)?;
    Ok(ComplexMatrix { rows: n, cols: k, data })
}
