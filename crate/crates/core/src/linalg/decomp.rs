//! Jacobi-based factorizations for small dense matrices.
//!
//! Everything here is deterministic: rotation order is fixed (cyclic by
//! index pairs), ties in sorting keep index order, and every non-unique
//! factor is normalised so that its first nonzero entry is positive.

use serde::{Deserialize, Serialize};

use super::matrix::{dot, norm2, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;
const JACOBI_TOL: f64 = 1e-14;
/// Entries below this fraction of a vector's largest magnitude are treated as
/// zero when picking the sign of that vector.
const SIGN_TOL: f64 = 1e-12;

/// Thin singular value decomposition `m = u · diag(s) · vᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdFactors {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for j in 0..us.cols() {
            for i in 0..us.rows() {
                us[(i, j)] *= self.s[j];
            }
        }
        us.matmul(&self.v.transpose())
    }
}

/// Symmetric eigendecomposition `a = vectors · diag(values) · vectorsᵀ`,
/// eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Flips `v` in place so its first significant entry is positive. Returns
/// whether a flip happened.
fn canonical_sign(v: &mut [f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 {
        return false;
    }
    let lead = v.iter().copied().find(|x| x.abs() > SIGN_TOL * scale).unwrap_or(0.0);
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
        true
    } else {
        false
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // stable: equal values keep index order
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));
    idx
}

/// Column-major scratch storage makes the column rotations contiguous.
struct Columns {
    rows: usize,
    data: Vec<Vec<f64>>,
}

impl Columns {
    fn from_matrix(m: &Matrix) -> Self {
        Columns { rows: m.rows(), data: (0..m.cols()).map(|j| m.col(j)).collect() }
    }

    fn identity(n: usize) -> Self {
        let data = (0..n)
            .map(|j| {
                let mut c = vec![0.0; n];
                c[j] = 1.0;
                c
            })
            .collect();
        Columns { rows: n, data }
    }

    fn rotate(&mut self, p: usize, q: usize, c: f64, s: f64) {
        let (lo, hi) = self.data.split_at_mut(q);
        let cp = &mut lo[p];
        let cq = &mut hi[0];
        for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
            let xp = *x;
            let yq = *y;
            *x = c * xp - s * yq;
            *y = s * xp + c * yq;
        }
    }

    fn to_matrix(&self, order: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, order.len(), |i, j| self.data[order[j]][i])
    }
}

/// One-sided Jacobi SVD for `rows >= cols`.
fn jacobi_svd_tall(m: &Matrix) -> Result<SvdFactors> {
    let n = m.cols();
    let mut u = Columns::from_matrix(m);
    let mut v = Columns::identity(n);

    // Columns this small relative to the whole matrix are numerically null;
    // their directions are round-off and never settle.
    let negligible = (1e-14 * m.frobenius_norm()).powi(2);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&u.data[p], &u.data[p]);
                let beta = dot(&u.data[q], &u.data[q]);
                let gamma = dot(&u.data[p], &u.data[q]);
                if alpha <= negligible
                    || beta <= negligible
                    || gamma == 0.0
                    || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                u.rotate(p, q, c, s);
                v.rotate(p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!("SVD did not converge in {MAX_SWEEPS} sweeps")));
    }

    let sigma: Vec<f64> = u.data.iter().map(|c| norm2(c)).collect();
    let order = descending_order(&sigma);
    let s: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    let smax = s.first().copied().unwrap_or(0.0);

    let mut u_mat = Matrix::zeros(m.rows(), n);
    let mut v_mat = v.to_matrix(&order);
    let mut null_cols = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        if s[k] > 0.0 && s[k] > smax * 1e-14 {
            let col: Vec<f64> = u.data[j].iter().map(|x| x / s[k]).collect();
            u_mat.set_col(k, &col);
        } else {
            null_cols.push(k);
        }
    }
    if !null_cols.is_empty() {
        // Left vectors for (numerically) zero singular values are arbitrary:
        // fill them with an orthonormal completion of the determined ones.
        let keep = n - null_cols.len();
        let basis = u_mat.block(0, 0, m.rows(), keep);
        let fill = complete_columns(&basis, null_cols.len());
        for (i, &k) in null_cols.iter().enumerate() {
            u_mat.set_col(k, &fill[i]);
        }
    }

    for k in 0..n {
        let mut col = u_mat.col(k);
        if canonical_sign(&mut col) {
            u_mat.set_col(k, &col);
            let vc: Vec<f64> = v_mat.col(k).iter().map(|x| -x).collect();
            v_mat.set_col(k, &vc);
        }
    }

    Ok(SvdFactors { u: u_mat, s, v: v_mat })
}

/// Thin SVD by one-sided Jacobi rotations.
///
/// `u` is `rows × k`, `v` is `cols × k` with `k = min(rows, cols)`; singular
/// values descend and each column of `u` starts with a positive entry.
pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    m.ensure_finite("svd input")?;
    if m.rows() >= m.cols() {
        jacobi_svd_tall(m)
    } else {
        let t = jacobi_svd_tall(&m.transpose())?;
        let (mut u, s, mut v) = (t.v, t.s, t.u);
        for k in 0..s.len() {
            let mut col = u.col(k);
            if canonical_sign(&mut col) {
                u.set_col(k, &col);
                let vc: Vec<f64> = v.col(k).iter().map(|x| -x).collect();
                v.set_col(k, &vc);
            }
        }
        Ok(SvdFactors { u, s, v })
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Only the upper
/// triangle is read.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::InvalidInput("symmetric_eigen needs a square matrix".into()));
    }
    a.ensure_finite("symmetric_eigen input")?;
    let n = a.rows();
    let mut w = Matrix::from_fn(n, n, |i, j| if i <= j { a[(i, j)] } else { a[(j, i)] });
    let mut v = Matrix::identity(n);
    let scale = w.frobenius_norm();

    let mut converged = n < 2 || scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = w[(p, q)];
                if apq.abs() <= 1e-15 * scale {
                    continue;
                }
                rotated = true;
                let theta = (w[(q, q)] - w[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // W ← Jᵀ W J with J the (p, q) rotation.
                for k in 0..n {
                    let wkp = w[(k, p)];
                    let wkq = w[(k, q)];
                    w[(k, p)] = c * wkp - s * wkq;
                    w[(k, q)] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let wpk = w[(p, k)];
                    let wqk = w[(q, k)];
                    w[(p, k)] = c * wpk - s * wqk;
                    w[(q, k)] = s * wpk + c * wqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "symmetric eigendecomposition did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let diag: Vec<f64> = (0..n).map(|i| w[(i, i)]).collect();
    let order = descending_order(&diag);
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        let mut col = v.col(j);
        canonical_sign(&mut col);
        vectors.set_col(k, &col);
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Largest singular value, from the top eigenvalue of the smaller Gram
/// matrix. Independent of [`svd`].
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    m.ensure_finite("spectral_norm input")?;
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    let gram = if m.cols() <= m.rows() {
        m.transpose().matmul(m)
    } else {
        m.matmul(&m.transpose())
    };
    let eig = symmetric_eigen(&gram)?;
    Ok(eig.values[0].max(0.0).sqrt())
}

/// Symmetric positive semidefinite square root `b` with `b·b = s`.
///
/// Eigenvalues in `[-1e-12·scale, 0)` are clamped to zero; anything more
/// negative is rejected as indefinite.
pub fn symmetric_psd_sqrt(s: &Matrix) -> Result<Matrix> {
    if !s.is_square() {
        return Err(Error::InvalidInput("psd sqrt needs a square matrix".into()));
    }
    s.ensure_finite("psd sqrt input")?;
    let asym = s.max_abs_diff(&s.transpose());
    if asym > 1e-10 {
        return Err(Error::InvalidInput(format!("matrix is not symmetric (asymmetry {asym:.3e})")));
    }
    let scale = s.max_abs().max(1.0);
    let eig = symmetric_eigen(s)?;
    let n = s.rows();
    let mut roots = Vec::with_capacity(n);
    for &lambda in &eig.values {
        if lambda < -1e-12 * scale {
            return Err(Error::InvalidInput(format!("matrix is indefinite (eigenvalue {lambda:.3e})")));
        }
        roots.push(lambda.max(0.0).sqrt());
    }
    let v = &eig.vectors;
    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x: f64 = (0..n).map(|k| v[(i, k)] * roots[k] * v[(j, k)]).sum();
            b[(i, j)] = x;
            b[(j, i)] = x;
        }
    }
    Ok(b)
}

/// Gram–Schmidt against canonical vectors in index order, producing `count`
/// unit vectors orthogonal to the columns of `basis` and to each other.
/// Assumes `basis` has orthonormal columns.
fn complete_columns(basis: &Matrix, count: usize) -> Vec<Vec<f64>> {
    let dim = basis.rows();
    let mut found: Vec<Vec<f64>> = (0..basis.cols()).map(|j| basis.col(j)).collect();
    let existing = found.len();
    // Some canonical vector always keeps at least 1/sqrt(dim) of its norm
    // after projection, so this threshold never starves the search.
    let accept = 0.5 / (dim as f64).sqrt();
    for e in 0..dim {
        if found.len() - existing == count {
            break;
        }
        let mut cand = vec![0.0; dim];
        cand[e] = 1.0;
        for _ in 0..2 {
            for b in &found {
                let proj = dot(b, &cand);
                for (c, &bi) in cand.iter_mut().zip(b) {
                    *c -= proj * bi;
                }
            }
        }
        let nrm = norm2(&cand);
        if nrm > accept {
            cand.iter_mut().for_each(|x| *x /= nrm);
            canonical_sign(&mut cand);
            found.push(cand);
        }
    }
    found.split_off(existing)
}

/// Extends the orthonormal columns of `q` (`d × k`) to an orthonormal basis
/// of ℝᵈ, returning the `d × (d − k)` complement block.
pub fn orthonormal_complete(q: &Matrix) -> Result<Matrix> {
    q.ensure_finite("orthonormal_complete input")?;
    let (d, k) = q.shape();
    if k > d {
        return Err(Error::InvalidInput(format!("{k} columns cannot be orthonormal in dimension {d}")));
    }
    let resid = q.orthogonality_residual();
    if resid > 1e-8 {
        return Err(Error::InvalidInput(format!("columns are not orthonormal (residual {resid:.3e})")));
    }
    let cols = complete_columns(q, d - k);
    if cols.len() != d - k {
        return Err(Error::NumericalFailure("basis completion came up short".into()));
    }
    let mut r = Matrix::zeros(d, d - k);
    for (j, c) in cols.iter().enumerate() {
        r.set_col(j, c);
    }
    Ok(r)
}

/// Nearest orthogonal matrix in Frobenius norm, `u·vᵀ`.
pub fn polar_orthogonal_projection(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::InvalidInput("polar projection needs a square matrix".into()));
    }
    let f = svd(m)?;
    let smax = f.s.first().copied().unwrap_or(0.0);
    let smin = f.s.last().copied().unwrap_or(0.0);
    if smax == 0.0 || smin <= smax * 1e-12 {
        return Err(Error::NumericalFailure(format!(
            "rank-deficient matrix (σ_min/σ_max = {:.3e}); orthogonal projection is not unique",
            if smax == 0.0 { 0.0 } else { smin / smax }
        )));
    }
    Ok(f.u.matmul(&f.v.transpose()))
}

/// Caps every singular value at `cap`. Matrices already within the cap are
/// returned unchanged.
pub fn singular_value_clip(m: &Matrix, cap: f64) -> Result<Matrix> {
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::InvalidInput(format!("singular value cap must be positive, got {cap}")));
    }
    let f = svd(m)?;
    if f.s.first().is_none_or(|&s| s <= cap) {
        return Ok(m.clone());
    }
    let clipped = SvdFactors { s: f.s.iter().map(|&s| s.min(cap)).collect(), ..f };
    Ok(clipped.reconstruct())
}

/// Number of singular values above `tol · σ₁`.
pub fn matrix_rank(m: &Matrix, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("rank tolerance must be positive, got {tol}")));
    }
    let f = svd(m)?;
    let smax = f.s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(f.s.iter().filter(|&&s| s > tol * smax).count())
}
