//! Fixed points, linearizations and linear-system theory for the model.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Activation, RnnParams};
use crate::error::{Error, Result};
use crate::linalg::{complex_solve, inverse, matrix_rank, norm2, spectral_norm, ComplexMatrix, Matrix};

const FIXED_POINT_MAX_ITER: usize = 100_000;
const RANK_TOL: f64 = 1e-9;

/// Linear state-space model `(A, B, C)` around an operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub a: Matrix,
    pub b_in: Matrix,
    pub c_out: Matrix,
    pub x_star: Vec<f64>,
    pub h_star: Vec<f64>,
    pub y_star: Vec<f64>,
}

impl LinearSystem {
    /// Plain `(A, B, C)` with a zero operating point.
    pub fn new(a: Matrix, b_in: Matrix, c_out: Matrix) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || b_in.rows() != n || c_out.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A {:?}, B {:?}, C {:?}",
                a.shape(),
                b_in.shape(),
                c_out.shape()
            )));
        }
        let (m, p) = (b_in.cols(), c_out.rows());
        Ok(LinearSystem { a, b_in, c_out, x_star: vec![0.0; m], h_star: vec![0.0; n], y_star: vec![0.0; p] })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// `[B, AB, …, Aⁿ⁻¹B]`.
    pub fn controllability_matrix(&self) -> Matrix {
        let n = self.n();
        let m = self.b_in.cols();
        let mut out = Matrix::zeros(n, n * m);
        let mut block = self.b_in.clone();
        for k in 0..n {
            out.set_block(0, k * m, &block);
            block = self.a.matmul(&block);
        }
        out
    }

    /// `[C; CA; …; CAⁿ⁻¹]`.
    pub fn observability_matrix(&self) -> Matrix {
        let n = self.n();
        let p = self.c_out.rows();
        let mut out = Matrix::zeros(n * p, n);
        let mut block = self.c_out.clone();
        for k in 0..n {
            out.set_block(k * p, 0, &block);
            block = block.matmul(&self.a);
        }
        out
    }

    /// Impulse-response coefficients `C Aᵏ B` for `k = 0..count`.
    pub fn markov_parameters(&self, count: usize) -> Vec<Matrix> {
        let mut out = Vec::with_capacity(count);
        let mut ak_b = self.b_in.clone();
        for _ in 0..count {
            out.push(self.c_out.matmul(&ak_b));
            ak_b = self.a.matmul(&ak_b);
        }
        out
    }
}

/// Solves `h = φ(W h + F x* + b)` by Picard iteration from zero.
///
/// Requires `‖W‖ · Lip(φ) < 1`, which makes the map a contraction.
pub fn fixed_point(params: &RnnParams, x_star: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    if x_star.len() != params.m() {
        return Err(Error::DimensionMismatch(format!(
            "operating input has {} entries, model expects {}",
            x_star.len(),
            params.m()
        )));
    }
    let rho = spectral_norm(&params.w)?;
    let factor = rho * params.activation.lipschitz();
    if factor >= 1.0 {
        return Err(Error::Precondition(format!(
            "state map is not a contraction (‖W‖·Lip(φ) = {factor:.6})"
        )));
    }
    let n = params.n();
    let mut h = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..FIXED_POINT_MAX_ITER {
        params.preactivation(&h, x_star, &mut z);
        for (o, &zi) in next.iter_mut().zip(&z) {
            *o = params.activation.apply(zi);
        }
        let step: f64 = next.iter().zip(&h).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        std::mem::swap(&mut h, &mut next);
        if step <= 1e-13 * norm2(&h).max(1.0) {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence { iterations: FIXED_POINT_MAX_ITER })
}

/// First-order model `(D W, D F, C)` at the fixed point for constant input
/// `x_star`, with `D = diag(φ′(W h* + F x* + b))`.
pub fn linearize(params: &RnnParams, x_star: &[f64]) -> Result<LinearSystem> {
    let h_star = fixed_point(params, x_star)?;
    let n = params.n();
    let mut z = vec![0.0; n];
    params.preactivation(&h_star, x_star, &mut z);
    if params.activation == Activation::Relu {
        if let Some(i) = z.iter().position(|zi| zi.abs() <= 1e-9) {
            return Err(Error::NonDifferentiable(format!(
                "ReLU pre-activation of unit {i} is {:.3e} at the fixed point",
                z[i]
            )));
        }
    }
    let d: Vec<f64> = z.iter().map(|&zi| params.activation.derivative(zi)).collect();
    let scale_rows = |m: &Matrix| Matrix::from_fn(m.rows(), m.cols(), |i, j| d[i] * m[(i, j)]);
    let y_star = params.c.matvec(&h_star);
    Ok(LinearSystem {
        a: scale_rows(&params.w),
        b_in: scale_rows(&params.f),
        c_out: params.c.clone(),
        x_star: x_star.to_vec(),
        h_star,
        y_star,
    })
}

/// `H(s) = C (sI − A)⁻¹ B`.
pub fn transfer_function(sys: &LinearSystem, s: Complex64) -> Result<ComplexMatrix> {
    let n = sys.n();
    let m = sys.b_in.cols();
    let p = sys.c_out.rows();
    let mut resolvent = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            resolvent.push(diag - sys.a[(i, j)]);
        }
    }
    let rhs = sys.b_in.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let x = complex_solve(resolvent, n, rhs, m).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!("s = {s} is (numerically) an eigenvalue of A: {msg}")),
        other => other,
    })?;
    let mut data = vec![Complex64::new(0.0, 0.0); p * m];
    for i in 0..p {
        for j in 0..m {
            data[i * m + j] = (0..n).map(|k| x.get(k, j) * sys.c_out[(i, k)]).sum();
        }
    }
    Ok(ComplexMatrix { rows: p, cols: m, data })
}

/// Rank tests of the controllability and observability matrices.
pub fn ctrb_obsv(sys: &LinearSystem) -> Result<(bool, bool)> {
    let n = sys.n();
    let ctrb = matrix_rank(&sys.controllability_matrix(), RANK_TOL)? == n;
    let obsv = matrix_rank(&sys.observability_matrix(), RANK_TOL)? == n;
    Ok((ctrb, obsv))
}

/// Change of state coordinates `h → T h`, which leaves the input-output map
/// unchanged. Valid for identity activations with any invertible `T`, and
/// for ReLU with a positive diagonal `T`.
pub fn similarity_transform(params: &RnnParams, t: &Matrix) -> Result<RnnParams> {
    params.validate()?;
    let n = params.n();
    if t.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("T is {:?}, state dimension is {n}", t.shape())));
    }
    match params.activation {
        Activation::Identity => {}
        Activation::Relu => {
            let diagonal_positive = (0..n).all(|i| {
                (0..n).all(|j| if i == j { t[(i, j)] > 0.0 } else { t[(i, j)] == 0.0 })
            });
            if !diagonal_positive {
                return Err(Error::Precondition(
                    "ReLU networks only admit positive diagonal state rescaling".into(),
                ));
            }
        }
        Activation::Sigmoid => {
            return Err(Error::Precondition("sigmoid networks admit no state similarity transform".into()));
        }
    }
    let t_inv = inverse(t).map_err(|e| match e {
        Error::Singular(msg) => Error::InvalidInput(format!("T is singular: {msg}")),
        other => other,
    })?;
    Ok(RnnParams {
        w: t.matmul(&params.w).matmul(&t_inv),
        f: t.matmul(&params.f),
        b: t.matvec(&params.b),
        c: params.c.matmul(&t_inv),
        h_init: t.matvec(&params.h_init),
        activation: params.activation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sigmoid(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    /// Root of `h − σ(w h + u)` by bisection on [0, 1].
    fn bisect_sigmoid_fixed_point(w: f64, u: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - sigmoid(w * mid + u) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn random_params(n: usize, m: usize, p: usize, act: Activation, seed: u64) -> RnnParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = |r: usize, c: usize, s: f64| Matrix::from_fn(r, c, |_, _| s * rng.random_range(-1.0..1.0));
        let w = g(n, n, 0.4);
        let f = g(n, m, 1.0);
        let c = g(p, n, 1.0);
        let b = g(n, 1, 0.5).into_vec();
        RnnParams::new(w, f, b, c, act).unwrap()
    }

    #[test]
    fn zero_w_fixed_point_is_one_step() {
        let mut p = random_params(3, 2, 1, Activation::Sigmoid, 1);
        p.w = Matrix::zeros(3, 3);
        let x = [0.3, -0.4];
        let h = fixed_point(&p, &x).unwrap();
        let direct: Vec<f64> = p.f.matvec(&x).iter().zip(&p.b).map(|(a, b)| sigmoid(a + b)).collect();
        assert_eq!(h, direct);
    }

    #[test]
    fn scalar_sigmoid_fixed_point_matches_bisection() {
        let p = RnnParams::scalar(0.9, 1.0, 0.0, 1.0, Activation::Sigmoid);
        let h = fixed_point(&p, &[0.0]).unwrap()[0];
        let oracle = bisect_sigmoid_fixed_point(0.9, 0.0);
        assert!((h - sigmoid(0.9 * h)).abs() <= 1e-12);
        assert!((h - oracle).abs() <= 1e-12);
    }

    #[test]
    fn identity_fixed_point_is_linear_solve() {
        let p = random_params(4, 2, 2, Activation::Identity, 2);
        let x = [1.0, -0.5];
        let h = fixed_point(&p, &x).unwrap();
        let rhs: Vec<f64> = p.f.matvec(&x).iter().zip(&p.b).map(|(a, b)| a + b).collect();
        let lhs = Matrix::identity(4).sub(&p.w);
        let oracle = crate::linalg::solve(&lhs, &Matrix::column(&rhs)).unwrap();
        for i in 0..4 {
            assert!((h[i] - oracle[(i, 0)]).abs() <= 1e-10);
        }
    }

    #[test]
    fn fixed_point_precondition() {
        let p = RnnParams::scalar(1.0, 1.0, 0.0, 1.0, Activation::Relu);
        assert!(matches!(fixed_point(&p, &[0.0]), Err(Error::Precondition(_))));
        // unitary W is fine for sigmoid
        let p = RnnParams::scalar(-1.0, 1.0, 0.0, 1.0, Activation::Sigmoid);
        assert!(fixed_point(&p, &[0.0]).is_ok());
    }

    #[test]
    fn linearize_identity_is_exact() {
        let p = random_params(3, 2, 2, Activation::Identity, 3);
        let sys = linearize(&p, &[0.2, 0.1]).unwrap();
        assert_eq!(sys.a, p.w);
        assert_eq!(sys.b_in, p.f);
    }

    #[test]
    fn linearize_sigmoid_matches_finite_differences() {
        let p = RnnParams::scalar(0.9, 1.0, 0.0, 1.0, Activation::Sigmoid);
        let sys = linearize(&p, &[0.0]).unwrap();
        let h = sys.h_star[0];
        let s = sigmoid(0.9 * h);
        assert!((sys.a[(0, 0)] - 0.9 * s * (1.0 - s)).abs() < 1e-15);
        let step = 1e-6;
        let fd = (sigmoid(0.9 * (h + step)) - sigmoid(0.9 * (h - step))) / (2.0 * step);
        assert!((sys.a[(0, 0)] - fd).abs() < 1e-6);
        let d = sys.b_in[(0, 0)];
        assert!(d > 0.0 && d <= 0.25);
    }

    #[test]
    fn linearize_multistate_jacobian_matches_finite_differences() {
        let p = random_params(4, 2, 1, Activation::Sigmoid, 4);
        let x = [0.5, -0.3];
        let sys = linearize(&p, &x).unwrap();
        let map = |h: &[f64]| -> Vec<f64> {
            let mut z = vec![0.0; 4];
            p.preactivation(h, &x, &mut z);
            z.iter().map(|&v| sigmoid(v)).collect()
        };
        let step = 1e-6;
        for j in 0..4 {
            let mut hp = sys.h_star.clone();
            let mut hm = sys.h_star.clone();
            hp[j] += step;
            hm[j] -= step;
            let (fp, fm) = (map(&hp), map(&hm));
            for i in 0..4 {
                let fd = (fp[i] - fm[i]) / (2.0 * step);
                assert!((sys.a[(i, j)] - fd).abs() < 1e-6);
            }
        }
        for i in 0..4 {
            let d = sys.b_in[(i, 0)] / p.f[(i, 0)];
            assert!(d > 0.0 && d <= 0.25);
        }
    }

    #[test]
    fn linearize_rejects_relu_kink() {
        let p = RnnParams::scalar(0.5, 1.0, 0.0, 1.0, Activation::Relu);
        assert!(matches!(linearize(&p, &[0.0]), Err(Error::NonDifferentiable(_))));
        assert!(linearize(&p, &[1.0]).is_ok());
    }

    #[test]
    fn scalar_transfer_function() {
        let sys = LinearSystem::new(
            Matrix::from_rows(&[&[0.5]]),
            Matrix::from_rows(&[&[1.0]]),
            Matrix::from_rows(&[&[1.0]]),
        )
        .unwrap();
        let h = transfer_function(&sys, Complex64::new(1.0, 0.0)).unwrap();
        assert!((h.get(0, 0) - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(matches!(transfer_function(&sys, Complex64::new(0.5, 0.0)), Err(Error::Singular(_))));
    }

    #[test]
    fn zero_a_transfer_function() {
        let b = Matrix::from_rows(&[&[1.0], &[2.0]]);
        let c = Matrix::from_rows(&[&[3.0, -1.0]]);
        let sys = LinearSystem::new(Matrix::zeros(2, 2), b.clone(), c.clone()).unwrap();
        let s = Complex64::new(0.3, -0.7);
        let h = transfer_function(&sys, s).unwrap();
        let cb = c.matmul(&b)[(0, 0)];
        assert!((h.get(0, 0) - Complex64::new(cb, 0.0) / s).norm() < 1e-14);
    }

    #[test]
    fn ctrb_obsv_cases() {
        let one = |v: f64| Matrix::from_rows(&[&[v]]);
        let sys = LinearSystem::new(one(0.5), one(1.0), one(1.0)).unwrap();
        assert_eq!(ctrb_obsv(&sys).unwrap(), (true, true));
        let sys = LinearSystem::new(one(0.5), one(0.0), one(1.0)).unwrap();
        assert!(!ctrb_obsv(&sys).unwrap().0);
        let sys = LinearSystem::new(
            Matrix::from_diag(&[0.5, 0.5]),
            Matrix::column(&[1.0, 1.0]),
            Matrix::from_rows(&[&[1.0, 0.0]]),
        )
        .unwrap();
        assert_eq!(matrix_rank(&sys.controllability_matrix(), RANK_TOL).unwrap(), 1);
        assert!(!ctrb_obsv(&sys).unwrap().0);
    }

    #[test]
    fn identity_transform_is_noop() {
        let p = random_params(3, 2, 2, Activation::Relu, 5);
        let q = similarity_transform(&p, &Matrix::identity(3)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn similarity_preserves_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_params(3, 2, 2, Activation::Identity, 6);
        let t = Matrix::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.0 } + rng.random_range(-0.5..0.5));
        let q = similarity_transform(&p, &t).unwrap();
        for _ in 0..20 {
            let x = Matrix::from_fn(15, 2, |_, _| rng.random_range(-1.0..1.0));
            let dev = p.rnn_map(&x).unwrap().max_abs_diff(&q.rnn_map(&x).unwrap());
            assert!(dev <= 1e-9);
        }

        let p = random_params(2, 2, 2, Activation::Relu, 7);
        let q = similarity_transform(&p, &Matrix::from_diag(&[2.0, 3.0])).unwrap();
        let x = Matrix::from_fn(30, 2, |_, _| rng.random_range(-2.0..2.0));
        assert!(p.rnn_map(&x).unwrap().max_abs_diff(&q.rnn_map(&x).unwrap()) <= 1e-9);
    }

    #[test]
    fn similarity_preconditions() {
        let p = random_params(2, 1, 1, Activation::Relu, 8);
        let full = Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(matches!(similarity_transform(&p, &full), Err(Error::Precondition(_))));
        assert!(matches!(
            similarity_transform(&p, &Matrix::from_diag(&[1.0, -1.0])),
            Err(Error::Precondition(_))
        ));
        let lin = RnnParams { activation: Activation::Identity, ..p };
        let singular = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(similarity_transform(&lin, &singular), Err(Error::InvalidInput(_))));
    }
}
