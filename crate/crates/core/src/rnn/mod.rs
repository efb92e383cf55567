//! The recurrent model `h⁽ᵏ⁾ = φ(W h⁽ᵏ⁻¹⁾ + F x⁽ᵏ⁾ + b)`, `y⁽ᵏ⁾ = C h⁽ᵏ⁾`,
//! together with its gradients, fixed points and linearizations.

mod grad;
mod linear;
mod metrics;

use serde::{Deserialize, Serialize};

pub use grad::{bptt_gradients, sequence_gradients, ParamGrads};
pub use linear::{ctrb_obsv, fixed_point, linearize, similarity_transform, transfer_function, LinearSystem};
pub use metrics::{mse, r_squared};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`. The ReLU subgradient at 0 is 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Sigmoid => 0.25,
            Activation::Relu | Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidInput(format!("unknown activation {other:?}"))),
        }
    }
}

/// Parameters `(W, F, b, C, h₋₁)` plus the activation.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    /// Hidden-to-hidden, `n × n`.
    pub w: Matrix,
    /// Input-to-hidden, `n × m`.
    pub f: Matrix,
    pub b: Vec<f64>,
    /// Hidden-to-output, `p × n`.
    pub c: Matrix,
    pub h_init: Vec<f64>,
    pub activation: Activation,
}

impl RnnParams {
    /// Builds parameters with `h_init = 0`, checking shapes and finiteness.
    pub fn new(w: Matrix, f: Matrix, b: Vec<f64>, c: Matrix, activation: Activation) -> Result<Self> {
        let h_init = vec![0.0; w.rows()];
        let p = RnnParams { w, f, b, c, h_init, activation };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(n: usize, m: usize, p: usize, activation: Activation) -> Self {
        RnnParams {
            w: Matrix::zeros(n, n),
            f: Matrix::zeros(n, m),
            b: vec![0.0; n],
            c: Matrix::zeros(p, n),
            h_init: vec![0.0; n],
            activation,
        }
    }

    /// Scalar system `(w, f, b, c)` with one state, one input, one output.
    pub fn scalar(w: f64, f: f64, b: f64, c: f64, activation: Activation) -> Self {
        RnnParams {
            w: Matrix::from_rows(&[&[w]]),
            f: Matrix::from_rows(&[&[f]]),
            b: vec![b],
            c: Matrix::from_rows(&[&[c]]),
            h_init: vec![0.0],
            activation,
        }
    }

    pub fn n(&self) -> usize {
        self.w.rows()
    }

    pub fn m(&self) -> usize {
        self.f.cols()
    }

    pub fn p(&self) -> usize {
        self.c.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.w.rows();
        let dims_ok = self.w.cols() == n
            && self.f.rows() == n
            && self.b.len() == n
            && self.c.cols() == n
            && self.h_init.len() == n;
        if !dims_ok {
            return Err(Error::DimensionMismatch(format!(
                "W {:?}, F {:?}, b {}, C {:?}, h_init {}",
                self.w.shape(),
                self.f.shape(),
                self.b.len(),
                self.c.shape(),
                self.h_init.len()
            )));
        }
        let finite = self.w.is_finite()
            && self.f.is_finite()
            && self.c.is_finite()
            && self.b.iter().chain(&self.h_init).all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidInput("parameters contain non-finite values".into()));
        }
        Ok(())
    }

    /// Number of trainable scalars in `(W, F, b, C)`.
    pub fn trainable_len(&self) -> usize {
        let n = self.n();
        n * n + n * self.m() + n + self.p() * n
    }

    /// `(W, F, b, C)` flattened row-major, in that order.
    pub fn trainable_to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.trainable_len());
        v.extend_from_slice(self.w.as_slice());
        v.extend_from_slice(self.f.as_slice());
        v.extend_from_slice(&self.b);
        v.extend_from_slice(self.c.as_slice());
        v
    }

    pub fn set_trainable(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.trainable_len());
        let (w, rest) = v.split_at(self.w.as_slice().len());
        let (f, rest) = rest.split_at(self.f.as_slice().len());
        let (b, c) = rest.split_at(self.b.len());
        self.w.as_mut_slice().copy_from_slice(w);
        self.f.as_mut_slice().copy_from_slice(f);
        self.b.copy_from_slice(b);
        self.c.as_mut_slice().copy_from_slice(c);
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "input has {} channels, model expects {}",
                x.cols(),
                self.m()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::InvalidInput("empty input sequence".into()));
        }
        Ok(())
    }

    /// Runs the recursion over `x` (`T × m`), returning outputs and states.
    pub fn forward(&self, x: &Matrix) -> Result<Trajectory> {
        self.validate()?;
        self.check_input(x)?;
        let (t_len, n, p) = (x.rows(), self.n(), self.p());
        let mut y = Matrix::zeros(t_len, p);
        let mut h_traj = Matrix::zeros(t_len, n);
        let mut h = self.h_init.clone();
        let mut z = vec![0.0; n];
        for k in 0..t_len {
            self.preactivation(&h, x.row(k), &mut z);
            for (hi, &zi) in h.iter_mut().zip(&z) {
                *hi = self.activation.apply(zi);
            }
            if !h.iter().all(|v| v.is_finite()) {
                return Err(Error::Overflow { step: k });
            }
            h_traj.row_mut(k).copy_from_slice(&h);
            self.c.matvec_into(&h, y.row_mut(k));
        }
        Ok(Trajectory { y, h: h_traj })
    }

    /// Output sequence only.
    pub fn rnn_map(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.y)
    }

    /// `z = W h + F x + b`.
    #[inline]
    pub(crate) fn preactivation(&self, h: &[f64], x: &[f64], z: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            z[i] = crate::linalg::dot(self.w.row(i), h) + crate::linalg::dot(self.f.row(i), x) + self.b[i];
        }
    }

    pub fn certificate(&self) -> Result<ContractionCertificate> {
        ContractionCertificate::of(&self.w)
    }
}

/// Outputs and hidden states of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `T × p`.
    pub y: Matrix,
    /// `T × n`.
    pub h: Matrix,
}

/// Inputs `x` (`T × m`) and optional targets `y` (`T × p`).
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub x: Matrix,
    pub y: Option<Matrix>,
}

impl Sequence {
    pub fn new(x: Matrix, y: Option<Matrix>) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::InvalidInput("sequence needs at least one time step".into()));
        }
        if let Some(y) = &y {
            if y.rows() != x.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "inputs have {} steps, targets {}",
                    x.rows(),
                    y.rows()
                )));
            }
        }
        x.ensure_finite("sequence inputs")?;
        Ok(Sequence { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn targets(&self) -> Result<&Matrix> {
        self.y.as_ref().ok_or_else(|| Error::InvalidInput("sequence has no targets".into()))
    }
}

/// Spectral norm of `W` and the contractive/unitary flags derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub rho: f64,
    pub is_contractive: bool,
    pub is_unitary: bool,
}

impl ContractionCertificate {
    pub fn of(w: &Matrix) -> Result<Self> {
        let rho = spectral_norm(w)?;
        let is_unitary = w.is_square() && w.orthogonality_residual() <= 1e-8;
        Ok(ContractionCertificate { rho, is_contractive: rho < 1.0, is_unitary })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_system_outputs_zero() {
        for act in [Activation::Relu, Activation::Identity] {
            let p = RnnParams::zeros(3, 2, 2, act);
            let y = p.rnn_map(&Matrix::zeros(5, 2)).unwrap();
            assert_eq!(y, Matrix::zeros(5, 2));
        }
    }

    #[test]
    fn scalar_identity_unrolls() {
        let p = RnnParams::scalar(0.5, 1.0, 0.0, 1.0, Activation::Identity);
        let y = p.rnn_map(&Matrix::column(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 0.5, 0.25]);
    }

    #[test]
    fn scalar_relu_clamps() {
        let p = RnnParams::scalar(0.5, 1.0, -2.0, 1.0, Activation::Relu);
        let y = p.rnn_map(&Matrix::column(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn trajectory_states_match_outputs() {
        let p = RnnParams::scalar(0.5, 2.0, 0.0, 3.0, Activation::Identity);
        let tr = p.forward(&Matrix::column(&[1.0, 1.0])).unwrap();
        assert_eq!(tr.h.as_slice(), &[2.0, 3.0]);
        assert_eq!(tr.y.as_slice(), &[6.0, 9.0]);
    }

    #[test]
    fn expansive_system_overflows_with_step() {
        let p = RnnParams::scalar(1e200, 1.0, 0.0, 1.0, Activation::Identity);
        let err = p.forward(&Matrix::column(&[1.0, 0.0, 0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::Overflow { step: 2 }), "{err:?}");
    }

    #[test]
    fn dimension_mismatch() {
        let p = RnnParams::zeros(2, 3, 1, Activation::Relu);
        assert!(matches!(p.forward(&Matrix::zeros(4, 2)), Err(Error::DimensionMismatch(_))));
        let mut bad = p.clone();
        bad.b.push(0.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trainable_roundtrip() {
        let mut p = RnnParams::zeros(2, 1, 1, Activation::Relu);
        let v: Vec<f64> = (0..p.trainable_len()).map(|i| i as f64).collect();
        p.set_trainable(&v);
        assert_eq!(p.trainable_to_vec(), v);
        assert_eq!(p.b, vec![6.0, 7.0]);
    }

    #[test]
    fn certificate_flags() {
        let c = ContractionCertificate::of(&Matrix::from_diag(&[0.5, 0.2])).unwrap();
        assert!(c.is_contractive && !c.is_unitary);
        let c = ContractionCertificate::of(&Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!(!c.is_contractive && c.is_unitary);
    }

    proptest! {
        #[test]
        fn activations_are_non_expansive(
            x in prop::collection::vec(-20.0f64..20.0, 4),
            y in prop::collection::vec(-20.0f64..20.0, 4),
        ) {
            for act in [Activation::Relu, Activation::Sigmoid] {
                let d: f64 = x.iter().zip(&y).map(|(a, b)| (act.apply(*a) - act.apply(*b)).powi(2)).sum();
                let e: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
                prop_assert!(d.sqrt() <= e.sqrt() + 1e-15);
            }
        }
    }
}
