//! Construction of a `2n`-state orthogonal-transition network that
//! reproduces a contractive ReLU network on inputs with `‖x⁽ᵏ⁾‖₂ ≤ M`.
//!
//! The transition matrix is `W_u = [[W₁, W₂], [W₃, W₄]]` with `W₁ = W_c`,
//! `W₃ = (I − W_cᵀW_c)^{1/2}` so the first `n` columns are orthonormal, and
//! `[W₂; W₄]` an orthonormal completion. The bias of the second block is
//! `−M_h·1`, where `M_h = (‖F_c‖ M + ‖b_c‖₂) / (1 − ρ)` bounds the source
//! state norm; that keeps every second-block pre-activation `≤ 0`, so those
//! states stay at zero and the first block tracks the source exactly.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{norm2, orthonormal_complete, spectral_norm, symmetric_psd_sqrt, Matrix};
use crate::rnn::{Activation, RnnParams};

/// The constructed network and the quantities that certify it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub urnn: RnnParams,
    /// SHA-256 of the source parameters.
    pub source_hash: String,
    pub rho: f64,
    pub input_bound_m: f64,
    pub state_bound_mh: f64,
}

/// Serializable summary of an [`EmbeddingRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCertificate {
    pub source_hash: String,
    pub source_states: usize,
    pub urnn_states: usize,
    pub rho: f64,
    pub input_bound_m: f64,
    pub state_bound_mh: f64,
    pub orthogonality_residual: f64,
}

impl EmbeddingRecord {
    pub fn certificate(&self) -> EmbeddingCertificate {
        EmbeddingCertificate {
            source_hash: self.source_hash.clone(),
            source_states: self.urnn.n() / 2,
            urnn_states: self.urnn.n(),
            rho: self.rho,
            input_bound_m: self.input_bound_m,
            state_bound_mh: self.state_bound_mh,
            orthogonality_residual: self.urnn.w.orthogonality_residual(),
        }
    }
}

/// Digest over dimensions, activation and the exact bit patterns of every
/// parameter.
pub fn params_digest(p: &RnnParams) -> String {
    let mut h = Sha256::new();
    for d in [p.n(), p.m(), p.p()] {
        h.update((d as u64).to_le_bytes());
    }
    h.update(p.activation.name().as_bytes());
    let parts: [&[f64]; 5] = [p.w.as_slice(), p.f.as_slice(), &p.b, p.c.as_slice(), &p.h_init];
    for part in parts {
        for x in part {
            h.update(x.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds the `2n`-state network with orthogonal transition matrix that
/// matches `source` on every input sequence bounded by `input_bound_m`.
pub fn unitary_embedding(source: &RnnParams, input_bound_m: f64) -> Result<EmbeddingRecord> {
    source.validate()?;
    if source.activation != Activation::Relu {
        return Err(Error::UnsupportedActivation(format!(
            "{} networks have no exact orthogonal embedding; only relu is supported",
            source.activation.name()
        )));
    }
    if !(input_bound_m > 0.0) || !input_bound_m.is_finite() {
        return Err(Error::InvalidInput(format!("input bound M must be positive, got {input_bound_m}")));
    }
    if source.h_init.iter().any(|&v| v != 0.0) {
        return Err(Error::Precondition("source initial state must be zero".into()));
    }
    let n = source.n();
    let rho = spectral_norm(&source.w)?;
    if rho >= 1.0 - 1e-9 {
        return Err(Error::Precondition(format!("source is not contractive (‖W‖ = {rho:.12})")));
    }
    let state_bound_mh = (spectral_norm(&source.f)? * input_bound_m + norm2(&source.b)) / (1.0 - rho);

    let gram_gap = Matrix::identity(n).sub(&source.w.transpose().matmul(&source.w));
    let w3 = symmetric_psd_sqrt(&gram_gap)?;
    let mut first = Matrix::zeros(2 * n, n);
    first.set_block(0, 0, &source.w);
    first.set_block(n, 0, &w3);
    let rest = orthonormal_complete(&first)?;

    let mut w = Matrix::zeros(2 * n, 2 * n);
    w.set_block(0, 0, &first);
    w.set_block(0, n, &rest);

    let mut f = Matrix::zeros(2 * n, source.m());
    f.set_block(0, 0, &source.f);
    let mut b = source.b.clone();
    b.extend(std::iter::repeat_n(-state_bound_mh, n));
    let mut c = Matrix::zeros(source.p(), 2 * n);
    c.set_block(0, 0, &source.c);

    let urnn = RnnParams { w, f, b, c, h_init: vec![0.0; 2 * n], activation: Activation::Relu };
    let resid = urnn.w.orthogonality_residual();
    if resid > 1e-12 {
        return Err(Error::NumericalFailure(format!("embedded transition not orthogonal (residual {resid:.3e})")));
    }
    Ok(EmbeddingRecord { urnn, source_hash: params_digest(source), rho, input_bound_m, state_bound_mh })
}
