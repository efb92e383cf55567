//! Monte-Carlo check that two networks realize the same input-output map on
//! sequences whose entries lie in the ℓ₂ ball of radius `M`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::EmbeddingRecord;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::par;
use crate::rnn::RnnParams;

/// Number of deterministic probes run in addition to the random trials:
/// all zeros, constant `+M e₁`, constant `−M e₁`, and an impulse `M e₁` at
/// the first step.
pub const EDGE_PROBES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub trials: usize,
    pub t_len: usize,
    pub input_bound_m: f64,
    /// Largest entry-wise output difference over trials and edge probes.
    pub max_abs_deviation: f64,
    /// One entry per random trial, in trial order.
    pub per_trial_deviations: Vec<f64>,
    /// One entry per edge probe, in the order listed at [`EDGE_PROBES`].
    pub edge_probe_deviations: Vec<f64>,
    pub passed: bool,
    pub tolerance: f64,
    pub seed: u64,
}

/// Edge probe `index` (`0..EDGE_PROBES`) of shape `t_len × m`.
pub fn edge_probe(index: usize, t_len: usize, m: usize, radius: f64) -> Matrix {
    let mut x = Matrix::zeros(t_len, m);
    match index {
        0 => {}
        1 | 2 => {
            let v = if index == 1 { radius } else { -radius };
            for k in 0..t_len {
                x[(k, 0)] = v;
            }
        }
        3 => x[(0, 0)] = radius,
        _ => panic!("edge probe index {index} out of range"),
    }
    x
}

/// Random trial sequence: every row is uniform in the ℓ₂ ball of the given
/// radius. The stream depends only on `(seed, trial)`.
pub fn ball_sequence(seed: u64, trial: usize, t_len: usize, m: usize, radius: f64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut x = Matrix::zeros(t_len, m);
    for k in 0..t_len {
        let row = x.row_mut(k);
        let norm = loop {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = crate::linalg::norm2(row);
            if norm > 0.0 {
                break norm;
            }
        };
        let r = radius * rng.random::<f64>().powf(1.0 / m as f64);
        row.iter_mut().for_each(|v| *v *= r / norm);
    }
    x
}

fn probe(i: usize, seed: u64, t_len: usize, m: usize, radius: f64) -> Matrix {
    if i < EDGE_PROBES {
        edge_probe(i, t_len, m, radius)
    } else {
        ball_sequence(seed, i - EDGE_PROBES, t_len, m, radius)
    }
}

fn check_pair(a: &RnnParams, b: &RnnParams) -> Result<()> {
    a.validate()?;
    b.validate()?;
    if a.m() != b.m() || a.p() != b.p() {
        return Err(Error::DimensionMismatch(format!(
            "networks map {}→{} and {}→{} channels",
            a.m(),
            a.p(),
            b.m(),
            b.p()
        )));
    }
    Ok(())
}

/// Largest entry-wise output difference of `a` and `b` on one input.
pub fn output_deviation(a: &RnnParams, b: &RnnParams, x: &Matrix) -> Result<f64> {
    Ok(a.rnn_map(x)?.max_abs_diff(&b.rnn_map(x)?))
}

/// Runs `trials` random sequences and the edge probes through both networks.
/// Trials may run in parallel; trial `i` draws from its own stream so the
/// report does not depend on the thread count.
pub fn verify_equivalence(
    a: &RnnParams,
    b: &RnnParams,
    input_bound_m: f64,
    trials: usize,
    t_len: usize,
    tol: f64,
    seed: u64,
) -> Result<EquivalenceReport> {
    check_pair(a, b)?;
    if !(input_bound_m > 0.0) || !input_bound_m.is_finite() {
        return Err(Error::InvalidInput(format!("input bound must be positive, got {input_bound_m}")));
    }
    if t_len == 0 {
        return Err(Error::InvalidInput("sequence length must be positive".into()));
    }
    let m = a.m();
    let devs = par::map_indexed(EDGE_PROBES + trials, |i| {
        output_deviation(a, b, &probe(i, seed, t_len, m, input_bound_m))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let max_abs_deviation = devs.iter().fold(0.0f64, |acc, &d| acc.max(d));
    let (edge, per_trial) = devs.split_at(EDGE_PROBES);
    Ok(EquivalenceReport {
        trials,
        t_len,
        input_bound_m,
        max_abs_deviation,
        per_trial_deviations: per_trial.to_vec(),
        edge_probe_deviations: edge.to_vec(),
        passed: max_abs_deviation <= tol,
        tolerance: tol,
        seed,
    })
}

/// State-level view of an embedding on the same probes
/// [`verify_equivalence`] uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenBlockReport {
    /// `max |h_u[n..2n]|` over probes and time.
    pub max_second_block_abs: f64,
    /// `max |h_u[0..n] − h_c|` over probes and time.
    pub max_first_block_mismatch: f64,
    pub max_output_deviation: f64,
}

pub fn embedding_invariants(
    source: &RnnParams,
    record: &EmbeddingRecord,
    trials: usize,
    t_len: usize,
    seed: u64,
) -> Result<HiddenBlockReport> {
    check_pair(source, &record.urnn)?;
    let n = source.n();
    if record.urnn.n() != 2 * n {
        return Err(Error::DimensionMismatch(format!(
            "embedding has {} states, source has {n}",
            record.urnn.n()
        )));
    }
    if t_len == 0 {
        return Err(Error::InvalidInput("sequence length must be positive".into()));
    }
    let m = source.m();
    let radius = record.input_bound_m;
    let per_probe = par::map_indexed(EDGE_PROBES + trials, |i| -> Result<[f64; 3]> {
        let x = probe(i, seed, t_len, m, radius);
        let src = source.forward(&x)?;
        let emb = record.urnn.forward(&x)?;
        let mut out = [0.0f64; 3];
        for k in 0..t_len {
            let (hc, hu) = (src.h.row(k), emb.h.row(k));
            for j in 0..n {
                out[0] = out[0].max(hu[n + j].abs());
                out[1] = out[1].max((hu[j] - hc[j]).abs());
            }
        }
        out[2] = src.y.max_abs_diff(&emb.y);
        Ok(out)
    });
    let mut r = [0.0f64; 3];
    for p in per_probe {
        let p = p?;
        for (acc, v) in r.iter_mut().zip(p) {
            *acc = acc.max(v);
        }
    }
    Ok(HiddenBlockReport { max_second_block_abs: r[0], max_first_block_mismatch: r[1], max_output_deviation: r[2] })
}
