//! Backpropagation through time for the mean-squared-error loss.

use super::{RnnParams, Sequence};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::par;

/// Loss value and its gradient with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub loss: f64,
    pub w: Matrix,
    pub f: Matrix,
    pub b: Vec<f64>,
    pub c: Matrix,
    pub h_init: Vec<f64>,
}

impl ParamGrads {
    fn zeros_like(p: &RnnParams) -> Self {
        ParamGrads {
            loss: 0.0,
            w: Matrix::zeros(p.n(), p.n()),
            f: Matrix::zeros(p.n(), p.m()),
            b: vec![0.0; p.n()],
            c: Matrix::zeros(p.p(), p.n()),
            h_init: vec![0.0; p.n()],
        }
    }

    fn accumulate(&mut self, other: &ParamGrads) {
        self.loss += other.loss;
        add_into(self.w.as_mut_slice(), other.w.as_slice());
        add_into(self.f.as_mut_slice(), other.f.as_slice());
        add_into(&mut self.b, &other.b);
        add_into(self.c.as_mut_slice(), other.c.as_slice());
        add_into(&mut self.h_init, &other.h_init);
    }

    fn divide(&mut self, d: f64) {
        self.loss /= d;
        let parts: [&mut [f64]; 5] =
            [self.w.as_mut_slice(), self.f.as_mut_slice(), &mut self.b, self.c.as_mut_slice(), &mut self.h_init];
        for part in parts {
            part.iter_mut().for_each(|x| *x /= d);
        }
    }

    /// Gradient of `(W, F, b, C)` flattened in [`RnnParams::trainable_to_vec`] order.
    pub fn trainable_to_vec(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend_from_slice(self.w.as_slice());
        v.extend_from_slice(self.f.as_slice());
        v.extend_from_slice(&self.b);
        v.extend_from_slice(self.c.as_slice());
        v
    }

    pub fn is_finite(&self) -> bool {
        self.loss.is_finite() && self.trainable_to_vec().iter().chain(&self.h_init).all(|x| x.is_finite())
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Loss and gradients for one sequence, loss averaged over time and outputs.
pub fn sequence_gradients(params: &RnnParams, seq: &Sequence) -> Result<ParamGrads> {
    params.validate()?;
    let target = seq.targets()?;
    let x = &seq.x;
    let (n, m, p) = (params.n(), params.m(), params.p());
    if x.cols() != m || target.cols() != p || target.rows() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "sequence x {:?} / y {:?} against model m={m}, p={p}",
            x.shape(),
            target.shape()
        )));
    }
    let t_len = x.rows();
    let act = params.activation;

    // Forward pass keeping pre-activations and states.
    let mut zs = Matrix::zeros(t_len, n);
    let mut hs = Matrix::zeros(t_len, n);
    let mut h = params.h_init.clone();
    for k in 0..t_len {
        params.preactivation(&h, x.row(k), zs.row_mut(k));
        for (hi, &zi) in h.iter_mut().zip(zs.row(k)) {
            *hi = act.apply(zi);
        }
        if !h.iter().all(|v| v.is_finite()) {
            return Err(Error::Overflow { step: k });
        }
        hs.row_mut(k).copy_from_slice(&h);
    }

    let norm = (t_len * p) as f64;
    let mut g = ParamGrads::zeros_like(params);
    let mut dz_next = vec![0.0; n];
    let mut dy = vec![0.0; p];
    let mut dz = vec![0.0; n];
    for k in (0..t_len).rev() {
        let hk = hs.row(k);
        let yk = params.c.matvec(hk);
        for ((d, &pred), &tgt) in dy.iter_mut().zip(&yk).zip(target.row(k)) {
            let e = pred - tgt;
            g.loss += e * e;
            *d = 2.0 * e / norm;
        }
        // dL/dh_k = Cᵀ dy_k + Wᵀ dz_{k+1}
        let mut dh = params.c.tr_matvec(&dy);
        if k + 1 < t_len {
            for (a, b) in dh.iter_mut().zip(params.w.tr_matvec(&dz_next)) {
                *a += b;
            }
        }
        for i in 0..n {
            dz[i] = dh[i] * act.derivative(zs[(k, i)]);
        }
        for (i, &dyi) in dy.iter().enumerate() {
            for (gc, &hj) in g.c.row_mut(i).iter_mut().zip(hk) {
                *gc += dyi * hj;
            }
        }
        let h_prev: &[f64] = if k == 0 { &params.h_init } else { hs.row(k - 1) };
        let xk = x.row(k);
        for i in 0..n {
            let dzi = dz[i];
            if dzi == 0.0 {
                continue;
            }
            for (gw, &hj) in g.w.row_mut(i).iter_mut().zip(h_prev) {
                *gw += dzi * hj;
            }
            for (gf, &xj) in g.f.row_mut(i).iter_mut().zip(xk) {
                *gf += dzi * xj;
            }
            g.b[i] += dzi;
        }
        std::mem::swap(&mut dz_next, &mut dz);
    }
    g.h_init = params.w.tr_matvec(&dz_next);
    g.loss /= norm;
    Ok(g)
}

/// Mean-squared-error loss over the batch and its gradients.
///
/// Per-sequence gradients may be computed in parallel; they are summed in
/// ascending sequence order and divided by the batch size, so the result is
/// identical for any thread count.
pub fn bptt_gradients(params: &RnnParams, batch: &[Sequence]) -> Result<ParamGrads> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let per_seq = par::map_indexed(batch.len(), |i| sequence_gradients(params, &batch[i]));
    let mut total = ParamGrads::zeros_like(params);
    for g in per_seq {
        total.accumulate(&g?);
    }
    total.divide(batch.len() as f64);
    Ok(total)
}
