//! Minibatch Adam on BPTT gradients, with the transition matrix projected
//! back onto the constraint set after every step.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{polar_orthogonal_projection, singular_value_clip, spectral_norm, Matrix};
use crate::par;
use crate::rnn::{bptt_gradients, mse, Activation, RnnParams, Sequence};
use crate::synth::{r2_on, Dataset};

/// Constraint on the transition matrix `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    None,
    /// `‖W‖ ≤ cap` by clipping singular values.
    Contractive { cap: f64 },
    /// `WᵀW = I` by polar projection.
    Unitary,
}

impl Constraint {
    pub const DEFAULT_CAP: f64 = 0.999;

    pub fn validate(&self) -> Result<()> {
        if let Constraint::Contractive { cap } = *self {
            if !(cap > 0.0 && cap < 1.0) {
                return Err(Error::InvalidInput(format!("contractive cap must lie in (0, 1), got {cap}")));
            }
        }
        Ok(())
    }

    /// `‖WᵀW − I‖_max` for the unitary constraint, `‖W‖` otherwise.
    pub fn residual(&self, w: &Matrix) -> Result<f64> {
        match self {
            Constraint::Unitary => Ok(w.orthogonality_residual()),
            _ => spectral_norm(w),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop { patience: 10, validation_fraction: 0.15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub constraint: Constraint,
    pub adam: AdamConfig,
    pub early_stop: EarlyStop,
    pub seed: u64,
    pub hidden_units: usize,
    /// Record wall-clock time in the report (which then differs run to run).
    #[serde(default)]
    pub record_timing: bool,
}

impl TrainConfig {
    pub fn new(hidden_units: usize, constraint: Constraint, seed: u64) -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 10,
            max_epochs: 200,
            constraint,
            adam: AdamConfig::default(),
            early_stop: EarlyStop::default(),
            seed,
            hidden_units,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidInput(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be at least 1".into()));
        }
        let f = self.early_stop.validation_fraction;
        if !(0.0..1.0).contains(&f) {
            return Err(Error::InvalidInput(format!("validation fraction must lie in [0, 1), got {f}")));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(Error::InvalidInput("Adam needs betas in [0, 1) and eps > 0".into()));
        }
        self.constraint.validate()
    }
}

/// First and second moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// One bias-corrected Adam update of `theta` in place.
pub fn adam_step(state: &mut AdamState, theta: &mut [f64], grads: &[f64], lr: f64, cfg: &AdamConfig) -> Result<()> {
    if theta.len() != grads.len() || state.m.len() != grads.len() || state.v.len() != grads.len() {
        return Err(Error::DimensionMismatch(format!(
            "Adam state {}, parameters {}, gradient {}",
            state.m.len(),
            theta.len(),
            grads.len()
        )));
    }
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powf(state.t as f64);
    let c2 = 1.0 - cfg.beta2.powf(state.t as f64);
    for i in 0..grads.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Projects `W` onto the constraint set; the other parameters are untouched.
pub fn project_params(params: &RnnParams, constraint: &Constraint) -> Result<RnnParams> {
    constraint.validate()?;
    let mut out = params.clone();
    match *constraint {
        Constraint::None => {}
        Constraint::Contractive { cap } => out.w = singular_value_clip(&params.w, cap)?,
        Constraint::Unitary => out.w = polar_orthogonal_projection(&params.w)?,
    }
    Ok(out)
}

/// Student initialization: `W`, `F`, `C` Gaussian with standard deviation
/// `1/√n`, `b = 0`, then `W` projected onto the constraint.
pub fn init_student(
    n: usize,
    m: usize,
    p: usize,
    activation: Activation,
    constraint: &Constraint,
    seed: u64,
) -> Result<RnnParams> {
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::InvalidInput("student dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let normal = Normal::new(0.0, 1.0 / (n as f64).sqrt()).expect("positive std");
    let mut draw = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| normal.sample(&mut rng));
    let w = draw(n, n);
    let f = draw(n, m);
    let c = draw(p, n);
    let params = RnnParams::new(w, f, vec![0.0; n], c, activation)?;
    project_params(&params, constraint)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopped,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    /// Mean minibatch loss per epoch.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Test R² at the end of each epoch; empty when the dataset has no test set.
    pub test_r2: Vec<f64>,
    /// Constraint residual of `W` at the end of each epoch.
    pub constraint_residual: Vec<f64>,
    /// Largest residual seen right after any projection step.
    pub max_step_residual: f64,
    /// Residual of the returned (best-validation) parameters.
    pub final_constraint_residual: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopping_reason: StopReason,
    pub seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

/// Seeded split of `0..n` into (training, validation) index lists, each in
/// ascending order.
pub fn validation_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = (fraction * n as f64).round() as usize;
    if n_val == 0 {
        return Err(Error::EmptyValidation);
    }
    if n_val >= n {
        return Err(Error::InvalidInput(format!("validation split leaves no training data ({n_val} of {n})")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// Mean per-sequence MSE.
fn mean_loss(params: &RnnParams, seqs: &[&Sequence]) -> Result<f64> {
    let losses = par::map_indexed(seqs.len(), |i| -> Result<f64> {
        let s = seqs[i];
        mse(&params.rnn_map(&s.x)?, s.targets()?)
    });
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / seqs.len() as f64)
}

fn diverged(epoch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Overflow { .. } | Error::NumericalFailure(_) => Error::Divergence { epoch },
        other => other,
    }
}

/// Trains from `init` and returns the parameters with the lowest validation
/// loss together with the per-epoch history.
pub fn train(init: &RnnParams, data: &Dataset, config: &TrainConfig) -> Result<(RnnParams, TrainReport)> {
    config.validate()?;
    init.validate()?;
    if init.n() != config.hidden_units {
        return Err(Error::DimensionMismatch(format!(
            "config has {} hidden units, initial model {}",
            config.hidden_units,
            init.n()
        )));
    }
    let first = data.train.first().ok_or_else(|| Error::InvalidInput("empty training set".into()))?;
    if first.x.cols() != init.m() || first.targets()?.cols() != init.p() {
        return Err(Error::DimensionMismatch(format!(
            "data maps {}→{}, model {}→{}",
            first.x.cols(),
            first.targets()?.cols(),
            init.m(),
            init.p()
        )));
    }
    let start = Instant::now();
    let (train_idx, val_idx) = validation_split(data.train.len(), config.early_stop.validation_fraction, config.seed)?;
    let val: Vec<&Sequence> = val_idx.iter().map(|&i| &data.train[i]).collect();

    let mut params = project_params(init, &config.constraint)?;
    let mut theta = params.trainable_to_vec();
    let mut adam = AdamState::new(theta.len());
    let mut order = train_idx.clone();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let mut report = TrainReport {
        config: config.clone(),
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        test_r2: Vec::new(),
        constraint_residual: Vec::new(),
        max_step_residual: 0.0,
        final_constraint_residual: 0.0,
        epochs_run: 0,
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopping_reason: StopReason::MaxEpochs,
        seed: config.seed,
        n_train: train_idx.len(),
        n_validation: val_idx.len(),
        wall_time_s: None,
    };
    let mut best = params.clone();
    let mut since_best = 0;
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Sequence> = chunk.iter().map(|&i| data.train[i].clone()).collect();
            let grads = bptt_gradients(&params, &batch).map_err(diverged(epoch))?;
            if !grads.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            loss_sum += grads.loss * chunk.len() as f64;
            adam_step(&mut adam, &mut theta, &grads.trainable_to_vec(), config.learning_rate, &config.adam)?;
            if !theta.iter().all(|v| v.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            params.set_trainable(&theta);
            params = project_params(&params, &config.constraint).map_err(diverged(epoch))?;
            theta = params.trainable_to_vec();
            if config.constraint != Constraint::None {
                report.max_step_residual = report.max_step_residual.max(config.constraint.residual(&params.w)?);
            }
        }
        let train_loss = loss_sum / order.len() as f64;
        let val_loss = mean_loss(&params, &val).map_err(diverged(epoch))?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        report.constraint_residual.push(config.constraint.residual(&params.w)?);
        if !data.test.is_empty() {
            report.test_r2.push(r2_on(&params, &data.test).map_err(diverged(epoch))?);
        }
        report.epochs_run = epoch + 1;
        if val_loss < report.best_val_loss {
            report.best_val_loss = val_loss;
            report.best_epoch = epoch;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.early_stop.patience {
                report.stopping_reason = StopReason::EarlyStopped;
                break;
            }
        }
    }
    report.final_constraint_residual = config.constraint.residual(&best.w)?;
    if config.record_timing {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok((best, report))
}

/// Test-set R² and the noise-limited ceiling for the same data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub r2: f64,
    pub optimal_r2: f64,
}

pub fn evaluate(params: &RnnParams, data: &Dataset) -> Result<Evaluation> {
    Ok(Evaluation { r2: r2_on(params, &data.test)?, optimal_r2: data.optimal_r2()? })
}
