//! Synthetic teacher systems with slowly decaying modes, and noisy datasets
//! drawn from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Matrix};
use crate::par;
use crate::rnn::{r_squared, Activation, RnnParams, Sequence};

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Parameters of a generated teacher system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    /// `W = I − ε AᵀA / ‖A‖²`.
    pub epsilon: f64,
    pub seed: u64,
    /// Fraction of time steps each unit should be strictly positive.
    pub activation_target: f64,
    pub activation_tol: f64,
    pub input_std: f64,
    /// Probability that an input entry is nonzero.
    pub input_sparsity: f64,
    /// Calibration probes are drawn from the same input law as the data.
    pub calibration_sequences: usize,
    pub calibration_t_len: usize,
    pub calibration_max_iter: usize,
}

impl SystemSpec {
    pub fn new(n: usize, m: usize, p: usize, epsilon: f64, seed: u64) -> Self {
        SystemSpec {
            n,
            m,
            p,
            epsilon,
            seed,
            activation_target: 0.6,
            activation_tol: 0.05,
            input_std: 1.0,
            input_sparsity: 1.0,
            calibration_sequences: 20,
            calibration_t_len: 500,
            calibration_max_iter: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.n == 0 || self.m == 0 || self.p == 0 {
            return bad(format!("dimensions must be positive (n={}, m={}, p={})", self.n, self.m, self.p));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.activation_target > 0.0 && self.activation_target < 1.0) {
            return bad(format!("activation target must lie in (0, 1), got {}", self.activation_target));
        }
        if !(self.activation_tol > 0.0) {
            return bad("activation tolerance must be positive".into());
        }
        if !(self.input_std > 0.0) || !self.input_std.is_finite() {
            return bad(format!("input std must be positive, got {}", self.input_std));
        }
        if !(self.input_sparsity > 0.0 && self.input_sparsity <= 1.0) {
            return bad(format!("input sparsity must lie in (0, 1], got {}", self.input_sparsity));
        }
        if self.calibration_sequences == 0 || self.calibration_t_len == 0 {
            return bad("calibration probe set must be nonempty".into());
        }
        Ok(())
    }
}

/// `T × m` inputs: each entry is nonzero with probability `sparsity` and
/// then Gaussian with standard deviation `std`.
pub fn sample_inputs<R: Rng>(rng: &mut R, t_len: usize, m: usize, std: f64, sparsity: f64) -> Matrix {
    Matrix::from_fn(t_len, m, |_, _| {
        if sparsity < 1.0 && !rng.random_bool(sparsity) {
            0.0
        } else {
            std * rng.sample::<f64, _>(StandardNormal)
        }
    })
}

fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

/// Result of [`bias_calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: RnnParams,
    /// Per-unit fraction of probe time steps with `h_i > 0`.
    pub fractions: Vec<f64>,
    pub iterations: usize,
}

/// Per-unit pre-activations over all probe steps (unit-major) and the
/// fraction of steps each unit is strictly positive.
fn probe_activity(params: &RnnParams, probe: &[Matrix]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = params.n();
    let per_seq = par::map_indexed(probe.len(), |s| -> Result<Vec<Vec<f64>>> {
        let x = &probe[s];
        let mut h = params.h_init.clone();
        let mut z = vec![0.0; n];
        let mut out = vec![Vec::with_capacity(x.rows()); n];
        for k in 0..x.rows() {
            params.preactivation(&h, x.row(k), &mut z);
            for i in 0..n {
                h[i] = params.activation.apply(z[i]);
                out[i].push(z[i]);
            }
            if !h.iter().all(|v| v.is_finite()) {
                return Err(Error::Overflow { step: k });
            }
        }
        Ok(out)
    });
    let mut zs = vec![Vec::new(); n];
    for seq in per_seq {
        for (all, part) in zs.iter_mut().zip(seq?) {
            all.extend(part);
        }
    }
    let fractions = zs.iter().map(|z| z.iter().filter(|&&v| v > 0.0).count() as f64 / z.len() as f64).collect();
    Ok((zs, fractions))
}

/// Linear-interpolated empirical quantile of unsorted data.
fn quantile(data: &mut [f64], q: f64) -> f64 {
    data.sort_by(f64::total_cmp);
    let pos = q * (data.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    data[lo] + (pos - lo as f64) * (data[hi] - data[lo])
}

/// Adjusts each bias until every unit is on for `target ± tol` of the
/// probe steps.
///
/// The proposed move for unit `i` is `b_i ← b_i − q_i`, with `q_i` the
/// `(1 − target)`-quantile of its simulated pre-activation. Once a unit has
/// been seen both above and below target, its bias is bisected inside that
/// bracket instead: with near-identity recurrence an active unit integrates
/// its own bias, so full quantile steps overshoot and oscillate.
pub fn bias_calibrate(
    params: &RnnParams,
    probe: &[Matrix],
    target: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Calibration> {
    params.validate()?;
    if params.activation != Activation::Relu {
        return Err(Error::UnsupportedActivation(format!(
            "bias calibration targets relu units, got {}",
            params.activation.name()
        )));
    }
    if probe.is_empty() || probe.iter().any(|x| x.rows() == 0) {
        return Err(Error::InvalidInput("calibration probe set is empty".into()));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!("target fraction must lie in (0, 1), got {target}")));
    }
    let n = params.n();
    let mut params = params.clone();
    // Bias values known to give activity below (`lo`) and above (`hi`) target.
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    // Signed count of consecutive iterations with the same error sign.
    let mut run = vec![0i32; n];
    let mut last = Vec::new();
    for iter in 0..=max_iter {
        let (mut zs, fractions) = probe_activity(&params, probe)?;
        if fractions.iter().all(|f| (f - target).abs() <= tol) {
            return Ok(Calibration { params, fractions, iterations: iter });
        }
        if iter == max_iter {
            last = fractions;
            break;
        }
        for i in 0..n {
            let err = fractions[i] - target;
            if err.abs() <= tol {
                continue;
            }
            let b = params.b[i];
            // Bounds go stale as the other units move. A bound contradicted by
            // the new observation is dropped, and so is the bound being
            // approached after three moves in the same direction.
            let sign = if err > 0.0 { 1 } else { -1 };
            run[i] = if run[i].signum() == sign { run[i] + sign } else { sign };
            if err > 0.0 {
                hi[i] = b;
                if lo[i] >= b || run[i] >= 3 {
                    lo[i] = f64::NEG_INFINITY;
                }
            } else {
                lo[i] = b;
                if hi[i] <= b || run[i] <= -3 {
                    hi[i] = f64::INFINITY;
                }
            }
            if hi[i] - lo[i] <= 1e-12 * b.abs().max(1.0) {
                lo[i] = f64::NEG_INFINITY;
                hi[i] = f64::INFINITY;
            }
            params.b[i] = if lo[i].is_finite() && hi[i].is_finite() {
                0.5 * (lo[i] + hi[i])
            } else {
                let q = quantile(&mut zs[i], 1.0 - target);
                let proposal = b - q;
                // stay inside whichever side of the bracket is known
                proposal.clamp(lo[i], hi[i])
            };
        }
    }
    Err(Error::Calibration { fractions: last })
}

/// A generated teacher and its calibration outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSystem {
    pub params: RnnParams,
    pub activity_fractions: Vec<f64>,
    pub calibration_iterations: usize,
}

/// Draws `A`, `F`, `C`, `b` (standard normal, in that order) from the spec
/// seed, forms `W = I − ε AᵀA/‖A‖²`, and calibrates `b` on probe inputs from
/// the data distribution.
pub fn generate_system(spec: &SystemSpec) -> Result<GeneratedSystem> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = gaussian(&mut rng, n, n, 1.0);
    let f = gaussian(&mut rng, n, spec.m, 1.0);
    let c = gaussian(&mut rng, spec.p, n, 1.0);
    let b: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();

    let a_norm = spectral_norm(&a)?;
    if a_norm == 0.0 {
        return Err(Error::NumericalFailure("random draw of A is zero".into()));
    }
    let ata = a.transpose().matmul(&a);
    let w = Matrix::identity(n).sub(&ata.scale(spec.epsilon / (a_norm * a_norm)));
    let raw = RnnParams::new(w, f, b, c, Activation::Relu)?;

    let mut probe_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    probe_rng.set_stream(1);
    let probe: Vec<Matrix> = (0..spec.calibration_sequences)
        .map(|_| sample_inputs(&mut probe_rng, spec.calibration_t_len, spec.m, spec.input_std, spec.input_sparsity))
        .collect();
    let cal = bias_calibrate(&raw, &probe, spec.activation_target, spec.activation_tol, spec.calibration_max_iter)?;
    Ok(GeneratedSystem {
        params: cal.params,
        activity_fractions: cal.fractions,
        calibration_iterations: cal.iterations,
    })
}

/// Random relu-or-other network with `‖W‖` drawn uniformly from
/// `[0.05, rho_max]` and Gaussian `F`, `b`, `C`.
pub fn random_contractive(
    n: usize,
    m: usize,
    p: usize,
    rho_max: f64,
    activation: Activation,
    seed: u64,
) -> Result<RnnParams> {
    if !(rho_max > 0.05 && rho_max < 1.0) {
        return Err(Error::InvalidInput(format!("rho_max must lie in (0.05, 1), got {rho_max}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = gaussian(&mut rng, n, n, 1.0);
    let f = gaussian(&mut rng, n, m, 1.0);
    let c = gaussian(&mut rng, p, n, 1.0);
    let b = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let rho = rng.random_range(0.05..=rho_max);
    let norm = spectral_norm(&w)?;
    if norm == 0.0 {
        return Err(Error::NumericalFailure("random draw of W is zero".into()));
    }
    RnnParams::new(w.scale(rho / norm), f, b, c, activation)
}

/// Everything needed to regenerate or interpret a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub spec: SystemSpec,
    pub seed: u64,
    pub t_len: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Requested SNR; `None` means noiseless targets.
    pub snr_db: Option<f64>,
    /// Mean square of the clean outputs over every train and test entry.
    pub clean_signal_power: f64,
    pub noise_variance: f64,
    /// Mean square of the noise actually drawn.
    pub empirical_noise_power: f64,
    pub empirical_snr_db: Option<f64>,
    /// Fraction of input entries that are nonzero.
    pub nonzero_input_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sequence>,
    pub test: Vec<Sequence>,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Channel-averaged `1 − σ²_noise / Var(test target)`: the score of a
    /// predictor that outputs the clean signal exactly.
    pub fn optimal_r2(&self) -> Result<f64> {
        let (stacked, _) = stack_targets(&self.test)?;
        let (rows, cols) = stacked.shape();
        let mut total = 0.0;
        for j in 0..cols {
            let mean = (0..rows).map(|i| stacked[(i, j)]).sum::<f64>() / rows as f64;
            let var = (0..rows).map(|i| (stacked[(i, j)] - mean).powi(2)).sum::<f64>() / rows as f64;
            if var == 0.0 {
                return Err(Error::UndefinedR2 { channel: j });
            }
            total += 1.0 - self.meta.noise_variance / var;
        }
        Ok(total / cols as f64)
    }
}

/// Concatenates the targets of `seqs` along time; also returns the inputs.
pub fn stack_targets(seqs: &[Sequence]) -> Result<(Matrix, Matrix)> {
    let first = seqs.first().ok_or_else(|| Error::InvalidInput("no sequences".into()))?;
    let p = first.targets()?.cols();
    let m = first.x.cols();
    let rows: usize = seqs.iter().map(Sequence::len).sum();
    let mut y = Matrix::zeros(rows, p);
    let mut x = Matrix::zeros(rows, m);
    let mut r = 0;
    for s in seqs {
        let t = s.targets()?;
        if t.cols() != p || s.x.cols() != m {
            return Err(Error::DimensionMismatch("sequences disagree on channel counts".into()));
        }
        for k in 0..s.len() {
            y.row_mut(r).copy_from_slice(t.row(k));
            x.row_mut(r).copy_from_slice(s.x.row(k));
            r += 1;
        }
    }
    Ok((y, x))
}

/// R² of `params` on `seqs`, with all sequences concatenated.
pub fn r2_on(params: &RnnParams, seqs: &[Sequence]) -> Result<f64> {
    let (truth, _) = stack_targets(seqs)?;
    let preds = par::map_indexed(seqs.len(), |i| params.rnn_map(&seqs[i].x));
    let mut pred = Matrix::zeros(truth.rows(), truth.cols());
    let mut r = 0;
    for y in preds {
        let y = y?;
        for k in 0..y.rows() {
            pred.row_mut(r).copy_from_slice(y.row(k));
            r += 1;
        }
    }
    r_squared(&pred, &truth)
}

/// Simulates `params` on fresh inputs and adds Gaussian noise at the
/// requested global SNR (`f64::INFINITY` for clean targets). Inputs come
/// from stream 0 of the seed and noise from stream 1, so the inputs do not
/// depend on the SNR.
#[allow(clippy::too_many_arguments)]
pub fn generate_dataset(
    params: &RnnParams,
    spec: &SystemSpec,
    n_train: usize,
    n_test: usize,
    t_len: usize,
    snr_db: f64,
    seed: u64,
) -> Result<Dataset> {
    params.validate()?;
    spec.validate()?;
    if (params.m(), params.p()) != (spec.m, spec.p) {
        return Err(Error::DimensionMismatch(format!(
            "model maps {}→{}, spec says {}→{}",
            params.m(),
            params.p(),
            spec.m,
            spec.p
        )));
    }
    if t_len == 0 || n_train + n_test == 0 {
        return Err(Error::InvalidInput("dataset needs a positive length and at least one sequence".into()));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidInput(format!("invalid SNR {snr_db}")));
    }
    let total = n_train + n_test;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Matrix> =
        (0..total).map(|_| sample_inputs(&mut rng, t_len, spec.m, spec.input_std, spec.input_sparsity)).collect();
    let clean = par::map_indexed(total, |i| params.rnn_map(&inputs[i])).into_iter().collect::<Result<Vec<_>>>()?;

    let entries = (total * t_len * spec.p) as f64;
    let clean_signal_power = clean.iter().flat_map(|y| y.as_slice()).map(|v| v * v).sum::<f64>() / entries;
    if clean_signal_power == 0.0 || !clean_signal_power.is_finite() {
        return Err(Error::DegenerateOutput);
    }
    let nonzero = inputs.iter().flat_map(|x| x.as_slice()).filter(|&&v| v != 0.0).count();
    let nonzero_input_fraction = nonzero as f64 / (total * t_len * spec.m) as f64;

    let noisy = snr_db.is_finite();
    let noise_variance = if noisy { clean_signal_power / 10f64.powf(snr_db / 10.0) } else { 0.0 };
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let sd = noise_variance.sqrt();
    let mut noise_energy = 0.0;
    let mut seqs = Vec::with_capacity(total);
    for (x, mut y) in inputs.into_iter().zip(clean) {
        if noisy {
            for v in y.as_mut_slice() {
                let e = sd * noise_rng.sample::<f64, _>(StandardNormal);
                noise_energy += e * e;
                *v += e;
            }
        }
        seqs.push(Sequence::new(x, Some(y))?);
    }
    let empirical_noise_power = noise_energy / entries;
    let test = seqs.split_off(n_train);
    Ok(Dataset {
        train: seqs,
        test,
        meta: DatasetMeta {
            format_version: DATASET_FORMAT_VERSION,
            spec: spec.clone(),
            seed,
            t_len,
            n_train,
            n_test,
            snr_db: noisy.then_some(snr_db),
            clean_signal_power,
            noise_variance,
            empirical_noise_power,
            empirical_snr_db: noisy.then(|| 10.0 * (clean_signal_power / empirical_noise_power).log10()),
            nonzero_input_fraction,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd;

    #[test]
    fn singular_values_in_band() {
        for (eps, seed) in [(0.01, 1), (0.01, 2), (0.5, 3), (0.05, 4)] {
            let spec = SystemSpec::new(4, 2, 2, eps, seed);
            let sys = generate_system(&spec).unwrap();
            let s = svd(&sys.params.w).unwrap().s;
            for &sv in &s {
                assert!(sv < 1.0 && sv > 1.0 - eps - 1e-12, "eps={eps}: {s:?}");
            }
            assert!(spectral_norm(&sys.params.w).unwrap() < 1.0);
        }
    }

    #[test]
    fn calibration_reaches_target() {
        let sys = generate_system(&SystemSpec::new(4, 2, 2, 0.01, 7)).unwrap();
        for f in &sys.activity_fractions {
            assert!((f - 0.6).abs() <= 0.05, "{:?}", sys.activity_fractions);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SystemSpec::new(3, 2, 1, 0.05, 9);
        let a = generate_system(&spec).unwrap();
        let b = generate_system(&spec).unwrap();
        assert_eq!(a, b);
        let da = generate_dataset(&a.params, &spec, 4, 2, 50, 20.0, 3).unwrap();
        let db = generate_dataset(&b.params, &spec, 4, 2, 50, 20.0, 3).unwrap();
        assert_eq!(da, db);
    }

    #[test]
    fn all_active_start_needs_no_shift() {
        let mut p = RnnParams::scalar(0.5, 1.0, 100.0, 1.0, Activation::Relu);
        p.b[0] = 100.0;
        let probe = vec![Matrix::from_fn(50, 1, |k, _| (k as f64).sin())];
        let cal = bias_calibrate(&p, &probe, 0.999, 0.01, 5).unwrap();
        assert_eq!(cal.iterations, 0);
        assert_eq!(cal.params, p);
    }

    #[test]
    fn raising_bias_raises_activity() {
        let spec = SystemSpec::new(4, 2, 2, 0.05, 11);
        let sys = generate_system(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let probe: Vec<Matrix> = (0..5).map(|_| sample_inputs(&mut rng, 300, 2, 1.0, 1.0)).collect();
        let (_, base) = probe_activity(&sys.params, &probe).unwrap();
        for i in 0..4 {
            let mut up = sys.params.clone();
            up.b[i] += 0.5;
            let mut down = sys.params.clone();
            down.b[i] -= 0.5;
            let (_, fu) = probe_activity(&up, &probe).unwrap();
            let (_, fd) = probe_activity(&down, &probe).unwrap();
            assert!(fu[i] >= base[i] && base[i] >= fd[i]);
        }
    }

    #[test]
    fn calibration_failure_reports_fractions() {
        // A unit with no input and no recurrence cannot be partly active.
        let p = RnnParams::new(
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            vec![1.0],
            Matrix::identity(1),
            Activation::Relu,
        )
        .unwrap();
        let probe = vec![Matrix::zeros(10, 1)];
        match bias_calibrate(&p, &probe, 0.6, 0.05, 3) {
            Err(Error::Calibration { fractions }) => assert_eq!(fractions.len(), 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quantile_interpolates() {
        let mut d = vec![3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&mut d, 0.0), 1.0);
        assert_eq!(quantile(&mut d, 1.0), 4.0);
        assert!((quantile(&mut d, 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn snr_is_hit() {
        let spec = SystemSpec::new(4, 2, 2, 0.05, 21);
        let sys = generate_system(&spec).unwrap();
        let d = generate_dataset(&sys.params, &spec, 100, 50, 200, 20.0, 8).unwrap();
        let ratio = d.meta.empirical_noise_power / d.meta.clean_signal_power;
        assert!((ratio - 0.01).abs() <= 0.0012, "{ratio}");
        assert!((d.meta.empirical_snr_db.unwrap() - 20.0).abs() <= 0.5);
    }

    #[test]
    fn clean_sentinel_gives_clean_targets() {
        let spec = SystemSpec::new(2, 1, 1, 0.1, 2);
        let sys = generate_system(&spec).unwrap();
        let d = generate_dataset(&sys.params, &spec, 3, 1, 40, f64::INFINITY, 1).unwrap();
        for s in d.train.iter().chain(&d.test) {
            assert_eq!(s.y.as_ref().unwrap(), &sys.params.rnn_map(&s.x).unwrap());
        }
        assert_eq!(d.meta.snr_db, None);
        assert_eq!(d.meta.noise_variance, 0.0);
    }

    #[test]
    fn recorded_power_matches_clean_outputs() {
        let spec = SystemSpec::new(3, 2, 2, 0.1, 4);
        let sys = generate_system(&spec).unwrap();
        let d = generate_dataset(&sys.params, &spec, 5, 3, 60, 15.0, 2).unwrap();
        let mut sum = 0.0;
        for s in d.train.iter().chain(&d.test) {
            for v in sys.params.rnn_map(&s.x).unwrap().as_slice() {
                sum += v * v;
            }
        }
        assert_eq!(sum / (8.0 * 60.0 * 2.0), d.meta.clean_signal_power);
    }

    #[test]
    fn sparse_inputs() {
        let mut spec = SystemSpec::new(4, 2, 2, 0.05, 5);
        spec.input_sparsity = 0.02;
        let sys = generate_system(&spec).unwrap();
        let d = generate_dataset(&sys.params, &spec, 100, 50, 200, 20.0, 3).unwrap();
        assert!((d.meta.nonzero_input_fraction - 0.02).abs() <= 0.005, "{}", d.meta.nonzero_input_fraction);
    }

    #[test]
    fn fastest_mode_time_constant_is_one_over_epsilon() {
        let spec = SystemSpec::new(4, 2, 2, 0.01, 13);
        let sys = generate_system(&spec).unwrap();
        let s = svd(&sys.params.w).unwrap().s;
        // W is symmetric PSD here, so its singular values are its eigenvalues.
        let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let k_fast = (-1.0 / smin.ln()).round();
        assert!((80.0..=120.0).contains(&k_fast), "{k_fast}");
        // ‖Wᵏ‖ follows the slowest mode, which is never faster than 1/ε.
        let mut wk = Matrix::identity(4);
        for _ in 0..80 {
            wk = wk.matmul(&sys.params.w);
        }
        assert!(spectral_norm(&wk).unwrap() > (-1.0f64).exp());
    }

    #[test]
    fn invalid_specs() {
        assert!(SystemSpec::new(0, 1, 1, 0.1, 0).validate().is_err());
        assert!(SystemSpec::new(1, 1, 1, 0.0, 0).validate().is_err());
        assert!(SystemSpec::new(1, 1, 1, 1.0, 0).validate().is_err());
        let mut s = SystemSpec::new(1, 1, 1, 0.1, 0);
        s.input_sparsity = 0.0;
        assert!(s.validate().is_err());
    }
}
