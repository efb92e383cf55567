//! Witnesses that some contractive networks have no smaller orthogonal
//! realization: a separable ReLU system that needs `2n` states, and a scalar
//! sigmoid system whose linearizations no orthogonal candidate can match.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::verify::{ball_sequence, output_deviation};
use super::unitary_embedding;
use crate::error::{Error, Result};
use crate::linalg::{determinant, Matrix};
use crate::par;
use crate::rnn::{ctrb_obsv, fixed_point, linearize, Activation, RnnParams};

/// `n` decoupled copies of the scalar ReLU system `(w_c, 1, 0, 1)`.
pub fn converse_relu_witness(n: usize, w_c: f64) -> Result<RnnParams> {
    if n == 0 {
        return Err(Error::InvalidInput("witness needs at least one state".into()));
    }
    if !(w_c > 0.0 && w_c < 1.0) {
        return Err(Error::InvalidInput(format!("w_c must lie in (0, 1), got {w_c}")));
    }
    RnnParams::new(
        Matrix::from_diag(&vec![w_c; n]),
        Matrix::identity(n),
        vec![0.0; n],
        Matrix::identity(n),
        Activation::Relu,
    )
}

/// Scalar network parameters `(w, f, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarCandidate {
    pub w: f64,
    pub f: f64,
    pub b: f64,
    pub c: f64,
}

/// Grid and probe configuration for [`one_state_urnn_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSearch {
    /// Points per axis for `f`, `b` and `c`.
    pub grid_resolution: usize,
    /// Grid spans `[−grid_bound, grid_bound]`.
    pub grid_bound: f64,
    /// Values tried for the one-state transition.
    pub signs: Vec<f64>,
    pub t_len: usize,
    pub input_bound: f64,
    /// Constant probe levels, as fractions of `input_bound`.
    pub constant_levels: Vec<f64>,
    /// Random probes drawn uniformly from `[−input_bound, input_bound]`.
    pub random_probes: usize,
    pub probe_seed: u64,
}

impl Default for GapSearch {
    fn default() -> Self {
        GapSearch {
            grid_resolution: 61,
            grid_bound: 3.0,
            signs: vec![1.0, -1.0],
            t_len: 50,
            input_bound: 10.0,
            constant_levels: vec![1.0, 0.5, 0.1],
            random_probes: 4,
            probe_seed: 2024,
        }
    }
}

impl GapSearch {
    /// The fixed probe inputs, each `t_len × 1`.
    pub fn probes(&self) -> Vec<Matrix> {
        let mut out: Vec<Matrix> = self
            .constant_levels
            .iter()
            .map(|lvl| Matrix::from_fn(self.t_len, 1, |_, _| lvl * self.input_bound))
            .collect();
        out.extend((0..self.random_probes).map(|i| ball_sequence(self.probe_seed, i, self.t_len, 1, self.input_bound)));
        out
    }

    fn grid(&self) -> Vec<f64> {
        let r = self.grid_resolution;
        (0..r).map(|i| -self.grid_bound + 2.0 * self.grid_bound * i as f64 / (r - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Smallest max-output deviation over the grid.
    pub gap: f64,
    pub best: ScalarCandidate,
    /// Deviation of the two-state embedding on the same probes.
    pub embedding_deviation: f64,
    pub candidates_evaluated: usize,
    pub probe_count: usize,
    pub search: GapSearch,
}

fn check_scalar_witness(w: &RnnParams) -> Result<()> {
    w.validate()?;
    if (w.n(), w.m(), w.p()) != (1, 1, 1) {
        return Err(Error::InvalidInput(format!(
            "witness must be scalar, got n={}, m={}, p={}",
            w.n(),
            w.m(),
            w.p()
        )));
    }
    if w.activation != Activation::Relu {
        return Err(Error::UnsupportedActivation(format!("{} witness; expected relu", w.activation.name())));
    }
    Ok(())
}

/// Exhaustive grid search over one-state ReLU networks with `w ∈ signs`,
/// returning the best achievable max deviation from `witness` on the probe
/// set. Grid slices over `(w, f)` run in parallel and are reduced in index
/// order with strict improvement, so ties resolve to the first grid point.
pub fn one_state_urnn_search(witness: &RnnParams, search: &GapSearch) -> Result<GapReport> {
    check_scalar_witness(witness)?;
    if search.grid_resolution < 2 || search.t_len == 0 || search.signs.is_empty() {
        return Err(Error::InvalidInput("grid needs ≥ 2 points per axis, a positive length and a sign".into()));
    }
    let probes = search.probes();
    if probes.is_empty() {
        return Err(Error::InvalidInput("empty probe set".into()));
    }
    let targets: Vec<Vec<f64>> =
        probes.iter().map(|x| witness.rnn_map(x).map(Matrix::into_vec)).collect::<Result<_>>()?;
    let grid = search.grid();
    let r = grid.len();
    let t_len = search.t_len;

    let slices = par::map_indexed(search.signs.len() * r, |idx| {
        let w = search.signs[idx / r];
        let f = grid[idx % r];
        let mut best = (f64::INFINITY, ScalarCandidate { w, f, b: 0.0, c: 0.0 });
        let mut states = vec![0.0; probes.len() * t_len];
        for &b in &grid {
            for (x, hs) in probes.iter().zip(states.chunks_mut(t_len)) {
                let mut h = 0.0f64;
                for (k, hk) in hs.iter_mut().enumerate() {
                    h = (w * h + f * x[(k, 0)] + b).max(0.0);
                    *hk = h;
                }
            }
            'c: for &c in &grid {
                let mut dev = 0.0f64;
                for (hs, ys) in states.chunks(t_len).zip(&targets) {
                    for (h, y) in hs.iter().zip(ys) {
                        dev = dev.max((c * h - y).abs());
                    }
                    if dev >= best.0 {
                        continue 'c;
                    }
                }
                best = (dev, ScalarCandidate { w, f, b, c });
            }
        }
        best
    });
    let (gap, best) = slices
        .into_iter()
        .fold((f64::INFINITY, None), |acc, (d, cand)| if d < acc.0 { (d, Some(cand)) } else { acc });
    let best = best.ok_or_else(|| Error::NumericalFailure("no finite candidate deviation".into()))?;

    let embedding = unitary_embedding(witness, search.input_bound)?;
    let mut embedding_deviation = 0.0f64;
    for x in &probes {
        embedding_deviation = embedding_deviation.max(output_deviation(witness, &embedding.urnn, x)?);
    }
    Ok(GapReport {
        gap,
        best,
        embedding_deviation,
        candidates_evaluated: search.signs.len() * r * r * r,
        probe_count: probes.len(),
        search: search.clone(),
    })
}

/// Minimum over a `[−3, 3]` grid with `grid_resolution` points per axis of
/// the max deviation between a one-state orthogonal network and `witness`.
pub fn one_state_urnn_gap(witness: &RnnParams, grid_resolution: usize) -> Result<f64> {
    let search = GapSearch { grid_resolution, ..GapSearch::default() };
    Ok(one_state_urnn_search(witness, &search)?.gap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub w_c: f64,
    pub candidate_states: usize,
    pub x_grid: Vec<f64>,
    /// `(w_c φ′(w_c h_c* + x*), h_c*)` per probe.
    pub g_c_values: Vec<[f64; 2]>,
    /// `(det A_u, c_u h_u*)` per probe, where `A_u` is the candidate's
    /// linearized transition; for one state `det A_u = w_u φ′(·)`.
    pub g_u_values: Vec<[f64; 2]>,
    pub controllable_observable_at: Vec<bool>,
    /// Largest `‖g_c − g_u‖∞` over admissible probes; `None` if there are none.
    pub max_gap: Option<f64>,
}

/// Fixed point and the pair `(w_c φ′(w_c h* + x*), h*)` of the scalar
/// sigmoid system `h = σ(w_c h + x)`.
pub fn reference_g(w_c: f64, x_star: f64) -> Result<[f64; 2]> {
    let reference = RnnParams::scalar(w_c, 1.0, 0.0, 1.0, Activation::Sigmoid);
    let h = fixed_point(&reference, &[x_star])?[0];
    Ok([w_c * Activation::Sigmoid.derivative(w_c * h + x_star), h])
}

/// Compares the local linear behaviour of the scalar sigmoid system with
/// transition `w_c` against an orthogonal sigmoid candidate on `x_grid`.
pub fn sigmoid_mismatch_witness(w_c: f64, candidate: &RnnParams, x_grid: &[f64]) -> Result<MismatchReport> {
    if !(w_c > 0.0 && w_c < 1.0) {
        return Err(Error::InvalidInput(format!("w_c must lie in (0, 1), got {w_c}")));
    }
    candidate.validate()?;
    if candidate.activation != Activation::Sigmoid {
        return Err(Error::UnsupportedActivation(format!(
            "{} candidate; expected sigmoid",
            candidate.activation.name()
        )));
    }
    if candidate.m() != 1 || candidate.p() != 1 {
        return Err(Error::DimensionMismatch("candidate must have one input and one output".into()));
    }
    let resid = candidate.w.orthogonality_residual();
    if resid > 1e-8 {
        return Err(Error::Precondition(format!("candidate transition is not orthogonal (residual {resid:.3e})")));
    }
    let mut g_c_values = Vec::with_capacity(x_grid.len());
    let mut g_u_values = Vec::with_capacity(x_grid.len());
    let mut admissible = Vec::with_capacity(x_grid.len());
    let mut max_gap: Option<f64> = None;
    for &x in x_grid {
        let gc = reference_g(w_c, x)?;
        let sys = linearize(candidate, &[x])?;
        let gu = [determinant(&sys.a)?, sys.y_star[0]];
        let (ctrb, obsv) = ctrb_obsv(&sys)?;
        let ok = ctrb && obsv;
        if ok {
            let gap = (gc[0] - gu[0]).abs().max((gc[1] - gu[1]).abs());
            max_gap = Some(max_gap.map_or(gap, |g| g.max(gap)));
        }
        g_c_values.push(gc);
        g_u_values.push(gu);
        admissible.push(ok);
    }
    Ok(MismatchReport {
        w_c,
        candidate_states: candidate.n(),
        x_grid: x_grid.to_vec(),
        g_c_values,
        g_u_values,
        controllable_observable_at: admissible,
        max_gap,
    })
}

/// Constant operating inputs used when no grid is given: 13 evenly spaced
/// points on `[−3, 3]`.
pub fn default_x_grid() -> Vec<f64> {
    (0..13).map(|i| -3.0 + 0.5 * i as f64).collect()
}

/// Seeded sample of one-state sigmoid networks with `w ∈ {+1, −1}` and
/// `f, b, c` uniform on `[−3, 3]`.
pub fn sample_scalar_unitary_sigmoid(seed: u64, count: usize) -> Vec<RnnParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let w = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let f = rng.random_range(-3.0..=3.0);
            let b = rng.random_range(-3.0..=3.0);
            let c = rng.random_range(-3.0..=3.0);
            RnnParams::scalar(w, f, b, c, Activation::Sigmoid)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigmoid(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    #[test]
    fn scalar_witness() {
        let w = converse_relu_witness(1, 0.9).unwrap();
        assert_eq!(w, RnnParams::scalar(0.9, 1.0, 0.0, 1.0, Activation::Relu));
        assert!(converse_relu_witness(1, 1.0).is_err());
        assert!(converse_relu_witness(1, 0.0).is_err());
        assert!(converse_relu_witness(0, 0.5).is_err());
    }

    #[test]
    fn witness_is_separable() {
        let w = converse_relu_witness(3, 0.9).unwrap();
        let x = Matrix::from_fn(20, 3, |k, j| if j == 1 { 1.0 + (k % 3) as f64 } else { 0.0 });
        let y = w.rnn_map(&x).unwrap();
        for k in 0..20 {
            assert_eq!(y[(k, 0)], 0.0);
            assert_eq!(y[(k, 2)], 0.0);
            assert!(y[(k, 1)] > 0.0);
        }
    }

    #[test]
    fn constant_ten_stays_in_linear_regime() {
        let w = converse_relu_witness(1, 0.9).unwrap();
        let x = Matrix::from_fn(100, 1, |_, _| 10.0);
        let y = w.rnn_map(&x).unwrap();
        let mut h = 0.0;
        for k in 0..100 {
            h = 0.9 * h + 10.0;
            assert!((y[(k, 0)] - h).abs() <= 1e-12 * h);
        }
    }

    /// Direct triple loop with no pruning.
    fn brute_force_gap(witness: &RnnParams, s: &GapSearch) -> f64 {
        let probes = s.probes();
        let grid = s.grid();
        let mut best = f64::INFINITY;
        for &w in &s.signs {
            for &f in &grid {
                for &b in &grid {
                    for &c in &grid {
                        let cand = RnnParams::scalar(w, f, b, c, Activation::Relu);
                        let d = probes
                            .iter()
                            .map(|x| output_deviation(witness, &cand, x).unwrap())
                            .fold(0.0, f64::max);
                        best = best.min(d);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn pruned_search_matches_brute_force() {
        let witness = converse_relu_witness(1, 0.9).unwrap();
        let s = GapSearch { grid_resolution: 9, t_len: 15, random_probes: 2, ..GapSearch::default() };
        let rep = one_state_urnn_search(&witness, &s).unwrap();
        assert_eq!(rep.gap, brute_force_gap(&witness, &s));
        let best = RnnParams::scalar(rep.best.w, rep.best.f, rep.best.b, rep.best.c, Activation::Relu);
        let d = s.probes().iter().map(|x| output_deviation(&witness, &best, x).unwrap()).fold(0.0, f64::max);
        assert_eq!(d, rep.gap);
        assert_eq!(rep.embedding_deviation, 0.0);
    }

    #[test]
    fn gap_grows_with_horizon_for_integrators() {
        let witness = converse_relu_witness(1, 0.9).unwrap();
        let base = GapSearch {
            grid_resolution: 31,
            signs: vec![1.0],
            constant_levels: vec![1.0],
            random_probes: 0,
            ..GapSearch::default()
        };
        let gaps: Vec<f64> = [5, 20, 60]
            .iter()
            .map(|&t| one_state_urnn_search(&witness, &GapSearch { t_len: t, ..base.clone() }).unwrap().gap)
            .collect();
        assert!(gaps[0] < gaps[1] && gaps[1] < gaps[2], "{gaps:?}");
    }

    #[test]
    fn gap_rejects_non_scalar() {
        let w = converse_relu_witness(2, 0.9).unwrap();
        assert!(one_state_urnn_gap(&w, 5).is_err());
    }

    #[test]
    fn reference_g_satisfies_fixed_point_and_implicit_derivative() {
        let w_c = 0.9;
        for x in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let [a, h] = reference_g(w_c, x).unwrap();
            assert!((h - sigmoid(w_c * h + x)).abs() < 1e-12);
            // dh*/dx = σ′ / (1 − w_c σ′) by implicit differentiation
            let d = a / w_c;
            let implicit = d / (1.0 - w_c * d);
            let step = 1e-6;
            let fd = (reference_g(w_c, x + step).unwrap()[1] - reference_g(w_c, x - step).unwrap()[1]) / (2.0 * step);
            assert!((fd - implicit).abs() < 1e-4);
        }
    }

    #[test]
    fn default_candidate_mismatch() {
        let cand = RnnParams::scalar(1.0, 1.0, 0.0, 1.0, Activation::Sigmoid);
        let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let r = sigmoid_mismatch_witness(0.9, &cand, &grid).unwrap();
        assert!(r.controllable_observable_at.iter().all(|&b| b));
        for (i, &x) in grid.iter().enumerate() {
            // scalar oracle: h_u = σ(h_u + x), first entry σ′(h_u + x)
            let hu = r.g_u_values[i][1];
            assert!((hu - sigmoid(hu + x)).abs() < 1e-12);
            let s = sigmoid(hu + x);
            assert!((r.g_u_values[i][0] - s * (1.0 - s)).abs() < 1e-12);
        }
        assert!(r.max_gap.unwrap() > 0.0);
    }

    #[test]
    fn unobservable_candidate_has_no_gap() {
        let cand = RnnParams::scalar(1.0, 1.0, 0.0, 0.0, Activation::Sigmoid);
        let r = sigmoid_mismatch_witness(0.9, &cand, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(r.controllable_observable_at.iter().all(|&b| !b));
        assert_eq!(r.max_gap, None);
    }

    #[test]
    fn mismatch_preconditions() {
        let bad = RnnParams::scalar(0.5, 1.0, 0.0, 1.0, Activation::Sigmoid);
        assert!(matches!(sigmoid_mismatch_witness(0.9, &bad, &[0.0]), Err(Error::Precondition(_))));
        let relu = RnnParams::scalar(1.0, 1.0, 0.0, 1.0, Activation::Relu);
        assert!(sigmoid_mismatch_witness(0.9, &relu, &[0.0]).is_err());
        let ok = RnnParams::scalar(1.0, 1.0, 0.0, 1.0, Activation::Sigmoid);
        assert!(sigmoid_mismatch_witness(1.2, &ok, &[0.0]).is_err());
    }

    #[test]
    fn multistate_candidate_uses_determinant() {
        let rot = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let cand = RnnParams::new(
            rot,
            Matrix::column(&[1.0, 0.5]),
            vec![0.1, -0.2],
            Matrix::from_rows(&[&[1.0, 1.0]]),
            Activation::Sigmoid,
        )
        .unwrap();
        let r = sigmoid_mismatch_witness(0.9, &cand, &[0.0, 0.5]).unwrap();
        for (i, &x) in [0.0, 0.5].iter().enumerate() {
            let sys = linearize(&cand, &[x]).unwrap();
            let d0 = sys.b_in[(0, 0)] / 1.0;
            let d1 = sys.b_in[(1, 0)] / 0.5;
            // det(D R) = d0 d1 det(R) = d0 d1
            assert!((r.g_u_values[i][0] - d0 * d1).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_candidates_are_orthogonal_and_reproducible() {
        let a = sample_scalar_unitary_sigmoid(5, 10);
        assert_eq!(a, sample_scalar_unitary_sigmoid(5, 10));
        assert!(a.iter().all(|p| p.w[(0, 0)].abs() == 1.0));
    }
}
