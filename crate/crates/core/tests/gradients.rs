use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urnn_core::linalg::Matrix;
use urnn_core::rnn::{bptt_gradients, sequence_gradients, Activation, RnnParams, Sequence};

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn instance(seed: u64, act: Activation, n: usize, m: usize, p: usize, t: usize) -> (RnnParams, Vec<Sequence>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = uniform(&mut rng, n, n);
    let f = uniform(&mut rng, n, m);
    let c = uniform(&mut rng, p, n);
    let b = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let params = RnnParams::new(w, f, b, c, act).unwrap();
    let seqs = (0..2)
        .map(|_| Sequence::new(uniform(&mut rng, t, m), Some(uniform(&mut rng, t, p))).unwrap())
        .collect();
    (params, seqs)
}

/// Mean squared error over time, outputs and sequences, by direct simulation.
fn loss(params: &RnnParams, seqs: &[Sequence]) -> f64 {
    let (n, m, p) = (params.n(), params.m(), params.p());
    let mut total = 0.0;
    for s in seqs {
        let y = s.targets().unwrap();
        let mut h = vec![0.0; n];
        let mut sse = 0.0;
        for k in 0..s.x.rows() {
            let z: Vec<f64> = (0..n)
                .map(|i| {
                    let wh: f64 = (0..n).map(|j| params.w[(i, j)] * h[j]).sum();
                    let fx: f64 = (0..m).map(|j| params.f[(i, j)] * s.x[(k, j)]).sum();
                    wh + fx + params.b[i]
                })
                .collect();
            h = z.iter().map(|&v| params.activation.apply(v)).collect();
            for o in 0..p {
                let out: f64 = (0..n).map(|j| params.c[(o, j)] * h[j]).sum();
                sse += (out - y[(k, o)]).powi(2);
            }
        }
        total += sse / (s.x.rows() * p) as f64;
    }
    total / seqs.len() as f64
}

fn max_relative_error(act: Activation, seeds: std::ops::Range<u64>) -> f64 {
    let mut worst = 0.0f64;
    for seed in seeds {
        let (params, seqs) = instance(seed, act, 3, 2, 2, 20);
        let g = bptt_gradients(&params, &seqs).unwrap().trainable_to_vec();
        let theta = params.trainable_to_vec();
        let at = |i: usize, step: f64| {
            let mut th = theta.clone();
            th[i] += step;
            let mut q = params.clone();
            q.set_trainable(&th);
            loss(&q, &seqs)
        };
        for i in 0..theta.len() {
            let h = 1e-6;
            let fd = (at(i, h) - at(i, -h)) / (2.0 * h);
            let scale = fd.abs().max(g[i].abs());
            if scale > 0.0 {
                worst = worst.max((fd - g[i]).abs() / scale);
            }
        }
    }
    worst
}

#[test]
fn sigmoid_matches_central_differences() {
    let err = max_relative_error(Activation::Sigmoid, 0..50);
    assert!(err <= 1e-5, "max relative error {err:e}");
}

#[test]
fn identity_matches_central_differences() {
    let err = max_relative_error(Activation::Identity, 100..150);
    assert!(err <= 1e-5, "max relative error {err:e}");
}

#[test]
fn loss_agrees_with_direct_simulation() {
    for seed in 0..5 {
        let (params, seqs) = instance(seed, Activation::Sigmoid, 3, 2, 2, 20);
        let g = bptt_gradients(&params, &seqs).unwrap();
        assert!((g.loss - loss(&params, &seqs)).abs() <= 1e-12 * g.loss.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn batch_gradient_is_mean_of_sequence_gradients(seed in 0u64..10_000, count in 1usize..6) {
        let (params, _) = instance(seed, Activation::Sigmoid, 2, 1, 2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let seqs: Vec<Sequence> = (0..count)
            .map(|_| Sequence::new(uniform(&mut rng, 8, 1), Some(uniform(&mut rng, 8, 2))).unwrap())
            .collect();
        let batch = bptt_gradients(&params, &seqs).unwrap().trainable_to_vec();
        let mut sum = vec![0.0; batch.len()];
        for s in &seqs {
            for (acc, v) in sum.iter_mut().zip(sequence_gradients(&params, s).unwrap().trainable_to_vec()) {
                *acc += v;
            }
        }
        for (b, s) in batch.iter().zip(&sum) {
            prop_assert_eq!(*b, s / count as f64);
        }
    }
}
