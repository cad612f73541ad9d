mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tripleset::numerics::{checkpoint, AdamWConfig, OptimizerState, ParamGroup, ParamSet, Tape, Tensor, Var};

use common::rng;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Reduces `y` to a scalar with fixed random weights so every output
/// element contributes a distinct amount.
fn weighted_sum(tape: &Tape, y: Var, seed: u64) -> Var {
    let shape = tape.shape(y);
    let n: usize = shape.iter().product();
    let mut r = rng(seed);
    let w = tape.constant(shape, (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
    tape.sum(tape.mul(y, w).unwrap())
}

/// Compares reverse-mode gradients of `f` with central differences for
/// every coordinate of every input.
fn check_op(name: &str, inputs: &[Tensor], f: impl Fn(&Tape, &[Var]) -> Var) {
    let eval = |xs: &[Tensor]| {
        let tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x)).collect();
        let out = weighted_sum(&tape, f(&tape, &vars), 99);
        tape.item(out)
    };
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(&x.clone().with_grad())).collect();
    let out = weighted_sum(&tape, f(&tape, &vars), 99);
    let grads = tape.backward(out).unwrap();
    let eps = 1e-6;
    for (i, x) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]).expect("input gradient").to_vec();
        for k in 0..x.len() {
            let mut plus = inputs.to_vec();
            plus[i].values_mut()[k] += eps;
            let mut minus = inputs.to_vec();
            minus[i].values_mut()[k] -= eps;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * eps);
            let a = analytic[k];
            let scale = a.abs().max(numeric.abs()).max(1e-3);
            assert!(
                (a - numeric).abs() / scale < 1e-5,
                "{name}: input {i} coordinate {k}: analytic {a}, numeric {numeric}"
            );
        }
    }
}

#[test]
fn elementwise_ops_match_finite_differences() {
    let mut r = rng(1);
    let a = random_tensor(&mut r, &[3, 4], -2.0, 2.0);
    let b = random_tensor(&mut r, &[3, 4], -2.0, 2.0);
    let row = random_tensor(&mut r, &[4], -1.0, 1.0);
    let pos = random_tensor(&mut r, &[3, 4], 0.2, 3.0);
    check_op("add", &[a.clone(), b.clone()], |t, v| t.add(v[0], v[1]).unwrap());
    check_op("sub", &[a.clone(), b.clone()], |t, v| t.sub(v[0], v[1]).unwrap());
    check_op("mul", &[a.clone(), b.clone()], |t, v| t.mul(v[0], v[1]).unwrap());
    check_op("add_row", &[a.clone(), row], |t, v| t.add_row(v[0], v[1]).unwrap());
    check_op("scale", &[a.clone()], |t, v| t.scale(v[0], -1.7));
    check_op("tanh", &[a.clone()], |t, v| t.tanh(v[0]));
    check_op("log", &[pos.clone()], |t, v| t.log(v[0]).unwrap());
    check_op("clamp_min", &[pos], |t, v| t.clamp_min(v[0], 1.0));
    check_op("relu", &[a], |t, v| t.relu(v[0]));
}

#[test]
fn matrix_ops_match_finite_differences() {
    let mut r = rng(2);
    let a = random_tensor(&mut r, &[3, 4], -1.0, 1.0);
    let b = random_tensor(&mut r, &[4, 2], -1.0, 1.0);
    let c = random_tensor(&mut r, &[5, 4], -1.0, 1.0);
    check_op("matmul", &[a.clone(), b], |t, v| t.matmul(v[0], v[1]).unwrap());
    check_op("matmul_t", &[a.clone(), c.clone()], |t, v| t.matmul_t(v[0], v[1]).unwrap());
    check_op("transpose", &[a.clone()], |t, v| t.transpose(v[0]).unwrap());
    check_op("pairwise_add", &[a.clone(), c], |t, v| t.pairwise_add(v[0], v[1]).unwrap());
    check_op("narrow_last", &[a.clone()], |t, v| t.narrow_last(v[0], 1, 2).unwrap());
    check_op("concat_last", &[a.clone(), a.clone()], |t, v| t.concat_last(&[v[0], v[1]]).unwrap());
    check_op("reshape", &[a.clone()], |t, v| t.reshape(v[0], &[2, 6]).unwrap());
    check_op("gather", &[a], |t, v| t.gather(v[0], &[0, 5, 5, 11]).unwrap());
}

#[test]
fn normalizing_ops_match_finite_differences() {
    let mut r = rng(3);
    let a = random_tensor(&mut r, &[3, 5], -2.0, 2.0);
    let gamma = random_tensor(&mut r, &[5], 0.5, 1.5);
    let beta = random_tensor(&mut r, &[5], -0.5, 0.5);
    let table = random_tensor(&mut r, &[6, 3], -1.0, 1.0);
    check_op("softmax axis 1", &[a.clone()], |t, v| t.softmax(v[0], 1).unwrap());
    check_op("softmax axis 0", &[a.clone()], |t, v| t.softmax(v[0], 0).unwrap());
    check_op("softmax_masked", &[a.clone()], |t, v| {
        t.softmax_masked(v[0], &[true, true, false, true, false]).unwrap()
    });
    check_op("layer_norm", &[a, gamma, beta], |t, v| t.layer_norm(v[0], v[1], v[2], 1e-5).unwrap());
    check_op("embedding", &[table], |t, v| t.embedding(v[0], &[2, 0, 2, 5]).unwrap());
}

#[test]
fn matmul_matches_triple_loop() {
    let mut r = rng(4);
    let a = random_tensor(&mut r, &[3, 4], -5.0, 5.0);
    let b = random_tensor(&mut r, &[4, 2], -5.0, 5.0);
    let tape = Tape::new();
    let c = tape.value(tape.matmul(tape.leaf(&a), tape.leaf(&b)).unwrap());
    assert_eq!(c.shape(), &[3, 2]);
    for i in 0..3 {
        for j in 0..2 {
            let mut s = 0.0;
            for k in 0..4 {
                s += a.at(&[i, k]) * b.at(&[k, j]);
            }
            assert_eq!(c.at(&[i, j]), s);
        }
    }
}

#[test]
fn matmul_rejects_mismatched_shapes() {
    let tape = Tape::new();
    let a = tape.leaf(&Tensor::zeros(&[3, 4]));
    let b = tape.leaf(&Tensor::zeros(&[3, 4]));
    assert!(tape.matmul(a, b).is_err());
}

#[test]
fn log_is_natural() {
    let tape = Tape::new();
    let x = tape.constant(vec![3], vec![1.0, std::f64::consts::E, 0.5]).unwrap();
    let y = tape.values(tape.log(x).unwrap());
    assert_eq!(y[0], 0.0);
    assert!((y[1] - 1.0).abs() < 1e-15);
    assert!((y[2] + std::f64::consts::LN_2).abs() < 1e-15);
    assert!(tape.log(tape.constant(vec![1], vec![0.0]).unwrap()).is_err());
}

#[test]
fn tanh_saturates() {
    let tape = Tape::new();
    let x = tape.constant(vec![3], vec![0.0, 50.0, -50.0]).unwrap();
    assert_eq!(tape.values(tape.tanh(x)), vec![0.0, 1.0, -1.0]);
}

#[test]
fn softmax_is_stable_for_large_logits() {
    let tape = Tape::new();
    let x = tape.constant(vec![1, 3], vec![1000.0, 1000.0, -1000.0]).unwrap();
    let p = tape.values(tape.softmax(x, 1).unwrap());
    assert_eq!(p, vec![0.5, 0.5, 0.0]);
}

#[test]
fn masked_softmax_zeroes_masked_positions() {
    let tape = Tape::new();
    let x = tape.constant(vec![2, 3], vec![5.0, 1.0, 2.0, 0.0, 9.0, 3.0]).unwrap();
    let p = tape.value(tape.softmax_masked(x, &[true, false, true]).unwrap());
    for i in 0..2 {
        assert_eq!(p.at(&[i, 1]), 0.0);
        assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(tape.softmax_masked(x, &[false, false, false]).is_err());
}

#[test]
fn dropout_is_identity_on_evaluation_tape() {
    let tape = Tape::new();
    let x = tape.constant(vec![4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let y = tape.dropout(x, 0.5).unwrap();
    assert_eq!(tape.values(y), vec![1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn dropout_is_deterministic_for_a_seed() {
    let run = |seed: u64| {
        let tape = Tape::training(ChaCha8Rng::seed_from_u64(seed));
        let x = tape.constant(vec![200], vec![1.0; 200]).unwrap();
        tape.values(tape.dropout(x, 0.3).unwrap())
    };
    let a = run(5);
    assert_eq!(a, run(5));
    assert_ne!(a, run(6));
    let kept = a.iter().filter(|&&v| v > 0.0).count();
    assert!((100..180).contains(&kept), "{kept} of 200 kept");
    assert!(a.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.7).abs() < 1e-12));
}

#[test]
fn dropout_rejects_bad_probability() {
    let tape = Tape::new();
    let x = tape.constant(vec![1], vec![1.0]).unwrap();
    assert!(tape.dropout(x, 1.0).is_err());
    assert!(tape.dropout(x, -0.1).is_err());
}

#[test]
fn adamw_moves_against_the_gradient() {
    let mut params = vec![Tensor::new(vec![2], vec![1.0, -1.0]).unwrap().with_grad()];
    params[0].set_grad(vec![0.5, -0.5]).unwrap();
    let mut state = OptimizerState::new(
        AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        },
        &params,
    );
    state.step(&mut params).unwrap();
    let v = params[0].values();
    assert!(v[0] < 1.0 && v[1] > -1.0);
    assert_eq!(state.step_count(), 1);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut r = rng(8);
    let mut params = ParamSet::new();
    params.insert("a", ParamGroup::Encoder, random_tensor(&mut r, &[3, 2], -1.0, 1.0));
    params.insert("b", ParamGroup::Decoder, random_tensor(&mut r, &[5], -1.0, 1.0));
    let mut buf = Vec::new();
    checkpoint::write_params(&params, &mut buf).unwrap();
    let back = checkpoint::read_params(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 2);
    for (x, y) in params.iter().zip(back.iter()) {
        assert_eq!(x.0, y.0);
        assert_eq!(x.1, y.1);
        assert_eq!(x.2.shape(), y.2.shape());
        assert_eq!(x.2.values(), y.2.values());
    }
    assert!(checkpoint::read_params(&buf[..buf.len() - 3]).is_err());
}

proptest! {
    #[test]
    fn softmax_sums_to_one(xs in prop::collection::vec(-30.0f64..30.0, 1..20)) {
        let tape = Tape::new();
        let n = xs.len();
        let p = tape.values(tape.softmax(tape.constant(vec![n], xs).unwrap(), 0).unwrap());
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn softmax_is_shift_invariant(xs in prop::collection::vec(-30.0f64..30.0, 1..20), c in -100.0f64..100.0) {
        let tape = Tape::new();
        let n = xs.len();
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let p = tape.values(tape.softmax(tape.constant(vec![n], xs).unwrap(), 0).unwrap());
        let q = tape.values(tape.softmax(tape.constant(vec![n], shifted).unwrap(), 0).unwrap());
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
