#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tripleset::assignment::hungarian;
use tripleset::matching_loss::{build_cost_matrix, set_loss_on_tape, set_loss_with_assignment, GoldTriple, GoldTripleSet};
use tripleset::model::{ModelConfig, PredictionSet, TriplePrediction, TripleSetModel};
use tripleset::numerics::Tape;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive distribution of length `n` (softmax of normals).
pub fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (2.0 * z).exp()
        })
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn random_predictions(rng: &mut ChaCha8Rng, m: usize, t: usize, l: usize) -> PredictionSet {
    PredictionSet {
        predictions: (0..m)
            .map(|_| TriplePrediction {
                relation: random_dist(rng, t),
                subject_start: random_dist(rng, l),
                subject_end: random_dist(rng, l),
                object_start: random_dist(rng, l),
                object_end: random_dist(rng, l),
            })
            .collect(),
    }
}

fn random_span(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> (usize, usize) {
    let a = rng.random_range(lo..hi);
    let b = rng.random_range(a..hi);
    (a, b)
}

/// `n` real triples over positions `lo..hi`, padded to `m`.
pub fn random_golds(rng: &mut ChaCha8Rng, m: usize, n: usize, t: usize, lo: usize, hi: usize) -> GoldTripleSet {
    let null = t - 1;
    let mut entries: Vec<GoldTriple> = (0..n)
        .map(|_| {
            let r = rng.random_range(0..null);
            GoldTriple::new(r, random_span(rng, lo, hi), random_span(rng, lo, hi))
        })
        .collect();
    entries.resize(m, GoldTriple::null(null));
    GoldTripleSet::new(entries, null).unwrap()
}

pub fn toy_config() -> ModelConfig {
    ModelConfig {
        d: 16,
        l_max: 12,
        relation_types: 4,
        queries: 4,
        encoder_layers: 1,
        decoder_layers: 1,
        heads: 2,
        ffn_dim: 32,
        dropout: 0.1,
        vocab_size: 24,
    }
}

/// Ten word tokens (twelve positions with markers) and two gold triples in
/// encoder positions.
pub fn toy_sentence() -> (Vec<usize>, GoldTripleSet) {
    let tokens = vec![4, 9, 5, 11, 7, 15, 6, 20, 8, 13];
    let golds = GoldTripleSet::new(
        vec![
            GoldTriple::new(0, (1, 2), (5, 5)),
            GoldTriple::new(2, (5, 5), (8, 10)),
            GoldTriple::null(3),
            GoldTriple::null(3),
        ],
        3,
    )
    .unwrap();
    (tokens, golds)
}

/// Loss of the current parameters (evaluation tape, so no dropout) under
/// `perm`, or under the freshly computed assignment when `perm` is `None`.
/// Also returns the assignment the current parameters would produce.
pub fn loss_under(model: &TripleSetModel, tokens: &[usize], golds: &GoldTripleSet, perm: Option<&[usize]>) -> (f64, Vec<usize>) {
    let tape = Tape::new();
    let b = model.bind(&tape);
    let (_, out) = model.forward(&tape, &b, tokens).unwrap();
    let own = hungarian(&build_cost_matrix(golds, &out.detach(&tape)).unwrap()).permutation;
    let perm = perm.unwrap_or(&own);
    let loss = set_loss_with_assignment(&tape, golds, &out, perm).unwrap();
    (tape.item(loss), own)
}

#[derive(Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    pub passed: usize,
    /// Coordinates skipped because a perturbation changed the assignment.
    pub flipped: usize,
    /// Coordinates where either gradient exceeds 1e-8.
    pub nontrivial: usize,
    pub nontrivial_passed: usize,
    pub worst_rel: f64,
    pub failures: Vec<(String, usize, f64, f64)>,
}

impl GradCheck {
    pub fn pass_rate(&self) -> f64 {
        self.passed as f64 / self.checked.max(1) as f64
    }

    pub fn nontrivial_pass_rate(&self) -> f64 {
        self.nontrivial_passed as f64 / self.nontrivial.max(1) as f64
    }
}

/// Central-difference check of every `stride`-th parameter coordinate.
/// The assignment is held at the unperturbed optimum; coordinates whose
/// ±eps perturbation changes the optimum are counted and skipped.
pub fn gradient_check(model: &mut TripleSetModel, tokens: &[usize], golds: &GoldTripleSet, eps: f64, stride: usize) -> GradCheck {
    let tape = Tape::new();
    let b = model.bind(&tape);
    let (_, out) = model.forward(&tape, &b, tokens).unwrap();
    let (loss, assignment) = set_loss_on_tape(&tape, golds, &out).unwrap();
    let perm = assignment.permutation;
    let mut grads = tape.backward(loss).unwrap();
    let ids: Vec<_> = model.params().ids().collect();
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| grads.take(b.var(id)).unwrap_or_else(|| vec![0.0; model.params().tensor(id).len()]))
        .collect();

    let mut report = GradCheck::default();
    let mut flat = 0usize;
    for (p, &id) in ids.iter().enumerate() {
        let name = model.params().name(id).to_string();
        for k in 0..analytic[p].len() {
            flat += 1;
            if (flat - 1) % stride != 0 {
                continue;
            }
            let orig = model.params().tensors()[p].values()[k];
            model.params_mut().tensors_mut()[p].values_mut()[k] = orig + eps;
            let (plus, perm_plus) = loss_under(model, tokens, golds, Some(&perm));
            model.params_mut().tensors_mut()[p].values_mut()[k] = orig - eps;
            let (minus, perm_minus) = loss_under(model, tokens, golds, Some(&perm));
            model.params_mut().tensors_mut()[p].values_mut()[k] = orig;
            if perm_plus != perm || perm_minus != perm {
                report.flipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[p][k];
            report.checked += 1;
            let big = a.abs().max(numeric.abs());
            let ok = if big < 1e-8 {
                (a - numeric).abs() < 1e-2
            } else {
                let rel = (a - numeric).abs() / big;
                report.worst_rel = report.worst_rel.max(rel);
                rel < 1e-4
            };
            if big >= 1e-8 {
                report.nontrivial += 1;
                if ok {
                    report.nontrivial_passed += 1;
                }
            }
            if ok {
                report.passed += 1;
            } else {
                report.failures.push((name.clone(), k, a, numeric));
            }
        }
    }
    report
}
