//! Compares backpropagated gradients of the set loss with central
//! differences on a tiny model, holding the assignment fixed.

use tripleset::assignment::hungarian;
use tripleset::matching_loss::{build_cost_matrix, set_loss_with_assignment, GoldTriple, GoldTripleSet};
use tripleset::model::{ModelConfig, TripleSetModel};
use tripleset::numerics::Tape;

fn loss(model: &TripleSetModel, tokens: &[usize], golds: &GoldTripleSet, perm: &[usize]) -> f64 {
    let tape = Tape::new();
    let b = model.bind(&tape);
    let (_, out) = model.forward(&tape, &b, tokens).unwrap();
    tape.item(set_loss_with_assignment(&tape, golds, &out, perm).unwrap())
}

fn main() -> tripleset::Result<()> {
    let config = ModelConfig {
        d: 8,
        l_max: 10,
        relation_types: 3,
        queries: 3,
        encoder_layers: 1,
        decoder_layers: 1,
        heads: 2,
        ffn_dim: 16,
        dropout: 0.0,
        vocab_size: 16,
    };
    let mut model = TripleSetModel::new(config, 3)?;
    let tokens = [4, 7, 9, 5, 12, 6];
    let golds = GoldTripleSet::new(
        vec![GoldTriple::new(0, (1, 2), (4, 4)), GoldTriple::null(2), GoldTriple::null(2)],
        2,
    )?;

    let tape = Tape::new();
    let b = model.bind(&tape);
    let (_, out) = model.forward(&tape, &b, &tokens)?;
    let perm = hungarian(&build_cost_matrix(&golds, &out.detach(&tape))?).permutation;
    let l = set_loss_with_assignment(&tape, &golds, &out, &perm)?;
    let mut grads = tape.backward(l)?;
    let ids: Vec<_> = model.params().ids().collect();

    let eps = 1e-5;
    let (mut checked, mut worst) = (0, 0.0f64);
    for (p, &id) in ids.iter().enumerate() {
        let analytic = grads.take(b.var(id)).unwrap_or_default();
        for (k, &a) in analytic.iter().enumerate() {
            let orig = model.params().tensors()[p].values()[k];
            model.params_mut().tensors_mut()[p].values_mut()[k] = orig + eps;
            let plus = loss(&model, &tokens, &golds, &perm);
            model.params_mut().tensors_mut()[p].values_mut()[k] = orig - eps;
            let minus = loss(&model, &tokens, &golds, &perm);
            model.params_mut().tensors_mut()[p].values_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let scale = a.abs().max(numeric.abs());
            if scale > 1e-8 {
                worst = worst.max((a - numeric).abs() / scale);
            }
            checked += 1;
        }
    }
    println!("{checked} coordinates, worst relative error {worst:.2e}");
    Ok(())
}
