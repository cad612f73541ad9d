//! Scores random prediction sets with the bipartite matching loss and shows
//! that shuffling the predictions leaves it unchanged.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tripleset::matching_loss::{set_loss, GoldTriple, GoldTripleSet};
use tripleset::model::{PredictionSet, TriplePrediction};

fn dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn main() -> tripleset::Result<()> {
    let (m, t, l) = (4, 3, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let golds = GoldTripleSet::new(
        vec![
            GoldTriple::new(0, (1, 2), (5, 5)),
            GoldTriple::new(1, (5, 5), (6, 7)),
            GoldTriple::null(t - 1),
            GoldTriple::null(t - 1),
        ],
        t - 1,
    )?;
    let mut preds = PredictionSet {
        predictions: (0..m)
            .map(|_| TriplePrediction {
                relation: dist(&mut rng, t),
                subject_start: dist(&mut rng, l),
                subject_end: dist(&mut rng, l),
                object_start: dist(&mut rng, l),
                object_end: dist(&mut rng, l),
            })
            .collect(),
    };
    let out = set_loss(&golds, &preds)?;
    for i in 0..m {
        let row: Vec<String> = out.costs.row(i).iter().map(|c| format!("{c:6.3}")).collect();
        println!("[{}]", row.join(" "));
    }
    println!("assignment {:?}, loss {:.6}", out.assignment.permutation, out.loss);

    preds.predictions.shuffle(&mut rng);
    println!("after shuffling the predictions: loss {:.6}", set_loss(&golds, &preds)?.loss);
    Ok(())
}
