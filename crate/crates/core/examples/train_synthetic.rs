//! Trains on the default 50-sentence synthetic corpus until every training
//! triple is extracted exactly, printing one line per epoch.
//!
//! `cargo run --release --example train_synthetic`

use tripleset::data::synthetic::{generate_synthetic, SyntheticConfig};
use tripleset::data::MatchingMode;
use tripleset::model::{ModelConfig, TripleSetModel};
use tripleset::train::{train, LogRecord, TrainingConfig};

fn main() -> tripleset::Result<()> {
    let corpus = generate_synthetic(&SyntheticConfig::default())?.corpus;
    let mut model = TripleSetModel::new(ModelConfig::default().sized_for(&corpus), 1)?;
    let config = TrainingConfig {
        epochs: 200,
        dev_fraction: 0.0,
        target_f1: Some(1.0),
        ..TrainingConfig::default()
    };
    let outcome = train(&mut model, &corpus, &corpus, MatchingMode::Exact, &config, |r| {
        if let LogRecord::Epoch { epoch, loss, dev_f1, .. } = r {
            println!("epoch {epoch:>3}  loss {loss:8.4}  f1 {dev_f1:.4}");
        }
        Ok(())
    })?;
    println!("best f1 {:.4} at epoch {}", outcome.best_f1, outcome.best_epoch);
    Ok(())
}
