//! Trains a small model, saves a checkpoint, and extracts triples from raw
//! text with it.

use tripleset::cli::{cmd_predict, cmd_train_corpus, RunConfig};
use tripleset::data::synthetic::{generate_synthetic, SyntheticConfig};

fn main() -> tripleset::Result<()> {
    let corpus = generate_synthetic(&SyntheticConfig::default())?.corpus;
    let dir = std::env::temp_dir().join("tripleset-predict-example");
    let mut config = RunConfig::default();
    config.training.epochs = 60;
    config.training.dev_fraction = 0.0;
    config.training.target_f1 = Some(1.0);
    config.output.checkpoint_dir = dir.join("checkpoint");
    cmd_train_corpus(&config, &corpus)?;

    let input = dir.join("input.txt");
    let text: Vec<&str> = corpus.sentences.iter().take(3).map(|s| s.text.as_str()).collect();
    std::fs::write(&input, text.join("\n")).map_err(|e| tripleset::Error::io(&input, e))?;
    let stdout = std::io::stdout();
    cmd_predict(&config.output.checkpoint_dir, &input, None, &mut stdout.lock())?;
    Ok(())
}
