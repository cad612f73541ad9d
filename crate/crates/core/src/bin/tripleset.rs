use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tripleset::cli::{self, RunConfig};
use tripleset::data::synthetic::SyntheticConfig;
use tripleset::data::{CorpusFormat, MatchingMode};
use tripleset::{Error, Result};

#[derive(Parser)]
#[command(name = "tripleset", version, about = "Set-prediction relational triple extraction")]
struct Args {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<MatchingMode>,
    /// Checkpoint directory (written by `train`, read by `eval`/`predict`).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a corpus and keep the best checkpoint.
    Train {
        /// Training corpus (overrides data.train).
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, value_parser = parse_format)]
        format: Option<CorpusFormat>,
    },
    /// Score a checkpoint on a corpus.
    Eval {
        /// Evaluation corpus (overrides data.test).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_format)]
        format: Option<CorpusFormat>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Extract triples from raw sentences (one per line) as JSON Lines.
    Predict {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Reproduce the three-query matching-loss example.
    VerifyAppendix {
        /// Change one probability first; the run must then fail.
        #[arg(long)]
        perturb: bool,
    },
    /// Write a seeded template corpus and its manifest.
    GenSynthetic {
        #[arg(long, default_value_t = 50)]
        sentences: usize,
        #[arg(long, default_value_t = 4)]
        relations: usize,
        #[arg(long, default_value_t = 5)]
        max_triples: usize,
    },
}

fn parse_mode(s: &str) -> std::result::Result<MatchingMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<CorpusFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn run_config(args: &Args) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.training.seed = seed;
    }
    if let Some(mode) = args.mode {
        cfg.data.mode = mode;
    }
    if let Some(dir) = &args.checkpoint {
        cfg.output.checkpoint_dir = dir.clone();
    }
    Ok(cfg)
}

fn run(args: Args) -> Result<()> {
    let mut cfg = run_config(&args)?;
    match args.command {
        Command::Train { train, epochs, format } => {
            if let Some(p) = train {
                cfg.data.train = Some(p);
            }
            if let Some(e) = epochs {
                cfg.training.epochs = e;
            }
            if let Some(f) = format {
                cfg.data.format = f;
            }
            let summary = cli::cmd_train(&cfg)?;
            println!(
                "best f1 {:.4} at epoch {}; checkpoint in {}",
                summary.best_f1,
                summary.best_epoch,
                summary.checkpoint_dir.display()
            );
        }
        Command::Eval { data, format, threshold } => {
            let corpus = data
                .or(cfg.data.test.clone())
                .ok_or_else(|| Error::InvalidArgument("no evaluation corpus (--data or data.test)".into()))?;
            let out = args.out.or(cfg.output.report.clone());
            let report = cli::cmd_eval(
                &cfg.output.checkpoint_dir,
                &corpus,
                format.unwrap_or(cfg.data.format),
                cfg.data.mode,
                threshold.or(cfg.training.threshold),
                out.as_deref(),
            )?;
            print!("{report}");
        }
        Command::Predict { input, threshold } => {
            let threshold = threshold.or(cfg.training.threshold);
            match &args.out {
                Some(path) => {
                    let mut file = fs::File::create(path).map_err(|e| Error::Io {
                        path: path.display().to_string(),
                        source: e,
                    })?;
                    cli::cmd_predict(&cfg.output.checkpoint_dir, &input, threshold, &mut file)?;
                }
                None => {
                    let stdout = io::stdout();
                    let mut lock = stdout.lock();
                    cli::cmd_predict(&cfg.output.checkpoint_dir, &input, threshold, &mut lock)?;
                    lock.flush().ok();
                }
            }
        }
        Command::VerifyAppendix { perturb } => {
            let report = cli::cmd_verify_appendix(perturb)?;
            print!("{report}");
            report.into_result()?;
        }
        Command::GenSynthetic {
            sentences,
            relations,
            max_triples,
        } => {
            let config = SyntheticConfig {
                seed: args.seed.unwrap_or(SyntheticConfig::default().seed),
                sentences,
                relations,
                max_triples,
            };
            let out = args.out.unwrap_or_else(|| PathBuf::from("synthetic"));
            let corpus = cli::cmd_gen_synthetic(&config, &out)?;
            println!("wrote {} sentences to {}", corpus.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = run(Args::parse());
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(cli::exit_code(&result) as u8)
}
