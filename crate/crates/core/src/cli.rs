//! Run configuration, checkpoints and the commands behind the binary.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::appendix::{self, AppendixReport};
use crate::data::synthetic::{generate_synthetic, SyntheticConfig};
use crate::data::{load_corpus, load_json, save_json, tokenize, Corpus, CorpusFormat, LoadOptions, MatchingMode, RelationInventory, Split, Vocab};
use crate::decode::{extract_triples, SpanWindow};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::{ModelConfig, TripleSetModel};
use crate::numerics::checkpoint::{load_params, save_params};
use crate::train::{evaluate, train, LogRecord, TrainingConfig};

pub const PARAMS_FILE: &str = "params.ckpt";
pub const MODEL_FILE: &str = "model.json";
pub const VOCAB_FILE: &str = "vocab.json";
pub const RELATIONS_FILE: &str = "relations.json";
pub const LOG_FILE: &str = "train_log.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub format: CorpusFormat,
    pub mode: MatchingMode,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train: None,
            test: None,
            format: CorpusFormat::NativeJsonl,
            mode: MatchingMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub checkpoint_dir: PathBuf,
    /// JSON report path; a `.txt` table is written next to it.
    pub report: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            checkpoint_dir: PathBuf::from("checkpoint"),
            report: None,
        }
    }
}

/// Everything a training or evaluation run needs, read from TOML.
/// `model.vocab_size` and `model.relation_types` are replaced by the
/// training corpus sizes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub data: DataConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        let probe = ModelConfig {
            vocab_size: self.model.vocab_size.max(crate::data::vocab::RESERVED),
            relation_types: self.model.relation_types.max(2),
            ..self.model.clone()
        };
        probe.validate()
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelRecord {
    model: ModelConfig,
    mode: MatchingMode,
}

/// A trained model with the vocabulary and relation inventory it was
/// trained with.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: TripleSetModel,
    pub vocab: Vocab,
    pub relations: RelationInventory,
    pub mode: MatchingMode,
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_params(self.model.params(), &dir.join(PARAMS_FILE))?;
        save_json(
            &ModelRecord {
                model: self.model.config().clone(),
                mode: self.mode,
            },
            &dir.join(MODEL_FILE),
        )?;
        save_json(&self.vocab, &dir.join(VOCAB_FILE))?;
        save_json(&self.relations, &dir.join(RELATIONS_FILE))
    }

    /// Loads from a checkpoint directory or from its parameter file.
    pub fn load(path: &Path) -> Result<Self> {
        let dir = if path.is_dir() {
            path
        } else {
            path.parent().unwrap_or(Path::new("."))
        };
        let params_path = if path.is_dir() { dir.join(PARAMS_FILE) } else { path.to_path_buf() };
        let record: ModelRecord = load_json(&dir.join(MODEL_FILE))?;
        let vocab: Vocab = load_json(&dir.join(VOCAB_FILE))?;
        let relations: RelationInventory = load_json(&dir.join(RELATIONS_FILE))?;
        if vocab.len() != record.model.vocab_size || relations.relation_types() != record.model.relation_types {
            return Err(Error::ConfigMismatch(format!(
                "model expects vocab {} and {} relation types; sidecars hold {} and {}",
                record.model.vocab_size,
                record.model.relation_types,
                vocab.len(),
                relations.relation_types()
            )));
        }
        let stored = load_params(&params_path)?;
        let model = TripleSetModel::from_params(record.model, &stored)?;
        Ok(Checkpoint {
            model,
            vocab,
            relations,
            mode: record.mode,
        })
    }

    /// Loads a corpus with this checkpoint's vocabulary and relations.
    pub fn load_corpus(&self, path: &Path, format: CorpusFormat, mode: MatchingMode) -> Result<Corpus> {
        let options = LoadOptions {
            format,
            mode,
            relations: Some(self.relations.clone()),
            vocab: Some(self.vocab.clone()),
            max_triples: Some(self.model.config().queries),
            split: Split::Test,
        };
        load_corpus(path, &options)
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint_dir: PathBuf,
    pub best_f1: f64,
    pub best_epoch: usize,
    pub epoch_losses: Vec<f64>,
    pub log: Vec<LogRecord>,
}

/// Trains from `config.data.train`, writing the best checkpoint and a
/// line-per-record log into `config.output.checkpoint_dir`.
pub fn cmd_train(config: &RunConfig) -> Result<TrainSummary> {
    config.validate()?;
    let path = config
        .data
        .train
        .as_deref()
        .ok_or_else(|| Error::invalid("no training corpus configured (data.train)"))?;
    require_file(path)?;
    let mut options = LoadOptions::new(config.data.format);
    options.mode = config.data.mode;
    options.max_triples = Some(config.model.queries);
    let corpus = load_corpus(path, &options)?;
    cmd_train_corpus(config, &corpus)
}

/// Like [`cmd_train`] on an already loaded corpus.
pub fn cmd_train_corpus(config: &RunConfig, corpus: &Corpus) -> Result<TrainSummary> {
    config.validate()?;
    let (train_set, dev_set) = if config.training.dev_fraction > 0.0 {
        corpus.split_dev(config.training.dev_fraction, config.training.seed)
    } else {
        (corpus.clone(), corpus.clone())
    };
    info!(
        "training on {} sentences, selecting on {}",
        train_set.len(),
        dev_set.len()
    );
    let mut model = TripleSetModel::new(config.model.sized_for(corpus), config.training.seed)?;
    let dir = &config.output.checkpoint_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let log_path = dir.join(LOG_FILE);
    let file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut writer = BufWriter::new(file);
    let outcome = train(
        &mut model,
        &train_set,
        &dev_set,
        config.data.mode,
        &config.training,
        |record| {
            serde_json::to_writer(&mut writer, record)?;
            writer.write_all(b"\n").map_err(|e| Error::io(&log_path, e))?;
            if let LogRecord::Epoch { epoch, loss, dev_f1, .. } = record {
                info!("epoch {epoch}: loss {loss:.4}, dev f1 {dev_f1:.4}");
            }
            Ok(())
        },
    )?;
    writer.flush().map_err(|e| Error::io(&log_path, e))?;
    model.params_mut().copy_values_from(&outcome.best_params)?;
    Checkpoint {
        model,
        vocab: corpus.vocab.clone(),
        relations: corpus.relations.clone(),
        mode: config.data.mode,
    }
    .save(dir)?;
    Ok(TrainSummary {
        checkpoint_dir: dir.clone(),
        best_f1: outcome.best_f1,
        best_epoch: outcome.best_epoch,
        epoch_losses: outcome.epoch_losses,
        log: outcome.log,
    })
}

/// Writes `report` as JSON to `path` and as a table next to it.
pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, report.to_json()?).map_err(|e| Error::io(path, e))?;
    let table = path.with_extension("txt");
    fs::write(&table, report.to_string()).map_err(|e| Error::io(&table, e))
}

pub fn cmd_eval(
    checkpoint: &Path,
    corpus: &Path,
    format: CorpusFormat,
    mode: MatchingMode,
    threshold: Option<f64>,
    out: Option<&Path>,
) -> Result<EvalReport> {
    require_file(corpus)?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let data = ckpt.load_corpus(corpus, format, mode)?;
    crate::train::check_corpus_fits(&ckpt.model, &data)?;
    let report = evaluate(&ckpt.model, &data.sentences, mode, threshold)?;
    if let Some(out) = out {
        write_report(&report, out)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedTriple {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub subj: [usize; 2],
    pub obj: [usize; 2],
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub text: String,
    pub triples: Vec<PredictedTriple>,
}

/// Extracts triples from raw sentences, one per line.
pub fn cmd_predict(checkpoint: &Path, input: &Path, threshold: Option<f64>, out: &mut dyn Write) -> Result<Vec<PredictionRecord>> {
    require_file(input)?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let file = fs::File::open(input).map_err(|e| Error::io(input, e))?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(input, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let tokens = tokenize(&line);
        let preds = ckpt.model.predict(&ckpt.vocab.encode(&tokens))?;
        let triples = extract_triples(&preds, SpanWindow::between_markers(tokens.len()), threshold)
            .into_iter()
            .map(|t| PredictedTriple {
                subject: tokens[t.subject.start..=t.subject.end].join(" "),
                relation: ckpt.relations.name(t.relation).unwrap_or("?").to_string(),
                object: tokens[t.object.start..=t.object.end].join(" "),
                subj: [t.subject.start, t.subject.end],
                obj: [t.object.start, t.object.end],
                confidence: t.confidence,
            })
            .collect();
        let record = PredictionRecord { text: line, triples };
        serde_json::to_writer(&mut *out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
        records.push(record);
    }
    Ok(records)
}

/// Reproduces the three-query reference example. With `perturb`, one
/// probability feeding a single cost entry is changed first.
pub fn cmd_verify_appendix(perturb: bool) -> Result<AppendixReport> {
    let mut preds = appendix::predictions();
    if perturb {
        preds.predictions[2].subject_start[6] = 0.4;
        preds.predictions[2].subject_start[2] = 0.1;
    }
    appendix::verify(&preds)
}

/// Writes `corpus.jsonl` and `manifest.json` into `out`.
pub fn cmd_gen_synthetic(config: &SyntheticConfig, out: &Path) -> Result<Corpus> {
    let synthetic = generate_synthetic(config)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    synthetic.corpus.write_jsonl(&out.join("corpus.jsonl"))?;
    save_json(&synthetic.manifest, &out.join("manifest.json"))?;
    Ok(synthetic.corpus)
}

/// Process exit status for a command result.
pub fn exit_code<T>(result: &Result<T>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_io() => 2,
        Err(_) => 1,
    }
}
