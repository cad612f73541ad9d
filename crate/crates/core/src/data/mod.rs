//! Corpora of sentences annotated with relational triples.
//!
//! Two on-disk layouts are read:
//!
//! * **native JSON Lines**, one sentence per line:
//!   `{"text": "...", "tokens": [...], "triples": [{"relation": "r", "subj": [s, e], "obj": [s, e]}]}`
//!   with inclusive word-index spans;
//! * **copyre JSON**, the layout of the public NYT/WebNLG preprocessing:
//!   `{"sentText": "...", "relationMentions": [{"em1Text": "...", "em2Text": "...", "label": "..."}]}`
//!   either one object per line or a single JSON array. Entity strings are
//!   grounded to their first whitespace-token occurrence.

pub mod overlap;
pub mod synthetic;
pub mod vocab;

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching_loss::{GoldTriple, GoldTripleSet};
pub use overlap::{classify_overlap, OverlapClass, OverlapLabels};
pub use vocab::Vocab;

/// Whether entities are compared by full span or by head (last) token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MatchingMode {
    Partial,
    #[default]
    Exact,
}

impl std::str::FromStr for MatchingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "partial" => Ok(MatchingMode::Partial),
            "exact" => Ok(MatchingMode::Exact),
            other => Err(Error::invalid(format!("unknown matching mode `{other}`"))),
        }
    }
}

/// Inclusive token span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    /// The last token, used as the entity head.
    pub fn head(self) -> Span {
        Span::new(self.end, self.end)
    }

    pub fn project(self, mode: MatchingMode) -> Span {
        match mode {
            MatchingMode::Exact => self,
            MatchingMode::Partial => self.head(),
        }
    }

    pub fn is_valid_within(self, len: usize) -> bool {
        self.start <= self.end && self.end < len
    }
}

/// A `(subject, relation, object)` fact with token spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub relation: usize,
    pub subject: Span,
    pub object: Span,
}

impl Triple {
    pub fn project(self, mode: MatchingMode) -> Triple {
        Triple {
            relation: self.relation,
            subject: self.subject.project(mode),
            object: self.object.project(mode),
        }
    }
}

/// Relation names in index order; the no-triple class takes the index
/// right after the last real relation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationInventory {
    names: Vec<String>,
}

impl RelationInventory {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut inv = RelationInventory::default();
        for n in names {
            inv.intern(&n.into());
        }
        inv
    }

    fn intern(&mut self, name: &str) -> usize {
        match self.index(name) {
            Some(i) => i,
            None => {
                self.names.push(name.to_string());
                self.names.len() - 1
            }
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    /// Real relations (no-triple class excluded).
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Relation types including the no-triple class.
    pub fn relation_types(&self) -> usize {
        self.names.len() + 1
    }

    pub fn null_index(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub tokens: Vec<String>,
    pub token_ids: Vec<usize>,
    pub triples: Vec<Triple>,
    pub overlap: OverlapLabels,
}

impl Sentence {
    pub fn new(text: String, tokens: Vec<String>, triples: Vec<Triple>, vocab: &Vocab) -> Result<Self> {
        for t in &triples {
            if !t.subject.is_valid_within(tokens.len()) || !t.object.is_valid_within(tokens.len()) {
                return Err(Error::invalid(format!(
                    "triple {t:?} outside sentence of {} tokens",
                    tokens.len()
                )));
            }
        }
        let token_ids = vocab.encode(&tokens);
        let overlap = classify_overlap(&triples);
        Ok(Sentence {
            text,
            tokens,
            token_ids,
            triples,
            overlap,
        })
    }

    /// Gold set of exactly `m` entries for the set loss. Word index `w`
    /// maps to encoder position `w + offset` (1 when a start marker is
    /// prepended).
    pub fn gold_set(&self, m: usize, null_relation: usize, offset: usize) -> Result<GoldTripleSet> {
        pad_gold_set(&self.triples, m, null_relation, offset).map_err(|e| match e {
            Error::TooManyTriples { count, m, .. } => Error::TooManyTriples {
                sentence: self.text.clone(),
                count,
                m,
            },
            other => other,
        })
    }
}

/// Real triples first (positions shifted by `offset`), then no-triple pads.
pub fn pad_gold_set(triples: &[Triple], m: usize, null_relation: usize, offset: usize) -> Result<GoldTripleSet> {
    if triples.len() > m {
        return Err(Error::TooManyTriples {
            sentence: String::new(),
            count: triples.len(),
            m,
        });
    }
    let mut entries: Vec<GoldTriple> = triples
        .iter()
        .map(|t| GoldTriple {
            relation: t.relation,
            subject_start: t.subject.start + offset,
            subject_end: t.subject.end + offset,
            object_start: t.object.start + offset,
            object_end: t.object.end + offset,
        })
        .collect();
    entries.resize(m, GoldTriple::null(null_relation));
    GoldTripleSet::new(entries, null_relation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DropCounts {
    /// Sentences where an entity string could not be located.
    pub unlocated: usize,
    /// Sentences with more triples than the decoder can emit.
    pub too_many_triples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub vocab: Vocab,
    pub relations: RelationInventory,
    pub split: Split,
    pub dropped: DropCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    NativeJsonl,
    CopyreJson,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "native-jsonl" | "jsonl" | "native" => Ok(CorpusFormat::NativeJsonl),
            "copyre-json" | "copyre" => Ok(CorpusFormat::CopyreJson),
            other => Err(Error::invalid(format!("unknown corpus format `{other}`"))),
        }
    }
}

/// Options for [`load_corpus`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub format: CorpusFormat,
    pub mode: MatchingMode,
    /// Fixed relation inventory; names outside it are rejected. When `None`
    /// the inventory is built in first-occurrence order.
    pub relations: Option<RelationInventory>,
    /// Fixed vocabulary; when `None` one is built from the corpus tokens.
    pub vocab: Option<Vocab>,
    /// Drop sentences with more triples than this.
    pub max_triples: Option<usize>,
    pub split: Split,
}

impl LoadOptions {
    pub fn new(format: CorpusFormat) -> Self {
        LoadOptions {
            format,
            mode: MatchingMode::Exact,
            relations: None,
            vocab: None,
            max_triples: None,
            split: Split::Train,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NativeTriple {
    relation: String,
    subj: [usize; 2],
    obj: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct NativeRecord {
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
    #[serde(default)]
    triples: Vec<NativeTriple>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CopyreMention {
    em1_text: String,
    em2_text: String,
    label: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CopyreRecord {
    sent_text: String,
    #[serde(default)]
    relation_mentions: Vec<CopyreMention>,
}

/// Sentence before vocabulary assignment.
struct RawSentence {
    text: String,
    tokens: Vec<String>,
    triples: Vec<(String, Span, Span)>,
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// First occurrence of `needle` as a contiguous token sequence.
pub fn locate(tokens: &[String], needle: &[String]) -> Option<Span> {
    if needle.is_empty() || needle.len() > tokens.len() {
        return None;
    }
    tokens
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|s| Span::new(s, s + needle.len() - 1))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_native(path: &Path, content: &str) -> Result<Vec<RawSentence>> {
    let mut out = Vec::new();
    for (no, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: NativeRecord =
            serde_json::from_str(line).map_err(|e| parse_error(path, no + 1, e.to_string()))?;
        let tokens = rec.tokens.unwrap_or_else(|| tokenize(&rec.text));
        let mut triples = Vec::with_capacity(rec.triples.len());
        for t in rec.triples {
            let (s, o) = (Span::new(t.subj[0], t.subj[1]), Span::new(t.obj[0], t.obj[1]));
            if !s.is_valid_within(tokens.len()) || !o.is_valid_within(tokens.len()) {
                return Err(parse_error(
                    path,
                    no + 1,
                    format!("span outside sentence of {} tokens", tokens.len()),
                ));
            }
            triples.push((t.relation, s, o));
        }
        out.push(RawSentence {
            text: rec.text,
            tokens,
            triples,
        });
    }
    Ok(out)
}

fn read_copyre(path: &Path, content: &str, dropped: &mut DropCounts) -> Result<Vec<RawSentence>> {
    let records: Vec<(usize, CopyreRecord)> = if content.trim_start().starts_with('[') {
        let all: Vec<CopyreRecord> =
            serde_json::from_str(content).map_err(|e| parse_error(path, e.line(), e.to_string()))?;
        all.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect()
    } else {
        content
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(no, l)| {
                serde_json::from_str(l)
                    .map(|r| (no + 1, r))
                    .map_err(|e| parse_error(path, no + 1, e.to_string()))
            })
            .collect::<Result<_>>()?
    };
    let mut out = Vec::with_capacity(records.len());
    'records: for (_, rec) in records {
        let tokens = tokenize(&rec.sent_text);
        let mut triples = Vec::new();
        for m in rec.relation_mentions {
            if m.label == "None" {
                continue;
            }
            let s = locate(&tokens, &tokenize(&m.em1_text));
            let o = locate(&tokens, &tokenize(&m.em2_text));
            match (s, o) {
                (Some(s), Some(o)) => {
                    if !triples.contains(&(m.label.clone(), s, o)) {
                        triples.push((m.label, s, o));
                    }
                }
                _ => {
                    dropped.unlocated += 1;
                    continue 'records;
                }
            }
        }
        out.push(RawSentence {
            text: rec.sent_text,
            tokens,
            triples,
        });
    }
    Ok(out)
}

pub fn load_corpus(path: &Path, options: &LoadOptions) -> Result<Corpus> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dropped = DropCounts::default();
    let raw = match options.format {
        CorpusFormat::NativeJsonl => read_native(path, &content)?,
        CorpusFormat::CopyreJson => read_copyre(path, &content, &mut dropped)?,
    };
    let raw: Vec<RawSentence> = match options.max_triples {
        Some(max) => raw
            .into_iter()
            .filter(|s| {
                let keep = s.triples.len() <= max;
                if !keep {
                    dropped.too_many_triples += 1;
                }
                keep
            })
            .collect(),
        None => raw,
    };
    if dropped.unlocated > 0 {
        warn!("{}: dropped {} sentences with unlocatable entities", path.display(), dropped.unlocated);
    }
    if dropped.too_many_triples > 0 {
        warn!(
            "{}: dropped {} sentences with more than {} triples",
            path.display(),
            dropped.too_many_triples,
            options.max_triples.unwrap_or_default()
        );
    }
    let mut corpus = assemble(raw, options)?;
    corpus.dropped = dropped;
    Ok(corpus)
}

fn assemble(raw: Vec<RawSentence>, options: &LoadOptions) -> Result<Corpus> {
    let fixed = options.relations.is_some();
    let mut relations = options.relations.clone().unwrap_or_default();
    let vocab = options
        .vocab
        .clone()
        .unwrap_or_else(|| Vocab::from_tokens(raw.iter().flat_map(|s| s.tokens.iter())));
    let mut sentences = Vec::with_capacity(raw.len());
    for s in raw {
        let mut triples = Vec::with_capacity(s.triples.len());
        for (name, subj, obj) in &s.triples {
            let relation = if fixed {
                relations
                    .index(name)
                    .ok_or_else(|| Error::UnknownRelation(name.clone()))?
            } else {
                relations.intern(name)
            };
            let t = Triple {
                relation,
                subject: *subj,
                object: *obj,
            }
            .project(options.mode);
            if !triples.contains(&t) {
                triples.push(t);
            }
        }
        sentences.push(Sentence::new(s.text, s.tokens, triples, &vocab)?);
    }
    Ok(Corpus {
        sentences,
        vocab,
        relations,
        split: options.split,
        dropped: DropCounts::default(),
    })
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Largest per-sentence triple count.
    pub fn max_triples(&self) -> usize {
        self.sentences.iter().map(|s| s.triples.len()).max().unwrap_or(0)
    }

    /// Longest sentence in tokens.
    pub fn max_tokens(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).max().unwrap_or(0)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for s in &self.sentences {
            let rec = NativeRecord {
                text: s.text.clone(),
                tokens: Some(s.tokens.clone()),
                triples: s
                    .triples
                    .iter()
                    .map(|t| NativeTriple {
                        relation: self.relations.name(t.relation).unwrap_or("?").to_string(),
                        subj: [t.subject.start, t.subject.end],
                        obj: [t.object.start, t.object.end],
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Re-encodes every sentence with `vocab` (e.g. the training vocabulary).
    pub fn with_vocab(mut self, vocab: Vocab) -> Self {
        for s in &mut self.sentences {
            s.token_ids = vocab.encode(&s.tokens);
        }
        self.vocab = vocab;
        self
    }

    /// Applies `mode` to every gold span (head-token projection for Partial).
    pub fn project(mut self, mode: MatchingMode) -> Self {
        for s in &mut self.sentences {
            let mut triples: Vec<Triple> = Vec::with_capacity(s.triples.len());
            for t in s.triples.iter().map(|t| t.project(mode)) {
                if !triples.contains(&t) {
                    triples.push(t);
                }
            }
            s.overlap = classify_overlap(&triples);
            s.triples = triples;
        }
        self
    }

    pub fn subset(&self, indices: &[usize], split: Split) -> Corpus {
        Corpus {
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
            vocab: self.vocab.clone(),
            relations: self.relations.clone(),
            split,
            dropped: DropCounts::default(),
        }
    }

    /// Seeded shuffle, then the first `fraction` of sentences (at least one
    /// when `fraction > 0` and the corpus has two or more) become the dev
    /// split. Returns `(train, dev)`.
    pub fn split_dev(&self, fraction: f64, seed: u64) -> (Corpus, Corpus) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut n_dev = (self.len() as f64 * fraction).round() as usize;
        if fraction > 0.0 && n_dev == 0 && self.len() >= 2 {
            n_dev = 1;
        }
        n_dev = n_dev.min(self.len().saturating_sub(1));
        let (dev, train) = order.split_at(n_dev);
        let mut train = train.to_vec();
        let mut dev = dev.to_vec();
        train.sort_unstable();
        dev.sort_unstable();
        (self.subset(&train, Split::Train), self.subset(&dev, Split::Dev))
    }
}

/// Writes any serializable value as pretty JSON.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e.line(), e.to_string()))
}

/// Per-relation triple counts, keyed by name.
pub fn relation_histogram(corpus: &Corpus) -> HashMap<String, usize> {
    let mut h = HashMap::new();
    for s in &corpus.sentences {
        for t in &s.triples {
            let name = corpus.relations.name(t.relation).unwrap_or("?").to_string();
            *h.entry(name).or_insert(0) += 1;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const APPENDIX_SENTENCE: &str =
        "Aarhus Airport serves the city of Aarhus , which is led by Jacob Bundsgaard .";

    fn write(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn copyre_grounds_appendix_entities() {
        let dir = tempfile::tempdir().unwrap();
        let rec = serde_json::json!({
            "sentText": APPENDIX_SENTENCE,
            "relationMentions": [
                {"em1Text": "Aarhus", "em2Text": "Jacob Bundsgaard", "label": "leader_name"},
                {"em1Text": "Aarhus Airport", "em2Text": "Aarhus", "label": "located_in"},
            ]
        });
        let p = write(&dir, "a.json", &format!("{rec}\n"));
        let corpus = load_corpus(&p, &LoadOptions::new(CorpusFormat::CopyreJson)).unwrap();
        let s = &corpus.sentences[0];
        // "Aarhus" alone first occurs at token 0, inside "Aarhus Airport".
        assert_eq!(s.triples[1].subject, Span::new(0, 1));
        assert_eq!(s.triples[0].object, Span::new(12, 13));
        assert_eq!(corpus.relations.names(), &["leader_name", "located_in"]);
    }

    #[test]
    fn locate_first_occurrence() {
        let toks = tokenize(APPENDIX_SENTENCE);
        assert_eq!(locate(&toks, &tokenize("Aarhus Airport")), Some(Span::new(0, 1)));
        assert_eq!(locate(&toks, &tokenize("Jacob Bundsgaard")), Some(Span::new(12, 13)));
        assert_eq!(locate(&toks, &tokenize("Aarhus ,")), Some(Span::new(6, 7)));
        assert_eq!(locate(&toks, &tokenize("Copenhagen")), None);
    }

    #[test]
    fn copyre_drops_unlocatable_and_keeps_empty() {
        let dir = tempfile::tempdir().unwrap();
        let content = r#"[
            {"sentText": "a b c", "relationMentions": [{"em1Text": "a", "em2Text": "zz", "label": "r"}]},
            {"sentText": "d e f", "relationMentions": []}
        ]"#;
        let p = write(&dir, "a.json", content);
        let corpus = load_corpus(&p, &LoadOptions::new(CorpusFormat::CopyreJson)).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.dropped.unlocated, 1);
        assert!(corpus.sentences[0].triples.is_empty());
        assert!(corpus.sentences[0].overlap.is_normal());
    }

    #[test]
    fn native_parse_error_carries_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.jsonl", "{\"text\": \"a b\", \"triples\": []}\n{oops\n");
        let err = load_corpus(&p, &LoadOptions::new(CorpusFormat::NativeJsonl)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn unknown_relation_rejected_with_fixed_inventory() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.jsonl",
            r#"{"text": "a b", "triples": [{"relation": "x", "subj": [0,0], "obj": [1,1]}]}"#,
        );
        let mut opts = LoadOptions::new(CorpusFormat::NativeJsonl);
        opts.relations = Some(RelationInventory::new(["y"]));
        assert!(matches!(load_corpus(&p, &opts), Err(Error::UnknownRelation(_))));
    }

    #[test]
    fn partial_mode_keeps_heads_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.jsonl",
            r#"{"text": "a b c d", "triples": [{"relation": "x", "subj": [0,1], "obj": [2,3]}]}"#,
        );
        let mut opts = LoadOptions::new(CorpusFormat::NativeJsonl);
        opts.mode = MatchingMode::Partial;
        let c = load_corpus(&p, &opts).unwrap();
        assert_eq!(c.sentences[0].triples[0].subject, Span::new(1, 1));
        assert_eq!(c.sentences[0].triples[0].object, Span::new(3, 3));
    }

    #[test]
    fn too_many_triples_dropped_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.jsonl",
            concat!(
                r#"{"text": "a b c", "triples": [{"relation": "x", "subj": [0,0], "obj": [1,1]}, {"relation": "y", "subj": [0,0], "obj": [2,2]}]}"#,
                "\n",
                r#"{"text": "a b", "triples": [{"relation": "x", "subj": [0,0], "obj": [1,1]}]}"#
            ),
        );
        let mut opts = LoadOptions::new(CorpusFormat::NativeJsonl);
        opts.max_triples = Some(1);
        let c = load_corpus(&p, &opts).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.dropped.too_many_triples, 1);
    }

    #[test]
    fn pad_gold_set_cases() {
        let t = Triple {
            relation: 0,
            subject: Span::new(0, 0),
            object: Span::new(1, 2),
        };
        let g = pad_gold_set(&[t, t], 3, 5, 1).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.real_count(), 2);
        assert_eq!(g.entries()[2].relation, 5);
        assert_eq!(g.entries()[0].object_end, 3);
        let g = pad_gold_set(&[], 3, 5, 0).unwrap();
        assert!(g.entries().iter().all(|e| e.relation == 5));
        let g = pad_gold_set(&[t, t, t], 3, 5, 0).unwrap();
        assert_eq!(g.real_count(), 3);
        assert!(pad_gold_set(&[t, t, t, t], 3, 5, 0).is_err());
    }

    #[test]
    fn gold_set_error_names_sentence() {
        let vocab = Vocab::default();
        let t = Triple {
            relation: 0,
            subject: Span::new(0, 0),
            object: Span::new(1, 1),
        };
        let s = Sentence::new("x y".into(), tokenize("x y"), vec![t, t], &vocab).unwrap();
        let err = s.gold_set(1, 1, 1).unwrap_err().to_string();
        assert!(err.contains("x y"), "{err}");
    }

    #[test]
    fn dev_split_is_seeded_and_disjoint() {
        let vocab = Vocab::default();
        let sentences: Vec<Sentence> = (0..20)
            .map(|i| Sentence::new(format!("s{i}"), vec![format!("s{i}")], vec![], &vocab).unwrap())
            .collect();
        let corpus = Corpus {
            sentences,
            vocab,
            relations: RelationInventory::default(),
            split: Split::Train,
            dropped: DropCounts::default(),
        };
        let (a, b) = corpus.split_dev(0.1, 4);
        let (c, d) = corpus.split_dev(0.1, 4);
        assert_eq!((a.len(), b.len()), (18, 2));
        assert_eq!(a, c);
        assert_eq!(b, d);
        assert!(b.sentences.iter().all(|s| !a.sentences.contains(s)));
    }
}
