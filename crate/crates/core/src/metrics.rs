//! Micro precision, recall and F1 over extracted triples.
//!
//! A prediction is correct when an unused gold triple of the same sentence
//! has the same relation and the same subject and object spans, compared
//! on the head token only in [`MatchingMode::Partial`]. Matching is one to
//! one, so with equality keys the correct count is the size of the
//! multiset intersection. Entity-pair and relation scores use their own
//! keys and their own matching.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::data::{MatchingMode, OverlapClass, Sentence, Span, Triple};
use crate::decode::ExtractedTriple;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted: usize,
    pub gold: usize,
    pub correct: usize,
}

impl Scores {
    /// Precision is 0 when nothing was predicted, recall 0 when there is no
    /// gold, and F1 0 when both are 0.
    pub fn from_counts(predicted: usize, gold: usize, correct: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Scores {
            precision,
            recall,
            f1,
            predicted,
            gold,
            correct,
        }
    }

    fn add(&mut self, c: Counts) {
        *self = Scores::from_counts(self.predicted + c.predicted, self.gold + c.gold, self.correct + c.correct);
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    predicted: usize,
    gold: usize,
    correct: usize,
}

fn count<K: Eq + Hash>(pred: impl Iterator<Item = K>, gold: impl Iterator<Item = K>) -> Counts {
    let mut bag: HashMap<K, usize> = HashMap::new();
    let mut c = Counts::default();
    for k in gold {
        *bag.entry(k).or_insert(0) += 1;
        c.gold += 1;
    }
    for k in pred {
        c.predicted += 1;
        if let Some(n) = bag.get_mut(&k).filter(|n| **n > 0) {
            *n -= 1;
            c.correct += 1;
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bucketing {
    TripleCount,
    Overlap,
}

/// Label of the triple-count bucket for a sentence with `n` gold triples;
/// `None` for sentences without triples.
pub fn count_bucket(n: usize) -> Option<&'static str> {
    match n {
        0 => None,
        1 => Some("1"),
        2 => Some("2"),
        3 => Some("3"),
        4 => Some("4"),
        _ => Some(">=5"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: MatchingMode,
    pub sentences: usize,
    pub overall: Scores,
    pub entity_pair: Scores,
    pub relation: Scores,
    /// Keyed `1`..`4` and `>=5`; buckets without sentences are absent.
    pub by_triple_count: BTreeMap<String, Scores>,
    /// Keyed `Normal`, `EPO`, `SEO`; buckets without sentences are absent.
    pub by_overlap: BTreeMap<String, Scores>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn project(t: &Triple, mode: MatchingMode) -> (usize, Span, Span) {
    let t = t.project(mode);
    (t.relation, t.subject, t.object)
}

fn sentence_counts(pred: &[Triple], gold: &[Triple], mode: MatchingMode) -> Counts {
    count(pred.iter().map(|t| project(t, mode)), gold.iter().map(|t| project(t, mode)))
}

fn check_alignment(predicted: usize, gold: usize) -> Result<()> {
    if predicted != gold {
        return Err(Error::invalid(format!(
            "{predicted} prediction lists for {gold} sentences"
        )));
    }
    Ok(())
}

/// Scores plain triples against the gold sentences.
pub fn score_triples(predictions: &[Vec<Triple>], golds: &[Sentence], mode: MatchingMode) -> Result<EvalReport> {
    check_alignment(predictions.len(), golds.len())?;
    let mut overall = Scores::default();
    let mut entity_pair = Scores::default();
    let mut relation = Scores::default();
    for (pred, sent) in predictions.iter().zip(golds) {
        let gold = &sent.triples;
        overall.add(sentence_counts(pred, gold, mode));
        entity_pair.add(count(
            pred.iter().map(|t| (t.subject.project(mode), t.object.project(mode))),
            gold.iter().map(|t| (t.subject.project(mode), t.object.project(mode))),
        ));
        relation.add(count(pred.iter().map(|t| t.relation), gold.iter().map(|t| t.relation)));
    }
    Ok(EvalReport {
        mode,
        sentences: golds.len(),
        overall,
        entity_pair,
        relation,
        by_triple_count: bucket_triples(predictions, golds, mode, Bucketing::TripleCount)?,
        by_overlap: bucket_triples(predictions, golds, mode, Bucketing::Overlap)?,
    })
}

/// Scores decoder output against the gold sentences.
pub fn score(predictions: &[Vec<ExtractedTriple>], golds: &[Sentence], mode: MatchingMode) -> Result<EvalReport> {
    score_triples(&plain(predictions), golds, mode)
}

fn plain(predictions: &[Vec<ExtractedTriple>]) -> Vec<Vec<Triple>> {
    predictions
        .iter()
        .map(|p| p.iter().map(ExtractedTriple::triple).collect())
        .collect()
}

/// Micro scores within each bucket. A sentence labeled both EPO and SEO
/// counts toward both.
pub fn bucket_report(
    predictions: &[Vec<ExtractedTriple>],
    golds: &[Sentence],
    mode: MatchingMode,
    bucketing: Bucketing,
) -> Result<BTreeMap<String, Scores>> {
    bucket_triples(&plain(predictions), golds, mode, bucketing)
}

pub fn bucket_triples(
    predictions: &[Vec<Triple>],
    golds: &[Sentence],
    mode: MatchingMode,
    bucketing: Bucketing,
) -> Result<BTreeMap<String, Scores>> {
    check_alignment(predictions.len(), golds.len())?;
    let mut out: BTreeMap<String, Scores> = BTreeMap::new();
    for (pred, sent) in predictions.iter().zip(golds) {
        let labels: Vec<String> = match bucketing {
            Bucketing::TripleCount => count_bucket(sent.triples.len()).into_iter().map(String::from).collect(),
            Bucketing::Overlap => sent.overlap.classes().iter().map(OverlapClass::to_string).collect(),
        };
        let c = sentence_counts(pred, &sent.triples, mode);
        for label in labels {
            out.entry(label).or_default().add(c);
        }
    }
    Ok(out)
}

fn row(f: &mut fmt::Formatter<'_>, name: &str, s: &Scores) -> fmt::Result {
    writeln!(
        f,
        "{name:<12} {:>9.4} {:>9.4} {:>9.4} {:>9} {:>9} {:>9}",
        s.precision, s.recall, s.f1, s.predicted, s.gold, s.correct
    )
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode: {:?}, sentences: {}", self.mode, self.sentences)?;
        writeln!(
            f,
            "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "", "precision", "recall", "f1", "predicted", "gold", "correct"
        )?;
        row(f, "overall", &self.overall)?;
        row(f, "(s, o)", &self.entity_pair)?;
        row(f, "r", &self.relation)?;
        for (k, s) in &self.by_triple_count {
            let name = if k.starts_with('>') { format!("N{k}") } else { format!("N={k}") };
            row(f, &name, s)?;
        }
        for class in [OverlapClass::Normal, OverlapClass::Epo, OverlapClass::Seo] {
            if let Some(s) = self.by_overlap.get(&class.to_string()) {
                row(f, &class.to_string(), s)?;
            }
        }
        Ok(())
    }
}
