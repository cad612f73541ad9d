//! Discretizes a prediction set into relational triples.
//!
//! Each query slot takes its argmax relation; slots whose argmax is the
//! no-triple class are dropped. Subject and object spans are the
//! `(start, end)` pairs with `start <= end` inside the sentence window that
//! maximize `p_start(start) * p_end(end)`. Identical triples from several
//! slots are merged, keeping the highest confidence.

use serde::{Deserialize, Serialize};

use crate::data::{Span, Triple};
use crate::model::{Pointer, PredictionSet};

/// Candidate positions `first..first + len` of the pointer distributions.
/// Output spans are relative to `first`, so with a start marker at
/// position 0 the window `SpanWindow::new(1, n)` yields word indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanWindow {
    pub first: usize,
    pub len: usize,
}

impl SpanWindow {
    pub fn new(first: usize, len: usize) -> Self {
        SpanWindow { first, len }
    }

    /// The `n` word positions between a start and an end marker.
    pub fn between_markers(n: usize) -> Self {
        SpanWindow::new(1, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractedTriple {
    pub relation: usize,
    pub subject: Span,
    pub object: Span,
    /// Product of the five selected probabilities.
    pub confidence: f64,
}

impl ExtractedTriple {
    pub fn triple(&self) -> Triple {
        Triple {
            relation: self.relation,
            subject: self.subject,
            object: self.object,
        }
    }
}

/// First index of the maximum.
fn argmax(v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &x) in v.iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

/// Best `(start, end)` with `start <= end` in the window, by product of
/// probabilities; returns window-relative indices and the product.
pub fn best_span(start: &[f64], end: &[f64], window: SpanWindow) -> Option<(Span, f64)> {
    let hi = (window.first + window.len).min(start.len()).min(end.len());
    let mut best: Option<(Span, f64)> = None;
    let mut prefix: Option<(usize, f64)> = None;
    for b in window.first..hi {
        if prefix.is_none_or(|(_, p)| start[b] > p) {
            prefix = Some((b, start[b]));
        }
        let (a, pa) = prefix.unwrap();
        let score = pa * end[b];
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((Span::new(a - window.first, b - window.first), score));
        }
    }
    best
}

/// Extracts at most `m` distinct triples. With `threshold`, triples whose
/// confidence falls below it are dropped as well.
pub fn extract_triples(preds: &PredictionSet, window: SpanWindow, threshold: Option<f64>) -> Vec<ExtractedTriple> {
    let mut out: Vec<ExtractedTriple> = Vec::new();
    for p in &preds.predictions {
        let null = p.relation.len() - 1;
        let (relation, pr) = argmax(&p.relation);
        if relation == null {
            continue;
        }
        let Some((subject, ps)) = best_span(p.pointer(Pointer::SubjectStart), p.pointer(Pointer::SubjectEnd), window)
        else {
            continue;
        };
        let Some((object, po)) = best_span(p.pointer(Pointer::ObjectStart), p.pointer(Pointer::ObjectEnd), window)
        else {
            continue;
        };
        let confidence = pr * ps * po;
        if confidence <= 0.0 || threshold.is_some_and(|t| confidence < t) {
            continue;
        }
        let candidate = ExtractedTriple {
            relation,
            subject,
            object,
            confidence,
        };
        match out.iter_mut().find(|e| e.triple() == candidate.triple()) {
            Some(e) => e.confidence = e.confidence.max(confidence),
            None => out.push(candidate),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appendix;
    use crate::model::TriplePrediction;

    fn uniform(l: usize) -> Vec<f64> {
        vec![1.0 / l as f64; l]
    }

    #[test]
    fn appendix_second_prediction() {
        let preds = appendix::predictions();
        let one = PredictionSet {
            predictions: vec![preds.predictions[1].clone()],
        };
        let got = extract_triples(&one, SpanWindow::new(0, 15), None);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].relation, 0);
        assert_eq!(got[0].subject, Span::new(6, 6));
        assert_eq!(got[0].object, Span::new(12, 13));
        let want = 0.5 * 0.8 * 0.5 * 0.5 * 0.3;
        assert!((got[0].confidence - want).abs() < 1e-12);
    }

    #[test]
    fn null_argmax_dropped() {
        let p = TriplePrediction {
            relation: vec![0.2, 0.8],
            subject_start: uniform(4),
            subject_end: uniform(4),
            object_start: uniform(4),
            object_end: uniform(4),
        };
        let preds = PredictionSet { predictions: vec![p] };
        assert!(extract_triples(&preds, SpanWindow::new(0, 4), None).is_empty());
    }

    #[test]
    fn duplicates_merge_keeping_max() {
        let mut a = TriplePrediction {
            relation: vec![0.6, 0.4],
            subject_start: vec![1.0, 0.0, 0.0],
            subject_end: vec![1.0, 0.0, 0.0],
            object_start: vec![0.0, 0.0, 1.0],
            object_end: vec![0.0, 0.0, 1.0],
        };
        let b = a.clone();
        a.relation = vec![0.9, 0.1];
        let preds = PredictionSet { predictions: vec![b, a] };
        let got = extract_triples(&preds, SpanWindow::new(0, 3), None);
        assert_eq!(got.len(), 1);
        assert!((got[0].confidence - 0.9).abs() < 1e-12);
    }

    #[test]
    fn end_before_start_never_chosen() {
        // Independent argmaxes would give start 2, end 0.
        let start = vec![0.1, 0.0, 0.9];
        let end = vec![0.8, 0.0, 0.2];
        let (span, score) = best_span(&start, &end, SpanWindow::new(0, 3)).unwrap();
        assert_eq!(span, Span::new(2, 2));
        assert!((score - 0.18).abs() < 1e-12);
    }

    #[test]
    fn markers_excluded() {
        // All mass on the start marker at position 0.
        let start = vec![0.9, 0.05, 0.05, 0.0];
        let end = vec![0.9, 0.05, 0.05, 0.0];
        let (span, _) = best_span(&start, &end, SpanWindow::between_markers(2)).unwrap();
        assert_eq!(span, Span::new(0, 0));
    }

    #[test]
    fn threshold_filters() {
        let preds = appendix::predictions();
        let all = extract_triples(&preds, SpanWindow::new(0, 15), None);
        let some = extract_triples(&preds, SpanWindow::new(0, 15), Some(0.05));
        assert!(some.len() < all.len());
        assert!(some.iter().all(|t| t.confidence >= 0.05));
    }
}
