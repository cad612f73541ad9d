//! The three-query reference example: a 15-token sentence, two gold
//! triples plus one pad, hand-written prediction distributions, and the
//! expected cost matrix, assignment and loss.
//!
//! Relation indices: `leader_name` 0, `located_in` 1, `capital_Of` 2,
//! no-triple 3. Positions are word indices (no boundary markers).

use std::fmt;

use crate::assignment::hungarian;
use crate::decode::{extract_triples, ExtractedTriple, SpanWindow};
use crate::error::{Error, Result};
use crate::matching_loss::{build_cost_matrix, set_loss, GoldTriple, GoldTripleSet};
use crate::model::{PredictionSet, TriplePrediction};

pub const SENTENCE: &str = "Aarhus Airport serves the city of Aarhus , which is led by Jacob Bundsgaard .";
pub const RELATIONS: [&str; 3] = ["leader_name", "located_in", "capital_Of"];
pub const NULL_RELATION: usize = 3;
pub const LENGTH: usize = 15;

pub const COST_MATRIX: [[f64; 3]; 3] = [[-0.4, -2.6, -2.1], [-3.3, -1.15, -1.5], [0.0, 0.0, 0.0]];
pub const ASSIGNMENT: [usize; 3] = [1, 0, 2];
pub const TOTAL_COST: f64 = -5.9;
pub const LOSS: f64 = 7.52;
pub const LOSS_TOLERANCE: f64 = 0.01;
pub const COST_TOLERANCE: f64 = 1e-9;

pub fn golds() -> GoldTripleSet {
    GoldTripleSet::new(
        vec![
            GoldTriple::new(0, (6, 6), (12, 13)),
            GoldTriple::new(1, (0, 1), (6, 6)),
            GoldTriple::null(NULL_RELATION),
        ],
        NULL_RELATION,
    )
    .expect("fixture is well formed")
}

fn dist(entries: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; LENGTH];
    for &(i, p) in entries {
        v[i] = p;
    }
    v
}

/// The three prediction distributions.
///
/// Every probability read by the cost matrix or the loss is as given. The
/// third prediction's subject-end mass sits at position 6 and its
/// object-end mass at 13 is 0.3, as the cost row requires; its object
/// start and end are then normalized through positions 0 and 1, which no
/// cost or loss term reads.
pub fn predictions() -> PredictionSet {
    PredictionSet {
        predictions: vec![
            TriplePrediction {
                relation: vec![0.1, 0.3, 0.4, 0.2],
                subject_start: dist(&[(0, 0.9), (1, 0.1)]),
                subject_end: dist(&[(0, 0.2), (1, 0.8)]),
                object_start: dist(&[(0, 0.1), (1, 0.1), (6, 0.7), (12, 0.1)]),
                object_end: dist(&[(1, 0.1), (6, 0.6), (12, 0.1), (13, 0.2)]),
            },
            TriplePrediction {
                relation: vec![0.5, 0.25, 0.15, 0.1],
                subject_start: dist(&[(0, 0.1), (6, 0.8), (12, 0.1)]),
                subject_end: dist(&[(0, 0.2), (1, 0.3), (6, 0.5)]),
                object_start: dist(&[(0, 0.2), (1, 0.1), (6, 0.2), (12, 0.5)]),
                object_end: dist(&[(1, 0.4), (6, 0.3), (13, 0.3)]),
            },
            TriplePrediction {
                relation: vec![0.1, 0.3, 0.4, 0.2],
                subject_start: dist(&[(0, 0.4), (6, 0.5), (12, 0.1)]),
                subject_end: dist(&[(0, 0.1), (1, 0.4), (6, 0.5)]),
                object_start: dist(&[(0, 0.2), (1, 0.1), (12, 0.7)]),
                object_end: dist(&[(1, 0.3), (6, 0.4), (13, 0.3)]),
            },
        ],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixReport {
    pub cost_matrix: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub total_cost: f64,
    pub loss: f64,
    pub extracted: Vec<ExtractedTriple>,
    pub checks: Vec<Check>,
}

impl AppendixReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// `Ok` when every check passed, otherwise an error naming the first
    /// failing quantity.
    pub fn into_result(self) -> Result<Self> {
        match self.failures().first() {
            None => Ok(self),
            Some(c) => Err(Error::CheckFailed(format!(
                "{}: expected {}, got {}",
                c.name, c.expected, c.actual
            ))),
        }
    }
}

impl fmt::Display for AppendixReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sentence: {SENTENCE}")?;
        writeln!(f, "cost matrix:")?;
        for row in &self.cost_matrix {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>7.2}")).collect();
            writeln!(f, "  [{}]", cells.join(" "))?;
        }
        writeln!(f, "assignment: gold [0, 1, 2] -> predictions {:?}", self.assignment)?;
        writeln!(f, "total cost: {:.4}", self.total_cost)?;
        writeln!(f, "loss: {:.4}", self.loss)?;
        for t in &self.extracted {
            writeln!(
                f,
                "extracted: ({}, ({}, {}), ({}, {})) confidence {:.4}",
                RELATIONS.get(t.relation).copied().unwrap_or("?"),
                t.subject.start,
                t.subject.end,
                t.object.start,
                t.object.end,
                t.confidence
            )?;
        }
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: expected {}, got {}",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.expected,
                c.actual
            )?;
        }
        Ok(())
    }
}

/// Runs the example on `preds` against the reference gold set and expected
/// values. Pass [`predictions()`] for the reference run.
pub fn verify(preds: &PredictionSet) -> Result<AppendixReport> {
    let golds = golds();
    let costs = build_cost_matrix(&golds, preds)?;
    let assignment = hungarian(&costs);
    let loss = set_loss(&golds, preds)?.loss;
    let mut checks = Vec::new();
    for (i, row) in COST_MATRIX.iter().enumerate() {
        for (j, &want) in row.iter().enumerate() {
            let got = costs.get(i, j);
            checks.push(Check {
                name: format!("cost[{i}][{j}]"),
                expected: format!("{want}"),
                actual: format!("{got:.12}"),
                passed: (got - want).abs() <= COST_TOLERANCE,
            });
        }
    }
    checks.push(Check {
        name: "assignment".into(),
        expected: format!("{ASSIGNMENT:?}"),
        actual: format!("{:?}", assignment.permutation),
        passed: assignment.permutation == ASSIGNMENT,
    });
    checks.push(Check {
        name: "total cost".into(),
        expected: format!("{TOTAL_COST}"),
        actual: format!("{:.12}", assignment.total_cost),
        passed: (assignment.total_cost - TOTAL_COST).abs() <= COST_TOLERANCE,
    });
    checks.push(Check {
        name: "loss".into(),
        expected: format!("{LOSS} +/- {LOSS_TOLERANCE}"),
        actual: format!("{loss:.6}"),
        passed: (loss - LOSS).abs() <= LOSS_TOLERANCE,
    });
    let extracted = extract_triples(preds, SpanWindow::new(0, LENGTH), None);
    Ok(AppendixReport {
        cost_matrix: (0..costs.size()).map(|i| costs.row(i).to_vec()).collect(),
        assignment: assignment.permutation,
        total_cost: assignment.total_cost,
        loss,
        extracted,
        checks,
    })
}
