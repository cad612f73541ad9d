//! Pairwise matching cost, optimal gold-to-prediction assignment and the
//! bipartite matching loss.
//!
//! The assignment is computed from detached probabilities; gradients flow
//! only through the log-probabilities selected by it.

use serde::{Deserialize, Serialize};

use crate::assignment::{hungarian, Assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::model::{Pointer, PredictionSet, SetOutput, TriplePrediction};
use crate::numerics::{Tape, Var};

/// Floor applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// A gold triple in model coordinates. Span fields are ignored (and stored
/// as 0) when `relation` is the no-triple class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoldTriple {
    pub relation: usize,
    pub subject_start: usize,
    pub subject_end: usize,
    pub object_start: usize,
    pub object_end: usize,
}

impl GoldTriple {
    pub fn new(relation: usize, subject: (usize, usize), object: (usize, usize)) -> Self {
        GoldTriple {
            relation,
            subject_start: subject.0,
            subject_end: subject.1,
            object_start: object.0,
            object_end: object.1,
        }
    }

    pub fn null(null_relation: usize) -> Self {
        GoldTriple::new(null_relation, (0, 0), (0, 0))
    }

    pub fn position(&self, p: Pointer) -> usize {
        match p {
            Pointer::SubjectStart => self.subject_start,
            Pointer::SubjectEnd => self.subject_end,
            Pointer::ObjectStart => self.object_start,
            Pointer::ObjectEnd => self.object_end,
        }
    }
}

/// Exactly `m` gold entries: the real triples, then no-triple pads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldTripleSet {
    entries: Vec<GoldTriple>,
    null_relation: usize,
    real: usize,
}

impl GoldTripleSet {
    pub fn new(entries: Vec<GoldTriple>, null_relation: usize) -> Result<Self> {
        let real = entries.iter().take_while(|g| g.relation != null_relation).count();
        if let Some(i) = entries[real..].iter().position(|g| g.relation != null_relation) {
            return Err(Error::invalid(format!(
                "gold entry {} is a real triple after a no-triple pad",
                real + i
            )));
        }
        for (i, g) in entries[..real].iter().enumerate() {
            if g.relation > null_relation {
                return Err(Error::invalid(format!(
                    "gold entry {i}: relation {} beyond no-triple index {null_relation}",
                    g.relation
                )));
            }
            if g.subject_start > g.subject_end || g.object_start > g.object_end {
                return Err(Error::invalid(format!("gold entry {i}: span start after end")));
            }
        }
        Ok(GoldTripleSet {
            entries,
            null_relation,
            real,
        })
    }

    pub fn entries(&self) -> &[GoldTriple] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of real (non-pad) triples.
    pub fn real_count(&self) -> usize {
        self.real
    }

    pub fn null_relation(&self) -> usize {
        self.null_relation
    }

    pub fn is_null(&self, i: usize) -> bool {
        self.entries[i].relation == self.null_relation
    }

    /// Same set with the real triples reordered by `order` (a permutation
    /// of `0..real_count()`).
    pub fn permute_real(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.real];
        if order.len() != self.real || order.iter().any(|&i| i >= self.real || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::invalid("order is not a permutation of the real triples"));
        }
        let mut entries: Vec<GoldTriple> = order.iter().map(|&i| self.entries[i]).collect();
        entries.extend_from_slice(&self.entries[self.real..]);
        GoldTripleSet::new(entries, self.null_relation)
    }
}

fn check_indices(gold: &GoldTriple, null: usize, t: usize, l: usize) -> Result<()> {
    if gold.relation >= t || null >= t {
        return Err(Error::invalid(format!(
            "relation {} (no-triple {null}) outside {t} relation types",
            gold.relation
        )));
    }
    if gold.relation != null {
        for p in Pointer::ALL {
            if gold.position(p) >= l {
                return Err(Error::invalid(format!(
                    "{p:?} index {} outside {l} positions",
                    gold.position(p)
                )));
            }
        }
    }
    Ok(())
}

/// `C_match`: zero for a no-triple gold, otherwise minus the sum of the five
/// probabilities the prediction gives to the gold relation and positions.
pub fn match_cost(gold: &GoldTriple, pred: &TriplePrediction, null_relation: usize) -> Result<f64> {
    check_indices(gold, null_relation, pred.relation.len(), pred.positions())?;
    if gold.relation == null_relation {
        return Ok(0.0);
    }
    let mut total = pred.relation[gold.relation];
    for p in Pointer::ALL {
        total += pred.pointer(p)[gold.position(p)];
    }
    Ok(-total)
}

/// Entry `(i, j)` is `match_cost(golds[i], preds[j])`.
pub fn build_cost_matrix(golds: &GoldTripleSet, preds: &PredictionSet) -> Result<CostMatrix> {
    if golds.len() != preds.len() {
        return Err(Error::invalid(format!(
            "{} gold entries vs {} predictions",
            golds.len(),
            preds.len()
        )));
    }
    let mut entries = Vec::with_capacity(golds.len() * preds.len());
    for g in golds.entries() {
        for p in &preds.predictions {
            entries.push(match_cost(g, p, golds.null_relation())?);
        }
    }
    CostMatrix::from_flat(golds.len(), entries)
}

/// Loss value and the assignment it was computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct SetLoss {
    pub loss: f64,
    pub costs: CostMatrix,
    pub assignment: Assignment,
}

/// Bipartite matching loss of fixed distributions.
pub fn set_loss(golds: &GoldTripleSet, preds: &PredictionSet) -> Result<SetLoss> {
    let costs = build_cost_matrix(golds, preds)?;
    let assignment = hungarian(&costs);
    let tape = Tape::new();
    let out = SetOutput::from_predictions(&tape, preds)?;
    let loss = set_loss_with_assignment(&tape, golds, &out, &assignment.permutation)?;
    Ok(SetLoss {
        loss: tape.item(loss),
        costs,
        assignment,
    })
}

/// Matches on the detached values of `out`, then records the loss on the
/// tape. Returns the scalar loss and the assignment used.
pub fn set_loss_on_tape(tape: &Tape, golds: &GoldTripleSet, out: &SetOutput) -> Result<(Var, Assignment)> {
    let preds = out.detach(tape);
    let costs = build_cost_matrix(golds, &preds)?;
    let assignment = hungarian(&costs);
    let loss = set_loss_with_assignment(tape, golds, out, &assignment.permutation)?;
    Ok((loss, assignment))
}

/// Loss under a given assignment (`permutation[i]` is the prediction
/// matched to gold `i`).
pub fn set_loss_with_assignment(
    tape: &Tape,
    golds: &GoldTripleSet,
    out: &SetOutput,
    permutation: &[usize],
) -> Result<Var> {
    let rel_shape = tape.shape(out.relation);
    let (m, t) = (rel_shape[0], rel_shape[1]);
    let l = tape.shape(out.pointers[0])[1];
    if golds.len() != m || permutation.len() != m {
        return Err(Error::invalid(format!(
            "{} gold entries and {} assignments for {m} predictions",
            golds.len(),
            permutation.len()
        )));
    }
    let mut rel_idx = Vec::with_capacity(m);
    let mut ptr_idx: [Vec<usize>; 4] = Default::default();
    for (i, g) in golds.entries().iter().enumerate() {
        check_indices(g, golds.null_relation(), t, l)?;
        let j = permutation[i];
        if j >= m {
            return Err(Error::invalid(format!("assignment target {j} outside {m} predictions")));
        }
        rel_idx.push(j * t + g.relation);
        if !golds.is_null(i) {
            for p in Pointer::ALL {
                ptr_idx[p as usize].push(j * l + g.position(p));
            }
        }
    }
    let nll = |x: Var, idx: &[usize]| -> Result<Var> {
        let picked = tape.clamp_min(tape.gather(x, idx)?, LOG_FLOOR);
        Ok(tape.scale(tape.sum(tape.log(picked)?), -1.0))
    };
    let mut loss = nll(out.relation, &rel_idx)?;
    if golds.real_count() > 0 {
        for p in Pointer::ALL {
            loss = tape.add(loss, nll(out.pointer(p), &ptr_idx[p as usize])?)?;
        }
    }
    Ok(loss)
}

/// Mean of per-sentence losses.
pub fn batch_mean(tape: &Tape, losses: &[Var]) -> Result<Var> {
    let (&first, rest) = losses
        .split_first()
        .ok_or_else(|| Error::invalid("empty batch"))?;
    let mut total = first;
    for &l in rest {
        total = tape.add(total, l)?;
    }
    Ok(tape.scale(total, 1.0 / losses.len() as f64))
}
