//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use tripleset::assignment::{brute_force_assignment, hungarian, CostMatrix};
use tripleset::cli::{cmd_eval, cmd_train_corpus, cmd_verify_appendix, RunConfig};
use tripleset::data::synthetic::{generate_synthetic, SyntheticConfig};
use tripleset::data::{classify_overlap, CorpusFormat, MatchingMode, OverlapClass, Sentence, Span, Triple, Vocab};
use tripleset::decode::{extract_triples, SpanWindow};
use tripleset::matching_loss::set_loss;
use tripleset::metrics::{bucket_triples, score_triples, Bucketing};
use tripleset::model::{PredictionSet, TripleSetModel};
use tripleset::numerics::Tape;

use common::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn appendix_example() -> Outcome {
    let report = cmd_verify_appendix(false).map_err(|e| e.to_string())?;
    if let Some(c) = report.failures().first() {
        return Err(format!("{}: expected {}, got {}", c.name, c.expected, c.actual));
    }
    let perturbed = cmd_verify_appendix(true).map_err(|e| e.to_string())?;
    ensure(!perturbed.passed(), || "perturbed fixture still passes".into())?;
    Ok(format!(
        "costs exact, assignment {:?}, total {:.4}, loss {:.4}; perturbed control fails",
        report.assignment, report.total_cost, report.loss
    ))
}

fn hungarian_correctness() -> Outcome {
    let mut rng = rng(2);
    let cases = 1200;
    for case in 0..cases {
        let m = 1 + case % 8;
        let entries: Vec<f64> = (0..m * m).map(|_| rng.random_range(-10.0..=10.0)).collect();
        let c = CostMatrix::from_flat(m, entries).unwrap();
        let fast = hungarian(&c);
        let brute = brute_force_assignment(&c).unwrap();
        ensure((fast.total_cost - brute.total_cost).abs() <= 1e-9, || {
            format!("case {case} (m={m}): {} vs brute force {}", fast.total_cost, brute.total_cost)
        })?;
        ensure((c.cost_of(&fast.permutation) - fast.total_cost).abs() <= 1e-9, || {
            format!("case {case}: reported total disagrees with its permutation")
        })?;
    }
    Ok(format!("{cases} matrices, m in 1..=8, all equal to brute force"))
}

fn permutation_invariance() -> Outcome {
    let mut rng = rng(3);
    let (m, t, l) = (10, 6, 14);
    let mut worst: f64 = 0.0;
    let fixtures = 250;
    for f in 0..fixtures {
        let n = rng.random_range(0..=m);
        let golds = random_golds(&mut rng, m, n, t, 0, l);
        let preds = random_predictions(&mut rng, m, t, l);
        let base = set_loss(&golds, &preds).unwrap().loss;
        let mut shuffled = preds.clone();
        shuffled.predictions.shuffle(&mut rng);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let reordered = golds.permute_real(&order).unwrap();
        for (what, value) in [
            ("predictions", set_loss(&golds, &shuffled).unwrap().loss),
            ("golds", set_loss(&reordered, &preds).unwrap().loss),
            ("both", set_loss(&reordered, &shuffled).unwrap().loss),
        ] {
            let diff = (value - base).abs();
            worst = worst.max(diff);
            ensure(diff <= 1e-9, || format!("fixture {f}: permuting {what} changed loss by {diff:e}"))?;
        }
    }
    Ok(format!("{fixtures} fixtures with m={m}, max deviation {worst:.1e}"))
}

fn gradient_fidelity() -> Outcome {
    let mut model = TripleSetModel::new(toy_config(), 5).unwrap();
    let (tokens, golds) = toy_sentence();
    let r = gradient_check(&mut model, &tokens, &golds, 1e-5, 1);
    ensure(r.pass_rate() >= 0.99 && r.nontrivial_pass_rate() >= 0.99, || {
        format!(
            "{}/{} coordinates pass ({} non-trivial, {:.4}); first failures {:?}",
            r.passed,
            r.checked,
            r.nontrivial,
            r.nontrivial_pass_rate(),
            &r.failures[..r.failures.len().min(5)]
        )
    })?;
    Ok(format!(
        "{}/{} coordinates within 1e-4 ({:.2}%; non-trivial {}/{}), {} skipped for assignment flips, worst rel err {:.1e}",
        r.passed,
        r.checked,
        100.0 * r.pass_rate(),
        r.nontrivial_passed,
        r.nontrivial,
        r.flipped,
        r.worst_rel
    ))
}

fn overfit_oracle() -> Outcome {
    let synthetic = generate_synthetic(&SyntheticConfig::default()).map_err(|e| e.to_string())?;
    let corpus = synthetic.corpus;
    ensure(corpus.len() == 50, || format!("{} sentences", corpus.len()))?;
    for n in 1..=5 {
        ensure(corpus.sentences.iter().any(|s| s.triples.len() == n), || format!("no sentence with {n} triples"))?;
    }
    ensure(corpus.sentences.iter().all(|s| (1..=5).contains(&s.triples.len())), || "triple count outside 1..=5".into())?;
    for p in [OverlapClass::Normal, OverlapClass::Epo, OverlapClass::Seo] {
        ensure(corpus.sentences.iter().any(|s| s.overlap.contains(p)), || format!("no {p} sentence"))?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = RunConfig::default();
    config.training.epochs = 200;
    config.training.dev_fraction = 0.0;
    config.training.target_f1 = Some(1.0);
    config.output.checkpoint_dir = dir.path().join("ckpt");
    let started = Instant::now();
    let summary = cmd_train_corpus(&config, &corpus).map_err(|e| e.to_string())?;
    let corpus_path = dir.path().join("train.jsonl");
    corpus.write_jsonl(&corpus_path).map_err(|e| e.to_string())?;
    let report = cmd_eval(
        &config.output.checkpoint_dir,
        &corpus_path,
        CorpusFormat::NativeJsonl,
        MatchingMode::Exact,
        None,
        None,
    )
    .map_err(|e| e.to_string())?;
    ensure(report.overall.f1 == 1.0, || {
        format!(
            "training-set exact F1 {:.4} after {} epochs",
            report.overall.f1,
            summary.epoch_losses.len()
        )
    })?;
    Ok(format!(
        "exact F1 1.0 on the 50 training sentences at epoch {} ({:.0}s)",
        summary.best_epoch,
        started.elapsed().as_secs_f64()
    ))
}

fn t(r: usize, s: (usize, usize), o: (usize, usize)) -> Triple {
    Triple {
        relation: r,
        subject: Span::new(s.0, s.1),
        object: Span::new(o.0, o.1),
    }
}

fn sentence(triples: Vec<Triple>) -> Sentence {
    let tokens: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    Sentence::new(tokens.join(" "), tokens, triples, &Vocab::default()).unwrap()
}

fn metric_protocol() -> Outcome {
    // Micro-F1 arithmetic.
    let gold = vec![sentence(vec![t(0, (0, 0), (2, 2))])];
    let pred = vec![vec![t(0, (0, 0), (2, 2)), t(1, (0, 0), (2, 2))]];
    let r = score_triples(&pred, &gold, MatchingMode::Exact).unwrap();
    ensure(
        r.overall.precision == 0.5 && r.overall.recall == 1.0 && (r.overall.f1 - 2.0 / 3.0).abs() < 1e-12,
        || format!("TP=1 FP=1 FN=0 gave {:?}", r.overall),
    )?;

    // Partial vs Exact on multi-token entities.
    let gold = vec![sentence(vec![t(0, (0, 1), (4, 6)), t(1, (8, 8), (10, 11))])];
    let pred = vec![vec![t(0, (1, 1), (5, 6)), t(1, (8, 8), (10, 11))]];
    let exact = score_triples(&pred, &gold, MatchingMode::Exact).unwrap().overall;
    let partial = score_triples(&pred, &gold, MatchingMode::Partial).unwrap().overall;
    ensure(exact.correct == 1 && partial.correct == 2, || {
        format!("exact correct {} (want 1), partial correct {} (want 2)", exact.correct, partial.correct)
    })?;

    // Overlap taxonomy.
    let (a, b, c, d) = ((0, 1), (3, 3), (5, 6), (8, 8));
    let cases = [
        (vec![t(0, a, b), t(1, c, d)], vec![OverlapClass::Normal]),
        (vec![t(0, a, b), t(1, a, b)], vec![OverlapClass::Epo]),
        (vec![t(0, a, b), t(1, a, c)], vec![OverlapClass::Seo]),
        (vec![t(0, a, b), t(1, a, b), t(2, b, d)], vec![OverlapClass::Epo, OverlapClass::Seo]),
    ];
    for (triples, want) in &cases {
        let got = classify_overlap(triples).classes();
        ensure(&got == want, || format!("{triples:?}: {got:?} instead of {want:?}"))?;
    }

    // Triple-count buckets against hand counts.
    let golds = vec![
        sentence(vec![t(0, (0, 0), (1, 1))]),
        sentence(vec![t(0, (0, 0), (1, 1)), t(1, (2, 2), (3, 3))]),
        sentence(vec![t(0, (0, 0), (1, 1)), t(1, (2, 2), (3, 3))]),
        sentence((0..6).map(|i| t(0, (i, i), (11, 11))).collect()),
    ];
    let preds = vec![
        vec![t(1, (0, 0), (1, 1))],
        vec![t(0, (0, 0), (1, 1)), t(1, (2, 2), (3, 3))],
        vec![t(0, (0, 0), (1, 1))],
        (0..3).map(|i| t(0, (i, i), (11, 11))).collect(),
    ];
    let buckets = bucket_triples(&preds, &golds, MatchingMode::Exact, Bucketing::TripleCount).unwrap();
    let counts = |k: &str| buckets.get(k).map(|s| (s.predicted, s.gold, s.correct));
    ensure(counts("1") == Some((1, 1, 0)), || format!("N=1 {:?}", counts("1")))?;
    ensure(counts("2") == Some((3, 4, 3)), || format!("N=2 {:?}", counts("2")))?;
    ensure(counts(">=5") == Some((3, 6, 3)), || format!("N>=5 {:?}", counts(">=5")))?;
    ensure(counts("3").is_none() && counts("4").is_none(), || "empty buckets reported".into())?;
    Ok("micro-F1 arithmetic, partial/exact divergence, overlap labels, count buckets".into())
}

fn structural_invariants() -> Outcome {
    let model = TripleSetModel::new(toy_config(), 11).unwrap();
    let m = model.config().queries;
    for len in 1..=10 {
        let tokens: Vec<usize> = (0..len).map(|i| 4 + (i * 7) % 20).collect();
        let preds = model.predict(&tokens).unwrap();
        ensure(preds.len() == m, || format!("{} predictions for m={m}", preds.len()))?;
        preds.validate(1e-12).map_err(|e| format!("length {len}: {e}"))?;
    }

    let mut rng = rng(7);
    for _ in 0..1000 {
        let l = rng.random_range(3..20);
        let preds: PredictionSet = random_predictions(&mut rng, 6, 5, l);
        let window = SpanWindow::between_markers(l - 2);
        for e in extract_triples(&preds, window, None) {
            ensure(e.subject.start <= e.subject.end && e.object.start <= e.object.end, || format!("{e:?}"))?;
            ensure(e.subject.end < l - 2 && e.object.end < l - 2, || format!("{e:?} outside window"))?;
        }
    }

    let tape = Tape::new();
    let b = model.bind(&tape);
    let (_, out) = model.forward(&tape, &b, &[4, 5, 6, 7, 8]).unwrap();
    let mut min_forward: f64 = 1.0;
    for head in out.self_attention.iter().flatten() {
        let p = tape.value(*head);
        for i in 0..m {
            for j in i + 1..m {
                min_forward = min_forward.min(p.at(&[i, j]));
            }
        }
    }
    ensure(min_forward > 0.0, || "self-attention from an earlier to a later query is zero".into())?;
    Ok(format!(
        "m={m} normalized sets, 1000 random decodes with start <= end, min earlier->later attention {min_forward:.3}"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 appendix worked example", appendix_example),
        ("2 hungarian correctness", hungarian_correctness),
        ("3 permutation invariance", permutation_invariance),
        ("4 gradient fidelity", gradient_fidelity),
        ("5 overfit oracle", overfit_oracle),
        ("6 metric protocol", metric_protocol),
        ("7 structural invariants", structural_invariants),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
