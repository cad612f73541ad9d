//! Labels triple sets as Normal, EPO or SEO and shows how the synthetic
//! generator covers each pattern.

use tripleset::data::synthetic::{generate_synthetic, SyntheticConfig};
use tripleset::data::{classify_overlap, Span, Triple};

fn t(r: usize, s: (usize, usize), o: (usize, usize)) -> Triple {
    Triple {
        relation: r,
        subject: Span::new(s.0, s.1),
        object: Span::new(o.0, o.1),
    }
}

fn main() -> tripleset::Result<()> {
    let cases = [
        ("independent pairs", vec![t(0, (0, 0), (2, 3)), t(1, (5, 5), (7, 7))]),
        ("same ordered pair", vec![t(0, (0, 0), (2, 3)), t(1, (0, 0), (2, 3))]),
        ("shared subject", vec![t(0, (0, 0), (2, 3)), t(1, (0, 0), (7, 7))]),
        ("reversed pair", vec![t(0, (0, 0), (2, 3)), t(1, (2, 3), (0, 0))]),
        ("both", vec![t(0, (0, 0), (2, 3)), t(1, (0, 0), (2, 3)), t(2, (2, 3), (7, 7))]),
    ];
    for (name, triples) in &cases {
        println!("{name:<18} {:?}", classify_overlap(triples).classes());
    }

    let synthetic = generate_synthetic(&SyntheticConfig::default())?;
    println!();
    for (s, entry) in synthetic.corpus.sentences.iter().zip(&synthetic.manifest).take(15) {
        println!("{:<6} {} | {}", entry.pattern.to_string(), s.triples.len(), s.text);
    }
    Ok(())
}
