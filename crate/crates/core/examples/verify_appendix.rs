//! Reproduces the three-query reference example and prints every check.
//!
//! `cargo run --example verify_appendix`

use tripleset::cli::cmd_verify_appendix;

fn main() -> tripleset::Result<()> {
    let report = cmd_verify_appendix(false)?;
    print!("{report}");
    report.into_result()?;

    let perturbed = cmd_verify_appendix(true)?;
    println!("\nwith one probability changed:");
    for c in perturbed.failures() {
        println!("  {} now {} (expected {})", c.name, c.actual, c.expected);
    }
    Ok(())
}
