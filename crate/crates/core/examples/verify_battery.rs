//! The invariant battery, clean and with an injected defect.

use anyhow::Result;
use olkm::harness::verify::{verify_invariants, Fault, Suite};

fn main() -> Result<()> {
    let clean = verify_invariants(&[Suite::All], 7, 25, None)?;
    for s in &clean.suites {
        println!("{:?}: {} checks, passed {}", s.suite, s.checks, s.passed);
    }
    let broken = verify_invariants(&[Suite::Rounding], 7, 5, Some(Fault::DetMultiplierOne))?;
    let first = &broken.suites[0].failures[0];
    println!("with the fault: {} ({})", first.check, first.detail);
    Ok(())
}
