//! Follow-the-leader on the star tree that defeats it, next to the root-only solution.

use anyhow::Result;
use olkm::harness::config::{ConfigOverrides, ExperimentConfig, GeneratorKind};
use olkm::harness::ftl::run_ftl_baseline;

fn main() -> Result<()> {
    let cfg = ExperimentConfig::from_overrides(&ConfigOverrides {
        generator: Some(GeneratorKind::LbFtl),
        lambda: Some(3),
        t0: Some(2),
        ..Default::default()
    })?;
    let out = run_ftl_baseline(&cfg)?;
    let s = &out.summary;
    println!("{} rounds", s.horizon);
    println!("follow the leader: {:.1}", s.cumulative_ratio);
    println!("root only:         {:.1}", s.reference_ratio.unwrap());
    println!("best fixed:        {:.1}", s.cumulative_ratio_benchmark);
    Ok(())
}
