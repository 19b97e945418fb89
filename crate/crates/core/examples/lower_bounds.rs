//! The adaptive adversary against deterministic rounding.

use anyhow::Result;
use olkm::harness::config::{ConfigOverrides, ExperimentConfig, GeneratorKind, RoundingChoice};
use olkm::harness::runner::run_online;

fn main() -> Result<()> {
    let cfg = ExperimentConfig::from_overrides(&ConfigOverrides {
        generator: Some(GeneratorKind::LbDet),
        k: Some(3),
        delta: Some(100.0),
        horizon: Some(200),
        rounding: Some(RoundingChoice::Det),
        ..Default::default()
    })?;
    let out = run_online(&cfg)?;
    let s = &out.summary;
    println!(
        "deterministic learner {:.1} vs best fixed {:.1}: ratio {:.3}",
        s.cumulative_ratio_det.unwrap(),
        s.cumulative_ratio_benchmark,
        s.ratio_det_vs_benchmark.unwrap()
    );
    Ok(())
}
