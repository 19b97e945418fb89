//! A full online run on the uniform-square preset, with a per-round observer and CSV output.

use anyhow::Result;
use olkm::harness::config::{ExperimentConfig, GeneratorKind, Preset};
use olkm::harness::output::write_run;
use olkm::harness::runner::run_online_with;

fn main() -> Result<()> {
    let mut cfg = ExperimentConfig::preset(GeneratorKind::UniformSquare, Preset::Desk);
    cfg.horizon = 100;
    let mut worst = 0.0f64;
    let out = run_online_with(&cfg, |view| {
        worst = worst.max(view.record.ratio_det.unwrap_or(0.0));
        Ok(())
    })?;
    let s = &out.summary;
    println!("worst single-round deterministic ratio: {worst:.3}");
    println!(
        "cumulative ratio against the best fixed solution: det {:.3}, rand {:.3}, fractional {:.3}",
        s.ratio_det_vs_benchmark.unwrap(),
        s.ratio_rand_vs_benchmark.unwrap(),
        s.ratio_fractional_vs_benchmark
    );
    let dir = std::env::temp_dir().join("olkm-example");
    let summary = write_run(&dir.join("uniform_square.csv"), &out.records, &out.summary)?;
    println!("wrote {}", summary.display());
    Ok(())
}
