//! Writing rounds to a JSON Lines file and running the learner on it.

use std::io::Write;

use anyhow::Result;
use olkm::harness::config::{ConfigOverrides, ExperimentConfig, GeneratorKind};
use olkm::harness::runner::run_online;
use rand::{Rng, SeedableRng};

fn main() -> Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let path = std::env::temp_dir().join("olkm-rounds.jsonl");
    let mut f = std::fs::File::create(&path)?;
    for t in 0..=40 {
        // two blobs; the second one drifts upward
        let pts: Vec<[f64; 2]> = (0..8)
            .map(|i| {
                let (cx, cy) = if i % 2 == 0 { (0.0, 0.0) } else { (4.0, 0.05 * t as f64) };
                [cx + rng.random::<f64>(), cy + rng.random::<f64>()]
            })
            .collect();
        writeln!(f, "{}", serde_json::json!({ "t": t, "points": pts }))?;
    }
    drop(f);

    let cfg = ExperimentConfig::from_overrides(&ConfigOverrides {
        generator: Some(GeneratorKind::File),
        input: Some(path.clone()),
        k: Some(2),
        horizon: Some(40),
        ..Default::default()
    })?;
    let out = run_online(&cfg)?;
    println!(
        "{} rounds from {}: det ratio vs best fixed {:.3}",
        out.summary.horizon,
        path.display(),
        out.summary.ratio_det_vs_benchmark.unwrap()
    );
    Ok(())
}
