//! Deterministic, randomized and threshold-searched rounding of a fractional solution.

use anyhow::Result;
use olkm::rounding::{
    deterministic_multiplier, expected_rounding_cost, heuristic_threshold_search, pad_to_k, round_deterministic,
    round_randomized, RoundingMode, RANDOMIZED_MULTIPLIER,
};
use olkm::{FractionalSolution, MetricRegistry, PointId};

fn main() -> Result<()> {
    let mut reg = MetricRegistry::euclidean(1);
    let ids: Vec<PointId> = [0.0, 0.4, 3.0, 3.3, 8.0]
        .iter()
        .map(|&x| reg.insert(&[x]))
        .collect::<Result<_, _>>()?;
    let y = FractionalSolution::new(2, ids.clone(), vec![0.6, 0.4, 0.5, 0.3, 0.2]);

    let det = round_deterministic(&reg, &y, deterministic_multiplier(2))?;
    println!("deterministic: {:?}", det.centers.as_slice());
    let rand = round_randomized(&reg, &y, RANDOMIZED_MULTIPLIER, 42)?;
    println!(
        "randomized (theta {:.3}): {:?}",
        rand.theta.unwrap(),
        rand.centers.as_slice()
    );
    let tuned = heuristic_threshold_search(&reg, &y, RoundingMode::Deterministic, 0)?;
    println!(
        "searched multiplier {:.4}: {:?}",
        tuned.threshold_used,
        tuned.centers.as_slice()
    );
    println!("padded: {:?}", pad_to_k(&reg, &det.centers, &y)?.as_slice());

    for &j in &ids {
        let e = expected_rounding_cost(&reg, &y, j, RANDOMIZED_MULTIPLIER)?;
        println!("  {j}: D(y) = {:.3}, E[D(Y)] = {e:.3}", reg.fractional_cost(&y, j)?);
    }
    Ok(())
}
