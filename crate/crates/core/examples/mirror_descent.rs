//! Mirror descent steps on the fractional solution, round by round.

use anyhow::Result;
use olkm::omd::bregman_project;
use olkm::{MetricRegistry, OmdState, PointId, WeightedInstance};

fn main() -> Result<()> {
    let mut reg = MetricRegistry::euclidean(1);
    let ids: Vec<PointId> = [0.0, 1.0, 10.0, 11.0]
        .iter()
        .map(|&x| reg.insert(&[x]))
        .collect::<Result<_, _>>()?;
    let r0 = WeightedInstance::unit(0, ids.clone());
    let mut state = OmdState::initialize(&reg, &r0, 1, false)?;
    println!("y_0 = {:?}", state.y.mass());

    // every later round sits at the right end of the line
    let round = WeightedInstance::weighted(1, vec![(ids[3], 1.0)])?;
    for _ in 0..8 {
        let report = state.step(&reg, &round)?;
        let mass: Vec<String> = state.y.mass().iter().map(|m| format!("{m:.3}")).collect();
        println!("t={} eta={:.4} y=[{}]", report.t, report.eta, mass.join(", "));
    }

    let projected = bregman_project(&[2.0, 0.5, 0.1], 2, false)?;
    println!("projection of (2, 0.5, 0.1) onto the capped simplex with k=2: {projected:?}");
    Ok(())
}
