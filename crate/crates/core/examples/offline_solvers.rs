//! Exact and local-search k-median, and the best fixed solution over several rounds.

use anyhow::Result;
use olkm::offline::{hindsight_optimum, solve_exact, solve_local_search, subset_budget, Objective};
use olkm::{MetricRegistry, PointId, WeightedInstance};

fn main() -> Result<()> {
    let mut reg = MetricRegistry::euclidean(1);
    let xs = [0.0, 0.5, 1.0, 10.0, 10.4, 20.0, 21.0, 22.0];
    let ids: Vec<PointId> = xs.iter().map(|&x| reg.insert(&[x])).collect::<Result<_, _>>()?;
    let inst = WeightedInstance::unit(1, ids.clone());

    let exact = solve_exact(&reg, &inst, 3, &ids, subset_budget())?;
    let ls = solve_local_search(&reg, &inst, 3, &ids)?;
    println!("exact: {:?} cost {:.3}", exact.centers.as_slice(), exact.cost);
    println!("local search: {:?} cost {:.3}", ls.centers.as_slice(), ls.cost);

    let rounds = vec![
        WeightedInstance::unit(1, ids[..3].to_vec()),
        WeightedInstance::unit(2, ids[3..].to_vec()),
    ];
    let best = hindsight_optimum(&reg, &rounds, 2, Objective::SumRatio)?;
    println!(
        "best fixed pair over both rounds: {:?}, total ratio {:.3}",
        best.centers.as_slice(),
        best.cost
    );
    Ok(())
}
