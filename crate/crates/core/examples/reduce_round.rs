//! Compressing one round into k weighted points.

use anyhow::Result;
use olkm::reduction::{reduce_instance, ReductionSolver};
use olkm::{MetricRegistry, PointId, WeightedInstance};

fn main() -> Result<()> {
    let mut reg = MetricRegistry::euclidean(2);
    let pts = [[0.0, 0.0], [0.2, 0.1], [0.1, 0.3], [5.0, 5.0], [5.2, 4.9], [9.0, 0.0]];
    let ids: Vec<PointId> = pts.iter().map(|p| reg.insert(p)).collect::<Result<_, _>>()?;
    let r = reduce_instance(&reg, &WeightedInstance::unit(1, ids), 2, ReductionSolver::Auto)?;
    println!("clustering cost {:.3}, exact: {}", r.source_cost, r.exact);
    for ((p, w), size) in r.instance.members.iter().zip(&r.cluster_sizes) {
        println!(
            "  center {p} at {:?}: {size} points, weight {w:.4}",
            reg.coords(*p).unwrap()
        );
    }
    Ok(())
}
