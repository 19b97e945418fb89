//! Online reduction of a raw round to at most `k` weighted points.
//!
//! A constant-factor solver picks `k` centers among the round's own points. Each
//! center then stands in for its cluster, weighted by the cluster size divided by the
//! solver's total cost, so that costs on the reduced round are scale-free.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{CenterSet, MetricRegistry, PointId, WeightedInstance};
use crate::offline::{self, subset_budget};

/// Pools with at most this many distinct points are solved exactly under `Auto`.
pub const AUTO_EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ReductionSolver {
    #[default]
    Auto,
    Exact,
    LocalSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedRound {
    /// `R_t`: the `k` centers with their weights.
    pub instance: WeightedInstance,
    /// `Σ_{x ∈ V_t} D(C_t, x)`, the weight denominator.
    pub source_cost: f64,
    /// Cluster sizes aligned with `instance.members`.
    pub cluster_sizes: Vec<usize>,
    pub centers: CenterSet,
    /// Whether `C_t` is an exact optimum over the round's points.
    pub exact: bool,
}

/// Builds `R_t` from the unit-weight round `raw`.
pub fn reduce_instance(
    reg: &MetricRegistry,
    raw: &WeightedInstance,
    k: usize,
    solver: ReductionSolver,
) -> Result<ReducedRound> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if let Some(&(_, w)) = raw.members.iter().find(|&&(_, w)| w != 1.0) {
        return Err(Error::InvalidWeight(w));
    }
    let ids = raw.ids();
    for &id in &ids {
        if !reg.contains(id) {
            return Err(Error::UnknownPoint(id.0));
        }
    }
    let distinct = reg.distinct(&ids);
    if distinct.len() < k + 1 {
        return Err(Error::TooFewDistinct {
            needed: k + 1,
            found: distinct.len(),
        });
    }
    let use_exact = match solver {
        ReductionSolver::Exact => true,
        ReductionSolver::LocalSearch => false,
        ReductionSolver::Auto => distinct.len() <= AUTO_EXACT_LIMIT,
    };
    let solution = if use_exact {
        offline::solve_exact(reg, raw, k, &distinct, subset_budget())?
    } else {
        offline::solve_local_search(reg, raw, k, &distinct)?
    };
    let centers = pad_centers(reg, solution.centers.into_vec(), &distinct, k)?;

    let mut sizes = vec![0usize; k];
    let mut source_cost = 0.0;
    for &(x, _) in &raw.members {
        let (c, d) = reg.nearest(centers.as_slice(), x);
        let slot = centers.as_slice().binary_search(&c).expect("nearest returns a center");
        sizes[slot] += 1;
        source_cost += d;
    }
    if !(source_cost > 0.0 && source_cost.is_finite()) {
        return Err(Error::DegenerateMetric(
            "reduction produced a zero-cost clustering".into(),
        ));
    }
    let members = centers
        .iter()
        .zip(&sizes)
        .map(|(&c, &s)| (c, s as f64 / source_cost))
        .collect();
    Ok(ReducedRound {
        instance: WeightedInstance::weighted(raw.round, members)?,
        source_cost,
        cluster_sizes: sizes,
        centers,
        exact: use_exact,
    })
}

// Adds the distinct candidates farthest from the current centers until there are k.
fn pad_centers(reg: &MetricRegistry, mut centers: Vec<PointId>, distinct: &[PointId], k: usize) -> Result<CenterSet> {
    centers = reg.distinct(&centers);
    while centers.len() < k {
        let far = distinct
            .iter()
            .filter(|p| !centers.contains(p))
            .map(|&p| (reg.nearest(&centers, p).1, p))
            .fold(None, |best: Option<(f64, PointId)>, cur| match best {
                Some(b) if b.0 >= cur.0 => Some(b),
                _ => Some(cur),
            });
        match far {
            Some((_, p)) => centers.push(p),
            None => break,
        }
    }
    CenterSet::new(centers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offline::{solve_exact, DEFAULT_SUBSET_BUDGET};

    fn line(xs: &[f64]) -> (MetricRegistry, Vec<PointId>) {
        let mut reg = MetricRegistry::euclidean(1);
        let ids = xs.iter().map(|&x| reg.insert(&[x]).unwrap()).collect();
        (reg, ids)
    }

    #[test]
    fn two_point_line() {
        let (reg, ids) = line(&[0.0, 1.0]);
        let r = reduce_instance(&reg, &WeightedInstance::unit(1, ids.clone()), 1, ReductionSolver::Auto).unwrap();
        assert_eq!(r.centers.as_slice(), &[ids[0]]);
        assert_eq!(r.instance.members, vec![(ids[0], 2.0)]);
        assert_eq!(r.source_cost, 1.0);
        assert_eq!(r.cluster_sizes, vec![2]);
    }

    #[test]
    fn weights_follow_formula() {
        let mut reg = MetricRegistry::euclidean(1);
        let a = reg.insert(&[0.0]).unwrap();
        let b = reg.insert(&[5.0]).unwrap();
        let c = reg.insert(&[5.5]).unwrap();
        // the duplicate coordinate maps to the existing id
        let raw = WeightedInstance::unit(1, [a, b, c, b]);
        let r = reduce_instance(&reg, &raw, 2, ReductionSolver::Exact).unwrap();
        let exact = solve_exact(&reg, &raw, 2, &[a, b, c], DEFAULT_SUBSET_BUDGET).unwrap();
        assert!((r.source_cost - exact.cost).abs() < 1e-12);
        assert_eq!(r.cluster_sizes.iter().sum::<usize>(), 4);
        let total: f64 = r.instance.members.iter().map(|m| m.1).sum();
        assert!((total - 4.0 / exact.cost).abs() < 1e-12);
        for (&(_, w), &s) in r.instance.members.iter().zip(&r.cluster_sizes) {
            assert!((w - s as f64 / r.source_cost).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_distinct_points() {
        let (reg, ids) = line(&[0.0, 1.0]);
        let err = reduce_instance(&reg, &WeightedInstance::unit(1, ids), 2, ReductionSolver::Auto).unwrap_err();
        assert!(matches!(err, Error::TooFewDistinct { needed: 3, found: 2 }));
    }

    #[test]
    fn weight_bound_on_separated_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for k in 1..=4 {
            let mut reg = MetricRegistry::euclidean(1);
            // integer grid points are at least 1 apart
            let mut xs: Vec<i64> = (0..40).collect();
            for i in (1..xs.len()).rev() {
                xs.swap(i, rng.random_range(0..=i));
            }
            let ids: Vec<PointId> = xs[..15]
                .iter()
                .map(|&x| reg.insert(&[x as f64 * 1.5]).unwrap())
                .collect();
            let r = reduce_instance(&reg, &WeightedInstance::unit(1, ids), k, ReductionSolver::LocalSearch).unwrap();
            assert_eq!(r.instance.len(), k);
            assert!(r.instance.total_weight() <= (k + 1) as f64 + 1e-9);
        }
    }

    #[test]
    fn reduced_cost_tracks_the_raw_ratio() {
        use crate::offline::solve_local_search;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for case in 0..200 {
            let mut reg = MetricRegistry::euclidean(2);
            let n = rng.random_range(4..=9);
            let ids: Vec<PointId> = (0..n + 3)
                .map(|_| reg.insert(&[rng.random::<f64>() * 10.0, rng.random::<f64>()]).unwrap())
                .collect();
            let k = rng.random_range(1..=3.min(n - 1));
            let raw = WeightedInstance::unit(1, ids[..n].to_vec());
            let opt = solve_exact(&reg, &raw, k, &ids, DEFAULT_SUBSET_BUDGET).unwrap().cost;
            let y = solve_local_search(&reg, &WeightedInstance::unit(0, ids[n - 2..].to_vec()), k, &ids).unwrap();
            let rho = reg.instance_cost(&y.centers, &raw).unwrap() / opt;
            for solver in [ReductionSolver::Exact, ReductionSolver::LocalSearch] {
                let r = reduce_instance(&reg, &raw, k, solver).unwrap();
                let reduced = reg.instance_cost(&y.centers, &r.instance).unwrap();
                assert!(reduced <= rho + 1.0 + 1e-9, "case {case}: {reduced} vs {rho}");
                assert!(reduced >= rho / 10.0 - 1.0 - 1e-9, "case {case}: {reduced} vs {rho}");
            }
        }
    }

    #[test]
    fn replay_is_identical() {
        let (reg, ids) = line(&[
            0.0, 0.3, 4.0, 4.2, 9.0, 13.0, 13.1, 20.0, 21.0, 22.0, 30.0, 31.0, 40.0, 41.0,
        ]);
        let raw = WeightedInstance::unit(3, ids);
        let a = reduce_instance(&reg, &raw, 3, ReductionSolver::Auto).unwrap();
        let b = reduce_instance(&reg, &raw, 3, ReductionSolver::Auto).unwrap();
        assert_eq!(a, b);
        assert!(!a.exact);
    }
}
