//! Offline k-median solvers.
//!
//! [`solve_exact`] enumerates every size-`k` subset of a candidate pool and is the
//! ground truth for per-round optima and hindsight benchmarks. [`solve_local_search`]
//! is the constant-factor single-swap heuristic used when enumeration is too large.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{CenterSet, MetricRegistry, PointId, WeightedInstance};

/// Default cap on the number of subsets [`solve_exact`] may enumerate.
pub const DEFAULT_SUBSET_BUDGET: u64 = 5_000_000;

/// Environment variable that overrides [`DEFAULT_SUBSET_BUDGET`].
pub const SUBSET_BUDGET_ENV: &str = "OLKM_SUBSET_BUDGET";

const LOCAL_SEARCH_MIN_GAIN: f64 = 1e-6;
const EXACT_TIE_EPS: f64 = 1e-12;

/// The configured subset budget, honoring `OLKM_SUBSET_BUDGET`.
pub fn subset_budget() -> u64 {
    std::env::var(SUBSET_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_SUBSET_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMedianSolution {
    pub centers: CenterSet,
    pub cost: f64,
    /// Whether `centers` is a proven optimum.
    pub exact: bool,
}

/// `n choose k`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

// Client-by-candidate distance table, laid out one column per candidate.
struct Table {
    weights: Vec<f64>,
    cols: Vec<Vec<f64>>,
}

impl Table {
    fn new(reg: &MetricRegistry, inst: &WeightedInstance, pool: &[PointId]) -> Self {
        let weights = inst.members.iter().map(|&(_, w)| w).collect();
        let cols = pool
            .iter()
            .map(|&c| inst.members.iter().map(|&(x, _)| reg.dist(x, c)).collect())
            .collect();
        Self { weights, cols }
    }

    fn cost(&self, chosen: &[usize]) -> f64 {
        (0..self.weights.len())
            .map(|j| {
                let d = chosen.iter().map(|&c| self.cols[c][j]).fold(f64::INFINITY, f64::min);
                self.weights[j] * d
            })
            .sum()
    }
}

fn check_ids(reg: &MetricRegistry, inst: &WeightedInstance, pool: &[PointId]) -> Result<()> {
    for id in inst.ids().into_iter().chain(pool.iter().copied()) {
        if !reg.contains(id) {
            return Err(Error::UnknownPoint(id.0));
        }
    }
    Ok(())
}

/// Minimum-cost set of `k` centers drawn from `pool`.
///
/// Coincident pool points are collapsed to their lowest id first. Among optimal
/// subsets the lexicographically smallest sorted id tuple wins. If the pool has at
/// most `k` distinct points, all of them are returned.
pub fn solve_exact(
    reg: &MetricRegistry,
    inst: &WeightedInstance,
    k: usize,
    pool: &[PointId],
    budget: u64,
) -> Result<KMedianSolution> {
    check_ids(reg, inst, pool)?;
    let pool = reg.distinct(pool);
    if pool.is_empty() || k == 0 {
        return Err(Error::EmptyCenterSet);
    }
    if pool.len() <= k {
        let centers = CenterSet::new(pool)?;
        let cost = reg.instance_cost(&centers, inst)?;
        return Ok(KMedianSolution {
            centers,
            cost,
            exact: true,
        });
    }
    let subsets = binomial(pool.len(), k);
    if subsets > budget as u128 {
        return Err(Error::BudgetExceeded { subsets, budget });
    }

    let table = Table::new(reg, inst, &pool);
    let n = pool.len();
    // mins[level] holds the per-client minimum over the first `level` chosen centers
    let mut mins = vec![vec![f64::INFINITY; table.weights.len()]; k];
    let mut chosen = vec![0usize; k];
    let mut best = f64::INFINITY;
    let mut best_set = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        table: &Table,
        n: usize,
        k: usize,
        level: usize,
        start: usize,
        mins: &mut [Vec<f64>],
        chosen: &mut [usize],
        best: &mut f64,
        best_set: &mut Vec<usize>,
    ) {
        let last = level + 1 == k;
        for c in start..=(n - (k - level)) {
            chosen[level] = c;
            let col = &table.cols[c];
            if last {
                let prev = &mins[level];
                let mut cost = 0.0;
                for j in 0..col.len() {
                    cost += table.weights[j] * prev[j].min(col[j]);
                }
                let improves = if best.is_finite() {
                    cost < *best - EXACT_TIE_EPS * best.abs()
                } else {
                    true
                };
                if improves {
                    *best = cost;
                    best_set.clear();
                    best_set.extend_from_slice(chosen);
                }
            } else {
                let (head, tail) = mins.split_at_mut(level + 1);
                let prev = &head[level];
                let next = &mut tail[0];
                for j in 0..col.len() {
                    next[j] = prev[j].min(col[j]);
                }
                recurse(table, n, k, level + 1, c + 1, mins, chosen, best, best_set);
            }
        }
    }

    recurse(&table, n, k, 0, 0, &mut mins, &mut chosen, &mut best, &mut best_set);
    let centers = CenterSet::new(best_set.iter().map(|&i| pool[i]))?;
    let cost = reg.instance_cost(&centers, inst)?;
    Ok(KMedianSolution {
        centers,
        cost,
        exact: true,
    })
}

/// Single-swap local search from farthest-point seeding.
///
/// Seeding starts at the lowest pool id and repeatedly adds the pool point farthest
/// from the current set. Each iteration applies the best swap and stops once no swap
/// improves the cost by more than a relative `1e-6`.
pub fn solve_local_search(
    reg: &MetricRegistry,
    inst: &WeightedInstance,
    k: usize,
    pool: &[PointId],
) -> Result<KMedianSolution> {
    check_ids(reg, inst, pool)?;
    let pool = reg.distinct(pool);
    if pool.is_empty() || k == 0 {
        return Err(Error::EmptyCenterSet);
    }
    if pool.len() <= k {
        let centers = CenterSet::new(pool)?;
        let cost = reg.instance_cost(&centers, inst)?;
        return Ok(KMedianSolution {
            centers,
            cost,
            exact: true,
        });
    }
    let table = Table::new(reg, inst, &pool);
    let n = pool.len();

    let mut current = vec![0usize];
    let mut gap: Vec<f64> = (0..n).map(|i| reg.dist(pool[i], pool[0])).collect();
    while current.len() < k {
        let mut far = None;
        for i in 0..n {
            if current.contains(&i) {
                continue;
            }
            if far.is_none_or(|f: usize| gap[i] > gap[f]) {
                far = Some(i);
            }
        }
        let f = far.expect("pool larger than k");
        current.push(f);
        for i in 0..n {
            gap[i] = gap[i].min(reg.dist(pool[i], pool[f]));
        }
    }

    let mut cost = table.cost(&current);
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        let mut trial = current.clone();
        for slot in 0..k {
            for cand in 0..n {
                if current.contains(&cand) {
                    continue;
                }
                trial[slot] = cand;
                let c = table.cost(&trial);
                if best.is_none_or(|b| c < b.0) {
                    best = Some((c, slot, cand));
                }
            }
            trial[slot] = current[slot];
        }
        match best {
            Some((c, slot, cand)) if c < cost * (1.0 - LOCAL_SEARCH_MIN_GAIN) => {
                current[slot] = cand;
                cost = c;
            }
            _ => break,
        }
    }
    let centers = CenterSet::new(current.iter().map(|&i| pool[i]))?;
    let cost = reg.instance_cost(&centers, inst)?;
    Ok(KMedianSolution {
        centers,
        cost,
        exact: false,
    })
}

/// Exact when the budget allows, local search otherwise.
pub fn solve_with_budget(
    reg: &MetricRegistry,
    inst: &WeightedInstance,
    k: usize,
    pool: &[PointId],
    budget: u64,
) -> Result<KMedianSolution> {
    match solve_exact(reg, inst, k, pool, budget) {
        Err(Error::BudgetExceeded { .. }) => solve_local_search(reg, inst, k, pool),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `Σ_t Cost_t(Y)`.
    SumCost,
    /// `Σ_t Cost_t(Y) / OPT_t`.
    SumRatio,
}

#[derive(Debug, Clone, Default)]
pub struct HindsightOptions {
    /// Candidate centers; defaults to every registered point.
    pub pool: Option<Vec<PointId>>,
    /// Precomputed per-round optima for [`Objective::SumRatio`].
    pub opts: Option<Vec<f64>>,
    /// Subset budget; defaults to [`subset_budget`].
    pub budget: Option<u64>,
}

/// Merges rounds into one weighted instance, scaling round `t`'s weights by `scale[t]`.
pub fn aggregate(rounds: &[WeightedInstance], scale: &[f64]) -> Result<WeightedInstance> {
    let mut acc: BTreeMap<PointId, f64> = BTreeMap::new();
    for (r, &s) in rounds.iter().zip(scale) {
        for &(x, w) in &r.members {
            *acc.entry(x).or_insert(0.0) += w * s;
        }
    }
    WeightedInstance::weighted(0, acc.into_iter().collect())
}

/// The best fixed set of `k` centers in hindsight.
///
/// Both objectives are linear in the client weights, so the rounds collapse into a
/// single weighted instance. The returned `cost` is the objective value.
pub fn hindsight_optimum(
    reg: &MetricRegistry,
    rounds: &[WeightedInstance],
    k: usize,
    objective: Objective,
) -> Result<KMedianSolution> {
    hindsight_optimum_with(reg, rounds, k, objective, &HindsightOptions::default())
}

pub fn hindsight_optimum_with(
    reg: &MetricRegistry,
    rounds: &[WeightedInstance],
    k: usize,
    objective: Objective,
    opts: &HindsightOptions,
) -> Result<KMedianSolution> {
    let pool: Vec<PointId> = match &opts.pool {
        Some(p) => p.clone(),
        None => reg.ids().collect(),
    };
    let budget = opts.budget.unwrap_or_else(subset_budget);
    let scale: Vec<f64> = match objective {
        Objective::SumCost => vec![1.0; rounds.len()],
        Objective::SumRatio => {
            let per_round = match &opts.opts {
                Some(o) if o.len() == rounds.len() => o.clone(),
                Some(o) => {
                    return Err(Error::DimensionMismatch {
                        expected: rounds.len(),
                        found: o.len(),
                    })
                }
                None => rounds
                    .iter()
                    .map(|r| Ok(solve_exact(reg, r, k, &pool, budget)?.cost))
                    .collect::<Result<_>>()?,
            };
            per_round
                .iter()
                .zip(rounds)
                .map(|(&o, r)| {
                    if o > 0.0 && o.is_finite() {
                        Ok(1.0 / o)
                    } else {
                        Err(Error::TooFewDistinct {
                            needed: k + 1,
                            found: reg.distinct(&r.ids()).len(),
                        })
                    }
                })
                .collect::<Result<_>>()?
        }
    };
    let merged = aggregate(rounds, &scale)?;
    solve_with_budget(reg, &merged, k, &pool, budget)
}

/// `Σ_t Cost_t(Y) / OPT_t` for a fixed center set.
pub fn ratio_sum(reg: &MetricRegistry, centers: &CenterSet, rounds: &[WeightedInstance], opts: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (r, &o) in rounds.iter().zip(opts) {
        total += reg.instance_cost(centers, r)? / o;
    }
    Ok(total)
}

/// Optimal cost with centers restricted to the clients of `inst`, over the optimal
/// cost with centers anywhere in the registry.
pub fn restricted_vs_unrestricted_gap(reg: &MetricRegistry, inst: &WeightedInstance, k: usize) -> Result<f64> {
    let budget = subset_budget();
    let restricted = solve_exact(reg, inst, k, &inst.ids(), budget)?.cost;
    let all: Vec<PointId> = reg.ids().collect();
    let unrestricted = solve_exact(reg, inst, k, &all, budget)?.cost;
    if unrestricted == 0.0 {
        return if restricted == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::DegenerateMetric(
                "unrestricted optimum is zero but restricted is not".into(),
            ))
        };
    }
    Ok(restricted / unrestricted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> (MetricRegistry, Vec<PointId>) {
        let mut reg = MetricRegistry::euclidean(1);
        let ids = xs.iter().map(|&x| reg.insert(&[x]).unwrap()).collect();
        (reg, ids)
    }

    // enumerate every k-subset by bitmask
    fn brute(reg: &MetricRegistry, inst: &WeightedInstance, k: usize, pool: &[PointId]) -> f64 {
        let n = pool.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let c = CenterSet::new((0..n).filter(|i| mask >> i & 1 == 1).map(|i| pool[i])).unwrap();
            best = best.min(reg.instance_cost(&c, inst).unwrap());
        }
        best
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(25, 6), 177_100);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(10, 0), 1);
    }

    #[test]
    fn exact_examples() {
        let (reg, ids) = line(&[0.0, 1.0, 10.0]);
        let inst = WeightedInstance::unit(1, ids.clone());
        let s = solve_exact(&reg, &inst, 1, &ids, DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(s.centers.as_slice(), &[ids[1]]);
        assert_eq!(s.cost, 10.0);
        assert!(s.exact);

        let s = solve_exact(&reg, &inst, 3, &ids, DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(s.cost, 0.0);

        let (reg, ids) = line(&[0.0, 2.0]);
        let inst = WeightedInstance::weighted(1, vec![(ids[0], 5.0)]).unwrap();
        let s = solve_exact(&reg, &inst, 1, &ids[1..], DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(s.cost, 10.0);
    }

    #[test]
    fn exact_ties_take_lowest_tuple() {
        let (reg, ids) = line(&[0.0, 1.0]);
        let inst = WeightedInstance::unit(1, ids.clone());
        let s = solve_exact(&reg, &inst, 1, &ids, DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(s.centers.as_slice(), &[ids[0]]);
    }

    #[test]
    fn exact_respects_budget() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let (reg, ids) = line(&xs);
        let inst = WeightedInstance::unit(1, ids.clone());
        let err = solve_exact(&reg, &inst, 5, &ids, 1000).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { budget: 1000, .. }));
        let s = solve_with_budget(&reg, &inst, 5, &ids, 1000).unwrap();
        assert!(!s.exact);
    }

    #[test]
    fn exact_matches_bitmask_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let mut reg = MetricRegistry::euclidean(2);
            let ids: Vec<PointId> = (0..9)
                .map(|_| reg.insert(&[rng.random::<f64>(), rng.random::<f64>()]).unwrap())
                .collect();
            let members = ids[..6].iter().map(|&i| (i, rng.random_range(0.5..2.0))).collect();
            let inst = WeightedInstance::weighted(1, members).unwrap();
            for k in 1..=3 {
                let s = solve_exact(&reg, &inst, k, &ids, DEFAULT_SUBSET_BUDGET).unwrap();
                assert!((s.cost - brute(&reg, &inst, k, &ids)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn local_search_examples() {
        let (reg, ids) = line(&[0.0, 1.0, 10.0]);
        let inst = WeightedInstance::unit(1, ids.clone());
        assert_eq!(solve_local_search(&reg, &inst, 1, &ids).unwrap().cost, 10.0);
        assert_eq!(solve_local_search(&reg, &inst, 3, &ids).unwrap().cost, 0.0);

        let mut reg = MetricRegistry::euclidean(2);
        let mut ids = Vec::new();
        for c in [0.0, 10.0, 20.0] {
            for (dx, dy) in [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)] {
                ids.push(reg.insert(&[c + dx, dy]).unwrap());
            }
        }
        let inst = WeightedInstance::unit(1, ids.clone());
        let ls = solve_local_search(&reg, &inst, 3, &ids).unwrap();
        let ex = solve_exact(&reg, &inst, 3, &ids, DEFAULT_SUBSET_BUDGET).unwrap();
        assert!((ls.cost - ex.cost).abs() < 1e-9);
        let clusters: Vec<usize> = ls
            .centers
            .iter()
            .map(|&c| (reg.coords(c).unwrap()[0] / 10.0).round() as usize)
            .collect();
        assert_eq!(clusters, vec![0, 1, 2]);
    }

    #[test]
    fn hindsight_examples() {
        let (reg, ids) = line(&[0.0, 1.0, 10.0, 12.0]);
        let r1 = WeightedInstance::unit(1, ids[..3].to_vec());
        let one = hindsight_optimum(&reg, std::slice::from_ref(&r1), 1, Objective::SumCost).unwrap();
        let direct = solve_exact(&reg, &r1, 1, &ids, DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(one.centers, direct.centers);
        let two = hindsight_optimum(&reg, &[r1.clone(), r1.clone()], 1, Objective::SumRatio).unwrap();
        let single = hindsight_optimum(&reg, &[r1], 1, Objective::SumRatio).unwrap();
        assert_eq!(two.centers, single.centers);
        assert!((two.cost - 2.0 * single.cost).abs() < 1e-12);
    }

    #[test]
    fn hindsight_prefers_frequent_cluster() {
        let (reg, ids) = line(&[0.0, 1.0, 100.0, 101.0]);
        let a = WeightedInstance::unit(1, ids[..2].to_vec());
        let b = WeightedInstance::unit(2, ids[2..].to_vec());
        let rounds = vec![a.clone(), b, a];
        let s = hindsight_optimum(&reg, &rounds, 1, Objective::SumRatio).unwrap();
        assert!(s.centers.as_slice()[0] == ids[0] || s.centers.as_slice()[0] == ids[1]);
    }

    #[test]
    fn gap_examples() {
        let (reg, ids) = line(&[0.0, 1.0, 5.0]);
        let inst = WeightedInstance::unit(1, ids.clone());
        assert_eq!(restricted_vs_unrestricted_gap(&reg, &inst, 1).unwrap(), 1.0);

        // star: hub 0, three leaves at distance 1 from it and 2 from each other
        let m = vec![
            vec![0.0, 1.0, 1.0, 1.0],
            vec![1.0, 0.0, 2.0, 2.0],
            vec![1.0, 2.0, 0.0, 2.0],
            vec![1.0, 2.0, 2.0, 0.0],
        ];
        let reg = MetricRegistry::from_matrix(&m).unwrap();
        let inst = WeightedInstance::unit(1, [PointId(1), PointId(2), PointId(3)]);
        let g = restricted_vs_unrestricted_gap(&reg, &inst, 1).unwrap();
        assert!((g - 4.0 / 3.0).abs() < 1e-12);
    }
}
