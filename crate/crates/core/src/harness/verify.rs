//! Seeded invariant battery with a JSON-serializable report.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metric::{CenterSet, MetricRegistry, PointId, WeightedInstance};
use crate::offline::restricted_vs_unrestricted_gap;
use crate::omd::{bregman_divergence, bregman_project, compute_subgradient, FractionalSolution};
use crate::reduction::{reduce_instance, ReductionSolver};
use crate::rounding::{
    deterministic_multiplier, expected_rounding_costs, phase_one, round_deterministic, MatchedPairs,
    RANDOMIZED_MULTIPLIER,
};

const TOL: f64 = 1e-9;
const MAX_REPORTED: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Subgradient,
    Projection,
    Rounding,
    Reduction,
    Gap,
}

impl Suite {
    pub const EVERY: [Suite; 5] = [
        Suite::Subgradient,
        Suite::Projection,
        Suite::Rounding,
        Suite::Reduction,
        Suite::Gap,
    ];

    /// Expands `All` and drops duplicates, keeping the first occurrence.
    pub fn expand(selection: &[Suite]) -> Vec<Suite> {
        let mut out = Vec::new();
        for &s in selection {
            let items: &[Suite] = if s == Suite::All {
                &Self::EVERY
            } else {
                std::slice::from_ref(&s)
            };
            for &i in items {
                if !out.contains(&i) {
                    out.push(i);
                }
            }
        }
        out
    }

    fn salt(self) -> u64 {
        self as u64 * 0x1000_0000_0001
    }
}

/// Deliberate defects that a healthy battery must catch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Fault {
    /// Deterministic rounding at multiplier 1 instead of `2k + 2`.
    DetMultiplierOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFailure {
    pub case: usize,
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub checks: usize,
    pub failure_count: usize,
    /// The first few failures.
    pub failures: Vec<CheckFailure>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub fault: Option<Fault>,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

struct Tally {
    case: usize,
    checks: usize,
    failure_count: usize,
    failures: Vec<CheckFailure>,
}

impl Tally {
    fn check(&mut self, ok: bool, check: &str, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failure_count += 1;
            if self.failures.len() < MAX_REPORTED {
                self.failures.push(CheckFailure {
                    case: self.case,
                    check: check.into(),
                    detail: detail(),
                });
            }
        }
    }
}

/// Runs the selected suites with `cases` seeded cases each, one thread per suite.
pub fn verify_invariants(selection: &[Suite], seed: u64, cases: usize, fault: Option<Fault>) -> Result<VerifyReport> {
    let suites = Suite::expand(selection);
    let results: Vec<Result<SuiteReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = suites
            .iter()
            .map(|&suite| s.spawn(move || run_suite(suite, seed, cases, fault)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("suite thread panicked"))
            .collect()
    });
    let suites = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        seed,
        fault,
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

fn run_suite(suite: Suite, seed: u64, cases: usize, fault: Option<Fault>) -> Result<SuiteReport> {
    let mut tally = Tally {
        case: 0,
        checks: 0,
        failure_count: 0,
        failures: Vec::new(),
    };
    let mut total = cases;
    for case in 0..cases {
        tally.case = case;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ suite.salt() ^ (case as u64).wrapping_mul(0x9E37_79B9));
        match suite {
            Suite::Subgradient => subgradient_case(&mut rng, &mut tally)?,
            Suite::Projection => projection_case(&mut rng, &mut tally)?,
            Suite::Rounding => {
                let (reg, y, clients) = random_rounding_case(&mut rng)?;
                rounding_checks(&reg, &y, &clients, fault, &mut tally)?
            }
            Suite::Reduction => reduction_case(&mut rng, &mut tally)?,
            Suite::Gap => gap_case(&mut rng, &mut tally)?,
            Suite::All => unreachable!("expanded before running"),
        }
    }
    if suite == Suite::Rounding {
        tally.case = cases;
        total += 1;
        let (reg, y) = equidistant_case()?;
        rounding_checks(&reg, &y, &[], fault, &mut tally)?;
    }
    Ok(SuiteReport {
        suite,
        cases: total,
        checks: tally.checks,
        failure_count: tally.failure_count,
        passed: tally.failure_count == 0,
        failures: tally.failures,
    })
}

/// A point of the capped simplex `{0 ≤ z ≤ 1, Σ z = k}` (or the plain simplex), with
/// a random amount of concentration.
pub fn random_feasible(rng: &mut impl Rng, d: usize, k: usize, capped: bool) -> Vec<f64> {
    let power = rng.random_range(0.5..4.0);
    let mut z: Vec<f64> = (0..d).map(|_| rng.random::<f64>().powf(power) + 1e-6).collect();
    let kf = k as f64;
    let s: f64 = z.iter().sum();
    z.iter_mut().for_each(|v| *v *= kf / s);
    if capped {
        if k >= d {
            return vec![1.0; d];
        }
        for _ in 0..d {
            let excess: f64 = z.iter().map(|&v| (v - 1.0).max(0.0)).sum();
            if excess <= 0.0 {
                break;
            }
            let free: f64 = z.iter().filter(|&&v| v < 1.0).sum();
            for v in z.iter_mut() {
                *v = if *v >= 1.0 { 1.0 } else { *v * (1.0 + excess / free) };
            }
        }
        z.iter_mut().for_each(|v| *v = v.min(1.0));
    }
    z
}

/// `n` random points of the unit square.
pub fn random_plane(rng: &mut impl Rng, n: usize) -> Result<(MetricRegistry, Vec<PointId>)> {
    let mut reg = MetricRegistry::euclidean(2);
    let mut ids = Vec::with_capacity(n);
    while ids.len() < n {
        let id = reg.insert(&[rng.random::<f64>(), rng.random::<f64>()])?;
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    Ok((reg, ids))
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn subgradient_case(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let d = rng.random_range(2..=10);
    let k = rng.random_range(1..=3.min(d - 1));
    let (reg, ids) = random_plane(rng, d)?;
    let n = rng.random_range(1..=d);
    let members: Vec<(PointId, f64)> = sample(rng, d, n)
        .into_iter()
        .map(|i| (ids[i], rng.random_range(0.1..2.0)))
        .collect();
    let round = WeightedInstance::weighted(1, members)?;
    let y = FractionalSolution::new(k, ids.clone(), random_feasible(rng, d, k, true));
    let grad = compute_subgradient(&reg, &y, &round)?;
    let base = reg.fractional_instance_cost(&y, &round)?;
    for subset in k_subsets(d, k) {
        let centers = CenterSet::new(subset.iter().map(|&i| ids[i]))?;
        let cost = reg.instance_cost(&centers, &round)?;
        let mut inner = 0.0;
        for (i, (&g, &m)) in grad.values.iter().zip(y.mass()).enumerate() {
            let v = if subset.contains(&i) { 1.0 } else { 0.0 };
            inner += g * (v - m);
        }
        t.check(cost >= base + inner - TOL, "subgradient inequality", || {
            format!("cost {cost} < {base} + {inner} at {subset:?}")
        });
    }
    Ok(())
}

fn projection_case(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let d = rng.random_range(2..=30);
    let k = rng.random_range(1..d);
    let simplex_only = rng.random_bool(0.5);
    let scale = 10f64.powf(rng.random_range(-3.0..3.0));
    let x: Vec<f64> = (0..d).map(|_| scale * rng.random::<f64>()).collect();
    let y = bregman_project(&x, k, simplex_only)?;
    let total: f64 = y.iter().sum();
    t.check((total - k as f64).abs() <= 1e-8, "projection sum", || {
        format!("sum {total} for k {k}")
    });
    t.check(y.iter().all(|&v| v >= 0.0), "projection nonnegative", || {
        format!("{y:?}")
    });
    if !simplex_only {
        t.check(y.iter().all(|&v| v <= 1.0 + 1e-12), "projection cap", || {
            format!("{y:?}")
        });
    }
    let beta = 1.0 / d as f64;
    let own = bregman_divergence(&y, &x, beta);
    for _ in 0..200 {
        let z = random_feasible(rng, d, k, !simplex_only);
        let other = bregman_divergence(&z, &x, beta);
        t.check(own <= other + TOL, "projection optimality", || {
            format!("B(y||x) {own} > B(z||x) {other}")
        });
    }
    Ok(())
}

fn random_rounding_case(rng: &mut ChaCha8Rng) -> Result<(MetricRegistry, FractionalSolution, Vec<PointId>)> {
    let d = rng.random_range(2..=12);
    let k = rng.random_range(1..=3.min(d - 1));
    let (mut reg, ids) = random_plane(rng, d)?;
    let mut clients = Vec::new();
    for _ in 0..5 {
        clients.push(reg.insert(&[rng.random::<f64>() * 1.5 - 0.25, rng.random::<f64>() * 1.5 - 0.25])?);
    }
    let y = FractionalSolution::new(k, ids, random_feasible(rng, d, k, true));
    Ok((reg, y, clients))
}

/// Six pairwise-equidistant points with half a unit of mass each and `k = 3`.
pub fn equidistant_case() -> Result<(MetricRegistry, FractionalSolution)> {
    let n = 6;
    let matrix: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
        .collect();
    let reg = MetricRegistry::from_matrix(&matrix)?;
    let y = FractionalSolution::new(3, (0..n).map(PointId).collect(), vec![0.5; n]);
    Ok((reg, y))
}

fn rounding_checks(
    reg: &MetricRegistry,
    y: &FractionalSolution,
    clients: &[PointId],
    fault: Option<Fault>,
    t: &mut Tally,
) -> Result<()> {
    let k = y.k();
    let mult = match fault {
        Some(Fault::DetMultiplierOne) => 1.0,
        None => deterministic_multiplier(k),
    };
    let det = round_deterministic(reg, y, mult)?;
    t.check(det.centers.len() <= k, "deterministic size bound", || {
        format!("{} centers for k {k}", det.centers.len())
    });
    let dk = deterministic_multiplier(k);
    for &j in y.points() {
        let (dy, dd) = (reg.fractional_cost(y, j)?, reg.assignment_cost(&det.centers, j)?);
        t.check(dd <= dk * dy + TOL, "deterministic loss on revealed points", || {
            format!("D(Y,{j}) {dd} > {dk}·{dy}")
        });
    }
    let wide = 4.0 * k as f64 + 3.0;
    for &j in clients {
        let (dy, dd) = (reg.fractional_cost(y, j)?, reg.assignment_cost(&det.centers, j)?);
        t.check(dd <= wide * dy + TOL, "deterministic loss on clients", || {
            format!("D(Y,{j}) {dd} > {wide}·{dy}")
        });
    }

    let ybar = phase_one(reg, y, RANDOMIZED_MULTIPLIER)?;
    let pairs = MatchedPairs::build(reg, y, &ybar);
    t.check(pairs.is_feasible(k), "ball weights", || format!("{:?}", pairs.weights));
    for (len, sel) in pairs.pieces() {
        t.check(sel.len() <= k, "randomized size bound", || {
            format!("{} centers on a piece of length {len}", sel.len())
        });
    }
    let mut all: Vec<PointId> = y.points().to_vec();
    all.extend_from_slice(clients);
    let expected = expected_rounding_costs(reg, y, &all, RANDOMIZED_MULTIPLIER)?;
    for (idx, (&j, &e)) in all.iter().zip(&expected).enumerate() {
        let dy = reg.fractional_cost(y, j)?;
        let factor = if ybar.contains(&j) {
            4.0
        } else if idx < y.len() {
            8.0
        } else {
            17.0
        };
        t.check(e <= factor * dy + TOL, "randomized expected loss", || {
            format!("E[D(Y,{j})] {e} > {factor}·{dy}")
        });
    }
    Ok(())
}

fn reduction_case(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let k = rng.random_range(1..=4);
    let n = rng.random_range(k + 1..=30);
    let mut reg = MetricRegistry::euclidean(2);
    // distinct integer grid points are at least 1 apart
    let ids = sample(rng, 400, n)
        .into_iter()
        .map(|c| reg.insert(&[(c % 20) as f64, (c / 20) as f64]))
        .collect::<Result<Vec<_>>>()?;
    let r = reduce_instance(&reg, &WeightedInstance::unit(1, ids), k, ReductionSolver::Auto)?;
    t.check(r.instance.len() == k, "reduced size", || {
        format!("{} points for k {k}", r.instance.len())
    });
    let w = r.instance.total_weight();
    t.check(w <= (k + 1) as f64 + TOL, "reduced weight bound", || {
        format!("total weight {w} for k {k}")
    });
    Ok(())
}

fn gap_case(rng: &mut ChaCha8Rng, t: &mut Tally) -> Result<()> {
    let n = rng.random_range(3..=10);
    let k = rng.random_range(1..=3.min(n - 2));
    let (reg, ids) = random_plane(rng, n)?;
    let m = rng.random_range(k + 1..=n);
    let members: Vec<(PointId, f64)> = sample(rng, n, m)
        .into_iter()
        .map(|i| (ids[i], rng.random_range(0.1..2.0)))
        .collect();
    let gap = restricted_vs_unrestricted_gap(&reg, &WeightedInstance::weighted(1, members)?, k)?;
    t.check(gap <= 2.0 + TOL, "restricted centers gap", || format!("gap {gap}"));
    Ok(())
}
