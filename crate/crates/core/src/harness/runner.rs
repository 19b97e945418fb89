//! The online driver: round, reveal, score, reduce, learn.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{CenterSet, MetricRegistry, PointId, WeightedInstance};
use crate::offline::{self, HindsightOptions, Objective};
use crate::omd::{FractionalSolution, OmdState};
use crate::reduction::{reduce_instance, ReducedRound};
use crate::rounding::{
    deterministic_multiplier, heuristic_threshold_search, pad_outcome, round_deterministic, round_randomized,
    RoundingMode, RoundingOutcome, RANDOMIZED_MULTIPLIER,
};

use super::config::{BenchmarkSolver, ExperimentConfig};
use super::generators::{build_stream, Ground};

/// One logged round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    /// Points in `V_t`.
    pub n_points: usize,
    /// Coordinates of `y_t`.
    pub d_t: usize,
    pub opt_t: f64,
    pub opt_exact: bool,
    pub cost_fractional: f64,
    pub cost_det: Option<f64>,
    /// Mean over the randomized repeats.
    pub cost_rand: Option<f64>,
    pub ratio_fractional: f64,
    pub ratio_det: Option<f64>,
    pub ratio_rand: Option<f64>,
    pub cumulative_ratio_fractional: f64,
    pub cumulative_ratio_det: Option<f64>,
    pub cumulative_ratio_rand: Option<f64>,
    /// Prefix sums of `ρ(Y*, V_τ)` for the whole-run hindsight optimum `Y*`.
    pub cumulative_ratio_benchmark: Option<f64>,
    /// Best fixed solution for rounds `1..=t`, at checkpoint rounds only.
    pub cumulative_dynamic_benchmark: Option<f64>,
    /// `Cost(y_t, R_t)`.
    pub reduced_cost_fractional: f64,
    /// `Cost(Y*_R, R_t)` for the hindsight optimum over the reduced rounds.
    pub reduced_cost_benchmark: Option<f64>,
    /// `|Y_t|` before padding.
    pub det_size: Option<usize>,
    /// Largest `|Y_t|` before padding over the randomized repeats.
    pub rand_size: Option<usize>,
    pub det_threshold: Option<f64>,
    pub rand_threshold: Option<f64>,
    /// Running subgradient bound after the update with `R_t`.
    pub g_t: f64,
    pub eta_t: f64,
    /// Mass of `y_t` per generator region.
    pub mass_by_region: Vec<f64>,
}

/// Everything a caller may want to inspect while a round is processed.
pub struct RoundView<'a> {
    pub t: usize,
    pub registry: &'a MetricRegistry,
    /// The fractional solution played this round.
    pub y: &'a FractionalSolution,
    pub raw: &'a WeightedInstance,
    pub reduced: &'a ReducedRound,
    pub det: Option<&'a RoundingOutcome>,
    pub rand: &'a [RoundingOutcome],
    pub record: &'a RoundRecord,
    pub active_region: Option<usize>,
}

/// Final numbers of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub generator: String,
    pub k: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seed: u64,
    pub cumulative_ratio_fractional: f64,
    pub cumulative_ratio_det: Option<f64>,
    pub cumulative_ratio_rand: Option<f64>,
    pub cumulative_ratio_benchmark: f64,
    pub ratio_fractional_vs_benchmark: f64,
    pub ratio_det_vs_benchmark: Option<f64>,
    pub ratio_rand_vs_benchmark: Option<f64>,
    /// Ground indices of `Y*`.
    pub benchmark_centers: Vec<usize>,
    pub benchmark_exact: bool,
    pub reduced_benchmark_centers: Vec<usize>,
    pub reduced_cost_fractional_total: f64,
    pub reduced_cost_benchmark_total: f64,
    /// `(t, Σ_{τ≤t} ρ(Y*_t, V_τ))` for the prefix optima.
    pub dynamic_checkpoints: Vec<(usize, f64)>,
    /// `Σ ρ` of the stream's reference solution, when it has one.
    pub reference_ratio: Option<f64>,
    pub opt_inexact_rounds: usize,
    /// Rounds where an unpadded center set exceeded `k`.
    pub size_violations: usize,
    pub notes: Vec<String>,
    pub wall_time_secs: f64,
}

pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
    pub state: OmdState,
    pub registry: MetricRegistry,
    /// `Y*` as registry ids.
    pub benchmark: CenterSet,
}

/// Registry plus the ground-index to point-id correspondence.
pub struct Registered {
    pub reg: MetricRegistry,
    to_id: Vec<Option<PointId>>,
    to_ground: Vec<usize>,
}

impl Registered {
    pub fn new(ground: &Ground) -> Result<Self> {
        let reg = ground.registry()?;
        let (to_id, to_ground) = match ground {
            Ground::Explicit { matrix } => (
                (0..matrix.len()).map(|i| Some(PointId(i))).collect(),
                (0..matrix.len()).collect(),
            ),
            Ground::Euclidean { points, .. } => (vec![None; points.len()], Vec::new()),
        };
        Ok(Self { reg, to_id, to_ground })
    }

    pub fn register(&mut self, ground: &Ground, index: usize) -> Result<PointId> {
        if let Some(Some(id)) = self.to_id.get(index) {
            return Ok(*id);
        }
        let Ground::Euclidean { points, .. } = ground else {
            return Err(Error::UnknownPoint(index));
        };
        let coords = points.get(index).ok_or(Error::UnknownPoint(index))?;
        let id = self.reg.insert(coords)?;
        if id.0 == self.to_ground.len() {
            self.to_ground.push(index);
        }
        self.to_id[index] = Some(id);
        Ok(id)
    }

    pub fn register_round(&mut self, ground: &Ground, t: usize, indices: &[usize]) -> Result<WeightedInstance> {
        let ids = indices
            .iter()
            .map(|&i| self.register(ground, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(WeightedInstance::unit(t, ids))
    }

    /// The registered id of a ground index, if it has been revealed.
    pub fn id_of(&self, index: usize) -> Option<PointId> {
        self.to_id.get(index).copied().flatten()
    }

    /// The first ground index registered under `id`.
    pub fn ground_of(&self, id: PointId) -> usize {
        self.to_ground[id.0]
    }

    pub fn grounds(&self, centers: &CenterSet) -> Vec<usize> {
        centers.iter().map(|&c| self.ground_of(c)).collect()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `r`-th randomized rounding in round `t`.
pub fn rounding_seed(seed: u64, t: usize, r: usize) -> u64 {
    splitmix(seed ^ splitmix(((t as u64) << 16) ^ r as u64))
}

/// Rounds `y` once in the given mode with the configured threshold rule and padding.
pub fn round_once(
    cfg: &ExperimentConfig,
    reg: &MetricRegistry,
    y: &FractionalSolution,
    mode: RoundingMode,
    seed: u64,
) -> Result<RoundingOutcome> {
    let out = match (mode, cfg.heuristic_threshold) {
        (mode, true) => heuristic_threshold_search(reg, y, mode, seed)?,
        (RoundingMode::Deterministic, false) => round_deterministic(reg, y, deterministic_multiplier(y.k()))?,
        (RoundingMode::Randomized, false) => round_randomized(reg, y, RANDOMIZED_MULTIPLIER, seed)?,
    };
    if cfg.pad {
        pad_outcome(reg, out, y)
    } else {
        Ok(out)
    }
}

/// `OPT_t` over every registered point, and whether it is proven optimal.
pub fn round_optimum(cfg: &ExperimentConfig, reg: &MetricRegistry, raw: &WeightedInstance) -> Result<(f64, bool)> {
    let pool: Vec<PointId> = reg.ids().collect();
    let sol = match cfg.benchmark {
        BenchmarkSolver::Exact => offline::solve_with_budget(reg, raw, cfg.k, &pool, offline::subset_budget())?,
        BenchmarkSolver::LocalSearch => offline::solve_local_search(reg, raw, cfg.k, &pool)?,
    };
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must land here too
    if !(sol.cost > 0.0) {
        return Err(Error::TooFewDistinct {
            needed: cfg.k + 1,
            found: reg.distinct(&raw.ids()).len(),
        });
    }
    Ok((sol.cost, sol.exact))
}

fn hindsight_budget(cfg: &ExperimentConfig) -> Option<u64> {
    (cfg.benchmark == BenchmarkSolver::LocalSearch).then_some(0)
}

/// Round indices at which the prefix benchmark is recomputed: powers of two and `T`.
pub fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut v: Vec<usize> = std::iter::successors(Some(1usize), |&c| c.checked_mul(2))
        .take_while(|&c| c < horizon)
        .collect();
    v.push(horizon);
    v
}

pub fn run_online(cfg: &ExperimentConfig) -> Result<RunOutput> {
    run_online_with(cfg, |_| Ok(()))
}

/// [`run_online`] calling `observe` once per round, after scoring and before the update.
pub fn run_online_with(
    cfg: &ExperimentConfig,
    mut observe: impl FnMut(&RoundView<'_>) -> Result<()>,
) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let mut stream = build_stream(cfg)?;
    let horizon = cfg.horizon.min(stream.horizon());
    let ground = stream.ground().clone();
    let mut regd = Registered::new(&ground)?;

    let v0 = stream.round(0, None);
    let raw0 = regd.register_round(&ground, 0, &v0)?;
    let r0 = reduce_instance(&regd.reg, &raw0, cfg.k, cfg.reduction)?;
    let mut state = OmdState::initialize(&regd.reg, &r0.instance, cfg.k, cfg.simplex_only)?;

    let mut records = Vec::with_capacity(horizon);
    let mut raws = Vec::with_capacity(horizon);
    let mut reduced = Vec::with_capacity(horizon);
    let mut opts = Vec::with_capacity(horizon);
    let (mut cum_frac, mut cum_det, mut cum_rand) = (0.0, 0.0, 0.0);
    let mut size_violations = 0;

    for t in 1..=horizon {
        let y = state.y.clone();
        let det = if cfg.rounding.det() {
            Some(round_once(cfg, &regd.reg, &y, RoundingMode::Deterministic, 0)?)
        } else {
            None
        };
        let rand: Vec<RoundingOutcome> = if cfg.rounding.rand() {
            (0..cfg.rand_repeats)
                .map(|r| {
                    round_once(
                        cfg,
                        &regd.reg,
                        &y,
                        RoundingMode::Randomized,
                        rounding_seed(cfg.seed, t, r),
                    )
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let announced = det.as_ref().or(rand.first()).map(|o| regd.grounds(&o.centers));
        let vt = stream.round(t, announced.as_deref());
        let raw = regd.register_round(&ground, t, &vt)?;

        let (opt, opt_exact) = round_optimum(cfg, &regd.reg, &raw)?;
        let cost_fractional = regd.reg.fractional_instance_cost(&y, &raw)?;
        let cost_det = det
            .as_ref()
            .map(|o| regd.reg.instance_cost(&o.centers, &raw))
            .transpose()?;
        let cost_rand = if rand.is_empty() {
            None
        } else {
            let mut s = 0.0;
            for o in &rand {
                s += regd.reg.instance_cost(&o.centers, &raw)?;
            }
            Some(s / rand.len() as f64)
        };
        let ratio_fractional = cost_fractional / opt;
        let ratio_det = cost_det.map(|c| c / opt);
        let ratio_rand = cost_rand.map(|c| c / opt);
        cum_frac += ratio_fractional;
        cum_det += ratio_det.unwrap_or(0.0);
        cum_rand += ratio_rand.unwrap_or(0.0);

        let det_size = det.as_ref().map(|o| o.unpadded_len);
        let rand_size = rand.iter().map(|o| o.unpadded_len).max();
        if det_size.is_some_and(|s| s > cfg.k) || rand_size.is_some_and(|s| s > cfg.k) {
            size_violations += 1;
        }

        let rt = reduce_instance(&regd.reg, &raw, cfg.k, cfg.reduction)?;
        let reduced_cost_fractional = regd.reg.fractional_instance_cost(&y, &rt.instance)?;

        let mut mass_by_region = vec![0.0; stream.region_count()];
        if !mass_by_region.is_empty() {
            for (p, m) in y.iter() {
                if let Some(r) = stream.region(regd.ground_of(p)) {
                    mass_by_region[r] += m;
                }
            }
        }

        let mut record = RoundRecord {
            t,
            n_points: raw.len(),
            d_t: y.len(),
            opt_t: opt,
            opt_exact,
            cost_fractional,
            cost_det,
            cost_rand,
            ratio_fractional,
            ratio_det,
            ratio_rand,
            cumulative_ratio_fractional: cum_frac,
            cumulative_ratio_det: ratio_det.map(|_| cum_det),
            cumulative_ratio_rand: ratio_rand.map(|_| cum_rand),
            cumulative_ratio_benchmark: None,
            cumulative_dynamic_benchmark: None,
            reduced_cost_fractional,
            reduced_cost_benchmark: None,
            det_size,
            rand_size,
            det_threshold: det.as_ref().map(|o| o.threshold_used),
            rand_threshold: rand.first().map(|o| o.threshold_used),
            g_t: state.g_max,
            eta_t: state.last_eta,
            mass_by_region,
        };
        observe(&RoundView {
            t,
            registry: &regd.reg,
            y: &y,
            raw: &raw,
            reduced: &rt,
            det: det.as_ref(),
            rand: &rand,
            record: &record,
            active_region: stream.active_region(t),
        })?;

        let report = state.step(&regd.reg, &rt.instance)?;
        record.g_t = report.g_max;
        record.eta_t = report.eta;

        records.push(record);
        raws.push(raw);
        reduced.push(rt.instance);
        opts.push(opt);
    }

    let reg = &regd.reg;
    let mut notes = Vec::new();

    // whole-run hindsight optimum
    let bench = offline::hindsight_optimum_with(
        reg,
        &raws,
        cfg.k,
        Objective::SumRatio,
        &HindsightOptions {
            pool: None,
            opts: Some(opts.clone()),
            budget: hindsight_budget(cfg),
        },
    )?;
    let mut acc = 0.0;
    for (rec, raw) in records.iter_mut().zip(&raws) {
        acc += reg.instance_cost(&bench.centers, raw)? / rec.opt_t;
        rec.cumulative_ratio_benchmark = Some(acc);
    }
    let bench_total = acc;

    // hindsight optimum of the reduced rounds over the learner's coordinates
    let reduced_bench = offline::hindsight_optimum_with(
        reg,
        &reduced,
        cfg.k,
        Objective::SumCost,
        &HindsightOptions {
            pool: Some(state.y.points().to_vec()),
            opts: None,
            budget: hindsight_budget(cfg),
        },
    )?;
    let mut reduced_bench_total = 0.0;
    for (rec, r) in records.iter_mut().zip(&reduced) {
        let c = reg.instance_cost(&reduced_bench.centers, r)?;
        reduced_bench_total += c;
        rec.reduced_cost_benchmark = Some(c);
    }

    let mut dynamic_checkpoints = Vec::new();
    if cfg.dynamic_benchmark {
        for c in checkpoints(horizon) {
            let sol = offline::hindsight_optimum_with(
                reg,
                &raws[..c],
                cfg.k,
                Objective::SumRatio,
                &HindsightOptions {
                    pool: None,
                    opts: Some(opts[..c].to_vec()),
                    budget: hindsight_budget(cfg),
                },
            )?;
            let value = offline::ratio_sum(reg, &sol.centers, &raws[..c], &opts[..c])?;
            records[c - 1].cumulative_dynamic_benchmark = Some(value);
            dynamic_checkpoints.push((c, value));
        }
        notes.push("dynamic benchmark: integral hindsight optimum per prefix".into());
    }

    let reference_ratio = match stream.reference_solution() {
        Some(idx) => {
            let ids: Option<Vec<PointId>> = idx.iter().map(|&i| regd.id_of(i)).collect();
            match ids {
                Some(ids) => Some(offline::ratio_sum(reg, &CenterSet::new(ids)?, &raws, &opts)?),
                None => {
                    notes.push("reference solution includes unrevealed points".into());
                    None
                }
            }
        }
        None => None,
    };

    let opt_inexact_rounds = records.iter().filter(|r| !r.opt_exact).count();
    if opt_inexact_rounds > 0 {
        notes.push(format!("{opt_inexact_rounds} rounds used a local-search OPT_t"));
    }
    if !bench.exact {
        notes.push("hindsight benchmark from local search".into());
    }
    let last = records.last().expect("horizon is at least 1");
    let summary = RunSummary {
        generator: cfg.generator.name().into(),
        k: cfg.k,
        horizon,
        seed: cfg.seed,
        cumulative_ratio_fractional: last.cumulative_ratio_fractional,
        cumulative_ratio_det: last.cumulative_ratio_det,
        cumulative_ratio_rand: last.cumulative_ratio_rand,
        cumulative_ratio_benchmark: bench_total,
        ratio_fractional_vs_benchmark: last.cumulative_ratio_fractional / bench_total,
        ratio_det_vs_benchmark: last.cumulative_ratio_det.map(|v| v / bench_total),
        ratio_rand_vs_benchmark: last.cumulative_ratio_rand.map(|v| v / bench_total),
        benchmark_centers: regd.grounds(&bench.centers),
        benchmark_exact: bench.exact,
        reduced_benchmark_centers: regd.grounds(&reduced_bench.centers),
        reduced_cost_fractional_total: records.iter().map(|r| r.reduced_cost_fractional).sum(),
        reduced_cost_benchmark_total: reduced_bench_total,
        dynamic_checkpoints,
        reference_ratio,
        opt_inexact_rounds,
        size_violations,
        notes,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        records,
        summary,
        state,
        registry: regd.reg,
        benchmark: bench.centers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{GeneratorKind, Preset, RoundingChoice};

    fn small(g: GeneratorKind, horizon: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(g, Preset::Desk);
        c.horizon = horizon;
        c
    }

    #[test]
    fn checkpoint_schedule() {
        assert_eq!(checkpoints(1), vec![1]);
        assert_eq!(checkpoints(8), vec![1, 2, 4, 8]);
        assert_eq!(checkpoints(243), vec![1, 2, 4, 8, 16, 32, 64, 128, 243]);
    }

    #[test]
    fn single_round_plays_the_initial_solution() {
        let cfg = small(GeneratorKind::UniformSquare, 1);
        let mut seen = None;
        let out = run_online_with(&cfg, |v| {
            seen = Some(v.y.clone());
            Ok(())
        })
        .unwrap();
        let y = seen.unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(y.total(), 3.0);
        assert!(y.mass().iter().all(|&m| m == 0.0 || m == 1.0));
    }

    #[test]
    fn ratios_are_at_least_one_and_replay() {
        let cfg = small(GeneratorKind::UniformSquare, 20);
        let a = run_online(&cfg).unwrap();
        for r in &a.records {
            assert!(r.opt_exact);
            assert!(r.ratio_det.unwrap() >= 1.0 - 1e-9);
            assert!(r.ratio_rand.unwrap() >= 1.0 - 1e-9);
            assert!(r.det_size.unwrap() <= 3 && r.rand_size.unwrap() <= 3);
        }
        assert!(a.summary.cumulative_ratio_benchmark >= 20.0 - 1e-9);
        let b = run_online(&cfg).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn adversary_sees_the_announced_centers() {
        let mut cfg = small(GeneratorKind::LbDet, 30);
        cfg.rounding = RoundingChoice::Det;
        let out = run_online_with(&cfg, |v| {
            let y = v.det.unwrap();
            let covered: Vec<usize> = y.centers.iter().map(|c| c.0 / 2).collect();
            // the round always contains a cluster the centers miss
            assert!(v.raw.ids().iter().any(|p| !covered.contains(&(p.0 / 2))));
            Ok(())
        })
        .unwrap();
        assert!(out.summary.cumulative_ratio_det.unwrap() > out.summary.cumulative_ratio_benchmark);
    }
}
