//! Online rounding of a fractional solution to at most `k` centers.
//!
//! Both schemes start from the same greedy scan over the revealed points in order of
//! their fractional connection cost: a point opens when the centers opened so far are
//! more than `multiplier` times farther away than its fractional cost.
//!
//! * Deterministic rounding stops there, with multiplier `2k + 2`.
//! * Randomized rounding scans with multiplier `4`, then pairs up the opened points
//!   and keeps a subset chosen by a single uniform offset `θ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{CenterSet, MetricRegistry, PointId};
use crate::omd::FractionalSolution;

/// Phase-one multiplier of randomized rounding.
pub const RANDOMIZED_MULTIPLIER: f64 = 4.0;

const SEARCH_STEPS: usize = 40;

/// `2k + 2`, the multiplier that keeps deterministic rounding within `k` centers.
pub fn deterministic_multiplier(k: usize) -> f64 {
    2.0 * k as f64 + 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMode {
    Deterministic,
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingOutcome {
    pub centers: CenterSet,
    pub mode: RoundingMode,
    pub threshold_used: f64,
    pub theta: Option<f64>,
    pub seed: Option<u64>,
    pub padded: bool,
    /// `|Y|` before padding.
    pub unpadded_len: usize,
}

/// `D(y, i)` for every coordinate of `y`, in coordinate order.
pub fn fractional_costs(reg: &MetricRegistry, y: &FractionalSolution) -> Result<Vec<f64>> {
    y.points().iter().map(|&p| reg.fractional_cost(y, p)).collect()
}

/// The greedy scan shared by both schemes; returns opened points in opening order.
pub fn scan_open(reg: &MetricRegistry, y: &FractionalSolution, costs: &[f64], multiplier: f64) -> Vec<PointId> {
    let mut order: Vec<(f64, PointId)> = costs.iter().copied().zip(y.points().iter().copied()).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut open: Vec<PointId> = Vec::new();
    for (dy, p) in order {
        let d_open = if open.is_empty() {
            f64::INFINITY
        } else {
            reg.nearest(&open, p).1
        };
        if d_open > multiplier * dy {
            open.push(p);
        }
    }
    open
}

/// Deterministic rounding at the given multiplier (no padding).
pub fn round_deterministic(reg: &MetricRegistry, y: &FractionalSolution, multiplier: f64) -> Result<RoundingOutcome> {
    let costs = fractional_costs(reg, y)?;
    deterministic_from_costs(reg, y, &costs, multiplier)
}

fn deterministic_from_costs(
    reg: &MetricRegistry,
    y: &FractionalSolution,
    costs: &[f64],
    multiplier: f64,
) -> Result<RoundingOutcome> {
    let centers = CenterSet::new(scan_open(reg, y, costs, multiplier))?;
    Ok(RoundingOutcome {
        unpadded_len: centers.len(),
        centers,
        mode: RoundingMode::Deterministic,
        threshold_used: multiplier,
        theta: None,
        seed: None,
        padded: false,
    })
}

/// Phase-one centers `Ȳ`, sorted by id.
pub fn phase_one(reg: &MetricRegistry, y: &FractionalSolution, multiplier: f64) -> Result<Vec<PointId>> {
    let costs = fractional_costs(reg, y)?;
    let mut open = scan_open(reg, y, &costs, multiplier);
    open.sort_unstable();
    Ok(open)
}

/// Phase-two structure: ball weights, the closest-pair matching and the interval layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPairs {
    /// `Ȳ`, sorted by id.
    pub centers: Vec<PointId>,
    pub pairs: Vec<(PointId, PointId)>,
    pub solitary: Option<PointId>,
    /// `w_i`, aligned with `centers`.
    pub weights: Vec<f64>,
    /// `r_i`, aligned with `centers`; infinite when `Ȳ` has a single point.
    pub radii: Vec<f64>,
    /// `(i_s, L_s, U_s)` in layout order.
    pub layout: Vec<(PointId, f64, f64)>,
}

impl MatchedPairs {
    pub fn build(reg: &MetricRegistry, y: &FractionalSolution, ybar: &[PointId]) -> Self {
        let mut centers = ybar.to_vec();
        centers.sort_unstable();
        centers.dedup();
        let n = centers.len();
        let radii: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| reg.dist(centers[i], centers[j]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let mut weights = vec![0.0; n];
        for (p, m) in y.iter() {
            if m <= 0.0 {
                continue;
            }
            if let Some(i) = (0..n).find(|&i| reg.dist(p, centers[i]) < radii[i] / 2.0) {
                weights[i] += m;
            }
        }
        if n == 1 {
            // the unbounded ball holds all of the mass; summation error could leave it short of k
            weights[0] = y.k() as f64;
        }

        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                candidates.push((reg.dist(centers[i], centers[j]), i, j));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut matched = vec![false; n];
        let mut pairs = Vec::new();
        for (_, i, j) in candidates {
            if !matched[i] && !matched[j] {
                matched[i] = true;
                matched[j] = true;
                pairs.push((i, j));
            }
        }
        let solitary = (0..n).find(|&i| !matched[i]);

        let mut layout = Vec::with_capacity(n);
        let mut at = 0.0;
        for s in pairs.iter().flat_map(|&(i, j)| [i, j]).chain(solitary) {
            layout.push((centers[s], at, at + weights[s]));
            at += weights[s];
        }
        Self {
            pairs: pairs.iter().map(|&(i, j)| (centers[i], centers[j])).collect(),
            solitary: solitary.map(|s| centers[s]),
            centers,
            weights,
            radii,
            layout,
        }
    }

    pub fn weight_of(&self, id: PointId) -> Option<f64> {
        self.centers.binary_search(&id).ok().map(|i| self.weights[i])
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Every ball carries more than half a unit and the balls hold at most `k` in total.
    pub fn is_feasible(&self, k: usize) -> bool {
        self.weights.iter().all(|&w| w > 0.5) && self.total_weight() <= k as f64 + 1e-9
    }

    /// Centers `i_s` with `a + θ ∈ [L_s, U_s)` for some integer `a ≥ 0`.
    pub fn select(&self, theta: f64) -> Vec<PointId> {
        let mut out: Vec<PointId> = self
            .layout
            .iter()
            .filter(|&&(_, lo, hi)| {
                let a = (lo - theta).ceil().max(0.0);
                a + theta < hi
            })
            .map(|&(p, _, _)| p)
            .collect();
        out.sort_unstable();
        out
    }

    /// Sorted points of `[0, 1]` where the selection can change.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0, 1.0];
        for &(_, lo, hi) in &self.layout {
            b.push(lo.fract());
            b.push(hi.fract());
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `(length, selection)` for each piece of `[0, 1)` on which the selection is fixed.
    pub fn pieces(&self) -> Vec<(f64, Vec<PointId>)> {
        self.breakpoints()
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[1] - w[0], self.select(0.5 * (w[0] + w[1]))))
            .collect()
    }
}

/// `θ` from a ChaCha stream seeded with `seed`.
pub fn draw_theta(seed: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed).random::<f64>()
}

/// Randomized rounding with `θ` drawn from `seed` (no padding).
pub fn round_randomized(
    reg: &MetricRegistry,
    y: &FractionalSolution,
    multiplier: f64,
    seed: u64,
) -> Result<RoundingOutcome> {
    let theta = draw_theta(seed);
    let (mut out, _) = round_randomized_with_theta(reg, y, multiplier, theta)?;
    out.seed = Some(seed);
    Ok(out)
}

/// Randomized rounding at a fixed `θ ∈ [0, 1)`; also returns the phase-two structure.
pub fn round_randomized_with_theta(
    reg: &MetricRegistry,
    y: &FractionalSolution,
    multiplier: f64,
    theta: f64,
) -> Result<(RoundingOutcome, MatchedPairs)> {
    let ybar = phase_one(reg, y, multiplier)?;
    let pairs = MatchedPairs::build(reg, y, &ybar);
    Ok((outcome_at(&pairs, multiplier, theta)?, pairs))
}

fn outcome_at(pairs: &MatchedPairs, multiplier: f64, theta: f64) -> Result<RoundingOutcome> {
    let centers = CenterSet::new(pairs.select(theta))?;
    Ok(RoundingOutcome {
        unpadded_len: centers.len(),
        centers,
        mode: RoundingMode::Randomized,
        threshold_used: multiplier,
        theta: Some(theta),
        seed: None,
        padded: false,
    })
}

/// Exact `E_θ[D(Y, client)]` for randomized rounding.
pub fn expected_rounding_cost(
    reg: &MetricRegistry,
    y: &FractionalSolution,
    client: PointId,
    multiplier: f64,
) -> Result<f64> {
    Ok(expected_rounding_costs(reg, y, &[client], multiplier)?[0])
}

/// [`expected_rounding_cost`] for several clients, sharing one phase-two structure.
pub fn expected_rounding_costs(
    reg: &MetricRegistry,
    y: &FractionalSolution,
    clients: &[PointId],
    multiplier: f64,
) -> Result<Vec<f64>> {
    for &c in clients {
        reg.distance(c, c)?;
    }
    let ybar = phase_one(reg, y, multiplier)?;
    let pairs = MatchedPairs::build(reg, y, &ybar);
    let pieces = pairs.pieces();
    clients
        .iter()
        .map(|&c| {
            let mut total = 0.0;
            for (len, sel) in &pieces {
                if sel.is_empty() {
                    return Err(Error::EmptyCenterSet);
                }
                total += len * reg.nearest(sel, c).1;
            }
            Ok(total)
        })
        .collect()
}

/// Binary search for the smallest multiplier whose outcome stays feasible.
///
/// Deterministic mode searches `(0, 2k + 2]` and requires `|Y| ≤ k`. Randomized mode
/// searches `(0, 4]` for phase one and requires every ball weight above one half with
/// total at most `k`. The outcome at the upper end of the final bracket is returned.
pub fn heuristic_threshold_search(
    reg: &MetricRegistry,
    y: &FractionalSolution,
    mode: RoundingMode,
    seed: u64,
) -> Result<RoundingOutcome> {
    let k = y.k();
    let costs = fractional_costs(reg, y)?;
    match mode {
        RoundingMode::Deterministic => {
            let feasible = |c: f64| scan_open(reg, y, &costs, c).len() <= k;
            let hi = bisect(deterministic_multiplier(k), feasible);
            deterministic_from_costs(reg, y, &costs, hi)
        }
        RoundingMode::Randomized => {
            let structure = |c: f64| {
                let mut open = scan_open(reg, y, &costs, c);
                open.sort_unstable();
                MatchedPairs::build(reg, y, &open)
            };
            let hi = bisect(RANDOMIZED_MULTIPLIER, |c| structure(c).is_feasible(k));
            let theta = draw_theta(seed);
            let mut out = outcome_at(&structure(hi), hi, theta)?;
            out.seed = Some(seed);
            Ok(out)
        }
    }
}

fn bisect(top: f64, feasible: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..SEARCH_STEPS {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Adds revealed points by decreasing `D(y, ·)` (ties by id) until there are `k` centers.
///
/// Points coincident with an existing center are skipped. If fewer than `k` distinct
/// points are revealed, all of them end up open.
pub fn pad_to_k(reg: &MetricRegistry, centers: &CenterSet, y: &FractionalSolution) -> Result<CenterSet> {
    let k = y.k();
    let mut out = centers.as_slice().to_vec();
    if out.len() >= k {
        return Ok(centers.clone());
    }
    let costs = fractional_costs(reg, y)?;
    let mut order: Vec<(f64, PointId)> = costs.into_iter().zip(y.points().iter().copied()).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, p) in order {
        if out.len() >= k {
            break;
        }
        if reg.nearest(&out, p).1 > 0.0 {
            out.push(p);
        }
    }
    CenterSet::new(out)
}

/// [`pad_to_k`] applied to an outcome.
pub fn pad_outcome(reg: &MetricRegistry, outcome: RoundingOutcome, y: &FractionalSolution) -> Result<RoundingOutcome> {
    let centers = pad_to_k(reg, &outcome.centers, y)?;
    Ok(RoundingOutcome {
        padded: centers.len() > outcome.unpadded_len,
        centers,
        ..outcome
    })
}
