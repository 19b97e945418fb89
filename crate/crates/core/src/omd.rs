//! Online mirror descent over a growing capped simplex with the hyperbolic-entropy
//! regularizer.
//!
//! Coordinates are attached to points in arrival order. A point that shows up for
//! the first time enters with zero mass, which the regularizer tolerates because its
//! gradient `asinh(x / β)` is finite at zero. Each round computes a subgradient of
//! the fractional k-median cost, takes one mirror step with an adaptive learning
//! rate, and Bregman-projects back onto `{y ≥ 0, Σ y = k}` (optionally with `y ≤ 1`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{MetricRegistry, PointId, WeightedInstance, MASS_TOLERANCE};

/// Largest magnitude fed to `sinh` in the mirror update.
pub const SINH_ARGUMENT_CLAMP: f64 = 700.0;

const PROJECTION_TOLERANCE: f64 = 1e-10;
const PROJECTION_MAX_ITERATIONS: usize = 200;

/// A fractional solution over the coordinates revealed so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalSolution {
    k: usize,
    points: Vec<PointId>,
    mass: Vec<f64>,
}

impl FractionalSolution {
    pub fn new(k: usize, points: Vec<PointId>, mass: Vec<f64>) -> Self {
        assert_eq!(points.len(), mass.len(), "one mass entry per coordinate");
        Self { k, points, mass }
    }

    /// Mass one on each of `chosen`, zero on the rest of `support`.
    pub fn indicator(k: usize, chosen: &[PointId], support: &[PointId]) -> Self {
        let mass = support
            .iter()
            .map(|p| if chosen.contains(p) { 1.0 } else { 0.0 })
            .collect();
        Self::new(k, support.to_vec(), mass)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of coordinates, `d_t`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[PointId] {
        &self.points
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn iter(&self) -> impl Iterator<Item = (PointId, f64)> + '_ {
        self.points.iter().copied().zip(self.mass.iter().copied())
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn position(&self, id: PointId) -> Option<usize> {
        self.points.iter().position(|&p| p == id)
    }

    pub fn mass_of(&self, id: PointId) -> f64 {
        self.position(id).map_or(0.0, |i| self.mass[i])
    }

    /// Adds a zero-mass coordinate for every id not yet present, keeping arrival order.
    pub fn extend(&mut self, ids: impl IntoIterator<Item = PointId>) {
        for id in ids {
            if self.position(id).is_none() {
                self.points.push(id);
                self.mass.push(0.0);
            }
        }
    }

    pub(crate) fn set_mass(&mut self, mass: Vec<f64>) {
        debug_assert_eq!(mass.len(), self.points.len());
        self.mass = mass;
    }

    /// Checks non-negativity, the mass constraint and (unless `simplex_only`) the box.
    pub fn check_feasible(&self, simplex_only: bool) -> Result<()> {
        for &m in &self.mass {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::NonFinite("fractional mass"));
            }
            if !simplex_only && m > 1.0 + MASS_TOLERANCE {
                return Err(Error::Config(format!("coordinate mass {m} exceeds 1")));
            }
        }
        let total = self.total();
        if (total - self.k as f64).abs() > MASS_TOLERANCE {
            return Err(Error::Config(format!("total mass {total} differs from k = {}", self.k)));
        }
        Ok(())
    }
}

/// `φ_β(x) = Σ x_i asinh(x_i/β) − sqrt(x_i² + β²)`.
pub fn hyperbolic_entropy(x: &[f64], beta: f64) -> f64 {
    x.iter()
        .map(|&v| v * (v / beta).asinh() - (v * v + beta * beta).sqrt())
        .sum()
}

/// `∇φ_β(x)_i = asinh(x_i / β)`.
pub fn mirror_map(x: &[f64], beta: f64) -> Vec<f64> {
    x.iter().map(|&v| (v / beta).asinh()).collect()
}

/// Bregman divergence `B_φβ(x ‖ y)` of the hyperbolic entropy.
pub fn bregman_divergence(x: &[f64], y: &[f64], beta: f64) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            a * ((a / beta).asinh() - (b / beta).asinh()) - (a * a + beta * beta).sqrt() + (b * b + beta * beta).sqrt()
        })
        .sum()
}

/// Subgradient of `Cost_t` at the current fractional solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgradient {
    /// One entry per coordinate of the (already extended) solution; all `≤ 0`.
    pub values: Vec<f64>,
    /// `M^(x)` for every client, in instance order.
    pub thresholds: Vec<(PointId, f64)>,
}

impl Subgradient {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `(∇)_i = −Σ_x w_x (M^(x) − min(M^(x), d(x, v_i)))`.
///
/// `y` must already carry a coordinate for every client of `round`.
pub fn compute_subgradient(
    reg: &MetricRegistry,
    y: &FractionalSolution,
    round: &WeightedInstance,
) -> Result<Subgradient> {
    let mut values = vec![0.0; y.len()];
    let mut thresholds = Vec::with_capacity(round.len());
    for &(x, w) in &round.members {
        let m = reg.fractional_assignment(y, x)?.threshold;
        thresholds.push((x, m));
        for (v, &p) in values.iter_mut().zip(y.points()) {
            *v -= w * (m - m.min(reg.dist(x, p)));
        }
    }
    Ok(Subgradient { values, thresholds })
}

/// `x_i = sinh(asinh(d·y_i) − η ∇_i) / d` with `d = y.len()`.
pub fn mirror_update(y: &[f64], grad: &[f64], eta: f64) -> Result<Vec<f64>> {
    if y.len() != grad.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: grad.len(),
        });
    }
    let d = y.len() as f64;
    y.iter()
        .zip(grad)
        .map(|(&yi, &gi)| {
            let arg = ((d * yi).asinh() - eta * gi).clamp(-SINH_ARGUMENT_CLAMP, SINH_ARGUMENT_CLAMP);
            let xi = arg.sinh() / d;
            if xi.is_finite() {
                Ok(xi)
            } else {
                Err(Error::NonFinite("mirror update"))
            }
        })
        .collect()
}

/// Bregman projection of `x` (under `φ_{1/d}`, `d = x.len()`) onto
/// `{y ≥ 0, Σ y = k}`, intersected with `y ≤ 1` unless `simplex_only`.
///
/// Stationarity gives `y_i(μ) = clamp(β sinh(asinh(x_i/β) − μ), 0, cap)`; the total is
/// continuous and non-increasing in `μ`, so the multiplier is found by bisection.
pub fn bregman_project(x: &[f64], k: usize, simplex_only: bool) -> Result<Vec<f64>> {
    let d = x.len();
    let kf = k as f64;
    if d == 0 || k == 0 {
        return Err(Error::Bracketing { dim: d, k });
    }
    if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite("projection input"));
    }
    if !simplex_only && d < k {
        return Err(Error::Bracketing { dim: d, k });
    }
    let cap = if simplex_only { f64::INFINITY } else { 1.0 };
    let within_box = x.iter().all(|&v| v <= cap);
    if within_box && (x.iter().sum::<f64>() - kf).abs() <= PROJECTION_TOLERANCE {
        return Ok(x.to_vec());
    }

    let beta = 1.0 / d as f64;
    let dual: Vec<f64> = x.iter().map(|&v| (v / beta).asinh()).collect();
    let at = |mu: f64| -> Vec<f64> {
        dual.iter()
            .map(|&th| (beta * (th - mu).sinh()).clamp(0.0, cap))
            .collect()
    };
    let total = |mu: f64| -> f64 { at(mu).iter().sum() };

    let top = dual.iter().fold(0.0f64, |m, &v| m.max(v)) + 1.0;
    let mut hi = top;
    let mut lo = -top;
    while total(lo) < kf {
        lo = 2.0 * lo - 1.0;
        if lo < -SINH_ARGUMENT_CLAMP {
            return Err(Error::Bracketing { dim: d, k });
        }
    }
    let mut mu = 0.5 * (lo + hi);
    for _ in 0..PROJECTION_MAX_ITERATIONS {
        mu = 0.5 * (lo + hi);
        let s = total(mu);
        if (s - kf).abs() <= PROJECTION_TOLERANCE {
            break;
        }
        if s > kf {
            lo = mu;
        } else {
            hi = mu;
        }
    }
    let y = at(mu);
    if (y.iter().sum::<f64>() - kf).abs() > MASS_TOLERANCE {
        return Err(Error::Bracketing { dim: d, k });
    }
    Ok(y)
}

/// Diagnostics of one mirror-descent round.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub t: usize,
    pub dim: usize,
    pub grad: Subgradient,
    pub g_max: f64,
    pub eta: f64,
}

/// State of the fractional algorithm between rounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OmdState {
    pub y: FractionalSolution,
    /// Running maximum of the subgradient sup-norm.
    pub g_max: f64,
    /// Rounds processed so far.
    pub t: usize,
    pub simplex_only: bool,
    pub last_eta: f64,
}

impl OmdState {
    /// `y_0` is the indicator of the `k` lowest-id distinct points of `r0`.
    pub fn initialize(reg: &MetricRegistry, r0: &WeightedInstance, k: usize, simplex_only: bool) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let ids = r0.ids();
        for &id in &ids {
            if !reg.contains(id) {
                return Err(Error::UnknownPoint(id.0));
            }
        }
        let distinct = reg.distinct(&ids);
        if distinct.len() < k {
            return Err(Error::TooFewDistinct {
                needed: k,
                found: distinct.len(),
            });
        }
        let mut support = ids;
        support.sort_unstable();
        support.dedup();
        let y = FractionalSolution::indicator(k, &distinct[..k], &support);
        Ok(Self {
            y,
            g_max: 0.0,
            t: 0,
            simplex_only,
            last_eta: 0.0,
        })
    }

    pub fn k(&self) -> usize {
        self.y.k()
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// Folds `grad` into the running maximum and returns `1 / (G_t √t)`, or zero while
    /// every subgradient so far has vanished. `self.t` must already count this round.
    pub fn learning_rate(&mut self, grad: &Subgradient) -> f64 {
        self.g_max = self.g_max.max(grad.sup_norm());
        if self.g_max == 0.0 || self.t == 0 {
            0.0
        } else {
            1.0 / (self.g_max * (self.t as f64).sqrt())
        }
    }

    /// One full round on the weighted instance `round`.
    pub fn step(&mut self, reg: &MetricRegistry, round: &WeightedInstance) -> Result<StepReport> {
        self.y.extend(round.ids());
        let grad = compute_subgradient(reg, &self.y, round)?;
        self.t += 1;
        let eta = self.learning_rate(&grad);
        self.last_eta = eta;
        let dim = self.y.len();
        if eta > 0.0 && grad.sup_norm() > 0.0 {
            let raw = mirror_update(self.y.mass(), &grad.values, eta)?;
            if cfg!(debug_assertions) {
                check_gradient_identity(self.y.mass(), &raw, &grad.values, eta);
            }
            let next = bregman_project(&raw, self.k(), self.simplex_only)?;
            self.y.set_mass(next);
            if cfg!(debug_assertions) {
                debug_assert!(self.y.check_feasible(self.simplex_only).is_ok());
                check_diameter(&self.y);
            }
        }
        Ok(StepReport {
            t: self.t,
            dim,
            grad,
            g_max: self.g_max,
            eta,
        })
    }
}

// ∇φ(y_t) − ∇φ(x_{t+1}) = η ∇_t, coordinate-wise.
fn check_gradient_identity(y: &[f64], x: &[f64], grad: &[f64], eta: f64) {
    let d = y.len() as f64;
    for ((&yi, &xi), &gi) in y.iter().zip(x).zip(grad) {
        let arg = (d * yi).asinh() - eta * gi;
        if arg.abs() >= SINH_ARGUMENT_CLAMP {
            continue;
        }
        let lhs = (d * yi).asinh() - (d * xi).asinh();
        debug_assert!(
            (lhs - eta * gi).abs() <= 1e-9 * arg.abs().max(1.0),
            "mirror step breaks the gradient identity: {lhs} vs {}",
            eta * gi
        );
    }
}

// B(y* ‖ y) ≤ k log(7d) for the integral y* on the k heaviest coordinates.
fn check_diameter(y: &FractionalSolution) {
    let d = y.len();
    let k = y.k();
    if d < 2 || k > d {
        return;
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| y.mass()[b].total_cmp(&y.mass()[a]));
    let mut star = vec![0.0; d];
    for &i in &order[..k] {
        star[i] = 1.0;
    }
    let div = bregman_divergence(&star, y.mass(), 1.0 / d as f64);
    debug_assert!(div <= k as f64 * (7.0 * d as f64).ln() + 1e-9);
}
