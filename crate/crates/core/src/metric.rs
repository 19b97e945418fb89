//! The incrementally revealed metric space and the cost functions evaluated on it.
//!
//! A [`MetricRegistry`] is append-only: ids are handed out densely in arrival order and
//! the distance between two registered points never changes. Distances are stored in a
//! lower-triangular cache that grows by one row per appended point.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::omd::FractionalSolution;

/// Tolerance for the triangle inequality when an explicit matrix is loaded.
pub const TRIANGLE_TOLERANCE: f64 = 1e-9;

/// Tolerance on "total mass equals k".
pub const MASS_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointId(pub usize);

impl PointId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    Euclidean,
    Explicit,
}

#[derive(Debug, Clone)]
pub struct MetricRegistry {
    mode: MetricMode,
    dim: usize,
    coords: Vec<Vec<f64>>,
    // rows[i][j] = d(i, j) for j < i
    rows: Vec<Vec<f64>>,
    by_coords: HashMap<Vec<u64>, PointId>,
}

fn coord_key(coords: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 are the same location
    coords.iter().map(|c| (c + 0.0).to_bits()).collect()
}

impl MetricRegistry {
    /// An empty Euclidean registry over `dim`-dimensional coordinates.
    pub fn euclidean(dim: usize) -> Self {
        Self {
            mode: MetricMode::Euclidean,
            dim,
            coords: Vec::new(),
            rows: Vec::new(),
            by_coords: HashMap::new(),
        }
    }

    /// A registry whose points are the rows of an explicit distance matrix.
    ///
    /// The matrix must be square, symmetric, zero on the diagonal, non-negative and
    /// satisfy the triangle inequality up to [`TRIANGLE_TOLERANCE`].
    pub fn from_matrix(matrix: &[Vec<f64>]) -> Result<Self> {
        let n = matrix.len();
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMetric(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMetric(format!("entry ({i},{j}) = {v}")));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidMetric(format!("diagonal entry {i} is {v}")));
                }
                if (v - matrix[j][i]).abs() > TRIANGLE_TOLERANCE {
                    return Err(Error::InvalidMetric(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if matrix[a][c] > matrix[a][b] + matrix[b][c] + TRIANGLE_TOLERANCE {
                        return Err(Error::InvalidMetric(format!(
                            "triangle inequality fails for ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        let rows = (0..n).map(|i| matrix[i][..i].to_vec()).collect();
        Ok(Self {
            mode: MetricMode::Explicit,
            dim: 0,
            coords: Vec::new(),
            rows,
            by_coords: HashMap::new(),
        })
    }

    pub fn mode(&self) -> MetricMode {
        self.mode
    }

    /// Coordinate dimension; zero for explicit registries.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = PointId> {
        (0..self.len()).map(PointId)
    }

    pub fn contains(&self, id: PointId) -> bool {
        id.0 < self.len()
    }

    pub fn coords(&self, id: PointId) -> Option<&[f64]> {
        self.coords.get(id.0).map(Vec::as_slice)
    }

    /// Appends a Euclidean point, or returns the existing id when a point with
    /// identical coordinates is already registered.
    pub fn insert(&mut self, coords: &[f64]) -> Result<PointId> {
        if self.mode != MetricMode::Euclidean {
            return Err(Error::InvalidMetric(
                "points cannot be appended to an explicit metric".into(),
            ));
        }
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        let key = coord_key(coords);
        if let Some(&id) = self.by_coords.get(&key) {
            return Ok(id);
        }
        let row = self
            .coords
            .iter()
            .map(|other| euclidean_distance(other, coords))
            .collect();
        let id = PointId(self.rows.len());
        self.rows.push(row);
        self.coords.push(coords.to_vec());
        self.by_coords.insert(key, id);
        Ok(id)
    }

    /// Checked distance between two registered points.
    pub fn distance(&self, a: PointId, b: PointId) -> Result<f64> {
        for id in [a, b] {
            if !self.contains(id) {
                return Err(Error::UnknownPoint(id.0));
            }
        }
        Ok(self.dist(a, b))
    }

    /// Unchecked distance; panics on unknown ids.
    #[inline]
    pub fn dist(&self, a: PointId, b: PointId) -> f64 {
        match a.0.cmp(&b.0) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => self.rows[a.0][b.0],
            std::cmp::Ordering::Less => self.rows[b.0][a.0],
        }
    }

    fn check(&self, id: PointId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownPoint(id.0))
        }
    }

    /// One representative per location among `ids`: duplicates and zero-distance
    /// points collapse onto the lowest id. Output is sorted by id.
    pub fn distinct(&self, ids: &[PointId]) -> Vec<PointId> {
        let mut sorted = ids.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut reps: Vec<PointId> = Vec::with_capacity(sorted.len());
        for id in sorted {
            if reps.iter().all(|&r| self.dist(r, id) > 0.0) {
                reps.push(id);
            }
        }
        reps
    }

    /// Ratio of the largest to the smallest positive pairwise distance over the registry.
    pub fn aspect_ratio(&self) -> Result<f64> {
        let ids: Vec<PointId> = self.ids().collect();
        self.aspect_ratio_of(&ids)
    }

    /// Aspect ratio restricted to `ids`.
    pub fn aspect_ratio_of(&self, ids: &[PointId]) -> Result<f64> {
        let mut max = 0.0f64;
        let mut min = f64::INFINITY;
        for (n, &a) in ids.iter().enumerate() {
            self.check(a)?;
            for &b in &ids[..n] {
                let d = self.dist(a, b);
                if d > 0.0 {
                    max = max.max(d);
                    min = min.min(d);
                }
            }
        }
        if max == 0.0 {
            return Err(Error::DegenerateMetric("fewer than two distinct points".into()));
        }
        Ok(max / min)
    }

    /// `D(Y, x)`: distance from `x` to its closest center.
    pub fn assignment_cost(&self, centers: &CenterSet, x: PointId) -> Result<f64> {
        self.check(x)?;
        if centers.is_empty() {
            return Err(Error::EmptyCenterSet);
        }
        for &c in centers.iter() {
            self.check(c)?;
        }
        Ok(self.nearest(centers.as_slice(), x).1)
    }

    /// Closest center to `x` (ties to the lowest id) and its distance.
    /// `centers` must be nonempty and registered.
    pub(crate) fn nearest(&self, centers: &[PointId], x: PointId) -> (PointId, f64) {
        let mut best = (centers[0], f64::INFINITY);
        for &c in centers {
            let d = self.dist(c, x);
            if d < best.1 || (d == best.1 && c < best.0) {
                best = (c, d);
            }
        }
        best
    }

    /// `Cost(Y, R) = Σ w_x D(Y, x)`.
    pub fn instance_cost(&self, centers: &CenterSet, inst: &WeightedInstance) -> Result<f64> {
        if centers.is_empty() {
            return Err(Error::EmptyCenterSet);
        }
        for &c in centers.iter() {
            self.check(c)?;
        }
        let mut total = 0.0;
        for &(x, w) in &inst.members {
            self.check(x)?;
            total += w * self.nearest(centers.as_slice(), x).1;
        }
        Ok(total)
    }

    /// Fractional connection cost `D(y, x)`: `x` is served by one unit of mass taken
    /// greedily from the closest points of `y` (ties by ascending id).
    pub fn fractional_assignment(&self, y: &FractionalSolution, x: PointId) -> Result<FractionalAssignment> {
        self.check(x)?;
        let mut order: Vec<(f64, PointId, f64)> = Vec::with_capacity(y.len());
        for (p, m) in y.iter() {
            self.check(p)?;
            if m > 0.0 {
                order.push((self.dist(p, x), p, m));
            }
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut need = 1.0f64;
        let mut cost = 0.0;
        let mut threshold = 0.0f64;
        let mut alpha = Vec::new();
        for (d, p, m) in order {
            if need <= 0.0 {
                break;
            }
            let take = m.min(need);
            need -= take;
            cost += take * d;
            threshold = threshold.max(d);
            alpha.push((p, take));
        }
        if need > MASS_TOLERANCE || alpha.is_empty() {
            return Err(Error::InsufficientMass { total: y.total() });
        }
        if need > 0.0 {
            // rounding shortfall from the projection; charge it at the threshold
            cost += need * threshold;
            if let Some(last) = alpha.last_mut() {
                last.1 += need;
            }
        }
        Ok(FractionalAssignment { cost, alpha, threshold })
    }

    /// Shorthand for the cost part of [`fractional_assignment`](Self::fractional_assignment).
    pub fn fractional_cost(&self, y: &FractionalSolution, x: PointId) -> Result<f64> {
        Ok(self.fractional_assignment(y, x)?.cost)
    }

    /// `Cost(y, R) = Σ w_x D(y, x)`.
    pub fn fractional_instance_cost(&self, y: &FractionalSolution, inst: &WeightedInstance) -> Result<f64> {
        let mut total = 0.0;
        for &(x, w) in &inst.members {
            total += w * self.fractional_cost(y, x)?;
        }
        Ok(total)
    }
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Result of serving one client fractionally.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAssignment {
    pub cost: f64,
    /// Mass drawn from each point, in service order.
    pub alpha: Vec<(PointId, f64)>,
    /// `M^(x)`: the largest distance that still carries assigned mass.
    pub threshold: f64,
}

/// One round's client set with positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedInstance {
    pub round: usize,
    pub members: Vec<(PointId, f64)>,
}

impl WeightedInstance {
    /// A raw instance: every member has weight one.
    pub fn unit(round: usize, ids: impl IntoIterator<Item = PointId>) -> Self {
        Self {
            round,
            members: ids.into_iter().map(|id| (id, 1.0)).collect(),
        }
    }

    pub fn weighted(round: usize, members: Vec<(PointId, f64)>) -> Result<Self> {
        if let Some(&(_, w)) = members.iter().find(|(_, w)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidWeight(w));
        }
        Ok(Self { round, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ids(&self) -> Vec<PointId> {
        self.members.iter().map(|&(id, _)| id).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|&(_, w)| w).sum()
    }
}

/// An integral solution: sorted, duplicate-free, nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CenterSet(Vec<PointId>);

impl CenterSet {
    pub fn new(ids: impl IntoIterator<Item = PointId>) -> Result<Self> {
        let mut v: Vec<PointId> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::EmptyCenterSet);
        }
        Ok(Self(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PointId> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[PointId] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<PointId> {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> (MetricRegistry, Vec<PointId>) {
        let mut reg = MetricRegistry::euclidean(1);
        let ids = xs.iter().map(|&x| reg.insert(&[x]).unwrap()).collect();
        (reg, ids)
    }

    #[test]
    fn distance_examples() {
        let mut reg = MetricRegistry::euclidean(2);
        let a = reg.insert(&[0.0, 0.0]).unwrap();
        let b = reg.insert(&[3.0, 4.0]).unwrap();
        assert_eq!(reg.distance(a, b).unwrap(), 5.0);
        assert_eq!(reg.distance(b, a).unwrap(), 5.0);
        assert_eq!(reg.distance(a, a).unwrap(), 0.0);
        assert!(matches!(reg.distance(a, PointId(9)), Err(Error::UnknownPoint(9))));

        let m = MetricRegistry::from_matrix(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(m.distance(PointId(0), PointId(1)).unwrap(), 2.0);
    }

    #[test]
    fn insert_deduplicates_coordinates() {
        let mut reg = MetricRegistry::euclidean(2);
        let a = reg.insert(&[1.0, 0.0]).unwrap();
        let b = reg.insert(&[1.0, -0.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(reg.len(), 1);
        assert!(reg.insert(&[1.0]).is_err());
    }

    #[test]
    fn explicit_matrix_validation() {
        assert!(MetricRegistry::from_matrix(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(MetricRegistry::from_matrix(&[vec![1.0]]).is_err());
        let bad = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(MetricRegistry::from_matrix(&bad).is_err());
        let mut m = MetricRegistry::from_matrix(&[vec![0.0]]).unwrap();
        assert!(m.insert(&[]).is_err());
    }

    #[test]
    fn assignment_cost_examples() {
        let (reg, ids) = line(&[0.0, 3.0, 10.0]);
        let y = CenterSet::new([ids[0], ids[2]]).unwrap();
        assert_eq!(reg.assignment_cost(&y, ids[1]).unwrap(), 3.0);
        assert_eq!(reg.assignment_cost(&y, ids[0]).unwrap(), 0.0);
        let all = CenterSet::new(ids.clone()).unwrap();
        for &x in &ids {
            assert_eq!(reg.assignment_cost(&all, x).unwrap(), 0.0);
        }
        assert!(CenterSet::new([]).is_err());
    }

    #[test]
    fn instance_cost_examples() {
        let (reg, ids) = line(&[0.0, 3.0]);
        let y = CenterSet::new([ids[0]]).unwrap();
        let r = WeightedInstance::weighted(0, vec![(ids[1], 2.0)]).unwrap();
        assert_eq!(reg.instance_cost(&y, &r).unwrap(), 6.0);

        let (reg, ids) = line(&[0.0, 1.0, 5.0]);
        let r = WeightedInstance::unit(0, [ids[1], ids[2]]);
        let y = CenterSet::new([ids[0]]).unwrap();
        assert_eq!(reg.instance_cost(&y, &r).unwrap(), 6.0);
        // brute force over all single centers: the evaluated one is what it is, and
        // the best single center is id(1) with cost 4
        let costs: Vec<f64> = ids
            .iter()
            .map(|&c| reg.instance_cost(&CenterSet::new([c]).unwrap(), &r).unwrap())
            .collect();
        assert_eq!(costs, vec![6.0, 4.0, 4.0]);

        let inside = WeightedInstance::unit(0, [ids[0]]);
        assert_eq!(reg.instance_cost(&y, &inside).unwrap(), 0.0);
        assert!(WeightedInstance::weighted(0, vec![(ids[0], 0.0)]).is_err());
    }

    #[test]
    fn fractional_cost_examples() {
        // x at 0, points at distance 1 and 3
        let (reg, ids) = line(&[0.0, -1.0, 3.0]);
        let y = FractionalSolution::new(1, vec![ids[1], ids[2]], vec![0.5, 0.5]);
        let fa = reg.fractional_assignment(&y, ids[0]).unwrap();
        assert!((fa.cost - 2.0).abs() < 1e-15);
        assert_eq!(fa.threshold, 3.0);
        // grid search over alpha_1 in [0, 0.5], alpha_2 = 1 - alpha_1 <= 0.5
        let grid = (0..=1000)
            .map(|i| 0.5 * i as f64 / 1000.0)
            .filter(|a| 1.0 - a <= 0.5 + 1e-12)
            .map(|a| a * 1.0 + (1.0 - a) * 3.0)
            .fold(f64::INFINITY, f64::min);
        assert!((grid - fa.cost).abs() < 1e-12);

        // mass >= 1 on the nearest point
        let y = FractionalSolution::new(1, vec![ids[1], ids[2]], vec![1.0, 0.0]);
        assert_eq!(reg.fractional_cost(&y, ids[0]).unwrap(), 1.0);

        let short = FractionalSolution::new(1, vec![ids[1]], vec![0.4]);
        assert!(matches!(
            reg.fractional_cost(&short, ids[0]),
            Err(Error::InsufficientMass { .. })
        ));
    }

    #[test]
    fn fractional_matches_integral_on_indicators() {
        let (reg, ids) = line(&[0.0, 2.0, 7.0, 11.0, 12.5]);
        let y = FractionalSolution::indicator(2, &[ids[1], ids[3]], &ids);
        let centers = CenterSet::new([ids[1], ids[3]]).unwrap();
        for &x in &ids {
            assert_eq!(
                reg.fractional_cost(&y, x).unwrap(),
                reg.assignment_cost(&centers, x).unwrap()
            );
        }
    }

    #[test]
    fn aspect_ratio_examples() {
        let (reg, _) = line(&[0.0, 1.0, 5.0]);
        assert_eq!(reg.aspect_ratio().unwrap(), 5.0);
        let (reg, _) = line(&[0.0, 4.0]);
        assert_eq!(reg.aspect_ratio().unwrap(), 1.0);
        let mut sq = MetricRegistry::euclidean(2);
        for p in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            sq.insert(&p).unwrap();
        }
        assert!((sq.aspect_ratio().unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let (single, _) = line(&[3.0]);
        assert!(single.aspect_ratio().is_err());
        let m = MetricRegistry::from_matrix(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(m.aspect_ratio().is_err());
    }

    #[test]
    fn distinct_collapses_zero_distance() {
        let m = MetricRegistry::from_matrix(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(
            m.distinct(&[PointId(2), PointId(1), PointId(0), PointId(2)]),
            vec![PointId(0), PointId(2)]
        );
    }
}
