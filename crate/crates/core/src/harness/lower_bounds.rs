//! Adversarial streams on explicit metrics.
//!
//! * [`DetAdversary`]: `k + 1` two-point clusters; every round omits one cluster and
//!   always includes one the learner left uncovered.
//! * [`RandLowerBound`]: `k` star clusters, two random leaves per cluster per round,
//!   then all centers plus a leaf in the last round.
//! * [`AdditiveLowerBound`]: `k` clusters revealed one per round.
//! * [`FtlTree`]: a two-level star tree with geometrically shrinking edges and phases
//!   of geometrically growing length, hard for approximate follow-the-leader.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::generators::{Ground, RoundStream};

fn clustered_matrix(sizes: &[usize], intra: impl Fn(usize, usize) -> f64, delta: f64) -> Vec<Vec<f64>> {
    let mut label = Vec::new();
    let mut local = Vec::new();
    for (c, &s) in sizes.iter().enumerate() {
        for i in 0..s {
            label.push(c);
            local.push(i);
        }
    }
    let n = label.len();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    if a == b {
                        0.0
                    } else if label[a] == label[b] {
                        intra(local[a], local[b])
                    } else {
                        delta
                    }
                })
                .collect()
        })
        .collect()
}

/// Adaptive adversary against deterministic learners.
///
/// Cluster `c` holds ground points `2c` and `2c + 1` at distance 1; clusters are `Δ`
/// apart. Round 0 is the whole space. Afterwards `V_t` is every cluster except one:
/// the omitted cluster is the one omitted most often so far (lowest index on ties),
/// skipping the lowest-index cluster that `Y_t` leaves uncovered.
pub struct DetAdversary {
    k: usize,
    horizon: usize,
    ground: Ground,
    omitted: Vec<usize>,
    history: Vec<usize>,
}

impl DetAdversary {
    pub fn new(k: usize, delta: f64, horizon: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let matrix = clustered_matrix(&vec![2; k + 1], |_, _| 1.0, delta);
        Ok(Self {
            k,
            horizon,
            ground: Ground::Explicit { matrix },
            omitted: vec![0; k + 1],
            history: Vec::new(),
        })
    }

    /// Times each cluster has been omitted.
    pub fn omission_counts(&self) -> &[usize] {
        &self.omitted
    }

    /// Omitted cluster of each round `1..`.
    pub fn history(&self) -> &[usize] {
        &self.history
    }

    pub fn cluster_of(index: usize) -> usize {
        index / 2
    }
}

impl RoundStream for DetAdversary {
    fn name(&self) -> &str {
        "lb_det"
    }

    fn ground(&self) -> &Ground {
        &self.ground
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn adaptive(&self) -> bool {
        true
    }

    fn round(&mut self, t: usize, announced: Option<&[usize]>) -> Vec<usize> {
        let clusters = self.k + 1;
        if t == 0 {
            return (0..2 * clusters).collect();
        }
        let mut covered = vec![false; clusters];
        for &i in announced.unwrap_or(&[]) {
            covered[Self::cluster_of(i)] = true;
        }
        let uncovered = covered.iter().position(|&c| !c).unwrap_or(0);
        let omit = (0..clusters)
            .filter(|&c| c != uncovered)
            .fold(None, |best: Option<usize>, c| match best {
                Some(b) if self.omitted[b] >= self.omitted[c] => Some(b),
                _ => Some(c),
            })
            .expect("at least two clusters");
        self.omitted[omit] += 1;
        self.history.push(omit);
        (0..2 * clusters).filter(|&i| Self::cluster_of(i) != omit).collect()
    }

    fn region(&self, index: usize) -> Option<usize> {
        Some(Self::cluster_of(index))
    }

    fn region_count(&self) -> usize {
        self.k + 1
    }
}

/// Star clusters against randomized learners.
///
/// Cluster `c` occupies ground points `c·m .. (c+1)·m`; the first is the star center,
/// the rest are leaves at distance 1 from it and 2 from each other.
pub struct RandLowerBound {
    k: usize,
    m: usize,
    horizon: usize,
    ground: Ground,
    rng: ChaCha8Rng,
}

impl RandLowerBound {
    pub fn new(k: usize, m: usize, delta: f64, horizon: usize, seed: u64) -> Result<Self> {
        if m < 3 {
            return Err(Error::Config("star clusters need at least two leaves".into()));
        }
        let matrix = clustered_matrix(&vec![m; k], |a, b| if a == 0 || b == 0 { 1.0 } else { 2.0 }, delta);
        Ok(Self {
            k,
            m,
            horizon,
            ground: Ground::Explicit { matrix },
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn centers(&self) -> Vec<usize> {
        (0..self.k).map(|c| c * self.m).collect()
    }
}

impl RoundStream for RandLowerBound {
    fn name(&self) -> &str {
        "lb_rand"
    }

    fn ground(&self) -> &Ground {
        &self.ground
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn round(&mut self, t: usize, _announced: Option<&[usize]>) -> Vec<usize> {
        let (k, m) = (self.k, self.m);
        if t == 0 {
            return (0..k * m).filter(|i| i % m != 0).collect();
        }
        if t == self.horizon {
            let mut v = self.centers();
            let c = self.rng.random_range(0..k);
            v.push(c * m + self.rng.random_range(1..m));
            return v;
        }
        let mut v = Vec::with_capacity(2 * k);
        for c in 0..k {
            for i in sample(&mut self.rng, m - 1, 2) {
                v.push(c * m + 1 + i);
            }
        }
        v
    }

    fn region(&self, index: usize) -> Option<usize> {
        Some(index / self.m)
    }

    fn region_count(&self) -> usize {
        self.k
    }

    fn reference_solution(&self) -> Option<Vec<usize>> {
        Some(self.centers())
    }
}

/// `k` clusters of `m` points (unit distances inside, `Δ` across), cluster `t` in round `t`.
pub struct AdditiveLowerBound {
    k: usize,
    m: usize,
    ground: Ground,
}

impl AdditiveLowerBound {
    pub fn new(k: usize, m: usize, delta: f64) -> Result<Self> {
        if k < 2 || m < k + 1 {
            return Err(Error::Config("lb_additive needs k >= 2 and m > k".into()));
        }
        let matrix = clustered_matrix(&vec![m; k], |_, _| 1.0, delta);
        Ok(Self {
            k,
            m,
            ground: Ground::Explicit { matrix },
        })
    }
}

impl RoundStream for AdditiveLowerBound {
    fn name(&self) -> &str {
        "lb_additive"
    }

    fn ground(&self) -> &Ground {
        &self.ground
    }

    fn horizon(&self) -> usize {
        self.k - 1
    }

    fn round(&mut self, t: usize, _announced: Option<&[usize]>) -> Vec<usize> {
        (t * self.m..(t + 1) * self.m).collect()
    }

    fn region(&self, index: usize) -> Option<usize> {
        Some(index / self.m)
    }

    fn region_count(&self) -> usize {
        self.k
    }

    fn active_region(&self, t: usize) -> Option<usize> {
        Some(t)
    }

    fn reference_solution(&self) -> Option<Vec<usize>> {
        Some((0..self.k).map(|c| c * self.m).collect())
    }
}

/// `Σ_{h=1}^{2λ} λ^h T_0`.
pub fn ftl_horizon(lambda: usize, t0: usize) -> usize {
    (1..=2 * lambda as u32).map(|h| lambda.pow(h) * t0).sum()
}

/// Two-level star tree.
///
/// Ground index 0 is the root `r`, `1..=2λ` are `v_1 … v_{2λ}`, and the children of
/// `v_i` are `2λ + 2i - 1` and `2λ + 2i`. The edge `(r, v_i)` has length
/// `Δ_i = Δ / λ^i` with `Δ = λ^(2λ+1)`; child edges have length 1. Phase `h` lasts
/// `T_h = λ^h T_0` rounds, each presenting the two children of `v_h`.
pub struct FtlTree {
    lambda: usize,
    t0: usize,
    ground: Ground,
    phase_starts: Vec<usize>,
}

impl FtlTree {
    pub fn new(lambda: usize, t0: usize) -> Result<Self> {
        if lambda < 2 || t0 == 0 {
            return Err(Error::Config("lb_ftl needs lambda >= 2 and t0 >= 1".into()));
        }
        let phases = 2 * lambda;
        let n = 1 + 3 * phases;
        let delta = Self::delta_for(lambda);
        // (branch, distance to root)
        let node = |i: usize| -> (usize, f64) {
            if i == 0 {
                (0, 0.0)
            } else if i <= phases {
                (i, delta / (lambda as f64).powi(i as i32))
            } else {
                let b = (i - phases).div_ceil(2);
                (b, delta / (lambda as f64).powi(b as i32) + 1.0)
            }
        };
        let matrix = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let ((ba, da), (bb, db)) = (node(a), node(b));
                        if a == b {
                            0.0
                        } else if ba == bb && ba != 0 {
                            // same branch: parent-child is 1, siblings are 2
                            if a <= phases || b <= phases {
                                1.0
                            } else {
                                2.0
                            }
                        } else {
                            da + db
                        }
                    })
                    .collect()
            })
            .collect();
        let mut phase_starts = Vec::with_capacity(phases + 1);
        let mut at = 1;
        for h in 1..=phases {
            phase_starts.push(at);
            at += lambda.pow(h as u32) * t0;
        }
        phase_starts.push(at);
        Ok(Self {
            lambda,
            t0,
            ground: Ground::Explicit { matrix },
            phase_starts,
        })
    }

    pub fn delta_for(lambda: usize) -> f64 {
        (lambda as f64).powi(2 * lambda as i32 + 1)
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn delta(&self) -> f64 {
        Self::delta_for(self.lambda)
    }

    /// `Δ_h` for `h = 1..=2λ`.
    pub fn edge_length(&self, h: usize) -> f64 {
        self.delta() / (self.lambda as f64).powi(h as i32)
    }

    /// `T_h` for `h = 1..=2λ`.
    pub fn phase_length(&self, h: usize) -> usize {
        self.lambda.pow(h as u32) * self.t0
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    /// Phase of round `t ≥ 1`.
    pub fn phase_of(&self, t: usize) -> usize {
        self.phase_starts
            .iter()
            .rposition(|&s| s <= t)
            .map_or(1, |i| i + 1)
            .min(2 * self.lambda)
    }

    pub fn children(&self, h: usize) -> [usize; 2] {
        let p = 2 * self.lambda;
        [p + 2 * h - 1, p + 2 * h]
    }
}

impl RoundStream for FtlTree {
    fn name(&self) -> &str {
        "lb_ftl"
    }

    fn ground(&self) -> &Ground {
        &self.ground
    }

    fn horizon(&self) -> usize {
        ftl_horizon(self.lambda, self.t0)
    }

    fn round(&mut self, t: usize, _announced: Option<&[usize]>) -> Vec<usize> {
        if t == 0 {
            return (0..self.ground.len()).collect();
        }
        self.children(self.phase_of(t)).to_vec()
    }

    fn region(&self, index: usize) -> Option<usize> {
        let p = 2 * self.lambda;
        Some(match index {
            0 => 0,
            i if i <= p => i,
            i => (i - p).div_ceil(2),
        })
    }

    fn region_count(&self) -> usize {
        2 * self.lambda + 1
    }

    fn active_region(&self, t: usize) -> Option<usize> {
        (t > 0).then(|| self.phase_of(t))
    }

    /// `v_{h-1}` during phases `h ≥ λ + 3`.
    fn preferred_center(&self, t: usize) -> Option<usize> {
        let h = self.phase_of(t);
        (t > 0 && h >= self.lambda + 3).then_some(h - 1)
    }

    fn reference_solution(&self) -> Option<Vec<usize>> {
        Some(vec![0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricRegistry;

    #[test]
    fn det_adversary_never_omits_uncovered_cluster() {
        let mut s = DetAdversary::new(3, 100.0, 50).unwrap();
        assert_eq!(s.round(0, None).len(), 8);
        let announced = [0usize, 2, 4];
        for t in 1..=20 {
            let v = s.round(t, Some(&announced));
            assert_eq!(v.len(), 6);
            // cluster 3 is uncovered and must be present
            assert!(v.contains(&6) && v.contains(&7));
        }
        // omissions concentrate on one cluster
        assert_eq!(s.omission_counts(), &[20, 0, 0, 0]);
        MetricRegistry::from_matrix(match s.ground() {
            Ground::Explicit { matrix } => matrix,
            _ => unreachable!(),
        })
        .unwrap();
    }

    #[test]
    fn det_adversary_moves_when_omitted_cluster_is_uncovered() {
        let mut s = DetAdversary::new(2, 10.0, 5).unwrap();
        s.round(0, None);
        // Y covers clusters 1 and 2, cluster 0 uncovered
        s.round(1, Some(&[2, 4]));
        assert_eq!(s.history(), &[1]);
        // Y covers clusters 0 and 2, so cluster 1 is uncovered and must stay
        s.round(2, Some(&[0, 4]));
        assert_eq!(s.history(), &[1, 0]);
    }

    #[test]
    fn rand_lb_shapes() {
        let mut s = RandLowerBound::new(3, 6, 100.0, 10, 4).unwrap();
        let v0 = s.round(0, None);
        assert_eq!(v0.len(), 15);
        assert!(v0.iter().all(|i| i % 6 != 0));
        for t in 1..10 {
            let v = s.round(t, None);
            assert_eq!(v.len(), 6);
            for c in 0..3 {
                assert_eq!(v.iter().filter(|&&i| i / 6 == c && i % 6 != 0).count(), 2);
            }
        }
        let last = s.round(10, None);
        assert_eq!(last.len(), 4);
        assert_eq!(&last[..3], &[0, 6, 12]);
        assert!(last[3] % 6 != 0);
        let Ground::Explicit { matrix } = s.ground() else {
            panic!()
        };
        assert_eq!(matrix[0][1], 1.0);
        assert_eq!(matrix[1][2], 2.0);
        assert_eq!(matrix[1][7], 100.0);
        MetricRegistry::from_matrix(matrix).unwrap();
    }

    #[test]
    fn additive_lb_shapes() {
        let mut s = AdditiveLowerBound::new(4, 6, 50.0).unwrap();
        assert_eq!(s.ground().len(), 24);
        assert_eq!(s.horizon(), 3);
        for t in 0..=3 {
            let v = s.round(t, None);
            assert_eq!(v.len(), 6);
            assert!(v.iter().all(|&i| s.region(i) == Some(t)));
        }
    }

    #[test]
    fn ftl_tree_identities() {
        let s = FtlTree::new(4, 5).unwrap();
        assert_eq!(s.delta(), 262_144.0);
        for h in 1..=8 {
            assert_eq!(s.phase_length(h) as f64 * s.edge_length(h), 5.0 * s.delta());
        }
        assert_eq!(s.horizon(), 436_900);
        assert_eq!(s.phase_of(1), 1);
        assert_eq!(s.phase_of(20), 1);
        assert_eq!(s.phase_of(21), 2);
        assert_eq!(s.phase_of(436_900), 8);
        assert_eq!(s.preferred_center(1), None);
        let start7: usize = 1 + (1..=6).map(|h| s.phase_length(h)).sum::<usize>();
        assert_eq!(s.preferred_center(start7 - 1), None);
        assert_eq!(s.preferred_center(start7), Some(6));
        let Ground::Explicit { matrix } = s.ground() else {
            panic!()
        };
        let reg = MetricRegistry::from_matrix(matrix).unwrap();
        let [a, b] = s.children(3);
        assert_eq!(matrix[a][b], 2.0);
        assert_eq!(matrix[0][a], s.edge_length(3) + 1.0);
        assert_eq!(reg.len(), 25);
    }
}
