//! Synthetic round streams.
//!
//! Every generator materializes its full ground set from the seed up front, so the
//! metric, the per-round optima and the registry agree bit-for-bit across reruns.
//! Rounds are lists of ground indices.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::metric::MetricRegistry;

use super::config::{ExperimentConfig, GeneratorKind};
use super::{instance_io, lower_bounds};

/// Salt separating the ground-set stream from the per-round sampling stream.
const ROUND_STREAM_SALT: u64 = 0x05EE_D0F2_00D5;

/// The full point set a stream draws from.
#[derive(Debug, Clone, PartialEq)]
pub enum Ground {
    Euclidean { dim: usize, points: Vec<Vec<f64>> },
    Explicit { matrix: Vec<Vec<f64>> },
}

impl Ground {
    pub fn len(&self) -> usize {
        match self {
            Ground::Euclidean { points, .. } => points.len(),
            Ground::Explicit { matrix } => matrix.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Empty Euclidean registry, or the whole explicit metric (ids equal ground indices).
    pub fn registry(&self) -> Result<MetricRegistry> {
        match self {
            Ground::Euclidean { dim, .. } => Ok(MetricRegistry::euclidean(*dim)),
            Ground::Explicit { matrix } => MetricRegistry::from_matrix(matrix),
        }
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        match self {
            Ground::Euclidean { points, .. } => crate::metric::euclidean_distance(&points[a], &points[b]),
            Ground::Explicit { matrix } => matrix[a][b],
        }
    }
}

/// A source of rounds `V_0, V_1, …, V_T`.
pub trait RoundStream {
    fn name(&self) -> &str;

    fn ground(&self) -> &Ground;

    /// `T`; rounds `0..=T` are emitted.
    fn horizon(&self) -> usize;

    /// `V_t` as ground indices. `announced` is the learner's `Y_t` (ground indices) when
    /// the stream is adaptive and `t ≥ 1`.
    fn round(&mut self, t: usize, announced: Option<&[usize]>) -> Vec<usize>;

    /// Whether `round` needs the announced centers.
    fn adaptive(&self) -> bool {
        false
    }

    /// Region label of a ground point, used for mass tracking.
    fn region(&self, _index: usize) -> Option<usize> {
        None
    }

    fn region_count(&self) -> usize {
        0
    }

    /// Region all of `V_t` comes from, for streams that present one region at a time.
    fn active_region(&self, _t: usize) -> Option<usize> {
        None
    }

    /// Center an approximate follow-the-leader learner should prefer at round `t`.
    fn preferred_center(&self, _t: usize) -> Option<usize> {
        None
    }

    /// A fixed comparison solution defined by the construction.
    fn reference_solution(&self) -> Option<Vec<usize>> {
        None
    }
}

fn round_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ ROUND_STREAM_SALT)
}

/// Draws a fixed number of ground points per round, without replacement, from a pool.
pub struct SampledStream {
    name: String,
    ground: Ground,
    horizon: usize,
    per_round: usize,
    pool: Vec<usize>,
    rng: ChaCha8Rng,
    regions: Option<(Vec<usize>, usize)>,
    // (round, ground index) added to that round only
    extra: Option<(usize, usize)>,
}

impl SampledStream {
    pub fn new(name: &str, ground: Ground, horizon: usize, per_round: usize, seed: u64) -> Result<Self> {
        let pool: Vec<usize> = (0..ground.len()).collect();
        if per_round > pool.len() {
            return Err(Error::Config(format!(
                "points_per_round {per_round} exceeds ground size {}",
                pool.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            ground,
            horizon,
            per_round,
            pool,
            rng: round_rng(seed),
            regions: None,
            extra: None,
        })
    }

    fn with_regions(mut self, labels: Vec<usize>, count: usize) -> Self {
        self.regions = Some((labels, count));
        self
    }
}

impl RoundStream for SampledStream {
    fn name(&self) -> &str {
        &self.name
    }

    fn ground(&self) -> &Ground {
        &self.ground
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn round(&mut self, t: usize, _announced: Option<&[usize]>) -> Vec<usize> {
        let mut out: Vec<usize> = sample(&mut self.rng, self.pool.len(), self.per_round)
            .into_iter()
            .map(|i| self.pool[i])
            .collect();
        if let Some((at, idx)) = self.extra {
            if at == t {
                out.push(idx);
            }
        }
        out
    }

    fn region(&self, index: usize) -> Option<usize> {
        self.regions.as_ref().map(|(l, _)| l[index])
    }

    fn region_count(&self) -> usize {
        self.regions.as_ref().map_or(0, |r| r.1)
    }
}

/// `points` uniform in `[0, width] × [0, height]`.
pub fn uniform_box(cfg: &ExperimentConfig, width: f64, height: f64) -> Result<SampledStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let points = (0..cfg.ground_size)
        .map(|_| vec![rng.random::<f64>() * width, rng.random::<f64>() * height])
        .collect();
    let name = if height == width {
        "uniform_square"
    } else {
        "uniform_rectangle"
    };
    SampledStream::new(
        name,
        Ground::Euclidean { dim: 2, points },
        cfg.horizon,
        cfg.points_per_round,
        cfg.seed,
    )
}

fn in_disc(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let r = radius * rng.random::<f64>().sqrt();
    let a = std::f64::consts::TAU * rng.random::<f64>();
    vec![center[0] + r * a.cos(), center[1] + r * a.sin()]
}

/// `k` cluster centers uniform in the unit square, points uniform in a disc of radius
/// 0.05 around each, about `ground_size` points in total.
pub fn multiple_clusters(cfg: &ExperimentConfig) -> Result<SampledStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centers: Vec<Vec<f64>> = (0..cfg.k).map(|_| vec![rng.random(), rng.random()]).collect();
    let per = (cfg.ground_size / cfg.k).max(1);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per {
            points.push(in_disc(&mut rng, center, 0.05));
            labels.push(c);
        }
    }
    Ok(SampledStream::new(
        "multiple_clusters",
        Ground::Euclidean { dim: 2, points },
        cfg.horizon,
        cfg.points_per_round,
        cfg.seed,
    )?
    .with_regions(labels, cfg.k))
}

/// Points on the unit sphere in `dim` dimensions; the origin joins round `reveal_round`
/// only. Region 0 is the origin, region 1 the sphere.
pub fn hypersphere(cfg: &ExperimentConfig) -> Result<SampledStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_sphere = cfg.ground_size.saturating_sub(1);
    let mut points = Vec::with_capacity(cfg.ground_size);
    for _ in 0..n_sphere {
        let mut v: Vec<f64> = (0..cfg.dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        points.push(v);
    }
    points.push(vec![0.0; cfg.dim]);
    let origin = n_sphere;
    let mut labels = vec![1; n_sphere];
    labels.push(0);
    let mut s = SampledStream::new(
        "hypersphere",
        Ground::Euclidean { dim: cfg.dim, points },
        cfg.horizon,
        cfg.points_per_round,
        cfg.seed,
    )?
    .with_regions(labels, 2);
    s.pool = (0..n_sphere).collect();
    s.extra = Some((cfg.reveal_round, origin));
    if cfg.points_per_round > n_sphere {
        return Err(Error::Config("points_per_round exceeds the sphere sample".into()));
    }
    Ok(s)
}

/// Last round of each batch: `3, 9, 27, …` capped at `horizon`.
pub fn batch_ends(horizon: usize) -> Vec<usize> {
    let mut ends = Vec::new();
    let mut e = 3usize;
    loop {
        if e >= horizon {
            ends.push(horizon);
            break;
        }
        ends.push(e);
        e *= 3;
    }
    ends
}

/// Index of the batch containing round `t ≥ 1`; round 0 belongs to batch 0.
pub fn batch_of(t: usize, ends: &[usize]) -> usize {
    ends.iter().position(|&e| t <= e).unwrap_or(ends.len() - 1)
}

/// Whole clusters presented in batches of geometrically growing length.
pub struct BatchStream {
    name: String,
    ground: Ground,
    horizon: usize,
    clusters: Vec<Vec<usize>>,
    ends: Vec<usize>,
    cluster_of_batch: fn(usize, usize) -> usize,
}

impl BatchStream {
    pub fn cluster_at(&self, t: usize) -> usize {
        (self.cluster_of_batch)(batch_of(t, &self.ends), self.clusters.len())
    }

    pub fn batch_ends(&self) -> &[usize] {
        &self.ends
    }
}

impl RoundStream for BatchStream {
    fn name(&self) -> &str {
        &self.name
    }

    fn ground(&self) -> &Ground {
        &self.ground
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn round(&mut self, t: usize, _announced: Option<&[usize]>) -> Vec<usize> {
        self.clusters[self.cluster_at(t)].clone()
    }

    fn region(&self, index: usize) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(&index))
    }

    fn region_count(&self) -> usize {
        self.clusters.len()
    }

    fn active_region(&self, t: usize) -> Option<usize> {
        Some(self.cluster_at(t))
    }
}

fn square_clusters(rng: &mut ChaCha8Rng, centers: &[(f64, f64)], size: usize) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let mut points = Vec::new();
    let mut clusters = Vec::new();
    for &(cx, cy) in centers {
        let mut members = Vec::new();
        for _ in 0..size {
            members.push(points.len());
            points.push(vec![
                cx + 0.4 * (rng.random::<f64>() - 0.5),
                cy + 0.4 * (rng.random::<f64>() - 0.5),
            ]);
        }
        clusters.push(members);
    }
    (points, clusters)
}

/// Two clusters in squares of side 0.4 at `(0,0)` and `(1,0)`, alternating by batch.
pub fn oscillating(cfg: &ExperimentConfig) -> Result<BatchStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (points, clusters) = square_clusters(&mut rng, &[(0.0, 0.0), (1.0, 0.0)], cfg.cluster_size);
    Ok(BatchStream {
        name: "oscillating".into(),
        ground: Ground::Euclidean { dim: 2, points },
        horizon: cfg.horizon,
        clusters,
        ends: batch_ends(cfg.horizon),
        cluster_of_batch: |b, n| b % n,
    })
}

/// Five clusters in squares of side 0.4 centered at `(⌊10^(i-1)⌋, 0)`, one per batch.
pub fn scale_changing(cfg: &ExperimentConfig) -> Result<BatchStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centers: Vec<(f64, f64)> = (0..5).map(|i| ((10f64.powi(i - 1)).floor(), 0.0)).collect();
    let (points, clusters) = square_clusters(&mut rng, &centers, cfg.cluster_size);
    Ok(BatchStream {
        name: "scale_changing".into(),
        ground: Ground::Euclidean { dim: 2, points },
        horizon: cfg.horizon,
        clusters,
        ends: batch_ends(cfg.horizon),
        cluster_of_batch: |b, n| b.min(n - 1),
    })
}

/// Each round draws `cluster_size` points in a unit disc whose center moves right by
/// `drift` per round; `points_per_round` of them arrive.
pub struct DriftStream {
    ground: Ground,
    horizon: usize,
    draws: usize,
    per_round: usize,
    rng: ChaCha8Rng,
}

pub const DRIFT_DISC_RADIUS: f64 = 1.0;

pub fn small_drift(cfg: &ExperimentConfig) -> Result<DriftStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut points = Vec::with_capacity((cfg.horizon + 1) * cfg.cluster_size);
    for t in 0..=cfg.horizon {
        let c = [cfg.drift * t as f64, 0.0];
        for _ in 0..cfg.cluster_size {
            points.push(in_disc(&mut rng, &c, DRIFT_DISC_RADIUS));
        }
    }
    Ok(DriftStream {
        ground: Ground::Euclidean { dim: 2, points },
        horizon: cfg.horizon,
        draws: cfg.cluster_size,
        per_round: cfg.points_per_round,
        rng: round_rng(cfg.seed),
    })
}

impl RoundStream for DriftStream {
    fn name(&self) -> &str {
        "small_drift"
    }

    fn ground(&self) -> &Ground {
        &self.ground
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn round(&mut self, t: usize, _announced: Option<&[usize]>) -> Vec<usize> {
        let base = t * self.draws;
        sample(&mut self.rng, self.draws, self.per_round)
            .into_iter()
            .map(|i| base + i)
            .collect()
    }
}

/// Rounds replayed from an instance file.
pub struct FileStream {
    ground: Ground,
    rounds: Vec<Vec<usize>>,
}

impl FileStream {
    pub fn new(ground: Ground, rounds: Vec<Vec<usize>>) -> Result<Self> {
        if rounds.len() < 2 {
            return Err(Error::Config(
                "instance file needs round 0 and at least one more".into(),
            ));
        }
        Ok(Self { ground, rounds })
    }
}

impl RoundStream for FileStream {
    fn name(&self) -> &str {
        "file"
    }

    fn ground(&self) -> &Ground {
        &self.ground
    }

    fn horizon(&self) -> usize {
        self.rounds.len() - 1
    }

    fn round(&mut self, t: usize, _announced: Option<&[usize]>) -> Vec<usize> {
        self.rounds[t].clone()
    }
}

/// The stream selected by `cfg.generator`.
pub fn build_stream(cfg: &ExperimentConfig) -> Result<Box<dyn RoundStream>> {
    use GeneratorKind::*;
    Ok(match cfg.generator {
        UniformSquare => Box::new(uniform_box(cfg, 1.0, 1.0)?),
        UniformRectangle => Box::new(uniform_box(cfg, 1.0, 10.0)?),
        MultipleClusters => Box::new(multiple_clusters(cfg)?),
        Hypersphere => Box::new(hypersphere(cfg)?),
        Oscillating => Box::new(oscillating(cfg)?),
        ScaleChanging => Box::new(scale_changing(cfg)?),
        SmallDrift => Box::new(small_drift(cfg)?),
        File => {
            let path = cfg
                .input
                .as_ref()
                .ok_or_else(|| Error::Config("generator file needs an input path".into()))?;
            let (ground, rounds) = instance_io::read_rounds(path)?;
            let mut s = FileStream::new(ground, rounds)?;
            if cfg.horizon < s.rounds.len() - 1 {
                s.rounds.truncate(cfg.horizon + 1);
            }
            Box::new(s)
        }
        LbDet => Box::new(lower_bounds::DetAdversary::new(cfg.k, cfg.delta, cfg.horizon)?),
        LbRand => Box::new(lower_bounds::RandLowerBound::new(
            cfg.k,
            cfg.cluster_size,
            cfg.delta,
            cfg.horizon,
            cfg.seed,
        )?),
        LbAdditive => Box::new(lower_bounds::AdditiveLowerBound::new(
            cfg.k,
            cfg.cluster_size,
            cfg.delta,
        )?),
        LbFtl => Box::new(lower_bounds::FtlTree::new(cfg.lambda, cfg.t0)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Preset;
    use crate::metric::euclidean_distance;

    fn cfg(g: GeneratorKind) -> ExperimentConfig {
        ExperimentConfig::preset(g, Preset::Desk)
    }

    #[test]
    fn uniform_square_is_seeded() {
        let c = cfg(GeneratorKind::UniformSquare);
        let mut a = uniform_box(&c, 1.0, 1.0).unwrap();
        let mut b = uniform_box(&c, 1.0, 1.0).unwrap();
        assert_eq!(a.ground(), b.ground());
        for t in 0..5 {
            let r = a.round(t, None);
            assert_eq!(r, b.round(t, None));
            assert_eq!(r.len(), 10);
        }
    }

    #[test]
    fn degenerate_uniform_square_repeats_everything() {
        let mut c = cfg(GeneratorKind::UniformSquare);
        c.ground_size = 10;
        let mut s = uniform_box(&c, 1.0, 1.0).unwrap();
        for t in 0..4 {
            let mut r = s.round(t, None);
            r.sort_unstable();
            assert_eq!(r, (0..10).collect::<Vec<_>>());
        }
        c.points_per_round = 11;
        assert!(uniform_box(&c, 1.0, 1.0).is_err());
    }

    #[test]
    fn batch_boundaries() {
        assert_eq!(batch_ends(243), vec![3, 9, 27, 81, 243]);
        let ends = batch_ends(243);
        assert_eq!(batch_of(0, &ends), 0);
        assert_eq!(batch_of(3, &ends), 0);
        assert_eq!(batch_of(4, &ends), 1);
        assert_eq!(batch_of(243, &ends), 4);
    }

    #[test]
    fn oscillating_alternates() {
        let c = cfg(GeneratorKind::Oscillating);
        let mut s = oscillating(&c).unwrap();
        assert_eq!(s.ground().len(), 20);
        for (t, want) in [(0, 0), (1, 0), (3, 0), (4, 1), (9, 1), (10, 0), (28, 1), (243, 0)] {
            let r = s.round(t, None);
            assert!(r.iter().all(|&i| s.region(i) == Some(want)), "round {t}");
            assert_eq!(s.active_region(t), Some(want));
        }
    }

    #[test]
    fn scale_changing_spreads_out() {
        let c = cfg(GeneratorKind::ScaleChanging);
        let mut s = scale_changing(&c).unwrap();
        assert!(s.round(1, None).iter().all(|&i| s.region(i) == Some(0)));
        assert_eq!(s.active_region(243), Some(4));
        // the diameter of the first i+1 clusters grows about 10x per cluster from the third on
        let Ground::Euclidean { points, .. } = s.ground().clone() else {
            panic!()
        };
        let mut diam = Vec::new();
        for cl in 0..5 {
            let seen = &points[..(cl + 1) * 10];
            let d = seen
                .iter()
                .flat_map(|a| seen.iter().map(move |b| euclidean_distance(a, b)))
                .fold(0.0, f64::max);
            diam.push(d);
        }
        for w in diam.windows(2).skip(1) {
            assert!(w[1] / w[0] > 5.0 && w[1] / w[0] < 20.0, "{diam:?}");
        }
    }

    #[test]
    fn hypersphere_reveals_origin_once() {
        let c = cfg(GeneratorKind::Hypersphere);
        let mut s = hypersphere(&c).unwrap();
        let origin = s.ground().len() - 1;
        for t in 0..=c.horizon {
            let r = s.round(t, None);
            assert_eq!(r.contains(&origin), t == c.reveal_round, "round {t}");
        }
        let Ground::Euclidean { points, .. } = s.ground() else {
            panic!()
        };
        for p in &points[..origin] {
            let n: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_moves_the_disc() {
        let mut c = cfg(GeneratorKind::SmallDrift);
        let s = small_drift(&c).unwrap();
        let Ground::Euclidean { points, .. } = s.ground() else {
            panic!()
        };
        let mean_x = |t: usize| points[t * 10..(t + 1) * 10].iter().map(|p| p[0]).sum::<f64>() / 10.0;
        // the disc centers are exactly 0.02 * T apart; the sample means roughly follow
        assert!((mean_x(c.horizon) - mean_x(0) - 0.02 * c.horizon as f64).abs() < 1.5);
        c.drift = 0.0;
        let s0 = small_drift(&c).unwrap();
        let Ground::Euclidean { points, .. } = s0.ground() else {
            panic!()
        };
        assert!(points.iter().all(|p| p[0].hypot(p[1]) <= DRIFT_DISC_RADIUS));
    }

    #[test]
    fn clusters_have_small_radius() {
        let c = cfg(GeneratorKind::MultipleClusters);
        let s = multiple_clusters(&c).unwrap();
        assert_eq!(s.region_count(), 4);
        let n = s.ground().len();
        for a in 0..n {
            for b in 0..n {
                if s.region(a) == s.region(b) {
                    assert!(s.ground().distance(a, b) <= 0.1 + 1e-12);
                }
            }
        }
    }
}
