//! Experiment configuration: presets, partial overrides from files or flags, validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduction::ReductionSolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum GeneratorKind {
    UniformSquare,
    UniformRectangle,
    MultipleClusters,
    Hypersphere,
    Oscillating,
    ScaleChanging,
    SmallDrift,
    File,
    LbDet,
    LbRand,
    LbAdditive,
    LbFtl,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::UniformSquare => "uniform_square",
            Self::UniformRectangle => "uniform_rectangle",
            Self::MultipleClusters => "multiple_clusters",
            Self::Hypersphere => "hypersphere",
            Self::Oscillating => "oscillating",
            Self::ScaleChanging => "scale_changing",
            Self::SmallDrift => "small_drift",
            Self::File => "file",
            Self::LbDet => "lb_det",
            Self::LbRand => "lb_rand",
            Self::LbAdditive => "lb_additive",
            Self::LbFtl => "lb_ftl",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RoundingChoice {
    Det,
    Rand,
    #[default]
    Both,
}

impl RoundingChoice {
    pub fn det(self) -> bool {
        matches!(self, Self::Det | Self::Both)
    }

    pub fn rand(self) -> bool {
        matches!(self, Self::Rand | Self::Both)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum BenchmarkSolver {
    #[default]
    Exact,
    LocalSearch,
}

/// Parameter scale: the published sizes, or smaller ones that finish in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Desk,
    Paper,
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: GeneratorKind,
    pub preset: Preset,
    pub k: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub points_per_round: usize,
    pub ground_size: usize,
    pub dim: usize,
    pub seed: u64,
    pub rounding: RoundingChoice,
    pub simplex_only: bool,
    pub heuristic_threshold: bool,
    pub benchmark: BenchmarkSolver,
    pub reduction: ReductionSolver,
    pub pad: bool,
    pub rand_repeats: usize,
    pub delta: f64,
    pub lambda: usize,
    pub t0: usize,
    pub cluster_size: usize,
    pub drift: f64,
    pub reveal_round: usize,
    pub dynamic_benchmark: bool,
    pub input: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Preset values for `generator`.
    pub fn preset(generator: GeneratorKind, preset: Preset) -> Self {
        use GeneratorKind::*;
        let paper = preset == Preset::Paper;
        let mut c = Self {
            generator,
            preset,
            k: 3,
            horizon: 300,
            points_per_round: 10,
            ground_size: 100,
            dim: 2,
            seed: 1,
            rounding: RoundingChoice::Both,
            simplex_only: true,
            heuristic_threshold: true,
            benchmark: BenchmarkSolver::Exact,
            reduction: ReductionSolver::Auto,
            pad: true,
            rand_repeats: 5,
            delta: 100.0,
            lambda: 4,
            t0: 5,
            cluster_size: 10,
            drift: 0.02,
            reveal_round: 100,
            dynamic_benchmark: matches!(generator, Oscillating | ScaleChanging),
            input: None,
            output_path: None,
        };
        match generator {
            UniformSquare | UniformRectangle => {
                if paper {
                    c.ground_size = 400;
                    c.horizon = 1000;
                }
            }
            MultipleClusters => {
                c.k = 4;
                c.ground_size = if paper { 400 } else { 40 };
                c.points_per_round = if paper { 20 } else { 10 };
                c.horizon = if paper { 1000 } else { 200 };
            }
            Hypersphere => {
                c.k = 1;
                c.ground_size = if paper { 400 } else { 100 };
                c.horizon = if paper { 2000 } else { 300 };
            }
            Oscillating | ScaleChanging => {
                c.k = 1;
                c.horizon = 243;
                c.points_per_round = 10;
                c.ground_size = if generator == Oscillating { 20 } else { 50 };
            }
            SmallDrift => {
                c.k = if paper { 3 } else { 2 };
                c.horizon = if paper { 250 } else { 100 };
                c.points_per_round = 5;
                c.cluster_size = 10;
                c.drift = 0.02;
            }
            File => {}
            LbDet => {
                c.horizon = 500;
                c.rounding = RoundingChoice::Det;
                c.ground_size = 2 * (c.k + 1);
            }
            LbRand => {
                c.horizon = 200;
                c.ground_size = c.k * c.cluster_size;
            }
            LbAdditive => {
                c.horizon = c.k - 1;
                c.ground_size = c.k * c.cluster_size;
            }
            LbFtl => {
                c.k = 1;
                c.horizon = super::lower_bounds::ftl_horizon(c.lambda, c.t0);
                c.ground_size = 1 + 6 * c.lambda;
            }
        }
        c
    }

    /// Preset for `overrides.generator`, then every field set in `overrides`.
    pub fn from_overrides(overrides: &ConfigOverrides) -> Result<Self> {
        let generator = overrides
            .generator
            .ok_or_else(|| Error::Config("generator is required".into()))?;
        let mut c = Self::preset(generator, overrides.preset.unwrap_or_default());
        overrides.apply(&mut c);
        // sizes that follow from other parameters
        match c.generator {
            GeneratorKind::LbDet if overrides.ground_size.is_none() => c.ground_size = 2 * (c.k + 1),
            GeneratorKind::LbRand | GeneratorKind::LbAdditive if overrides.ground_size.is_none() => {
                c.ground_size = c.k * c.cluster_size
            }
            _ => {}
        }
        if c.generator == GeneratorKind::LbAdditive && overrides.horizon.is_none() {
            c.horizon = c.k.saturating_sub(1);
        }
        if c.generator == GeneratorKind::LbFtl {
            c.horizon = super::lower_bounds::ftl_horizon(c.lambda, c.t0);
            c.ground_size = 1 + 6 * c.lambda;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        use GeneratorKind::*;
        let bad = |m: String| Err(Error::Config(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("T must be at least 1".into());
        }
        if self.rand_repeats == 0 {
            return bad("rand_repeats must be at least 1".into());
        }
        match self.generator {
            UniformSquare | UniformRectangle | MultipleClusters | Hypersphere => {
                if self.points_per_round > self.ground_size {
                    return bad(format!(
                        "points_per_round {} exceeds ground_size {}",
                        self.points_per_round, self.ground_size
                    ));
                }
                if self.points_per_round < self.k + 1 {
                    return bad("points_per_round must exceed k".into());
                }
                if self.dim == 0 {
                    return bad("dim must be positive".into());
                }
                if self.generator == MultipleClusters && self.ground_size < self.k {
                    return bad("multiple_clusters needs at least one point per cluster".into());
                }
            }
            Oscillating | ScaleChanging => {
                if self.cluster_size < self.k + 1 {
                    return bad("cluster_size must exceed k".into());
                }
            }
            SmallDrift => {
                if self.points_per_round > self.cluster_size || self.points_per_round < self.k + 1 {
                    return bad("small_drift needs k < points_per_round <= cluster_size".into());
                }
            }
            File => {
                if self.input.is_none() {
                    return bad("generator file needs an input path".into());
                }
            }
            LbDet | LbRand | LbAdditive => {
                if !(self.delta > 2.0 && self.delta.is_finite()) {
                    return bad("delta must be finite and larger than 2".into());
                }
                if self.generator != LbDet && self.cluster_size < self.k + 1 {
                    return bad("cluster_size must exceed k".into());
                }
                if self.generator == LbAdditive && self.k < 2 {
                    return bad("lb_additive needs k >= 2".into());
                }
            }
            LbFtl => {
                if self.k != 1 {
                    return bad("lb_ftl is defined for k = 1".into());
                }
                if self.lambda < 2 || self.t0 == 0 {
                    return bad("lb_ftl needs lambda >= 2 and t0 >= 1".into());
                }
            }
        }
        Ok(())
    }
}

/// Every configuration field as optional, for config files and command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigOverrides {
    #[arg(long, value_enum)]
    pub generator: Option<GeneratorKind>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub k: Option<usize>,
    #[serde(rename = "T")]
    #[arg(long = "T", id = "T")]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub points_per_round: Option<usize>,
    #[arg(long)]
    pub ground_size: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub rounding: Option<RoundingChoice>,
    #[arg(long)]
    pub simplex_only: Option<bool>,
    #[arg(long)]
    pub heuristic_threshold: Option<bool>,
    #[arg(long, value_enum)]
    pub benchmark: Option<BenchmarkSolver>,
    #[arg(long, value_enum)]
    pub reduction: Option<ReductionSolver>,
    #[arg(long)]
    pub pad: Option<bool>,
    #[arg(long)]
    pub rand_repeats: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<usize>,
    #[arg(long)]
    pub t0: Option<usize>,
    #[arg(long)]
    pub cluster_size: Option<usize>,
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub reveal_round: Option<usize>,
    #[arg(long)]
    pub dynamic_benchmark: Option<bool>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[serde(alias = "out")]
    #[arg(long = "out")]
    pub output_path: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($dst:expr, $src:expr; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ConfigOverrides {
    /// Parses a TOML or JSON file; JSON is recognized by a leading `{`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Ok(serde_json::from_str(text)?)
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merged_with(mut self, other: &ConfigOverrides) -> Self {
        merge_fields!(self, other; generator, preset, k, horizon, points_per_round, ground_size,
            dim, seed, rounding, simplex_only, heuristic_threshold, benchmark, reduction, pad,
            rand_repeats, delta, lambda, t0, cluster_size, drift, reveal_round, dynamic_benchmark,
            input, output_path);
        self
    }

    fn apply(&self, c: &mut ExperimentConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        set!(
            k,
            horizon,
            points_per_round,
            ground_size,
            dim,
            seed,
            rounding,
            simplex_only,
            heuristic_threshold,
            benchmark,
            reduction,
            pad,
            rand_repeats,
            delta,
            lambda,
            t0,
            cluster_size,
            drift,
            reveal_round,
            dynamic_benchmark
        );
        if self.input.is_some() {
            c.input = self.input.clone();
        }
        if self.output_path.is_some() {
            c.output_path = self.output_path.clone();
        }
    }
}
