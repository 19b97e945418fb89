//! Online learning of k-median solutions over a sequence of instances.
//!
//! Each round reveals a new set of points. The learner commits to `k` centers before
//! the round is shown and pays the cost of those centers divided by the round's
//! optimal cost. The pipeline has four stages:
//!
//! * [`reduction`] turns every raw round into at most `k` weighted points.
//! * [`omd`] runs mirror descent with the hyperbolic entropy over a capped simplex that
//!   grows as points are revealed.
//! * [`rounding`] converts the fractional iterate into an integral center set.
//! * [`offline`] supplies exact and local-search solvers for per-round optima and
//!   hindsight benchmarks.
//!
//! [`harness`] wires these together with instance generators, adversarial streams and
//! CSV output.

pub mod error;
pub mod harness;
pub mod metric;
pub mod offline;
pub mod omd;
pub mod reduction;
pub mod rounding;

pub use error::{Error, Result};
pub use metric::{CenterSet, MetricMode, MetricRegistry, PointId, WeightedInstance};
pub use omd::{FractionalSolution, OmdState};
