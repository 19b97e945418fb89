//! Experiment harness: instance streams, the online driver, baselines and checks.

pub mod config;
pub mod ftl;
pub mod generators;
pub mod instance_io;
pub mod lower_bounds;
pub mod output;
pub mod runner;
pub mod verify;
