//! Campaign runner for diversity-aware batch generation: hosted and
//! simulated backends, the persistent memory store, checkpointed campaigns,
//! analysis reports and the `dce` command line.

pub mod analysis;
pub mod backend;
pub mod baseline;
pub mod cli;
pub mod embedder;
pub mod generator;
pub mod pipeline;
pub mod rundir;
pub mod settings;
pub mod store;
pub mod sweep;
