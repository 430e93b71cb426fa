//! Configuration-driven experiment sweeps.
//!
//! A sweep is a grid of (dimension, seed) cells. Each cell runs Split-BOLFI
//! once with checkpoints at every budget and scores the proxies at every
//! tempering weight. Finished cells live in their own directory under
//! `output_dir/cells`, so an interrupted sweep resumes where it stopped.

mod cell;
mod commands;
mod config;

pub use cell::*;
pub use commands::*;
pub use config::*;
