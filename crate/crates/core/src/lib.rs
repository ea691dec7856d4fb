//! Frontier-based exploration of 2D occupancy grids.

pub mod error;
pub mod frontier;
pub mod gridmap;
pub mod harness;
pub mod mapgen;
pub mod planner;
pub mod rl;
pub mod sensor;
pub mod sim;
pub mod strategies;
pub mod valuenet;

pub use error::{Error, Result};
