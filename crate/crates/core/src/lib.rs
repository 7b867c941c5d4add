//! Coverage search planning for a UAV that is localized by the sensors of a
//! stationary UGV.
//!
//! The pipeline:
//!
//! 1. [`map`]: tunnel bounds, box obstacles, sensor fields of view.
//! 2. [`roadmap`]: PRM waypoints, k-nearest-neighbour edges, Eulerization.
//! 3. [`euler`]: randomized Eulerian circuits, all of equal length.
//! 4. [`ekf`] + [`planner`]: covariance propagation along each circuit and
//!    ranking by the summed position-covariance norm.
//! 5. [`montecarlo`]: truth simulation with execution jitter, synthetic
//!    measurements and an online filter to check the ranking.
//!
//! [`pipeline`] wires these together for the `covsearch` binary.

pub mod artifacts;
pub mod config;
pub mod ekf;
pub mod error;
pub mod euler;
pub mod geometry;
pub mod map;
pub mod montecarlo;
pub mod pipeline;
pub mod planner;
pub mod roadmap;
pub mod seed;
pub mod svg;
pub mod trajectory;

pub use error::{Error, Result};
pub use geometry::Vec3;
pub use map::{load_map, EnvironmentMap};
