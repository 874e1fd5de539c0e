//! Energy-aware frontier exploration for a simulated Mars coaxial quadrotor.
//!
//! The stack is deterministic and headless: a procedural lava-tube world and
//! synthetic lidar feed an occupancy map, frontiers are split into directly
//! and indirectly accessible sets, a risk-aware incremental planner routes to
//! the chosen frontier, a potential field keeps the reference clear of walls
//! and an NMPC tracks it on a simplified eight-state vehicle model.
//!
//! Numerical kernels are generic over [`Real`] (`f32`/`f64`); path costs are
//! generic over [`planner::PathCost`] so planner results can be checked in
//! exact rational arithmetic. The aliases below fix the scalar to `f64`.

pub mod apf;
pub mod control;
pub mod error;
pub mod frontier;
pub mod geom;
pub mod map;
pub mod mission;
pub mod planner;
pub mod scalar;
pub mod world;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec3 = geom::Vec3<f64>;
pub type Pose = geom::Pose<f64>;
pub type McqState = control::McqState<f64>;
pub type ControlInput = control::ControlInput<f64>;
pub type ModelParams = control::ModelParams<f64>;
pub type RotorParams = control::RotorParams<f64>;
pub type Wrench = control::Wrench<f64>;
pub type Nmpc = control::Nmpc<f64>;
pub type NmpcConfig = control::NmpcConfig<f64>;
pub type ForceState = apf::ForceState<f64>;
pub type RiskGrid = planner::RiskGrid<f64>;
pub type DStarLite = planner::DStarLite<f64>;
pub type PlannedPath = planner::PlannedPath<f64>;
