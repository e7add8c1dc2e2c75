//! Communication-free multi-robot navigation in 3D.
//!
//! Each robot builds a safe convex cell from what it senses (neighbors via
//! buffered Voronoi half-spaces, obstacles via an inflated corridor), moves
//! toward a density-weighted centroid of the visible part of that cell, and
//! tracks it with a small MPC. The [`sim`] module runs many such robots in
//! lockstep and reports the usual navigation metrics.

pub mod corridor;
pub mod ctl;
pub mod cwvd;
pub mod geom;
pub mod lloyd;
pub mod plan;
pub mod qp;
pub mod scalar;
pub mod sim;

pub use scalar::Scalar;

pub type Vec3 = geom::Vec3<f64>;
pub type HalfSpace = geom::HalfSpace<f64>;
pub type ConvexRegion = geom::ConvexRegion<f64>;
pub type FovSpec = geom::FovSpec<f64>;
pub type GridSampling = geom::GridSampling<f64>;
pub type RobotState = ctl::RobotState<f64>;
pub type MpcConfig = ctl::MpcConfig<f64>;
pub type RuleState = lloyd::RuleState<f64>;
pub type RuleParams = lloyd::RuleParams<f64>;
