//! Edge-density dynamics on directed multigraphs: model families, an RK4
//! integrator with invariant monitors, sampled class checkers and sup-norm ray
//! diagnostics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkers;
pub mod error;
pub mod generate;
pub mod graph;
pub mod models;
pub mod ray;
pub mod sim;

pub use checkers::{
    CheckConfig, CheckReport, Property, ScanConfig, ScanReport, Verdict, Violation,
};
pub use error::{Error, Result};
pub use nalgebra::DMatrix;
pub use graph::{canonical_edge_order, DensityVector, DynamicGraph, EdgeDescriptor};
pub use models::{
    add_epsilon, ClassSet, CompositeModel, Domain, LaplacianModel, LinearModel, Model, ModelClass,
    RatioConsensusModel, VectorField, WeightSchedule,
};
pub use ray::{ray_distance, ray_project, RayProjection};
pub use sim::{integrate, IntegratorConfig, MonitorFlags, Trajectory};
