//! Bayesian multi-class occupancy mapping from range-category beams, a
//! semantic octree, closed-form Shannon mutual information (dense and
//! run-length forms) and an information-per-cost exploration planner.

pub mod error;
pub mod geometry;
pub mod gridmap;
pub mod logodds;
pub mod mutinfo;
pub mod octree;
pub mod planner;
pub mod sensor;

pub use error::{Error, Result};
pub use geometry::{raycast, GridGeometry, Point3, RayTrace};
pub use gridmap::{update_cell, BeliefMap, CellLabel, LabelMap, MultiClassGrid};
pub use logodds::{entropy, f_gain, log_sum_exp, softmax, Categorical, ClassCount, LogOdds};
pub use mutinfo::{beam_mi_dense, beam_mi_rle, trajectory_mi, InformationModel};
pub use octree::{NodeState, OctreeParams, SemanticOctree};
pub use planner::{select_plan, CandidatePlan, Pose2, Strategy, StrategyRegistry};
pub use sensor::{
    inverse_log_odds, ray_pdf, CellObservation, Measurement, SensorParams, SensorPose,
};
