//! Tabletop segmentation and planar grasp planning.

mod candidate;
mod cem;
mod cloud;
mod diverse;
mod gmm;
pub mod kdtree;
mod pca;
mod planner;
mod segment;

use thiserror::Error;

pub use candidate::{
    convex_hull, sample_candidates, sample_on, score, wrap_angle, Chord, Footprint, GraspCandidate, Scorer,
    GRASP_DEPTH_BELOW_TOP, MAX_GRIPPER_WIDTH, WIDTH_MARGIN,
};
pub use cem::{cem, CemError, CemOutcome, CemParams};
pub use cloud::{Frame, PointCloud};
pub use diverse::{
    angle_gap, grasp_distance, menu, q_order, select_diverse, select_diverse_with, MenuEntry, ANGLE_WEIGHT,
};
pub use gmm::{Component, Gmm, COVARIANCE_FLOOR, EM_STEPS};
pub use pca::{pca, Pca};
pub use planner::{cem_refine, plan_grasps, refine, GraspConfig, GraspPlan, Refinement};
pub use segment::{
    cluster, components, remove_plane, remove_plane_indexed, Cluster, Plane, PlaneRemoval, MIN_PLANE_INLIER_RATIO,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraspError {
    #[error("point cloud is degenerate (fewer than 3 points or collinear)")]
    DegenerateCloud,
    #[error("no plane found (best inlier ratio {ratio:.3})")]
    NoPlaneFound { ratio: f64 },
    #[error("cluster is degenerate")]
    DegenerateCluster,
    #[error("no object clusters above the table")]
    NoClusters,
    #[error("every elite scored zero")]
    EmptyElite(Box<GraspCandidate>),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Io(String),
}
