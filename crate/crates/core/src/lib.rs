//! Range-only relative localization for robot teams: SE(2) geometry, a
//! log-distance radio model, unicycle motion, relative-position measurement
//! graphs, candidate hypotheses, pose-graph optimization, a time-varying
//! network model and a seeded simulation harness.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod hypothesis;
pub mod motion;
pub mod netsim;
pub mod optimizer;
pub mod radio;
pub mod relgraph;

pub use error::{Error, Result};
pub use geometry::{wrap_angle, Pose2D};
pub use radio::{PathLossParams, RangeMeasurement, RobotId};
