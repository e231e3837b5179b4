//! Evaluation engine for right-ventricular insertion point (RVIP) landmark
//! detection in multi-slice short-axis CMR volumes.
//!
//! The pipeline: predicted per-landmark heatmaps are decoded into per-slice
//! points ([`postproc`]), matched against ground truth under three detection
//! strategies ([`detection`]), scored with three localisation schemes plus
//! the septum-angle error ([`localisation`]), and aggregated into cohort
//! reports that keep NA accounting explicit ([`report`]). A deterministic
//! synthetic generator ([`synth`]) provides fixtures, including a scenario
//! in which metric variants disagree about the winning model.

pub mod detection;
pub mod error;
pub mod evaluate;
pub mod geom;
pub mod io;
pub mod localisation;
pub mod postproc;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use geom::{
    angle_difference, circular_mean, distance_mm, septum_angle, upper_bound_distance, Angle,
    CaseLandmarks, CaseLandmarksBuilder, ImageGeometry, LandmarkLabel, LandmarkPoint,
    SliceLandmarks,
};
