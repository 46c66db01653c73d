//! Grasp pose detection for two-finger parallel-jaw hands.
//!
//! The pipeline samples 6-DOF hand poses on a point cloud ([`candgen`]),
//! encodes the volume between the fingers as a stack of projection images
//! ([`encode`]), and classifies each image with a small convolutional
//! network ([`learn`]). Training labels come from a frictionless antipodal
//! test against ground-truth meshes ([`oracle`]); [`eval`] holds the metrics,
//! the end-to-end detector and the post-detection grasp selection.

pub mod candgen;
pub mod cli;
pub mod cloud;
pub mod dataset;
pub mod encode;
pub mod error;
pub mod eval;
pub mod formats;
pub mod geom;
pub mod learn;
pub mod localgeom;
pub mod oracle;
pub mod spatial;

pub use candgen::{sample_candidates, GraspCandidate, HandGeometry, SamplerConfig};
pub use cloud::{merge_clouds, voxel_downsample, CloudWithViewpoints, RegionOfInterest, Viewpoint};
pub use encode::{build_grid, encode, CandidateGrid, GraspImage, Variant};
pub use error::{Error, Result};
pub use localgeom::{estimate_frame, LocalFrame};
