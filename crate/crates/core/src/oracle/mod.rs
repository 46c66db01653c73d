//! Ground-truth labeling from meshes: rendering and antipodal checks.

pub mod antipodal;
pub mod dataset;
pub mod mesh;
pub mod render;

pub use antipodal::{label_candidate, AntipodalLabeler, AntipodalParams, GraspLabel, LabelOutcome};
pub use dataset::{build_dataset, DatasetConfig, MeshDiagnostics, NamedMesh};
pub use mesh::{SurfaceSample, TriangleMesh};
pub use render::{render_view, render_view_toward, stereo_render, Intrinsics, StereoRig};
