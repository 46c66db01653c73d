//! Grasp images: voxelize the closing region, mark occupied and unobserved
//! cells, and project the grid into averaged heightmaps and normal maps.
//!
//! Grid axes follow the hand frame: x = approach, y = curvature axis,
//! z = closing direction. Cell `(x, y, z)` lives at flat index
//! `(x * 60 + y) * 60 + z`.

pub mod occlusion;

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candgen::GraspCandidate;
use crate::cloud::CloudWithViewpoints;
use crate::error::{Error, Result};
use crate::geom::{Pose, Vec3};
use crate::localgeom::{FrameEstimator, FrameParams};
use occlusion::OcclusionGrid;

/// Cells per grid axis and pixels per image side.
pub const GRID_SIZE: usize = 60;
pub const GRID_CELLS: usize = GRID_SIZE * GRID_SIZE * GRID_SIZE;
pub const IMAGE_PIXELS: usize = GRID_SIZE * GRID_SIZE;

#[inline]
pub fn cell_index(x: usize, y: usize, z: usize) -> usize {
    (x * GRID_SIZE + y) * GRID_SIZE + z
}

/// Occupancy, occlusion and normals of one closing region.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    pub occupied: Vec<bool>,
    pub unobserved: Vec<bool>,
    /// Hand-frame unit normals; zero where unoccupied.
    pub normals: Vec<[f32; 3]>,
    /// Hand frame of the region; world -> unit cube is
    /// `(pose.to_local(p) + half_extents) / (2 * half_extents)`.
    pub pose: Pose,
    pub half_extents: Vec3,
}

impl CandidateGrid {
    pub fn empty(pose: Pose, half_extents: Vec3) -> Self {
        CandidateGrid {
            occupied: vec![false; GRID_CELLS],
            unobserved: vec![false; GRID_CELLS],
            normals: vec![[0.0; 3]; GRID_CELLS],
            pose,
            half_extents,
        }
    }

    /// Unit-cube coordinates of a world point.
    pub fn to_unit(&self, p: &Vec3) -> Vec3 {
        (self.pose.to_local(p) + self.half_extents).component_div(&(self.half_extents * 2.0))
    }

    /// Hand-frame center of cell `(x, y, z)`.
    pub fn cell_center_local(&self, x: usize, y: usize, z: usize) -> Vec3 {
        let n = GRID_SIZE as f64;
        let u = Vec3::new((x as f64 + 0.5) / n, (y as f64 + 0.5) / n, (z as f64 + 0.5) / n);
        (u * 2.0 - Vec3::repeat(1.0)).component_mul(&self.half_extents)
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&v| v).count()
    }

    pub fn unobserved_count(&self) -> usize {
        self.unobserved.iter().filter(|&&v| v).count()
    }
}

/// Nudge toward the upper cell, so a coordinate sitting on the central
/// boundary (candidates are anchored on cloud points) bins the same way
/// after round-off from a rigid motion.
const CELL_TIE_BREAK: f64 = 1e-9;

/// Cell along one axis for a hand-frame coordinate, `None` outside.
fn cell_coord(local: f64, half: f64) -> Option<usize> {
    if local.abs() > half {
        return None;
    }
    let u = (local + half) / (2.0 * half);
    Some(((u * GRID_SIZE as f64 + CELL_TIE_BREAK).floor() as usize).min(GRID_SIZE - 1))
}

/// Encoder knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodeConfig {
    /// Edge of the occluder voxels used for the visibility test, meters.
    pub occlusion_leaf: f64,
    pub normal_radius: f64,
    pub min_neighbors: usize,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            occlusion_leaf: 0.003,
            normal_radius: 0.01,
            min_neighbors: 20,
        }
    }
}

/// Per-cloud encoder state: neighbor index and lazily computed normals.
pub struct CloudEncoder<'a> {
    cloud: &'a CloudWithViewpoints,
    frames: FrameEstimator<'a>,
    normals: Vec<OnceLock<Vec3>>,
    config: EncodeConfig,
}

impl<'a> CloudEncoder<'a> {
    pub fn new(cloud: &'a CloudWithViewpoints, config: EncodeConfig) -> Result<Self> {
        if !(config.occlusion_leaf > 0.0) {
            return Err(Error::InvalidArgument("occlusion_leaf must be positive".into()));
        }
        let frames = FrameEstimator::new(
            cloud,
            FrameParams {
                radius: config.normal_radius,
                min_neighbors: config.min_neighbors,
            },
        )?;
        Ok(CloudEncoder {
            cloud,
            frames,
            normals: (0..cloud.len()).map(|_| OnceLock::new()).collect(),
            config,
        })
    }

    pub fn config(&self) -> &EncodeConfig {
        &self.config
    }

    /// World-frame outward normal of point `i`. Falls back to the direction
    /// toward the point's first viewpoint when the neighborhood is too thin.
    pub fn normal(&self, i: usize) -> Vec3 {
        *self.normals[i].get_or_init(|| {
            self.frames.normal(i).unwrap_or_else(|_| {
                let p = self.cloud.points()[i];
                self.cloud
                    .viewpoint(self.cloud.view_of(i)[0])
                    .map(|v| (v.position - p).try_normalize(1e-12).unwrap_or_else(Vec3::z))
                    .unwrap_or_else(Vec3::z)
            })
        })
    }

    pub fn build_grid(&self, candidate: &GraspCandidate) -> Result<CandidateGrid> {
        let half = candidate.closing_region.half_extents;
        if !(half.iter().all(|h| h.is_finite() && *h > 0.0)) {
            return Err(Error::DegenerateRegion);
        }
        let pose = Pose::new(candidate.closing_region.axes, candidate.closing_region.center);
        let mut grid = CandidateGrid::empty(pose, half);
        let local: Vec<Vec3> = self.cloud.points().iter().map(|p| pose.to_local(p)).collect();

        let mut touched: Vec<(usize, usize)> = Vec::new();
        for (i, l) in local.iter().enumerate() {
            if let (Some(x), Some(y), Some(z)) = (
                cell_coord(l.x, half.x),
                cell_coord(l.y, half.y),
                cell_coord(l.z, half.z),
            ) {
                touched.push((cell_index(x, y, z), i));
            }
        }
        if !touched.is_empty() {
            let mut sums: Vec<Vec3> = Vec::new();
            let mut slot = vec![u32::MAX; GRID_CELLS];
            for &(c, i) in &touched {
                if slot[c] == u32::MAX {
                    slot[c] = sums.len() as u32;
                    sums.push(Vec3::zeros());
                }
                let n = pose.rotate_to_local(&self.normal(i));
                sums[slot[c] as usize] += n;
            }
            for &(c, i) in &touched {
                if grid.occupied[c] {
                    continue;
                }
                grid.occupied[c] = true;
                let s = sums[slot[c] as usize];
                let n = s.try_normalize(1e-12).unwrap_or_else(|| {
                    // opposing normals cancelled; use the first member's
                    pose.rotate_to_local(&self.normal(i))
                });
                grid.normals[c] = [n.x as f32, n.y as f32, n.z as f32];
            }
        }

        let eyes: Vec<Vec3> = self
            .cloud
            .viewpoints()
            .iter()
            .map(|v| pose.to_local(&v.position))
            .collect();
        if eyes.is_empty() {
            return Ok(grid);
        }
        let occluders = self.occluders(&local, &eyes, &half);
        let shadows: Vec<_> = eyes.iter().map(|e| occluders.shadow_index(e, &Vec3::zeros())).collect();
        for x in 0..GRID_SIZE {
            for y in 0..GRID_SIZE {
                for z in 0..GRID_SIZE {
                    let c = cell_index(x, y, z);
                    if grid.occupied[c] {
                        continue;
                    }
                    let center = grid.cell_center_local(x, y, z);
                    grid.unobserved[c] = shadows.iter().all(|s| s.occluded(&center));
                }
            }
        }
        Ok(grid)
    }

    /// Occluder lattice over the points that can shadow the region: those
    /// near a segment from some viewpoint to the region center. The margin
    /// keeps every voxel that can meet such a ray complete.
    fn occluders(&self, local: &[Vec3], eyes: &[Vec3], half: &Vec3) -> OcclusionGrid {
        let leaf = self.config.occlusion_leaf;
        let reach = half.norm() + 2.0 * leaf * 3f64.sqrt();
        let near_segment = |p: &Vec3| {
            eyes.iter().any(|eye| {
                let seg = -eye;
                let t = ((p - eye).dot(&seg) / seg.norm_squared()).clamp(0.0, 1.0);
                (p - (eye + seg * t)).norm() <= reach
            })
        };
        let relevant: Vec<Vec3> = local.iter().filter(|p| near_segment(p)).copied().collect();
        OcclusionGrid::build(&relevant, leaf, &(-half), half)
    }

    pub fn encode(&self, candidate: &GraspCandidate, variant: Variant) -> Result<GraspImage> {
        Ok(encode(&self.build_grid(candidate)?, variant))
    }

    /// Encodes candidates concurrently; output order matches input order.
    pub fn encode_all(&self, candidates: &[GraspCandidate], variant: Variant) -> Result<Vec<GraspImage>> {
        candidates
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let mut img = self.encode(c, variant)?;
                img.candidate_ref = Some(i);
                Ok(img)
            })
            .collect()
    }
}

/// Builds the grid with default encoder settings.
pub fn build_grid(cloud: &CloudWithViewpoints, candidate: &GraspCandidate) -> Result<CandidateGrid> {
    CloudEncoder::new(cloud, EncodeConfig::default())?.build_grid(candidate)
}

/// Axis a projection is taken along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionAxis {
    Approach,
    Curvature,
    Binormal,
}

/// Five 60×60 channels: `[I_o, I_u, I_n.x, I_n.y, I_n.z]`, channel-major.
/// Pixel `(r, c)` indexes the two remaining grid axes in (x, y, z) order.
pub type Projection = Vec<f32>;

pub const PROJECTION_CHANNELS: usize = 5;

/// Averaged occupied/unobserved heightmaps and averaged absolute normals,
/// with heights `k + 1` scaled by 1/60 and empty columns set to 0.
pub fn project(grid: &CandidateGrid, axis: ProjectionAxis) -> Projection {
    let mut out = vec![0.0f32; PROJECTION_CHANNELS * IMAGE_PIXELS];
    let n = GRID_SIZE;
    for r in 0..n {
        for c in 0..n {
            let (mut occ, mut occ_h, mut unobs, mut unobs_h) = (0u32, 0f64, 0u32, 0f64);
            let mut normal = [0f64; 3];
            for k in 0..n {
                let idx = match axis {
                    ProjectionAxis::Approach => cell_index(k, r, c),
                    ProjectionAxis::Curvature => cell_index(r, k, c),
                    ProjectionAxis::Binormal => cell_index(r, c, k),
                };
                let height = (k + 1) as f64;
                if grid.occupied[idx] {
                    occ += 1;
                    occ_h += height;
                    for (acc, v) in normal.iter_mut().zip(grid.normals[idx]) {
                        *acc += v as f64;
                    }
                }
                if grid.unobserved[idx] {
                    unobs += 1;
                    unobs_h += height;
                }
            }
            let px = r * n + c;
            if occ > 0 {
                out[px] = (occ_h / occ as f64 / n as f64) as f32;
                for (ch, v) in normal.iter().enumerate() {
                    out[(2 + ch) * IMAGE_PIXELS + px] = (v.abs() / occ as f64) as f32;
                }
            }
            if unobs > 0 {
                out[IMAGE_PIXELS + px] = (unobs_h / unobs as f64 / n as f64) as f32;
            }
        }
    }
    out
}

/// Averaged height of free cells (neither occupied nor unobserved) along
/// the approach axis.
fn free_heightmap_approach(grid: &CandidateGrid) -> Vec<f32> {
    let n = GRID_SIZE;
    let mut out = vec![0.0f32; IMAGE_PIXELS];
    for r in 0..n {
        for c in 0..n {
            let (mut count, mut sum) = (0u32, 0f64);
            for k in 0..n {
                let idx = cell_index(k, r, c);
                if !grid.occupied[idx] && !grid.unobserved[idx] {
                    count += 1;
                    sum += (k + 1) as f64;
                }
            }
            if count > 0 {
                out[r * n + c] = (sum / count as f64 / n as f64) as f32;
            }
        }
    }
    out
}

/// Published channel layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Five channels from each of the approach, curvature and binormal projections.
    Fifteen,
    /// `Fifteen` without the three unobserved-height channels.
    Twelve,
    /// Normal channels of the curvature-axis projection.
    ThreeCurvature,
    /// Occupied, unobserved and free heightmaps along the approach axis.
    ThreeApproachKappler,
}

impl Variant {
    pub fn channels(self) -> usize {
        match self {
            Variant::Fifteen => 15,
            Variant::Twelve => 12,
            Variant::ThreeCurvature | Variant::ThreeApproachKappler => 3,
        }
    }

    /// Positions of this variant's channels inside `Fifteen`, if it is a subset.
    pub fn fifteen_subset(self) -> Option<Vec<usize>> {
        match self {
            Variant::Fifteen => Some((0..15).collect()),
            Variant::Twelve => Some(vec![0, 2, 3, 4, 5, 7, 8, 9, 10, 12, 13, 14]),
            Variant::ThreeCurvature => Some(vec![7, 8, 9]),
            Variant::ThreeApproachKappler => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fifteen => "fifteen",
            Variant::Twelve => "twelve",
            Variant::ThreeCurvature => "three_curvature",
            Variant::ThreeApproachKappler => "three_approach_kappler",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "fifteen" | "15" => Ok(Variant::Fifteen),
            "twelve" | "12" => Ok(Variant::Twelve),
            "three_curvature" => Ok(Variant::ThreeCurvature),
            "three_approach_kappler" | "kappler" => Ok(Variant::ThreeApproachKappler),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Channel-major `C × 60 × 60` tensor of values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspImage {
    pub variant: Variant,
    pub data: Vec<f32>,
    pub candidate_ref: Option<usize>,
}

impl GraspImage {
    pub fn channels(&self) -> usize {
        self.variant.channels()
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * IMAGE_PIXELS..(c + 1) * IMAGE_PIXELS]
    }
}

pub fn encode(grid: &CandidateGrid, variant: Variant) -> GraspImage {
    let channel = |p: &Projection, c: usize| p[c * IMAGE_PIXELS..(c + 1) * IMAGE_PIXELS].to_vec();
    let data = match variant {
        Variant::Fifteen => [
            ProjectionAxis::Approach,
            ProjectionAxis::Curvature,
            ProjectionAxis::Binormal,
        ]
        .iter()
        .flat_map(|&a| project(grid, a))
        .collect(),
        Variant::Twelve => [
            ProjectionAxis::Approach,
            ProjectionAxis::Curvature,
            ProjectionAxis::Binormal,
        ]
        .iter()
        .flat_map(|&a| {
            let p = project(grid, a);
            [0, 2, 3, 4].iter().flat_map(|&c| channel(&p, c)).collect::<Vec<_>>()
        })
        .collect(),
        Variant::ThreeCurvature => {
            let p = project(grid, ProjectionAxis::Curvature);
            p[2 * IMAGE_PIXELS..].to_vec()
        }
        Variant::ThreeApproachKappler => {
            let p = project(grid, ProjectionAxis::Approach);
            let mut data = p[..2 * IMAGE_PIXELS].to_vec();
            data.extend(free_heightmap_approach(grid));
            data
        }
    };
    GraspImage {
        variant,
        data,
        candidate_ref: None,
    }
}
