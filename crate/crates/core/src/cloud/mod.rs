//! Point clouds with per-point viewpoint provenance.
//!
//! Every point remembers which sensor positions observed it. The encoder
//! needs this to decide which voxels are hidden from all sensors, and the
//! normal estimator uses it to orient normals outward.

mod io;

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::geom::{is_finite, Vec3};

pub use io::{load_cloud, load_cloud_with_sidecar, save_cloud, sidecar_path, write_ply, PlyEncoding};

/// A sensor position in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub id: u32,
    pub position: Vec3,
}

impl Viewpoint {
    pub fn new(id: u32, position: Vec3) -> Self {
        Viewpoint { id, position }
    }
}

/// Points plus the set of viewpoints each point was observed from.
///
/// Invariants: every coordinate is finite, every point carries at least one
/// viewpoint id and every id refers to an entry of `viewpoints`.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudWithViewpoints {
    points: Vec<Vec3>,
    view_of: Vec<Vec<u32>>,
    viewpoints: Vec<Viewpoint>,
}

impl CloudWithViewpoints {
    pub fn new(points: Vec<Vec3>, view_of: Vec<Vec<u32>>, viewpoints: Vec<Viewpoint>) -> Result<Self> {
        if points.len() != view_of.len() {
            return Err(Error::InvalidCloud(format!(
                "{} points but {} viewpoint sets",
                points.len(),
                view_of.len()
            )));
        }
        let mut ids = BTreeSet::new();
        for vp in &viewpoints {
            if !is_finite(&vp.position) {
                return Err(Error::InvalidCloud(format!("viewpoint {} is not finite", vp.id)));
            }
            if !ids.insert(vp.id) {
                return Err(Error::InvalidCloud(format!("duplicate viewpoint id {}", vp.id)));
            }
        }
        let mut view_of = view_of;
        for (i, (p, views)) in points.iter().zip(view_of.iter_mut()).enumerate() {
            if !is_finite(p) {
                return Err(Error::InvalidCloud(format!("point {i} is not finite")));
            }
            views.sort_unstable();
            views.dedup();
            if views.is_empty() {
                return Err(Error::InvalidCloud(format!("point {i} has no viewpoint")));
            }
            if let Some(bad) = views.iter().find(|v| !ids.contains(v)) {
                return Err(Error::InvalidCloud(format!(
                    "point {i} references unknown viewpoint {bad}"
                )));
            }
        }
        Ok(CloudWithViewpoints {
            points,
            view_of,
            viewpoints,
        })
    }

    /// A cloud whose points were all seen from one viewpoint.
    pub fn from_single_view(points: Vec<Vec3>, viewpoint: Viewpoint) -> Result<Self> {
        let view_of = vec![vec![viewpoint.id]; points.len()];
        Self::new(points, view_of, vec![viewpoint])
    }

    pub fn empty() -> Self {
        CloudWithViewpoints {
            points: Vec::new(),
            view_of: Vec::new(),
            viewpoints: Vec::new(),
        }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn view_of(&self, index: usize) -> &[u32] {
        &self.view_of[index]
    }

    pub fn view_sets(&self) -> &[Vec<u32>] {
        &self.view_of
    }

    pub fn viewpoints(&self) -> &[Viewpoint] {
        &self.viewpoints
    }

    pub fn viewpoint(&self, id: u32) -> Option<&Viewpoint> {
        self.viewpoints.iter().find(|v| v.id == id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounds, `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = self.points.first()?;
        let mut lo = *first;
        let mut hi = *first;
        for p in &self.points[1..] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        Some((lo, hi))
    }

    /// Applies a rigid transform to the points and viewpoints.
    pub fn transformed(&self, pose: &crate::geom::Pose) -> Self {
        CloudWithViewpoints {
            points: self.points.iter().map(|p| pose.to_world(p)).collect(),
            view_of: self.view_of.clone(),
            viewpoints: self
                .viewpoints
                .iter()
                .map(|v| Viewpoint::new(v.id, pose.to_world(&v.position)))
                .collect(),
        }
    }

    /// Reorders points by `order` (a permutation of `0..len`).
    pub fn permuted(&self, order: &[usize]) -> Self {
        CloudWithViewpoints {
            points: order.iter().map(|&i| self.points[i]).collect(),
            view_of: order.iter().map(|&i| self.view_of[i].clone()).collect(),
            viewpoints: self.viewpoints.clone(),
        }
    }
}

/// Indices into a parent cloud that grasps should be detected on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionOfInterest {
    indices: Vec<usize>,
}

impl RegionOfInterest {
    pub fn new(cloud: &CloudWithViewpoints, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        if let Some(bad) = indices.iter().find(|&&i| i >= cloud.len()) {
            return Err(Error::InvalidArgument(format!(
                "roi index {bad} out of range for cloud of {} points",
                cloud.len()
            )));
        }
        Ok(RegionOfInterest { indices })
    }

    pub fn all(cloud: &CloudWithViewpoints) -> Self {
        RegionOfInterest {
            indices: (0..cloud.len()).collect(),
        }
    }

    /// Points whose coordinates fall inside the axis-aligned box `[lo, hi]`.
    pub fn from_bounds(cloud: &CloudWithViewpoints, lo: &Vec3, hi: &Vec3) -> Self {
        let indices = cloud
            .points()
            .iter()
            .enumerate()
            .filter(|(_, p)| (0..3).all(|k| p[k] >= lo[k] && p[k] <= hi[k]))
            .map(|(i, _)| i)
            .collect();
        RegionOfInterest { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Disjoint union of two clouds in the same world frame.
///
/// Viewpoint ids of `b` are kept when they do not collide with ids of `a`;
/// otherwise all of `b`'s ids are shifted past the largest id in `a`.
pub fn merge_clouds(a: &CloudWithViewpoints, b: &CloudWithViewpoints) -> CloudWithViewpoints {
    let a_ids: BTreeSet<u32> = a.viewpoints.iter().map(|v| v.id).collect();
    let collides = b.viewpoints.iter().any(|v| a_ids.contains(&v.id));
    let remap = |id: u32| -> u32 {
        if collides {
            let a_max = a_ids.iter().next_back().copied().unwrap_or(0);
            let b_min = b.viewpoints.iter().map(|v| v.id).min().unwrap_or(0);
            id - b_min + a_max + 1
        } else {
            id
        }
    };

    let mut points = a.points.clone();
    points.extend_from_slice(&b.points);
    let mut view_of = a.view_of.clone();
    view_of.extend(
        b.view_of
            .iter()
            .map(|vs| vs.iter().map(|&v| remap(v)).collect::<Vec<_>>()),
    );
    let mut viewpoints = a.viewpoints.clone();
    viewpoints.extend(b.viewpoints.iter().map(|v| Viewpoint::new(remap(v.id), v.position)));
    CloudWithViewpoints {
        points,
        view_of,
        viewpoints,
    }
}

/// Leaf cell containing `p` for cubic cells of edge `leaf`.
pub fn leaf_cell(p: &Vec3, leaf: f64) -> [i64; 3] {
    [
        (p.x / leaf).floor() as i64,
        (p.y / leaf).floor() as i64,
        (p.z / leaf).floor() as i64,
    ]
}

/// Replaces all points sharing a leaf cell by their centroid.
///
/// Output points are ordered by cell key, so the result does not depend on
/// the input point order beyond floating-point summation within a cell.
pub fn voxel_downsample(cloud: &CloudWithViewpoints, leaf: f64) -> Result<CloudWithViewpoints> {
    if !(leaf > 0.0) || !leaf.is_finite() {
        return Err(Error::InvalidArgument(format!("leaf must be positive, got {leaf}")));
    }
    let mut cells: BTreeMap<[i64; 3], (Vec3, usize, BTreeSet<u32>)> = BTreeMap::new();
    for (p, views) in cloud.points.iter().zip(&cloud.view_of) {
        let entry = cells
            .entry(leaf_cell(p, leaf))
            .or_insert_with(|| (Vec3::zeros(), 0, BTreeSet::new()));
        entry.0 += p;
        entry.1 += 1;
        entry.2.extend(views.iter().copied());
    }
    let mut points = Vec::with_capacity(cells.len());
    let mut view_of = Vec::with_capacity(cells.len());
    for (_, (sum, n, views)) in cells {
        points.push(sum / n as f64);
        view_of.push(views.into_iter().collect());
    }
    Ok(CloudWithViewpoints {
        points,
        view_of,
        viewpoints: cloud.viewpoints.clone(),
    })
}
