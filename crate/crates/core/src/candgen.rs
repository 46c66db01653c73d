//! Grasp candidate sampling.
//!
//! For each sampled surface point the hand is rotated about the local
//! curvature axis and, at every orientation, pushed along the approach
//! direction from outside the cloud until a finger would touch a point.
//! A candidate survives only if the closing region between the fingers
//! then contains at least one point.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{CloudWithViewpoints, RegionOfInterest};
use crate::error::{Error, Result};
use crate::geom::{axis_angle, OrientedBox, Pose, PoseRecord, Vec3};
use crate::localgeom::{FrameEstimator, FrameParams, LocalFrame};

/// Parallel-jaw gripper dimensions, meters.
///
/// Hand frame: x is the approach direction, y runs along the curvature axis
/// (the finger height), z is the closing direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandGeometry {
    /// Finger thickness along the closing direction.
    pub finger_width: f64,
    /// Finger length along the approach direction.
    pub finger_depth: f64,
    /// Finger extent along the curvature axis.
    pub hand_height: f64,
    pub aperture_min: f64,
    pub aperture_max: f64,
}

impl Default for HandGeometry {
    fn default() -> Self {
        HandGeometry {
            finger_width: 0.01,
            finger_depth: 0.06,
            hand_height: 0.02,
            aperture_min: 0.005,
            aperture_max: 0.08,
        }
    }
}

impl HandGeometry {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.finger_width,
            self.finger_depth,
            self.hand_height,
            self.aperture_min,
            self.aperture_max,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "hand dimensions must be positive: {self:?}"
            )));
        }
        if self.aperture_min >= self.aperture_max {
            return Err(Error::InvalidArgument("aperture_min must be below aperture_max".into()));
        }
        Ok(())
    }

    /// Closing region for a hand at `pose` opened to `aperture`.
    pub fn closing_region(&self, pose: &Pose, aperture: f64) -> OrientedBox {
        OrientedBox {
            center: pose.translation,
            axes: pose.rotation,
            half_extents: Vec3::new(self.finger_depth / 2.0, self.hand_height / 2.0, aperture / 2.0),
        }
    }

    /// The two finger cuboids (+z side first), grown by `inflation`.
    pub fn finger_boxes(&self, pose: &Pose, aperture: f64, inflation: f64) -> [OrientedBox; 2] {
        let offset = aperture / 2.0 + self.finger_width / 2.0;
        let half = Vec3::new(
            self.finger_depth / 2.0 + inflation,
            self.hand_height / 2.0 + inflation,
            self.finger_width / 2.0 + inflation,
        );
        [1.0, -1.0].map(|side| OrientedBox {
            center: pose.to_world(&Vec3::new(0.0, 0.0, side * offset)),
            axes: pose.rotation,
            half_extents: half,
        })
    }
}

/// Sampler knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub n_orientations: usize,
    pub push_step: f64,
    pub contact_inflation: f64,
    pub frame_radius: f64,
    pub min_neighbors: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_samples: 100,
            n_orientations: 8,
            push_step: 0.002,
            contact_inflation: 0.001,
            frame_radius: 0.01,
            min_neighbors: 20,
        }
    }
}

impl SamplerConfig {
    pub fn frame_params(&self) -> FrameParams {
        FrameParams {
            radius: self.frame_radius,
            min_neighbors: self.min_neighbors,
        }
    }
}

/// A 6-DOF hand hypothesis with its closing region.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspCandidate {
    /// Hand frame to world; the origin is the closing-region center.
    pub pose: Pose,
    pub frame: LocalFrame,
    pub closing_region: OrientedBox,
    pub aperture: f64,
    /// Extent of the enclosed points along the closing axis.
    pub object_width: f64,
    pub sample_index: usize,
    pub orientation_index: usize,
    pub point_index: usize,
}

impl GraspCandidate {
    pub fn approach(&self) -> Vec3 {
        self.pose.axis(0)
    }

    pub fn closing_axis(&self) -> Vec3 {
        self.pose.axis(2)
    }

    pub fn position(&self) -> Vec3 {
        self.pose.translation
    }
}

/// Samples grasp candidates with default push parameters.
pub fn sample_candidates(
    cloud: &CloudWithViewpoints,
    roi: &RegionOfInterest,
    hand: &HandGeometry,
    n_samples: usize,
    n_orientations: usize,
    seed: u64,
) -> Result<Vec<GraspCandidate>> {
    let config = SamplerConfig {
        n_samples,
        n_orientations,
        ..SamplerConfig::default()
    };
    CandidateSampler::new(cloud, *hand, config)?.sample(roi, seed)
}

/// Candidate sampler bound to one cloud.
pub struct CandidateSampler<'a> {
    frames: FrameEstimator<'a>,
    hand: HandGeometry,
    config: SamplerConfig,
    bounds: (Vec3, Vec3),
}

impl<'a> CandidateSampler<'a> {
    pub fn new(cloud: &'a CloudWithViewpoints, hand: HandGeometry, config: SamplerConfig) -> Result<Self> {
        hand.validate()?;
        if config.n_orientations == 0 {
            return Err(Error::InvalidArgument("n_orientations must be positive".into()));
        }
        if !(config.push_step > 0.0 && config.push_step <= hand.finger_depth) {
            return Err(Error::InvalidArgument("push_step must be in (0, finger_depth]".into()));
        }
        if !(config.contact_inflation >= 0.0) {
            return Err(Error::InvalidArgument("contact_inflation must be non-negative".into()));
        }
        let frames = FrameEstimator::new(cloud, config.frame_params())?;
        let bounds = cloud.bounds().unwrap_or((Vec3::zeros(), Vec3::zeros()));
        Ok(CandidateSampler {
            frames,
            hand,
            config,
            bounds,
        })
    }

    pub fn hand(&self) -> &HandGeometry {
        &self.hand
    }

    pub fn frames(&self) -> &FrameEstimator<'a> {
        &self.frames
    }

    /// Draws `config.n_samples` points from `roi` and returns every
    /// surviving candidate, in (sample, orientation) order.
    pub fn sample(&self, roi: &RegionOfInterest, seed: u64) -> Result<Vec<GraspCandidate>> {
        let cloud = self.frames.cloud();
        if roi.is_empty() || self.config.n_samples == 0 {
            return Ok(Vec::new());
        }
        // Sorting by coordinates makes the draw independent of point order.
        let mut order: Vec<usize> = roi.indices().to_vec();
        order.sort_by(|&a, &b| {
            let (p, q) = (cloud.points()[a], cloud.points()[b]);
            p.x.total_cmp(&q.x)
                .then(p.y.total_cmp(&q.y))
                .then(p.z.total_cmp(&q.z))
                .then(a.cmp(&b))
        });
        let per_sample: Vec<Vec<GraspCandidate>> = (0..self.config.n_samples)
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s as u64);
                let point_index = order[rng.gen_range(0..order.len())];
                match self.frames.frame(point_index) {
                    Ok(frame) => self.candidates_at(&frame, s, point_index),
                    Err(_) => Vec::new(),
                }
            })
            .collect();
        Ok(per_sample.into_iter().flatten().collect())
    }

    /// Hand rotation for orientation `k`: columns (approach, axis, closing).
    pub fn orientation(&self, frame: &LocalFrame, k: usize) -> Matrix3<f64> {
        let n = self.config.n_orientations as f64;
        let angle = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / n;
        let approach = axis_angle(&frame.curvature_axis, angle) * (-frame.normal);
        let approach = approach.normalize();
        let axis = frame.curvature_axis;
        let closing = approach.cross(&axis).normalize();
        Matrix3::from_columns(&[approach, axis, closing])
    }

    fn candidates_at(&self, frame: &LocalFrame, sample_index: usize, point_index: usize) -> Vec<GraspCandidate> {
        (0..self.config.n_orientations)
            .filter_map(|k| {
                let rotation = self.orientation(frame, k);
                let pose = self.push(&rotation, &frame.origin)?;
                self.accept(pose, frame, sample_index, k, point_index)
            })
            .collect()
    }

    /// Pushes the open hand along its approach axis from outside the cloud's
    /// bounding box and returns the last pose before finger contact, or the
    /// deepest pose (sample point on the back face of the closing region).
    fn push(&self, rotation: &Matrix3<f64>, sample: &Vec3) -> Option<Pose> {
        let h = &self.hand;
        let e = self.config.contact_inflation;
        let step = self.config.push_step;
        let approach: Vec3 = rotation.column(0).into_owned();
        let half_depth = h.finger_depth / 2.0;
        let (lo, hi) = self.bounds;
        let nearest_corner = (0..8)
            .map(|c| {
                let corner = Vec3::new(
                    if c & 1 == 0 { lo.x } else { hi.x },
                    if c & 2 == 0 { lo.y } else { hi.y },
                    if c & 4 == 0 { lo.z } else { hi.z },
                );
                (corner - sample).dot(&approach)
            })
            .fold(f64::INFINITY, f64::min);
        let start = nearest_corner - half_depth - e - step;
        let max_steps = ((half_depth - start) / step).floor() as i64;

        let inner = h.aperture_max / 2.0 - e;
        let outer = h.aperture_max / 2.0 + h.finger_width + e;
        let half_height = h.hand_height / 2.0 + e;
        let mut first_contact = f64::INFINITY;
        for q in self.frames.cloud().points() {
            let l = rotation.tr_mul(&(q - sample));
            if l.y.abs() <= half_height && l.z.abs() >= inner && l.z.abs() <= outer {
                first_contact = first_contact.min(l.x - half_depth - e);
            }
        }
        let contact_step = ((first_contact - start) / step).ceil();
        let k = if contact_step.is_finite() {
            (contact_step as i64 - 1).min(max_steps)
        } else {
            max_steps
        };
        if k < 0 {
            return None;
        }
        let offset = start + k as f64 * step;
        Some(Pose::new(*rotation, sample + approach * offset))
    }

    fn accept(
        &self,
        pose: Pose,
        frame: &LocalFrame,
        sample_index: usize,
        orientation_index: usize,
        point_index: usize,
    ) -> Option<GraspCandidate> {
        let h = &self.hand;
        let region = h.closing_region(&pose, h.aperture_max);
        let fingers = h.finger_boxes(&pose, h.aperture_max, 0.0);
        let mut inside = 0usize;
        let (mut zmin, mut zmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for q in self.frames.cloud().points() {
            if fingers.iter().any(|f| f.contains(q)) {
                return None;
            }
            if region.contains_strict(q) {
                let z = pose.to_local(q).z;
                zmin = zmin.min(z);
                zmax = zmax.max(z);
                inside += 1;
            }
        }
        if inside == 0 {
            return None;
        }
        Some(GraspCandidate {
            pose,
            frame: *frame,
            closing_region: region,
            aperture: h.aperture_max,
            object_width: zmax - zmin,
            sample_index,
            orientation_index,
            point_index,
        })
    }
}

/// One JSON line per candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub pose: PoseRecord,
    pub aperture: f64,
    pub object_width: f64,
    pub half_extents: [f64; 3],
    pub sample_index: usize,
    pub orientation_index: usize,
    pub point_index: usize,
    pub frame_normal: [f64; 3],
    pub frame_axis: [f64; 3],
    pub frame_neighbors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl From<&GraspCandidate> for CandidateRecord {
    fn from(c: &GraspCandidate) -> Self {
        let arr = |v: &Vec3| [v.x, v.y, v.z];
        CandidateRecord {
            pose: PoseRecord::from(&c.pose),
            aperture: c.aperture,
            object_width: c.object_width,
            half_extents: arr(&c.closing_region.half_extents),
            sample_index: c.sample_index,
            orientation_index: c.orientation_index,
            point_index: c.point_index,
            frame_normal: arr(&c.frame.normal),
            frame_axis: arr(&c.frame.curvature_axis),
            frame_neighbors: c.frame.neighborhood_count,
            score: None,
        }
    }
}

impl CandidateRecord {
    pub fn to_candidate(&self) -> GraspCandidate {
        let pose = Pose::from(&self.pose);
        let normal = Vec3::from(self.frame_normal);
        let axis = Vec3::from(self.frame_axis);
        let frame = LocalFrame {
            origin: pose.translation,
            normal,
            curvature_axis: axis,
            binormal: normal.cross(&axis),
            neighborhood_count: self.frame_neighbors,
        };
        GraspCandidate {
            pose,
            frame,
            closing_region: OrientedBox {
                center: pose.translation,
                axes: pose.rotation,
                half_extents: Vec3::from(self.half_extents),
            },
            aperture: self.aperture,
            object_width: self.object_width,
            sample_index: self.sample_index,
            orientation_index: self.orientation_index,
            point_index: self.point_index,
        }
    }
}
