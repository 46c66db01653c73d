//! Softened frictionless-antipodal labeling against a mesh.
//!
//! Each finger sweeps inward along the closing axis until it meets the
//! densely sampled surface. Its contact region is every sample within
//! `vertex_perturbation` of the contact plane inside the finger footprint.
//! The grasp is positive when some pair of contacts has normals facing the
//! two fingers and a connecting line close to the closing axis.

use serde::{Deserialize, Serialize};

use super::mesh::{SurfaceSample, TriangleMesh};
use crate::candgen::{GraspCandidate, HandGeometry};
use crate::error::{Error, Result};
use crate::geom::{Pose, Vec3};

/// Samples per square meter used for contact regions.
pub const DEFAULT_SAMPLE_DENSITY: f64 = 1.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntipodalParams {
    pub vertex_perturbation: f64,
    pub normal_cone_tolerance: f64,
    pub contact_line_tolerance: f64,
    /// Surface samples per square meter.
    pub sample_density: f64,
}

impl Default for AntipodalParams {
    fn default() -> Self {
        AntipodalParams {
            vertex_perturbation: 0.001,
            normal_cone_tolerance: 10.0,
            contact_line_tolerance: 10.0,
            sample_density: DEFAULT_SAMPLE_DENSITY,
        }
    }
}

impl AntipodalParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.vertex_perturbation) && ok(self.normal_cone_tolerance) && ok(self.contact_line_tolerance)) {
            return Err(Error::InvalidArgument(
                "antipodal tolerances must be non-negative".into(),
            ));
        }
        if !(self.sample_density.is_finite() && self.sample_density > 0.0) {
            return Err(Error::InvalidArgument("sample_density must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspLabel {
    Positive,
    Negative,
}

impl GraspLabel {
    pub fn is_positive(self) -> bool {
        self == GraspLabel::Positive
    }

    pub fn as_u8(self) -> u8 {
        self.is_positive() as u8
    }
}

/// Label plus the facts that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelOutcome {
    pub label: GraspLabel,
    /// The open hand already intersects the surface.
    pub collision: bool,
    /// Finger separation at contact, if both fingers touched.
    pub gap: Option<f64>,
    /// Sizes of the two contact regions after the normal-cone filter.
    pub contacts: (usize, usize),
}

impl LabelOutcome {
    fn negative(collision: bool, gap: Option<f64>, contacts: (usize, usize)) -> Self {
        LabelOutcome {
            label: GraspLabel::Negative,
            collision,
            gap,
            contacts,
        }
    }
}

/// Surface samples in hand coordinates, as seen by one candidate.
pub struct HandView {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

/// Labeler with the mesh surface sampled once.
pub struct AntipodalLabeler {
    samples: Vec<SurfaceSample>,
    hand: HandGeometry,
    params: AntipodalParams,
}

impl AntipodalLabeler {
    pub fn new(mesh: &TriangleMesh, hand: HandGeometry, params: AntipodalParams) -> Result<Self> {
        hand.validate()?;
        params.validate()?;
        Ok(AntipodalLabeler {
            samples: mesh.surface_samples(params.sample_density),
            hand,
            params,
        })
    }

    pub fn samples(&self) -> &[SurfaceSample] {
        &self.samples
    }

    pub fn params(&self) -> &AntipodalParams {
        &self.params
    }

    pub fn hand(&self) -> &HandGeometry {
        &self.hand
    }

    /// Samples near the hand, in hand coordinates.
    pub fn hand_view(&self, pose: &Pose, aperture: f64) -> HandView {
        let h = &self.hand;
        let reach = Vec3::new(
            h.finger_depth / 2.0,
            h.hand_height / 2.0,
            aperture / 2.0 + h.finger_width,
        );
        let mut points = Vec::new();
        let mut normals = Vec::new();
        for s in &self.samples {
            let l = pose.to_local(&s.point);
            if l.x.abs() <= reach.x && l.y.abs() <= reach.y && l.z.abs() <= reach.z {
                points.push(l);
                normals.push(pose.rotate_to_local(&s.normal));
            }
        }
        HandView { points, normals }
    }

    pub fn label(&self, candidate: &GraspCandidate) -> LabelOutcome {
        self.label_pose(&candidate.pose, candidate.aperture)
    }

    pub fn label_pose(&self, pose: &Pose, aperture: f64) -> LabelOutcome {
        let view = self.hand_view(pose, aperture);
        let h = &self.hand;
        let half_open = aperture / 2.0;
        // Hand-view points already lie in the finger footprint.
        if view
            .points
            .iter()
            .any(|p| p.z.abs() >= half_open && p.z.abs() <= half_open + h.finger_width)
        {
            return LabelOutcome::negative(true, None, (0, 0));
        }
        let (mut z1, mut z2) = (f64::NEG_INFINITY, f64::INFINITY);
        for p in &view.points {
            z1 = z1.max(p.z);
            z2 = z2.min(p.z);
        }
        if !z1.is_finite() {
            return LabelOutcome::negative(false, None, (0, 0));
        }
        let gap = z1 - z2;
        if gap < h.aperture_min {
            return LabelOutcome::negative(false, Some(gap), (0, 0));
        }
        let pert = self.params.vertex_perturbation;
        let cone = self.params.normal_cone_tolerance.to_radians().cos();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (p, n) in view.points.iter().zip(&view.normals) {
            if p.z >= z1 - pert && n.z >= cone {
                a.push(*p);
            }
            if p.z <= z2 + pert && -n.z >= cone {
                b.push(*p);
            }
        }
        let contacts = (a.len(), b.len());
        if a.is_empty() || b.is_empty() {
            return LabelOutcome::negative(false, Some(gap), contacts);
        }
        let line = self.params.contact_line_tolerance.to_radians();
        let cos_line = line.cos();
        // Pairs must satisfy |dx| ≤ tan(line)·dz ≤ tan(line)·gap.
        let window = if line < std::f64::consts::FRAC_PI_2 {
            line.tan() * (gap + 2.0 * pert) + 1e-12
        } else {
            f64::INFINITY
        };
        b.sort_by(|p, q| p.x.total_cmp(&q.x));
        for p in &a {
            let start = b.partition_point(|q| q.x < p.x - window);
            for q in &b[start..] {
                if q.x > p.x + window {
                    break;
                }
                let d = p - q;
                if d.z > 0.0 && d.z >= cos_line * d.norm() {
                    return LabelOutcome {
                        label: GraspLabel::Positive,
                        collision: false,
                        gap: Some(gap),
                        contacts,
                    };
                }
            }
        }
        LabelOutcome::negative(false, Some(gap), contacts)
    }
}

/// Labels one candidate; prefer [`AntipodalLabeler`] for many candidates on one mesh.
pub fn label_candidate(
    mesh: &TriangleMesh,
    candidate: &GraspCandidate,
    hand: &HandGeometry,
    params: &AntipodalParams,
) -> Result<GraspLabel> {
    Ok(AntipodalLabeler::new(mesh, *hand, *params)?.label(candidate).label)
}
