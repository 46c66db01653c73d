//! Helpers shared by the integration tests.
#![allow(dead_code)]

use gpd::candgen::{CandidateSampler, GraspCandidate, HandGeometry, SamplerConfig};
use gpd::cloud::{CloudWithViewpoints, RegionOfInterest};
use gpd::geom::Vec3;
use gpd::oracle::{stereo_render, AntipodalParams, StereoRig, SurfaceSample, TriangleMesh};

/// Labels by enumerating every contact pair and measuring angles directly.
pub fn brute_force_label(
    samples: &[SurfaceSample],
    hand: &HandGeometry,
    params: &AntipodalParams,
    c: &GraspCandidate,
) -> bool {
    let r = c.pose.rotation;
    let half_open = c.aperture / 2.0;
    let mut inside = Vec::new();
    for s in samples {
        let l = r.transpose() * (s.point - c.pose.translation);
        if l.x.abs() > hand.finger_depth / 2.0 || l.y.abs() > hand.hand_height / 2.0 {
            continue;
        }
        if l.z.abs() > half_open + hand.finger_width {
            continue;
        }
        if l.z.abs() >= half_open {
            // mesh inside a finger at the open pose
            return false;
        }
        inside.push((l, r.transpose() * s.normal));
    }
    if inside.is_empty() {
        return false;
    }
    let top = inside.iter().map(|(p, _)| p.z).fold(f64::MIN, f64::max);
    let bottom = inside.iter().map(|(p, _)| p.z).fold(f64::MAX, f64::min);
    if top - bottom < hand.aperture_min {
        return false;
    }
    let cone = params.normal_cone_tolerance.to_radians();
    let line = params.contact_line_tolerance.to_radians();
    let angle = |v: &Vec3, axis: f64| (axis * v.z / v.norm()).clamp(-1.0, 1.0).acos();
    let first: Vec<&Vec3> = inside
        .iter()
        .filter(|(p, n)| p.z >= top - params.vertex_perturbation && angle(n, 1.0) <= cone)
        .map(|(p, _)| p)
        .collect();
    let second: Vec<&Vec3> = inside
        .iter()
        .filter(|(p, n)| p.z <= bottom + params.vertex_perturbation && angle(n, -1.0) <= cone)
        .map(|(p, _)| p)
        .collect();
    first
        .iter()
        .any(|p| second.iter().any(|q| angle(&(*p - *q), 1.0) <= line))
}

pub fn scene_candidates(
    mesh: &TriangleMesh,
    rig: &StereoRig,
    sampler: SamplerConfig,
    seed: u64,
) -> (CloudWithViewpoints, Vec<GraspCandidate>) {
    let cloud = stereo_render(mesh, rig, Default::default()).unwrap();
    let roi = RegionOfInterest::all(&cloud);
    let cands = CandidateSampler::new(&cloud, HandGeometry::default(), sampler)
        .unwrap()
        .sample(&roi, seed)
        .unwrap();
    (cloud, cands)
}
