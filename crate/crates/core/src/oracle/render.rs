//! Pinhole depth rendering of meshes into viewpoint-tagged clouds.

use serde::{Deserialize, Serialize};

use super::mesh::TriangleMesh;
use crate::cloud::{merge_clouds, CloudWithViewpoints, Viewpoint};
use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Pinhole camera with square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Intrinsics {
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Intrinsics {
            width: 320,
            height: 240,
            hfov_deg: 57.0,
        }
    }
}

impl Intrinsics {
    pub fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.hfov_deg.to_radians() / 2.0).tan()
    }
}

/// Camera orientation: columns right, down, forward.
#[derive(Debug, Clone, Copy)]
pub struct Camera {
    pub eye: Vec3,
    pub right: Vec3,
    pub down: Vec3,
    pub forward: Vec3,
    pub intrinsics: Intrinsics,
}

impl Camera {
    pub fn look_at(eye: Vec3, target: Vec3, intrinsics: Intrinsics) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidArgument("camera target coincides with eye".into()))?;
        let up = if forward.cross(&Vec3::z()).norm() < 1e-6 {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        Ok(Camera {
            eye,
            right,
            down,
            forward,
            intrinsics,
        })
    }

    /// Unnormalized ray direction through the center of pixel (u, v).
    pub fn ray(&self, u: usize, v: usize) -> Vec3 {
        let f = self.intrinsics.focal();
        let x = (u as f64 + 0.5 - self.intrinsics.width as f64 / 2.0) / f;
        let y = (v as f64 + 0.5 - self.intrinsics.height as f64 / 2.0) / f;
        self.forward + self.right * x + self.down * y
    }

    /// Continuous pixel coordinates of `p`, `None` behind the camera.
    fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        let d = p - self.eye;
        let z = d.dot(&self.forward);
        if z <= 1e-9 {
            return None;
        }
        let f = self.intrinsics.focal();
        Some((
            d.dot(&self.right) / z * f + self.intrinsics.width as f64 / 2.0,
            d.dot(&self.down) / z * f + self.intrinsics.height as f64 / 2.0,
        ))
    }
}

/// Möller–Trumbore; returns the ray parameter of a front- or back-facing hit.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 1e-9).then_some(t)
}

/// Renders the mesh from `viewpoint` aimed at the mesh centroid.
pub fn render_view(mesh: &TriangleMesh, viewpoint: Viewpoint, intrinsics: Intrinsics) -> Result<CloudWithViewpoints> {
    render_view_toward(mesh, viewpoint, mesh.centroid(), intrinsics)
}

/// Ray-casts one depth image and returns first hits as cloud points.
pub fn render_view_toward(
    mesh: &TriangleMesh,
    viewpoint: Viewpoint,
    target: Vec3,
    intrinsics: Intrinsics,
) -> Result<CloudWithViewpoints> {
    let cam = Camera::look_at(viewpoint.position, target, intrinsics)?;
    let (w, h) = (intrinsics.width, intrinsics.height);
    let mut depth = vec![f64::INFINITY; w * h];
    for t in 0..mesh.triangles().len() {
        let tri = mesh.triangle(t);
        // conservative pixel bounds; whole image if any vertex is behind
        let (mut u0, mut u1, mut v0, mut v1) = (0usize, w, 0usize, h);
        let projected: Option<Vec<(f64, f64)>> = tri.iter().map(|p| cam.project(p)).collect();
        if let Some(pts) = projected {
            let umin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor() - 1.0;
            let umax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil() + 1.0;
            let vmin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor() - 1.0;
            let vmax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil() + 1.0;
            if umax < 0.0 || vmax < 0.0 || umin >= w as f64 || vmin >= h as f64 {
                continue;
            }
            u0 = umin.max(0.0) as usize;
            u1 = (umax.min(w as f64 - 1.0) as usize) + 1;
            v0 = vmin.max(0.0) as usize;
            v1 = (vmax.min(h as f64 - 1.0) as usize) + 1;
        }
        for v in v0..v1 {
            for u in u0..u1 {
                if let Some(t) = ray_triangle(&cam.eye, &cam.ray(u, v), &tri) {
                    let d = &mut depth[v * w + u];
                    if t < *d {
                        *d = t;
                    }
                }
            }
        }
    }
    let mut points = Vec::new();
    for v in 0..h {
        for u in 0..w {
            let t = depth[v * w + u];
            if t.is_finite() {
                points.push(cam.eye + cam.ray(u, v) * t);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyRender);
    }
    CloudWithViewpoints::from_single_view(points, viewpoint)
}

/// Two-sensor rig circling the object's vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StereoRig {
    /// Angle between the two sensors about the vertical axis, degrees.
    pub baseline_deg: f64,
    pub distance: f64,
    /// Sensor elevation above the horizontal plane through the centroid.
    pub elevation_deg: f64,
    /// Azimuth of the bisector between the two sensors.
    pub azimuth_deg: f64,
}

impl Default for StereoRig {
    fn default() -> Self {
        StereoRig {
            baseline_deg: 53.0,
            distance: 0.6,
            elevation_deg: 30.0,
            azimuth_deg: 0.0,
        }
    }
}

impl StereoRig {
    pub fn viewpoints(&self, target: &Vec3) -> [Viewpoint; 2] {
        let elev = self.elevation_deg.to_radians();
        let half = self.baseline_deg.to_radians() / 2.0;
        let az = self.azimuth_deg.to_radians();
        let place = |id: u32, a: f64| {
            let dir = Vec3::new(elev.cos() * a.cos(), elev.cos() * a.sin(), elev.sin());
            Viewpoint::new(id, target + dir * self.distance)
        };
        [place(0, az - half), place(1, az + half)]
    }
}

/// Renders from both sensors of the rig and merges the two views.
pub fn stereo_render(mesh: &TriangleMesh, rig: &StereoRig, intrinsics: Intrinsics) -> Result<CloudWithViewpoints> {
    let target = mesh.centroid();
    let [a, b] = rig.viewpoints(&target);
    let left = render_view_toward(mesh, a, target, intrinsics)?;
    let right = render_view_toward(mesh, b, target, intrinsics)?;
    Ok(merge_clouds(&left, &right))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Intrinsics {
        Intrinsics {
            width: 64,
            height: 48,
            hfov_deg: 57.0,
        }
    }

    #[test]
    fn cube_front_face_only() {
        let cube = TriangleMesh::make_box(1.0, 1.0, 1.0);
        let cloud = render_view(&cube, Viewpoint::new(0, Vec3::new(0.0, 0.0, 3.0)), small()).unwrap();
        assert!(!cloud.is_empty());
        assert!(cloud.points().iter().all(|p| p.z >= 0.5 - 1e-6));
    }

    #[test]
    fn looking_away_is_empty() {
        let cube = TriangleMesh::make_box(0.1, 0.1, 0.1);
        let r = render_view_toward(
            &cube,
            Viewpoint::new(0, Vec3::new(0.0, 0.0, 1.0)),
            Vec3::new(0.0, 0.0, 2.0),
            small(),
        );
        assert!(matches!(r, Err(Error::EmptyRender)));
    }

    #[test]
    fn point_count_matches_brute_force() {
        let mesh = TriangleMesh::make_sphere(0.05, 8, 12);
        let vp = Viewpoint::new(0, Vec3::new(0.2, 0.1, 0.3));
        let cloud = render_view(&mesh, vp, small()).unwrap();
        let cam = Camera::look_at(vp.position, mesh.centroid(), small()).unwrap();
        let mut hits = 0;
        for v in 0..48 {
            for u in 0..64 {
                let dir = cam.ray(u, v);
                if (0..mesh.triangles().len()).any(|t| ray_triangle(&cam.eye, &dir, &mesh.triangle(t)).is_some()) {
                    hits += 1;
                }
            }
        }
        assert_eq!(cloud.len(), hits);
    }

    #[test]
    fn zero_baseline_duplicates_geometry() {
        let mesh = TriangleMesh::make_box(0.05, 0.05, 0.05);
        let rig = StereoRig {
            baseline_deg: 0.0,
            ..StereoRig::default()
        };
        let single = render_view(&mesh, rig.viewpoints(&mesh.centroid())[0], small()).unwrap();
        let both = stereo_render(&mesh, &rig, small()).unwrap();
        assert_eq!(both.len(), 2 * single.len());
        assert_eq!(both.viewpoints().len(), 2);
    }
}
