//! Triangle meshes: loading, parametric primitives and dense surface samples.

use std::path::Path;

use crate::error::{Error, Result};
use crate::formats::{self, obj, ply};
use crate::geom::{is_finite, Pose, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    vertex_normals: Vec<Vec3>,
}

/// A surface point with its interpolated outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub point: Vec3,
    pub normal: Vec3,
}

impl TriangleMesh {
    /// Builds a mesh; normals are area-weighted face averages when `None`.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>, normals: Option<Vec<Vec3>>) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        if let Some(v) = vertices.iter().position(|v| !is_finite(v)) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not finite")));
        }
        if let Some(t) = triangles.iter().position(|t| t.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::InvalidMesh(format!("triangle {t} has an out-of-range index")));
        }
        let vertex_normals = match normals {
            Some(n) => {
                if n.len() != vertices.len() {
                    return Err(Error::InvalidMesh("normal count differs from vertex count".into()));
                }
                n.into_iter()
                    .enumerate()
                    .map(|(i, v)| {
                        v.try_normalize(1e-12)
                            .ok_or_else(|| Error::InvalidMesh(format!("normal {i} is zero or not finite")))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            None => area_weighted_normals(&vertices, &triangles),
        };
        Ok(TriangleMesh {
            vertices,
            triangles,
            vertex_normals,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_normals(&self) -> &[Vec3] {
        &self.vertex_normals
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle(t);
        (b - a)
            .cross(&(c - a))
            .try_normalize(1e-300)
            .unwrap_or_else(Vec3::zeros)
    }

    /// Area-weighted centroid of the surface.
    pub fn centroid(&self) -> Vec3 {
        let (mut sum, mut area) = (Vec3::zeros(), 0.0);
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(t);
            let w = (b - a).cross(&(c - a)).norm() / 2.0;
            sum += (a + b + c) / 3.0 * w;
            area += w;
        }
        if area > 0.0 {
            sum / area
        } else {
            self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
        }
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| pose.to_world(v)).collect(),
            triangles: self.triangles.clone(),
            vertex_normals: self.vertex_normals.iter().map(|n| pose.rotation * n).collect(),
        }
    }

    /// Deterministic dense sampling: each triangle is split into `k²`
    /// congruent sub-triangles with `k² / area ≥ density` and sampled at
    /// their centroids. Normals interpolate the vertex normals.
    pub fn surface_samples(&self, density: f64) -> Vec<SurfaceSample> {
        let mut out = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = self.triangle(t);
            let area = (b - a).cross(&(c - a)).norm() / 2.0;
            if area <= 0.0 {
                continue;
            }
            let k = ((area * density).sqrt().ceil() as usize).max(1);
            let kf = k as f64;
            let [na, nb, nc] = tri.map(|i| self.vertex_normals[i]);
            let face = self.face_normal(t);
            let mut push = |u: f64, v: f64| {
                let w = 1.0 - u - v;
                let point = a * w + b * u + c * v;
                let normal = (na * w + nb * u + nc * v).try_normalize(1e-12).unwrap_or(face);
                out.push(SurfaceSample { point, normal });
            };
            for i in 0..k {
                for j in 0..k - i {
                    push((i as f64 + 1.0 / 3.0) / kf, (j as f64 + 1.0 / 3.0) / kf);
                    if i + j + 1 < k {
                        push((i as f64 + 2.0 / 3.0) / kf, (j as f64 + 2.0 / 3.0) / kf);
                    }
                }
            }
        }
        out
    }

    /// Axis-aligned box centered at the origin; each face has its own
    /// vertices so normals stay exact.
    pub fn make_box(sx: f64, sy: f64, sz: f64) -> Self {
        let h = Vec3::new(sx / 2.0, sy / 2.0, sz / 2.0);
        let mut vertices = Vec::new();
        let mut normals = Vec::new();
        let mut triangles = Vec::new();
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                let n = {
                    let mut n = Vec3::zeros();
                    n[axis] = sign;
                    n
                };
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let base = vertices.len();
                for (du, dv) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                    let mut p = Vec3::zeros();
                    p[axis] = sign * h[axis];
                    p[u] = du * h[u];
                    p[v] = dv * h[v];
                    vertices.push(p);
                    normals.push(n);
                }
                // (u, v, axis) is right-handed, so CCW in (u, v) faces +axis
                if sign > 0.0 {
                    triangles.push([base, base + 1, base + 2]);
                    triangles.push([base, base + 2, base + 3]);
                } else {
                    triangles.push([base, base + 2, base + 1]);
                    triangles.push([base, base + 3, base + 2]);
                }
            }
        }
        TriangleMesh::new(vertices, triangles, Some(normals)).expect("box is valid")
    }

    /// Upright cylinder (axis +z) centered at the origin, with flat caps.
    pub fn make_cylinder(radius: f64, height: f64, segments: usize) -> Self {
        let segments = segments.max(3);
        let hz = height / 2.0;
        let mut vertices = Vec::new();
        let mut normals = Vec::new();
        let mut triangles = Vec::new();
        let ring = |k: usize| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
            (t.cos(), t.sin())
        };
        // side: two rings with radial normals
        for k in 0..segments {
            let (c, s) = ring(k);
            for z in [-hz, hz] {
                vertices.push(Vec3::new(radius * c, radius * s, z));
                normals.push(Vec3::new(c, s, 0.0));
            }
        }
        for k in 0..segments {
            let k2 = (k + 1) % segments;
            let (b0, t0, b1, t1) = (2 * k, 2 * k + 1, 2 * k2, 2 * k2 + 1);
            triangles.push([b0, b1, t1]);
            triangles.push([b0, t1, t0]);
        }
        // caps
        for (z, nz) in [(-hz, -1.0), (hz, 1.0)] {
            let center = vertices.len();
            vertices.push(Vec3::new(0.0, 0.0, z));
            normals.push(Vec3::new(0.0, 0.0, nz));
            let first = vertices.len();
            for k in 0..segments {
                let (c, s) = ring(k);
                vertices.push(Vec3::new(radius * c, radius * s, z));
                normals.push(Vec3::new(0.0, 0.0, nz));
            }
            for k in 0..segments {
                let (a, b) = (first + k, first + (k + 1) % segments);
                if nz > 0.0 {
                    triangles.push([center, a, b]);
                } else {
                    triangles.push([center, b, a]);
                }
            }
        }
        TriangleMesh::new(vertices, triangles, Some(normals)).expect("cylinder is valid")
    }

    /// UV sphere centered at the origin.
    pub fn make_sphere(radius: f64, rings: usize, segments: usize) -> Self {
        let rings = rings.max(2);
        let segments = segments.max(3);
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for r in 0..=rings {
            let phi = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let theta = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
                vertices.push(Vec3::new(phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()) * radius);
            }
        }
        let idx = |r: usize, s: usize| r * segments + s % segments;
        for r in 0..rings {
            for s in 0..segments {
                let (a, b, c, d) = (idx(r, s), idx(r, s + 1), idx(r + 1, s), idx(r + 1, s + 1));
                if r > 0 {
                    triangles.push([a, c, b]);
                }
                if r + 1 < rings {
                    triangles.push([b, c, d]);
                }
            }
        }
        let normals = vertices.iter().map(|v| v / radius).collect();
        TriangleMesh::new(vertices, triangles, Some(normals)).expect("sphere is valid")
    }
}

fn area_weighted_normals(vertices: &[Vec3], triangles: &[[usize; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    for t in triangles {
        let [a, b, c] = t.map(|i| vertices[i]);
        // cross product norm is twice the area: area weighting for free
        let n = (b - a).cross(&(c - a));
        for &i in t {
            acc[i] += n;
        }
    }
    acc.into_iter()
        .map(|n| n.try_normalize(1e-300).unwrap_or_else(Vec3::z))
        .collect()
}

/// Loads an OBJ or PLY mesh.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    match formats::extension(path).as_deref() {
        Some("obj") => {
            let data = obj::read_obj(path)?;
            TriangleMesh::new(
                data.vertices.into_iter().map(Vec3::from).collect(),
                data.triangles,
                None,
            )
        }
        Some("ply") => {
            let data = ply::read_ply(path)?;
            let mut triangles = Vec::new();
            for f in &data.faces {
                if f.len() < 3 {
                    return Err(Error::InvalidMesh("face with fewer than 3 vertices".into()));
                }
                for k in 1..f.len() - 1 {
                    triangles.push([f[0], f[k], f[k + 1]]);
                }
            }
            let normals = data.normals.map(|n| n.into_iter().map(Vec3::from).collect());
            TriangleMesh::new(data.vertices.into_iter().map(Vec3::from).collect(), triangles, normals)
        }
        other => Err(Error::UnsupportedFormat(format!(
            "{}: unknown mesh extension {:?}",
            path.display(),
            other
        ))),
    }
}

/// Writes the mesh as OBJ.
pub fn save_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let v: Vec<[f64; 3]> = mesh.vertices.iter().map(|p| [p.x, p.y, p.z]).collect();
    obj::write_obj(path, &v, &mesh.triangles)
}
