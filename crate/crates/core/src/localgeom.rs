//! Local surface frames: normal, curvature axis and binormal at a cloud point.
//!
//! The normal is the least-variance direction of the neighborhood scatter,
//! oriented toward the sensor that saw the point. The curvature axis comes
//! from a quadric height-field fit over the tangent plane: it is the
//! principal direction with the smallest absolute normal curvature, i.e.
//! the direction a cylinder's axis points.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, SymmetricEigen};

use crate::cloud::CloudWithViewpoints;
use crate::error::{Error, Result};
use crate::geom::{canonical_sign, Vec3};
use crate::spatial::HashGrid;

/// Neighborhood parameters for frame estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    pub radius: f64,
    pub min_neighbors: usize,
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameParams {
            radius: 0.01,
            min_neighbors: 20,
        }
    }
}

/// Darboux-style frame at a surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Vec3,
    pub normal: Vec3,
    pub curvature_axis: Vec3,
    /// `normal × curvature_axis`.
    pub binormal: Vec3,
    pub neighborhood_count: usize,
}

impl LocalFrame {
    /// Columns (normal, curvature_axis, binormal).
    pub fn basis(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.normal, self.curvature_axis, self.binormal])
    }
}

// Below this scaled curvature the patch is treated as planar.
const PLANAR_EPS: f64 = 1e-3;
// Middle/largest scatter eigenvalue ratio below which neighbors are collinear.
const COLLINEAR_EPS: f64 = 1e-6;

/// Frame estimator over a prebuilt neighbor index. Immutable once built.
pub struct FrameEstimator<'a> {
    cloud: &'a CloudWithViewpoints,
    grid: HashGrid,
    params: FrameParams,
}

impl<'a> FrameEstimator<'a> {
    pub fn new(cloud: &'a CloudWithViewpoints, params: FrameParams) -> Result<Self> {
        if !(params.radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "radius must be positive, got {}",
                params.radius
            )));
        }
        Ok(FrameEstimator {
            cloud,
            grid: HashGrid::build(cloud.points(), params.radius),
            params,
        })
    }

    pub fn cloud(&self) -> &CloudWithViewpoints {
        self.cloud
    }

    pub fn grid(&self) -> &HashGrid {
        &self.grid
    }

    pub fn params(&self) -> FrameParams {
        self.params
    }

    /// Neighbor coordinates sorted lexicographically so every reduction
    /// below is independent of input point order.
    fn neighborhood(&self, center: &Vec3) -> Result<Vec<Vec3>> {
        let mut pts: Vec<Vec3> = Vec::new();
        self.grid
            .for_each_within(center, self.params.radius, |i| pts.push(self.cloud.points()[i]));
        if pts.len() < self.params.min_neighbors.max(3) {
            return Err(Error::TooFewNeighbors {
                found: pts.len(),
                required: self.params.min_neighbors.max(3),
            });
        }
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)));
        Ok(pts)
    }

    /// Returns (normal, major tangent, neighbors).
    fn oriented_normal(&self, index: usize) -> Result<(Vec3, Vec3, Vec<Vec3>)> {
        let p = self.cloud.points()[index];
        let pts = self.neighborhood(&p)?;
        let n = pts.len() as f64;
        let centroid = pts.iter().fold(Vec3::zeros(), |acc, q| acc + q) / n;
        let mut scatter = Matrix3::zeros();
        for q in &pts {
            let d = q - centroid;
            scatter += d * d.transpose();
        }
        let eig = SymmetricEigen::new(scatter);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let largest = eig.eigenvalues[order[2]];
        if !(largest > 0.0) || eig.eigenvalues[order[1]] <= COLLINEAR_EPS * largest {
            return Err(Error::DegenerateScatter);
        }
        let mut normal: Vec3 = eig.eigenvectors.column(order[0]).normalize();
        let major: Vec3 = eig.eigenvectors.column(order[2]).normalize();
        let view_id = self.cloud.view_of(index)[0];
        if let Some(vp) = self.cloud.viewpoint(view_id) {
            if normal.dot(&(vp.position - p)) < 0.0 {
                normal = -normal;
            }
        }
        Ok((normal, major, pts))
    }

    /// Outward unit normal at `index`.
    pub fn normal(&self, index: usize) -> Result<Vec3> {
        self.oriented_normal(index).map(|(n, _, _)| n)
    }

    pub fn frame(&self, index: usize) -> Result<LocalFrame> {
        let p = self.cloud.points()[index];
        let (normal, major, pts) = self.oriented_normal(index)?;
        let t1 = (major - normal * major.dot(&normal)).normalize();
        let t2 = normal.cross(&t1);

        // Height field w(u, v) = a u² + b uv + c v² + d u + e v + f around p,
        // in units of the neighborhood radius for conditioning.
        let s = 1.0 / self.params.radius;
        let mut a = DMatrix::zeros(pts.len(), 6);
        let mut rhs = DVector::zeros(pts.len());
        for (row, q) in pts.iter().enumerate() {
            let d = (q - p) * s;
            let (u, v, w) = (d.dot(&t1), d.dot(&t2), d.dot(&normal));
            let coeffs = [u * u, u * v, v * v, u, v, 1.0];
            for (col, c) in coeffs.iter().enumerate() {
                a[(row, col)] = *c;
            }
            rhs[row] = w;
        }
        let fit = a
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|_| Error::DegenerateScatter)?;
        let hessian = Matrix2::new(2.0 * fit[0], fit[1], fit[1], 2.0 * fit[2]);
        let eig = SymmetricEigen::new(hessian);
        let (k0, k1) = (eig.eigenvalues[0], eig.eigenvalues[1]);

        let axis = if k0.abs().max(k1.abs()) < PLANAR_EPS {
            t1
        } else {
            let flat = if k0.abs() <= k1.abs() { 0 } else { 1 };
            let e = eig.eigenvectors.column(flat);
            (t1 * e[0] + t2 * e[1]).normalize()
        };
        let curvature_axis = canonical_sign(axis, 1e-9);
        let binormal = normal.cross(&curvature_axis).normalize();
        Ok(LocalFrame {
            origin: p,
            normal,
            curvature_axis,
            binormal,
            neighborhood_count: pts.len(),
        })
    }
}

/// One-shot frame estimate with the default minimum neighbor count.
pub fn estimate_frame(cloud: &CloudWithViewpoints, point_index: usize, radius: f64) -> Result<LocalFrame> {
    if point_index >= cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "point index {point_index} out of range"
        )));
    }
    let params = FrameParams {
        radius,
        ..FrameParams::default()
    };
    FrameEstimator::new(cloud, params)?.frame(point_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Viewpoint;
    use crate::geom::{axis_angle, Pose};

    fn grid_cloud(f: impl Fn(f64, f64) -> Vec3, viewpoint: Vec3) -> CloudWithViewpoints {
        let mut pts = Vec::new();
        for i in -15..=15 {
            for j in -15..=15 {
                pts.push(f(i as f64 * 0.001, j as f64 * 0.001));
            }
        }
        CloudWithViewpoints::from_single_view(pts, Viewpoint::new(0, viewpoint)).unwrap()
    }

    fn center_index(cloud: &CloudWithViewpoints, target: Vec3) -> usize {
        (0..cloud.len())
            .min_by(|&a, &b| {
                (cloud.points()[a] - target)
                    .norm()
                    .total_cmp(&(cloud.points()[b] - target).norm())
            })
            .unwrap()
    }

    fn cylinder_cloud(radius: f64) -> CloudWithViewpoints {
        // axis along world y, visible half facing +z
        let mut pts = Vec::new();
        for i in -40..=40 {
            let theta = i as f64 * 0.001 / radius;
            for j in -15..=15 {
                pts.push(Vec3::new(radius * theta.sin(), j as f64 * 0.001, radius * theta.cos()));
            }
        }
        CloudWithViewpoints::from_single_view(pts, Viewpoint::new(0, Vec3::new(0.0, 0.0, 1.0))).unwrap()
    }

    fn assert_orthonormal(f: &LocalFrame) {
        let b = f.basis();
        assert!((b.transpose() * b - Matrix3::identity()).abs().max() < 1e-6);
        assert!((b.determinant() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn plane_normal_points_at_viewpoint() {
        let cloud = grid_cloud(|x, y| Vec3::new(x, y, 0.0), Vec3::new(0.0, 0.0, 1.0));
        let i = center_index(&cloud, Vec3::zeros());
        let f = estimate_frame(&cloud, i, 0.01).unwrap();
        assert!((f.normal - Vec3::z()).norm() < 1e-3);
        assert_orthonormal(&f);
    }

    #[test]
    fn flipping_viewpoint_flips_normal() {
        let up = grid_cloud(|x, y| Vec3::new(x, y, 0.0), Vec3::new(0.0, 0.0, 1.0));
        let down = grid_cloud(|x, y| Vec3::new(x, y, 0.0), Vec3::new(0.0, 0.0, -1.0));
        let i = center_index(&up, Vec3::zeros());
        let a = estimate_frame(&up, i, 0.01).unwrap();
        let b = estimate_frame(&down, i, 0.01).unwrap();
        assert!((a.normal + b.normal).norm() < 1e-9);
    }

    #[test]
    fn cylinder_axis_recovered() {
        let cloud = cylinder_cloud(0.04);
        let i = center_index(&cloud, Vec3::new(0.0, 0.0, 0.04));
        let f = estimate_frame(&cloud, i, 0.01).unwrap();
        let cos = f.curvature_axis.dot(&Vec3::y()).abs();
        assert!(cos > 2.0f64.to_radians().cos(), "axis {:?}", f.curvature_axis);
        assert!((f.normal - Vec3::z()).norm() < 1e-2);
        assert_orthonormal(&f);
    }

    #[test]
    fn too_few_neighbors() {
        let pts = vec![Vec3::zeros(), Vec3::new(0.001, 0.0, 0.0), Vec3::new(0.0, 0.001, 0.0)];
        let cloud = CloudWithViewpoints::from_single_view(pts, Viewpoint::new(0, Vec3::z())).unwrap();
        assert!(matches!(
            estimate_frame(&cloud, 0, 0.01),
            Err(Error::TooFewNeighbors { found: 3, required: 20 })
        ));
    }

    #[test]
    fn collinear_neighborhood_is_degenerate() {
        let pts = (0..30).map(|i| Vec3::new(i as f64 * 0.0003, 0.0, 0.0)).collect();
        let cloud = CloudWithViewpoints::from_single_view(pts, Viewpoint::new(0, Vec3::z())).unwrap();
        assert!(matches!(
            estimate_frame(&cloud, 10, 0.01),
            Err(Error::DegenerateScatter)
        ));
    }

    #[test]
    fn frame_is_covariant_under_rigid_motion() {
        let cloud = cylinder_cloud(0.03);
        let i = center_index(&cloud, Vec3::new(0.0, 0.005, 0.03));
        let pose = Pose::new(axis_angle(&Vec3::new(0.3, -1.0, 0.5), 0.9), Vec3::new(0.2, -0.4, 1.1));
        let moved = cloud.transformed(&pose);
        let a = estimate_frame(&cloud, i, 0.01).unwrap();
        let b = estimate_frame(&moved, i, 0.01).unwrap();
        assert!((pose.rotation * a.normal - b.normal).norm() < 1e-3);
        let axis = pose.rotation * a.curvature_axis;
        assert!(axis.dot(&b.curvature_axis).abs() > 1.0 - 1e-3);
        assert_orthonormal(&b);
    }

    #[test]
    fn saddle_frames_are_right_handed() {
        for (k, &(ca, cb)) in [(5.0, -3.0), (10.0, 10.0), (0.0, 20.0), (-8.0, 1.0)].iter().enumerate() {
            let cloud = grid_cloud(
                |x, y| Vec3::new(x, y, ca * x * x + cb * y * y + 0.3 * x * y),
                Vec3::new(0.1 * k as f64, 0.0, 1.0),
            );
            let i = center_index(&cloud, Vec3::zeros());
            let f = estimate_frame(&cloud, i, 0.01).unwrap();
            assert_orthonormal(&f);
        }
    }
}
