//! Small rigid-geometry helpers shared by the sampler, encoder and labeler.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Rigid transform taking hand-frame coordinates to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Pose { rotation, translation }
    }

    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.rotation * local + self.translation
    }

    pub fn to_local(&self, world: &Vec3) -> Vec3 {
        self.rotation.tr_mul(&(world - self.translation))
    }

    pub fn rotate_to_local(&self, dir: &Vec3) -> Vec3 {
        self.rotation.tr_mul(dir)
    }

    /// `other` expressed after applying `self` (self ∘ other).
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn axis(&self, i: usize) -> Vec3 {
        self.rotation.column(i).into_owned()
    }
}

/// Oriented cuboid; `axes` columns are the box's local x, y, z directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec3,
    pub axes: Matrix3<f64>,
    pub half_extents: Vec3,
}

impl OrientedBox {
    pub fn local(&self, p: &Vec3) -> Vec3 {
        self.axes.tr_mul(&(p - self.center))
    }

    /// Strict interior test.
    pub fn contains_strict(&self, p: &Vec3) -> bool {
        let l = self.local(p);
        (0..3).all(|i| l[i].abs() < self.half_extents[i])
    }

    /// Closed test.
    pub fn contains(&self, p: &Vec3) -> bool {
        let l = self.local(p);
        (0..3).all(|i| l[i].abs() <= self.half_extents[i])
    }
}

/// Serializable pose: row-major rotation plus translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        let mut rotation = [[0.0; 3]; 3];
        for (r, row) in rotation.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = p.rotation[(r, c)];
            }
        }
        PoseRecord {
            rotation,
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

impl From<&PoseRecord> for Pose {
    fn from(r: &PoseRecord) -> Self {
        Pose {
            rotation: Matrix3::from_fn(|i, j| r.rotation[i][j]),
            translation: Vec3::from(r.translation),
        }
    }
}

/// Rotation by `angle` radians about unit `axis` (Rodrigues).
pub fn axis_angle(axis: &Vec3, angle: f64) -> Matrix3<f64> {
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle).into_inner()
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Flip `v` so its first component with magnitude above `eps` is positive.
pub fn canonical_sign(v: Vec3, eps: f64) -> Vec3 {
    for c in v.iter() {
        if c.abs() > eps {
            return if *c > 0.0 { v } else { -v };
        }
    }
    v
}
