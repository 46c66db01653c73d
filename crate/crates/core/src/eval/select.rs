use serde::{Deserialize, Serialize};

use super::ScoredGrasp;
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub width_min: f64,
    pub width_max: f64,
    pub cluster_position_radius: f64,
    /// Degrees between approach axes.
    pub cluster_angle_tolerance: f64,
    /// Per meter of grasp height (world z).
    pub w_height: f64,
    pub w_width: f64,
    pub w_vertical_angle: f64,
    /// Per meter from `nominal`.
    pub w_distance: f64,
    pub nominal: [f64; 3],
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            width_min: 0.03,
            width_max: 0.07,
            cluster_position_radius: 0.02,
            cluster_angle_tolerance: 15.0,
            w_height: 10.0,
            w_width: 0.5,
            w_vertical_angle: 1.0,
            w_distance: 0.0,
            nominal: [0.0; 3],
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.w_height, self.w_width, self.w_vertical_angle, self.w_distance];
        if weights.iter().chain(&self.nominal).any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("selection weights must be finite".into()));
        }
        if !(self.cluster_position_radius > 0.0 && self.cluster_angle_tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "cluster radius and angle must be positive".into(),
            ));
        }
        if !(self.width_min < self.width_max) {
            return Err(Error::InvalidArgument("width_min must be below width_max".into()));
        }
        Ok(())
    }

    /// Utility of a grasp at `position` with approach `approach` and
    /// required width `width`.
    pub fn utility(&self, position: &Vec3, approach: &Vec3, width: f64) -> f64 {
        let normalized = (width - self.width_min) / (self.width_max - self.width_min);
        let vertical = -approach.z;
        self.w_height * position.z + self.w_width * (1.0 - normalized) + self.w_vertical_angle * vertical
            - self.w_distance * (position - Vec3::from(self.nominal)).norm()
    }
}

/// Width pruning, one pass of neighborhood position averaging, then the
/// utility argmax. Ties go to the higher classifier score, then the lower
/// candidate index. The returned grasp carries the averaged position.
pub fn select_grasp(grasps: &[ScoredGrasp], config: &SelectionConfig) -> Result<ScoredGrasp> {
    config.validate()?;
    let kept: Vec<&ScoredGrasp> = grasps
        .iter()
        .filter(|g| (config.width_min..=config.width_max).contains(&g.candidate.object_width))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptySelection);
    }
    let cos_tol = config.cluster_angle_tolerance.to_radians().cos();
    let r2 = config.cluster_position_radius * config.cluster_position_radius;
    let averaged: Vec<Vec3> = kept
        .iter()
        .map(|g| {
            let p = g.candidate.position();
            let a = g.candidate.approach();
            let (sum, n) = kept
                .iter()
                .filter(|h| {
                    (h.candidate.position() - p).norm_squared() <= r2 && h.candidate.approach().dot(&a) >= cos_tol
                })
                .fold((Vec3::zeros(), 0usize), |(s, n), h| (s + h.candidate.position(), n + 1));
            // a grasp always neighbors itself, so n ≥ 1
            sum / n as f64
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in kept.iter().enumerate() {
        let u = config.utility(&averaged[i], &g.candidate.approach(), g.candidate.object_width);
        let better = match best {
            None => true,
            Some((j, bu)) => {
                let other = kept[j];
                u > bu || (u == bu && (g.score > other.score || (g.score == other.score && g.index < other.index)))
            }
        };
        if better {
            best = Some((i, u));
        }
    }
    let (i, _) = best.expect("kept is non-empty");
    let mut chosen = kept[i].clone();
    chosen.candidate.pose.translation = averaged[i];
    chosen.candidate.closing_region.center = averaged[i];
    Ok(chosen)
}
