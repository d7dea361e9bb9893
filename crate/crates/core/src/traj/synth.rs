//! Synthetic reach-to-lift trajectories standing in for captured data.
//!
//! A trajectory is a minimum-jerk reach from the start marker to a pre-grasp
//! point next to the object, a short dwell, and a minimum-jerk vertical lift.

use super::{Pose, Quat, Sample, Trajectory, TrajectorySet, TrajectorySource, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Minimum-jerk profile between two points over `duration` seconds.
#[derive(Debug, Clone, Copy)]
pub struct MinJerk {
    pub from: Vec3,
    pub to: Vec3,
    pub duration: f64,
}

impl MinJerk {
    fn tau(&self, t: f64) -> f64 {
        (t / self.duration).clamp(0.0, 1.0)
    }

    /// Blend factor `10τ³ − 15τ⁴ + 6τ⁵`.
    pub fn blend(tau: f64) -> f64 {
        tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))
    }

    pub fn position(&self, t: f64) -> Vec3 {
        let s = Self::blend(self.tau(t));
        std::array::from_fn(|i| self.from[i] + s * (self.to[i] - self.from[i]))
    }

    pub fn velocity(&self, t: f64) -> Vec3 {
        if t <= 0.0 || t >= self.duration {
            return [0.0; 3];
        }
        let tau = self.tau(t);
        let ds = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) / self.duration;
        std::array::from_fn(|i| ds * (self.to[i] - self.from[i]))
    }
}

/// Shape parameters for [`generate_synthetic`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Fraction of the duration spent reaching.
    pub reach_fraction: f64,
    /// Fraction spent stationary at the pre-grasp point.
    pub dwell_fraction: f64,
    /// Horizontal distance from the object at which the reach stops, m.
    pub standoff: f64,
    /// Hand yaw at the start marker, rad.
    pub start_yaw: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { reach_fraction: 0.7, dwell_fraction: 0.0, standoff: 0.105, start_yaw: 0.0 }
    }
}

/// Reach from `start` towards `object_pos`, then lift to `lift_height`
/// above the object's reference height, sampled every `dt` seconds.
pub fn generate_synthetic(
    start: Vec3,
    object_pos: Vec3,
    lift_height: f64,
    duration: f64,
    dt: f64,
) -> Trajectory {
    generate_with(&SyntheticConfig::default(), start, object_pos, lift_height, duration, dt)
}

pub(crate) fn generate_with(
    cfg: &SyntheticConfig,
    start: Vec3,
    object_pos: Vec3,
    lift_height: f64,
    duration: f64,
    dt: f64,
) -> Trajectory {
    assert!(duration > 0.0 && dt > 0.0, "duration and dt must be positive");
    let dir = [start[0] - object_pos[0], start[1] - object_pos[1]];
    let dn = dir[0].hypot(dir[1]);
    let (ux, uy) = if dn > 0.0 { (dir[0] / dn, dir[1] / dn) } else { (1.0, 0.0) };
    let pregrasp = [
        object_pos[0] + cfg.standoff * ux,
        object_pos[1] + cfg.standoff * uy,
        object_pos[2],
    ];
    let lifted = [pregrasp[0], pregrasp[1], object_pos[2] + lift_height];

    let t_reach = duration * cfg.reach_fraction;
    let t_lift = t_reach + duration * cfg.dwell_fraction;
    let reach = MinJerk { from: start, to: pregrasp, duration: t_reach };
    let lift = MinJerk { from: pregrasp, to: lifted, duration: duration - t_lift };

    // face the object: hand x-axis along the approach direction
    let face_yaw = (-uy).atan2(-ux);
    let mut dyaw = face_yaw - cfg.start_yaw;
    dyaw = (dyaw + PI).rem_euclid(2.0 * PI) - PI;

    let n = (duration / dt).round().max(1.0) as usize;
    let samples = (0..=n)
        .map(|k| {
            let t = if k == n { duration } else { k as f64 * dt };
            let (position, yaw) = if t < t_reach {
                let s = MinJerk::blend(t / t_reach);
                (reach.position(t), cfg.start_yaw + s * dyaw)
            } else if t < t_lift {
                (pregrasp, cfg.start_yaw + dyaw)
            } else {
                (lift.position(t - t_lift), cfg.start_yaw + dyaw)
            };
            Sample { t, pose: Pose::new(position, Quat::from_yaw(yaw)) }
        })
        .collect();
    Trajectory::new(samples).expect("synthetic samples are strictly increasing")
}

/// Lift height of the bundled synthetic set, m.
pub const DEFAULT_LIFT_HEIGHT: f64 = 0.2;
/// Duration of each bundled synthetic trajectory before warping, s.
pub const DEFAULT_DURATION: f64 = 1.2;
/// Sampling interval of the bundled synthetic trajectories, s.
pub const DEFAULT_CAPTURE_DT: f64 = 0.01;

/// Start markers on a polar grid centred on `center`, at height `center[2]`.
pub fn polar_grid(center: Vec3, radii: &[f64], angles: &[f64]) -> Vec<Vec3> {
    radii
        .iter()
        .flat_map(|&r| {
            angles
                .iter()
                .map(move |&a| [center[0] + r * a.cos(), center[1] + r * a.sin(), center[2]])
        })
        .collect()
}

/// The default 4 x 4 grid of start markers around the origin.
pub fn default_grid() -> Vec<Vec3> {
    let radii = [0.30, 0.40, 0.50, 0.60];
    // evenly spread over the half-plane in front of the subject (negative y)
    let angles: Vec<f64> = (0..4).map(|k| -PI / 2.0 + (k as f64 - 1.5) * PI / 5.0).collect();
    polar_grid([0.0; 3], &radii, &angles)
}

/// One synthetic trajectory per start marker of the default grid.
pub fn synthetic_set(lift_height: f64, duration: f64, dt: f64) -> TrajectorySet {
    synthetic_set_with(&SyntheticConfig::default(), lift_height, duration, dt)
}

/// The bundled 16-trajectory synthetic set.
pub fn default_synthetic_set() -> TrajectorySet {
    synthetic_set(DEFAULT_LIFT_HEIGHT, DEFAULT_DURATION, DEFAULT_CAPTURE_DT)
}

pub fn synthetic_set_with(cfg: &SyntheticConfig, lift_height: f64, duration: f64, dt: f64) -> TrajectorySet {
    let trajectories = default_grid()
        .into_iter()
        .map(|start| generate_with(cfg, start, [0.0; 3], lift_height, duration, dt))
        .collect();
    TrajectorySet::new(trajectories, TrajectorySource::Synthetic).expect("grid is non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_conditions() {
        let start = [0.3, -0.2, 0.0];
        let tr = generate_synthetic(start, [0.0; 3], 0.2, 1.4, 0.01);
        let first = tr.samples()[0].pose.position;
        assert_eq!(first, start);
        let last = tr.samples()[tr.len() - 1].pose.position;
        assert!((last[2] - 0.2).abs() < 1e-12);
        assert!((tr.duration() - 1.4).abs() < 1e-12);
    }

    #[test]
    fn min_jerk_zero_velocity_at_ends() {
        let mj = MinJerk { from: [0.4, 0.0, 0.0], to: [0.03, 0.0, 0.0], duration: 0.77 };
        for t in [0.0, 0.77] {
            let v = mj.velocity(t);
            assert!(v.iter().all(|c| c.abs() < 1e-6));
        }
        // just inside the interval the analytic velocity still vanishes to O(τ²)
        let v = mj.velocity(1e-5);
        assert!(v[0].abs() < 1e-6);
        // finite-difference agreement in the middle
        let h = 1e-6;
        let fd = (mj.position(0.3 + h)[0] - mj.position(0.3 - h)[0]) / (2.0 * h);
        assert!((fd - mj.velocity(0.3)[0]).abs() < 1e-6);
    }

    #[test]
    fn grid_has_sixteen_markers() {
        let g = default_grid();
        assert_eq!(g.len(), 16);
        let mut radii: Vec<i64> = g.iter().map(|p| (p[0].hypot(p[1]) * 1000.0).round() as i64).collect();
        radii.dedup();
        radii.sort();
        radii.dedup();
        assert_eq!(radii.len(), 4);
    }

    #[test]
    fn unit_quaternions_throughout() {
        let tr = generate_synthetic([-0.2, -0.3, 0.0], [0.0; 3], 0.2, 1.0, 0.01);
        for p in tr.poses() {
            assert!((p.orientation.norm() - 1.0).abs() < 1e-12);
        }
    }
}
