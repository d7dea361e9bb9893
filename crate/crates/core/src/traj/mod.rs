//! Hand-transport trajectories: representation, augmentation (offset and
//! time warp) and uniform resampling with cubic position splines and squad
//! orientation interpolation.

mod csv_io;
pub mod quat;
mod spline;
mod synth;

pub use csv_io::{export_csv, import_csv, read_csv, write_csv};
pub use quat::{slerp, squad, Quat};
pub use synth::{
    default_grid, default_synthetic_set, generate_synthetic, polar_grid, synthetic_set, synthetic_set_with, MinJerk,
    SyntheticConfig, DEFAULT_CAPTURE_DT, DEFAULT_DURATION, DEFAULT_LIFT_HEIGHT,
};

use serde::{Deserialize, Serialize};
use spline::Interpolant;
use thiserror::Error;

pub type Vec3 = [f64; 3];

/// Tolerance used for time-grid comparisons.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("warped duration {0} is not positive")]
    NonPositiveDuration(f64),
    #[error("trajectory needs at least 2 samples, got {0}")]
    DegenerateTrajectory(usize),
    #[error("time is not strictly increasing at line {line}")]
    NonMonotoneTime { line: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("resampling interval must be positive, got {0}")]
    InvalidInterval(f64),
    #[error("trajectory set is empty")]
    EmptySet,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Hand pose: position in meters and a unit orientation quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quat) -> Self {
        Self { position, orientation: orientation.normalized() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub pose: Pose,
}

/// Time-stamped pose sequence with strictly increasing times and at least
/// two samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    samples: Vec<Sample>,
    uniform_dt: Option<f64>,
}

impl Trajectory {
    /// Validates ordering and length; orientations are renormalized.
    pub fn new(mut samples: Vec<Sample>) -> Result<Self, TrajError> {
        if samples.len() < 2 {
            return Err(TrajError::DegenerateTrajectory(samples.len()));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                // +2: 1-based, plus the row that broke monotonicity
                return Err(TrajError::NonMonotoneTime { line: i + 2 });
            }
        }
        for s in &mut samples {
            s.pose.orientation = s.pose.orientation.normalized();
        }
        Ok(Self { samples, uniform_dt: None })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn uniform_dt(&self) -> Option<f64> {
        self.uniform_dt
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose> + '_ {
        self.samples.iter().map(|s| &s.pose)
    }
}

/// Shift every position by `(dx, dy, 0)`.
pub fn apply_offset(traj: &Trajectory, dx: f64, dy: f64) -> Trajectory {
    let samples = traj
        .samples
        .iter()
        .map(|s| {
            let p = s.pose.position;
            Sample {
                t: s.t,
                pose: Pose { position: [p[0] + dx, p[1] + dy, p[2]], orientation: s.pose.orientation },
            }
        })
        .collect();
    Trajectory { samples, uniform_dt: traj.uniform_dt }
}

/// Rescale sample times so the duration becomes `duration * ts + tn`.
/// The first sample time is kept fixed.
pub fn time_warp(traj: &Trajectory, ts: f64, tn: f64) -> Result<Trajectory, TrajError> {
    let old = traj.duration();
    let new = old * ts + tn;
    if !(new > 0.0) {
        return Err(TrajError::NonPositiveDuration(new));
    }
    let t0 = traj.start_time();
    let scale = new / old;
    let last = traj.samples.len() - 1;
    let samples = traj
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| Sample {
            t: if i == last { t0 + new } else { t0 + (s.t - t0) * scale },
            pose: s.pose,
        })
        .collect();
    Ok(Trajectory { samples, uniform_dt: traj.uniform_dt.map(|d| d * scale) })
}

/// Resample on the uniform grid `t0 + k*dt`.
///
/// Positions come from a natural cubic spline through every knot and
/// orientations from squad over hemisphere-aligned keys. When the duration
/// is not a whole number of steps the grid is extended by one step and the
/// overshoot holds the final pose, so the output stays uniform and still
/// ends on the original final pose.
pub fn resample(traj: &Trajectory, dt: f64) -> Result<Trajectory, TrajError> {
    if !(dt > 0.0) {
        return Err(TrajError::InvalidInterval(dt));
    }
    let n = traj.samples.len();
    if n < 2 {
        return Err(TrajError::DegenerateTrajectory(n));
    }
    let times: Vec<f64> = traj.times().collect();
    let coord = |c: usize| -> Interpolant {
        let y: Vec<f64> = traj.samples.iter().map(|s| s.pose.position[c]).collect();
        Interpolant::new(&times, &y)
    };
    let splines = [coord(0), coord(1), coord(2)];

    let mut keys: Vec<Quat> = Vec::with_capacity(n);
    for s in &traj.samples {
        let q = s.pose.orientation;
        keys.push(match keys.last() {
            Some(prev) => q.aligned_to(*prev),
            None => q,
        });
    }

    let t0 = times[0];
    let t_end = times[n - 1];
    let steps = ((t_end - t0) / dt - TIME_EPS).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut seg = 0usize;
    for k in 0..=steps {
        let t = t0 + k as f64 * dt;
        let pose = if t >= t_end - TIME_EPS {
            traj.samples[n - 1].pose
        } else {
            while seg + 2 < n && times[seg + 1] <= t {
                seg += 1;
            }
            let u = (t - times[seg]) / (times[seg + 1] - times[seg]);
            let q = squad(
                keys[seg.saturating_sub(1)],
                keys[seg],
                keys[seg + 1],
                keys[(seg + 2).min(n - 1)],
                u,
            );
            Pose {
                position: [splines[0].eval(t), splines[1].eval(t), splines[2].eval(t)],
                orientation: q,
            }
        };
        out.push(Sample { t, pose });
    }
    Ok(Trajectory { samples: out, uniform_dt: Some(dt) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    Synthetic,
    Imported,
}

/// Non-empty collection of base trajectories, indexed by position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySet {
    trajectories: Vec<Trajectory>,
    source: TrajectorySource,
}

impl TrajectorySet {
    pub fn new(trajectories: Vec<Trajectory>, source: TrajectorySource) -> Result<Self, TrajError> {
        if trajectories.is_empty() {
            return Err(TrajError::EmptySet);
        }
        Ok(Self { trajectories, source })
    }

    pub fn get(&self, id: usize) -> Option<&Trajectory> {
        self.trajectories.get(id)
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn source(&self) -> TrajectorySource {
        self.source
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trajectory> {
        self.trajectories.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, dt: f64) -> Trajectory {
        let samples = (0..n)
            .map(|i| Sample {
                t: i as f64 * dt,
                pose: Pose::new([0.1 * i as f64, 0.2, 0.3], Quat::from_yaw(0.1 * i as f64)),
            })
            .collect();
        Trajectory::new(samples).unwrap()
    }

    #[test]
    fn rejects_short_and_non_monotone() {
        assert!(matches!(Trajectory::new(vec![]), Err(TrajError::DegenerateTrajectory(0))));
        let p = Pose::new([0.0; 3], Quat::IDENTITY);
        let bad = vec![Sample { t: 0.0, pose: p }, Sample { t: 0.0, pose: p }];
        assert!(matches!(Trajectory::new(bad), Err(TrajError::NonMonotoneTime { line: 2 })));
    }

    #[test]
    fn offset_shifts_xy_only() {
        let p = Pose::new([0.1, 0.2, 0.3], Quat::from_yaw(0.3));
        let tr = Trajectory::new(vec![Sample { t: 0.0, pose: p }, Sample { t: 1.0, pose: p }]).unwrap();
        let out = apply_offset(&tr, 0.06, -0.06);
        let q = out.samples()[0].pose;
        assert!((q.position[0] - 0.16).abs() < 1e-12);
        assert!((q.position[1] - 0.14).abs() < 1e-12);
        assert_eq!(q.position[2], 0.3);
        assert_eq!(q.orientation, p.orientation);
        assert_eq!(apply_offset(&tr, 0.0, 0.0), tr);
    }

    #[test]
    fn warp_duration_and_errors() {
        let tr = line(11, 0.1);
        let w = time_warp(&tr, 2.5, 0.5).unwrap();
        assert!((w.duration() - 3.0).abs() < 1e-12);
        assert_eq!(time_warp(&tr, 1.0, 0.0).unwrap().samples, tr.samples);
        let short = line(3, 0.1);
        assert!(matches!(time_warp(&short, 2.5, -0.6), Err(TrajError::NonPositiveDuration(_))));
    }

    #[test]
    fn resample_two_knots_grid() {
        let tr = line(2, 0.1);
        let r = resample(&tr, 0.02).unwrap();
        assert_eq!(r.len(), 6);
        for (k, t) in r.times().enumerate() {
            assert!((t - 0.02 * k as f64).abs() < 1e-12);
        }
        assert_eq!(r.uniform_dt(), Some(0.02));
    }

    #[test]
    fn resample_keeps_endpoints_and_extends_partial_step() {
        let tr = line(7, 0.033);
        let r = resample(&tr, 0.02).unwrap();
        let first = r.samples()[0].pose;
        let last = r.samples()[r.len() - 1].pose;
        assert_eq!(first, tr.samples()[0].pose);
        assert_eq!(last, tr.samples()[6].pose);
        assert!(r.end_time() >= tr.end_time());
        assert!(r.end_time() - tr.end_time() < 0.02);
    }

    #[test]
    fn resample_constant_pose() {
        let p = Pose::new([0.3, -0.1, 0.05], Quat::from_axis_angle([1.0, 0.0, 1.0], 0.8));
        let samples = (0..5).map(|i| Sample { t: 0.07 * i as f64, pose: p }).collect();
        let r = resample(&Trajectory::new(samples).unwrap(), 0.02).unwrap();
        for s in r.samples() {
            for c in 0..3 {
                assert!((s.pose.position[c] - p.position[c]).abs() < 1e-12);
            }
            assert!(s.pose.orientation.distance(p.orientation) < 1e-12);
        }
    }

    #[test]
    fn resample_rejects_bad_interval() {
        assert!(matches!(resample(&line(3, 0.1), 0.0), Err(TrajError::InvalidInterval(_))));
    }
}
