//! Unit quaternions (scalar first) and spherical interpolation.

use serde::{Deserialize, Serialize};
use std::ops::{Mul, Neg};

/// Quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_axis_angle([0.0, 0.0, 1.0], yaw)
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    fn scale(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    /// Logarithm of a unit quaternion, returned as the pure-vector part `θ·n`
    /// where the quaternion is `cos θ + n sin θ`.
    pub fn log(self) -> [f64; 3] {
        let v = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        if v < 1e-15 {
            return [0.0; 3];
        }
        let theta = v.atan2(self.w);
        let k = theta / v;
        [self.x * k, self.y * k, self.z * k]
    }

    /// Exponential of a pure quaternion `(0, v)`.
    pub fn exp(v: [f64; 3]) -> Self {
        let theta = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if theta < 1e-15 {
            return Self::new(1.0, v[0], v[1], v[2]).normalized();
        }
        let k = theta.sin() / theta;
        Self::new(theta.cos(), v[0] * k, v[1] * k, v[2] * k)
    }

    /// Sign-flipped copy of `self` lying in the same hemisphere as `reference`.
    pub fn aligned_to(self, reference: Quat) -> Self {
        if self.dot(reference) < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Angular distance-like metric that respects the double cover.
    pub fn distance(self, o: Quat) -> f64 {
        let a = self - o;
        let b = self + o;
        a.norm().min(b.norm())
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

impl Neg for Quat {
    type Output = Quat;
    fn neg(self) -> Quat {
        self.scale(-1.0)
    }
}

impl std::ops::Sub for Quat {
    type Output = Quat;
    fn sub(self, o: Quat) -> Quat {
        Quat::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Add for Quat {
    type Output = Quat;
    fn add(self, o: Quat) -> Quat {
        Quat::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

/// Shortest-arc spherical linear interpolation.
pub fn slerp(a: Quat, b: Quat, u: f64) -> Quat {
    let b = b.aligned_to(a);
    let cos = a.dot(b).clamp(-1.0, 1.0);
    if cos > 1.0 - 1e-12 {
        // nearly parallel: lerp is exact to machine precision here
        return (a.scale(1.0 - u) + b.scale(u)).normalized();
    }
    let theta = cos.acos();
    let s = theta.sin();
    let wa = ((1.0 - u) * theta).sin() / s;
    let wb = (u * theta).sin() / s;
    (a.scale(wa) + b.scale(wb)).normalized()
}

/// Inner control point for the key `q` with neighbours `prev` and `next`.
/// All three must already be hemisphere-aligned.
fn inner_control(prev: Quat, q: Quat, next: Quat) -> Quat {
    let qi = q.conj();
    let ln = (qi * next).log();
    let lp = (qi * prev).log();
    let v = [
        -(ln[0] + lp[0]) / 4.0,
        -(ln[1] + lp[1]) / 4.0,
        -(ln[2] + lp[2]) / 4.0,
    ];
    (q * Quat::exp(v)).normalized()
}

/// Spherical quadrangle interpolation between `q1` and `q2`; `q0` and `q3`
/// are the neighbouring keys used to build the inner control points.
pub fn squad(q0: Quat, q1: Quat, q2: Quat, q3: Quat, u: f64) -> Quat {
    let q1 = q1.normalized();
    let q0 = q0.normalized().aligned_to(q1);
    let q2 = q2.normalized().aligned_to(q1);
    let q3 = q3.normalized().aligned_to(q2);
    if u <= 0.0 {
        return q1;
    }
    if u >= 1.0 {
        return q2;
    }
    let s1 = inner_control(q0, q1, q2);
    let s2 = inner_control(q1, q2, q3);
    let outer = slerp_raw(q1, q2, u);
    let inner = slerp_raw(s1, s2, u);
    slerp_raw(outer, inner, 2.0 * u * (1.0 - u))
}

// slerp without hemisphere re-alignment; squad relies on the caller's alignment.
fn slerp_raw(a: Quat, b: Quat, u: f64) -> Quat {
    let cos = a.dot(b).clamp(-1.0, 1.0);
    if cos.abs() > 1.0 - 1e-12 {
        return (a.scale(1.0 - u) + b.scale(u)).normalized();
    }
    let theta = cos.acos();
    let s = theta.sin();
    (a.scale(((1.0 - u) * theta).sin() / s) + b.scale((u * theta).sin() / s)).normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Quat, b: Quat, tol: f64) -> bool {
        a.distance(b) < tol
    }

    #[test]
    fn squad_constant_input() {
        let q = Quat::from_axis_angle([1.0, 2.0, 0.5], 0.7);
        for k in 0..=10 {
            let r = squad(q, q, q, q, k as f64 / 10.0);
            assert!(close(r, q, 1e-12));
        }
    }

    #[test]
    fn squad_endpoints() {
        let q0 = Quat::from_yaw(-0.3);
        let q1 = Quat::from_axis_angle([0.0, 1.0, 0.0], 0.4);
        let q2 = Quat::from_axis_angle([1.0, 1.0, 0.0], 1.1);
        let q3 = Quat::from_yaw(2.0);
        assert!(close(squad(q0, q1, q2, q3, 0.0), q1, 1e-12));
        assert!(close(squad(q0, q1, q2, q3, 1.0), q2, 1e-12));
    }

    #[test]
    fn squad_reduces_to_slerp_with_repeated_ends() {
        let q1 = Quat::IDENTITY;
        let q2 = Quat::from_yaw(PI / 2.0);
        let r = squad(q1, q1, q2, q2, 0.5);
        let expected = Quat::from_yaw(PI / 4.0);
        assert!(close(r, expected, 1e-9));
        assert!(close(r, slerp(q1, q2, 0.5), 1e-9));
    }

    #[test]
    fn squad_handles_antipodal_keys() {
        let q1 = Quat::from_yaw(0.2);
        let q2 = -Quat::from_yaw(0.6);
        let r = squad(q1, q1, q2, q2, 0.5);
        assert!(close(r, Quat::from_yaw(0.4), 1e-9));
        assert!((r.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_exp_inverse() {
        let q = Quat::from_axis_angle([0.3, -0.2, 0.9], 2.2);
        assert!(close(Quat::exp(q.log()), q, 1e-12));
    }
}
