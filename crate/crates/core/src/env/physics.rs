use crate::config::{parse_kv, parse_value, render_kv, KvError};
use serde::{Deserialize, Serialize};

/// Constants of the rule-based grasp model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConstants {
    /// Object radius, m.
    pub r_obj: f64,
    /// Aperture of the fully open hand, m.
    pub a_max: f64,
    /// Closure rate at |a| = 1, 1/s.
    pub v_close: f64,
    /// Hand-object distance at or below which a closing hand attaches, m.
    pub d_grasp: f64,
    /// Outer radius of the collision band, m.
    pub d_contact: f64,
    /// Reward trigger height for hand and object, m.
    pub z_trig: f64,
    /// Minimum closure that holds an attached object.
    pub h_hold: f64,
    /// Control interval, s.
    pub dt: f64,
    /// Constant factor applied to trajectory durations.
    pub time_scale: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            r_obj: 0.035,
            a_max: 0.10,
            v_close: 2.0,
            d_grasp: 0.10,
            d_contact: 0.12,
            z_trig: 0.10,
            h_hold: 0.35,
            dt: 0.02,
            time_scale: 2.5,
        }
    }
}

const KEYS: [&str; 9] =
    ["r_obj", "a_max", "v_close", "d_grasp", "d_contact", "z_trig", "h_hold", "dt", "time_scale"];

impl PhysicsConstants {
    pub fn validate(&self) -> Result<(), String> {
        let vals = self.values();
        for (k, v) in KEYS.iter().zip(vals) {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{k} must be positive, got {v}"));
            }
        }
        if self.d_grasp > self.d_contact {
            return Err("d_grasp must not exceed d_contact".into());
        }
        if self.a_max <= 2.0 * self.r_obj {
            return Err("a_max must exceed the object diameter".into());
        }
        if self.h_hold > 1.0 {
            return Err("h_hold must lie in (0, 1]".into());
        }
        Ok(())
    }

    fn values(&self) -> [f64; 9] {
        [
            self.r_obj,
            self.a_max,
            self.v_close,
            self.d_grasp,
            self.d_contact,
            self.z_trig,
            self.h_hold,
            self.dt,
            self.time_scale,
        ]
    }

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "r_obj" => &mut self.r_obj,
            "a_max" => &mut self.a_max,
            "v_close" => &mut self.v_close,
            "d_grasp" => &mut self.d_grasp,
            "d_contact" => &mut self.d_contact,
            "z_trig" => &mut self.z_trig,
            "h_hold" => &mut self.h_hold,
            "dt" => &mut self.dt,
            "time_scale" => &mut self.time_scale,
            _ => return None,
        })
    }

    /// Override a single constant by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), KvError> {
        let v = parse_value::<f64>(key, value)?;
        *self.slot(key).ok_or_else(|| KvError::UnknownKey(key.to_string()))? = v;
        Ok(())
    }

    /// Defaults overridden by the entries of a flat key-value file.
    pub fn from_kv(text: &str) -> Result<Self, KvError> {
        let mut p = Self::default();
        for (k, v) in parse_kv(text)? {
            p.set(&k, &v)?;
        }
        Ok(p)
    }

    pub fn to_kv(&self) -> String {
        render_kv(KEYS.iter().copied().zip(self.values().iter().map(|v| v.to_string())))
    }

    /// Hand aperture at closure `h`.
    pub fn aperture(&self, h: f64) -> f64 {
        self.a_max * (1.0 - h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PhysicsConstants::default().validate().unwrap();
    }

    #[test]
    fn kv_round_trip_and_overrides() {
        let p = PhysicsConstants::from_kv("z_trig = 0.15\n# comment\n").unwrap();
        assert_eq!(p.z_trig, 0.15);
        assert_eq!(p.r_obj, 0.035);
        assert_eq!(PhysicsConstants::from_kv(&p.to_kv()).unwrap(), p);
        assert!(matches!(PhysicsConstants::from_kv("mass = 1"), Err(KvError::UnknownKey(_))));
    }

    #[test]
    fn rejects_inconsistent_geometry() {
        let p = PhysicsConstants { d_grasp: 0.2, ..Default::default() };
        assert!(p.validate().is_err());
        let p = PhysicsConstants { a_max: 0.07, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
