//! Resolved `key = value` parameters for one subcommand.

use dextron_core::config::{parse_kv, parse_value, render_kv};
use dextron_core::env::PhysicsConstants;
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliError;

pub const PHYSICS_KEYS: [&str; 9] =
    ["r_obj", "a_max", "v_close", "d_grasp", "d_contact", "z_trig", "h_hold", "dt", "time_scale"];

#[derive(Debug, Clone)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    /// Start from `defaults`, apply the config file, then `--set` overrides.
    /// Keys absent from `defaults` are rejected.
    pub fn resolve(defaults: Vec<(String, String)>, file: Option<&Path>, sets: &[String]) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> = defaults.into_iter().collect();
        let apply = |k: String, v: String, values: &mut BTreeMap<String, String>| match values.get_mut(&k) {
            Some(slot) => {
                *slot = v;
                Ok(())
            }
            None => Err(CliError::config(format!("unknown key `{k}`"))),
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let kv = parse_kv(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            for (k, v) in kv {
                apply(k, v, &mut values)?;
            }
        }
        for s in sets {
            let (k, v) = s.split_once('=').ok_or_else(|| CliError::config(format!("expected key=value, got `{s}`")))?;
            apply(k.trim().to_string(), v.trim().to_string(), &mut values)?;
        }
        Ok(Self { values })
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.values.get(key).ok_or_else(|| CliError::config(format!("missing key `{key}`")))?;
        parse_value(key, v).map_err(|e| CliError::config(e.to_string()))
    }

    /// Comma-separated list of layer widths.
    pub fn widths(&self, key: &str) -> Result<Vec<usize>, CliError> {
        let raw: String = self.get(key)?;
        raw.split(',')
            .map(|w| parse_value::<usize>(key, w.trim()).map_err(|e| CliError::config(e.to_string())))
            .collect()
    }

    pub fn physics(&self) -> Result<PhysicsConstants, CliError> {
        let mut p = PhysicsConstants::default();
        for k in PHYSICS_KEYS {
            p.set(k, &self.get::<String>(k)?).map_err(|e| CliError::config(e.to_string()))?;
        }
        p.validate().map_err(CliError::config)?;
        Ok(p)
    }

    pub fn render(&self) -> String {
        render_kv(self.values.iter().map(|(k, v)| (k.as_str(), v.clone())))
    }

    /// Write the resolved parameters as `<dir>/<name>.conf`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<(), CliError> {
        let path = dir.join(format!("{name}.conf"));
        std::fs::write(&path, self.render()).map_err(|e| CliError::io(&path, e))
    }
}

/// Physics defaults as key-value pairs.
pub fn physics_defaults() -> Vec<(String, String)> {
    parse_kv(&PhysicsConstants::default().to_kv()).expect("rendered defaults parse").into_iter().collect()
}

pub fn defaults(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
