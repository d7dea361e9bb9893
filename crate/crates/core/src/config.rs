//! Flat `key = value` configuration text.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may appear at
//! most once.

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KvError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
}

/// Parse key-value text into an ordered map.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, KvError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(KvError::Syntax { line: i + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(KvError::Syntax { line: i + 1 });
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(KvError::Duplicate { line: i + 1, key: k.to_string() });
        }
    }
    Ok(out)
}

/// Parse a single value, naming the key on failure.
pub fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, KvError> {
    value.parse().map_err(|_| KvError::BadValue { key: key.to_string(), value: value.to_string() })
}

/// Render entries as `key = value` lines.
pub fn render_kv<'a>(entries: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let m = parse_kv("# c\n a = 1 \n\nb=x y\n").unwrap();
        assert_eq!(m["a"], "1");
        assert_eq!(m["b"], "x y");
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert_eq!(parse_kv("a=1\na=2"), Err(KvError::Duplicate { line: 2, key: "a".into() }));
        assert_eq!(parse_kv("a 1"), Err(KvError::Syntax { line: 1 }));
        assert!(parse_value::<f64>("k", "zz").is_err());
    }
}
