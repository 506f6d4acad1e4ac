//! Line-oriented `key=value` text format used by volume headers, coil pose
//! files, training configs, and the pipeline config.
//!
//! Lines are UTF-8, one `key=value` pair each. Blank lines and lines starting
//! with `#` are ignored. Keys are case-sensitive. Duplicate keys keep the last
//! value.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KvBlock {
    entries: BTreeMap<String, String>,
}

impl KvBlock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Header(format!("line {}: missing '=': {:?}", lineno + 1, raw)))?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Header(format!("missing key {:?}", key)))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    /// Parse a value with `FromStr`, reporting the key on failure.
    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Header(format!("key {:?}: cannot parse {:?}", key, raw)))
    }

    /// Parse a comma-separated triple such as `dims=256,256,256`.
    pub fn parse_triple<T: std::str::FromStr + Copy>(&self, key: &str) -> Result<[T; 3]> {
        let raw = self.require(key)?;
        let parts: Vec<&str> = raw.split(',').map(|s| s.trim()).collect();
        if parts.len() != 3 {
            return Err(Error::Header(format!("key {:?}: expected 3 components, got {:?}", key, raw)));
        }
        let mut out = Vec::with_capacity(3);
        for p in parts {
            out.push(
                p.parse()
                    .map_err(|_| Error::Header(format!("key {:?}: cannot parse component {:?}", key, p)))?,
            );
        }
        Ok([out[0], out[1], out[2]])
    }

    /// Render as `key=value` lines in key order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render_roundtrip() {
        let kv = KvBlock::parse("a=1\n# comment\n\nb = x,y \n").unwrap();
        assert_eq!(kv.get("a"), Some("1"));
        assert_eq!(kv.get("b"), Some("x,y"));
        let again = KvBlock::parse(&kv.render()).unwrap();
        assert_eq!(again.get("b"), Some("x,y"));
    }

    #[test]
    fn missing_equals_is_error() {
        assert!(KvBlock::parse("justaline").is_err());
    }

    #[test]
    fn triple_parsing() {
        let kv = KvBlock::parse("dims=4, 5,6").unwrap();
        assert_eq!(kv.parse_triple::<usize>("dims").unwrap(), [4, 5, 6]);
        assert!(kv.parse_triple::<usize>("absent").is_err());
    }
}
