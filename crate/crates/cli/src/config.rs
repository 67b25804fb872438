//! Flat `key=value` configuration with dotted section prefixes.

use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: Vec<(String, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("config line {}: expected key=value, got '{line}'", i + 1))?;
            let k = k.trim();
            if k.is_empty() {
                bail!("config line {}: empty key", i + 1);
            }
            cfg.set(k, v.trim());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Sets or replaces `key`, keeping the position of its first appearance.
    pub fn set(&mut self, key: &str, value: &str) {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string())),
        }
    }

    /// Applies a `key=value` override from the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').with_context(|| format!("override '{kv}' is not key=value"))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).with_context(|| format!("config key '{key}' is required"))
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| anyhow::anyhow!("config key '{key}': cannot parse '{v}'")),
        }
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse().map_err(|_| anyhow::anyhow!("config key '{key}': cannot parse '{s}'"))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "1" | "yes" | "on") => Ok(true),
            Some("false" | "0" | "no" | "off") => Ok(false),
            Some(v) => bail!("config key '{key}': '{v}' is not a boolean"),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Single-line rendering of every resolved entry.
    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let mut c = Config::parse("# comment\n\nbench.k = 20\nbench.ef=10, 20\nbench.k=30\n").unwrap();
        assert_eq!(c.get("bench.k"), Some("30"));
        assert_eq!(c.list::<usize>("bench.ef").unwrap(), Some(vec![10, 20]));
        c.apply_override("bench.k=5").unwrap();
        assert_eq!(c.parsed("bench.k", 0usize).unwrap(), 5);
        assert_eq!(c.render(), "bench.k=5 bench.ef=10, 20");
        assert!(c.apply_override("nokey").is_err());
        assert!(Config::parse("just words").is_err());
        assert!(c.flag("bench.k", false).is_err());
        assert!(!c.flag("bench.audit", false).unwrap());
    }
}
