//! Flat `key = value` configuration files. Command-line flags are applied on top.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::read_file;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlatConfig {
    values: BTreeMap<String, String>,
}

impl FlatConfig {
    /// `#` starts a comment; blank lines are ignored; a repeated key is an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Line { line: i + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(err("empty key".into()));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(err(format!("duplicate key {key:?}")));
            }
        }
        Ok(FlatConfig { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn reader(&self) -> KeyReader<'_> {
        KeyReader {
            config: self,
            used: BTreeSet::new(),
            problems: Vec::new(),
        }
    }
}

/// Typed access that records every problem instead of stopping at the first,
/// and rejects keys nobody asked for.
pub struct KeyReader<'a> {
    config: &'a FlatConfig,
    used: BTreeSet<&'a str>,
    problems: Vec<String>,
}

impl<'a> KeyReader<'a> {
    fn raw(&mut self, key: &'static str) -> Option<&'a str> {
        self.used.insert(key);
        self.config.get(key)
    }

    fn parse_value<T: FromStr>(&mut self, key: &str, raw: &str) -> Option<T>
    where
        T::Err: Display,
    {
        match raw.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                self.problems.push(format!("{key}: cannot parse {raw:?}: {e}"));
                None
            }
        }
    }

    pub fn required<T: FromStr>(&mut self, key: &'static str) -> Option<T>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            Some(raw) => self.parse_value(key, raw),
            None => {
                self.problems.push(format!("missing required key {key:?}"));
                None
            }
        }
    }

    pub fn optional<T: FromStr>(&mut self, key: &'static str) -> Option<T>
    where
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        self.parse_value(key, raw)
    }

    pub fn or<T: FromStr>(&mut self, key: &'static str, default: T) -> T
    where
        T::Err: Display,
    {
        self.optional(key).unwrap_or(default)
    }

    /// Comma-separated list; an empty list is reported as a problem.
    pub fn list<T: FromStr>(&mut self, key: &'static str, default: Vec<T>) -> Vec<T>
    where
        T::Err: Display,
    {
        let Some(raw) = self.raw(key) else { return default };
        let mut out = Vec::new();
        for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some(v) = self.parse_value(key, item) {
                out.push(v);
            }
        }
        if out.is_empty() {
            self.problems.push(format!("{key}: list is empty"));
        }
        out
    }

    /// Every key starting with `prefix`, with the prefix stripped.
    pub fn prefixed(&mut self, prefix: &str) -> BTreeMap<String, String> {
        let config = self.config;
        let mut out = BTreeMap::new();
        for (k, v) in &config.values {
            if let Some(rest) = k.strip_prefix(prefix) {
                self.used.insert(k.as_str());
                out.insert(rest.to_string(), v.clone());
            }
        }
        out
    }

    pub fn problem(&mut self, message: impl Into<String>) {
        self.problems.push(message.into());
    }

    pub fn finish(mut self) -> Result<()> {
        for key in self.config.values.keys() {
            if !self.used.contains(key.as_str()) {
                self.problems.push(format!("unknown key {key:?}"));
            }
        }
        if self.problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(self.problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_reports_all_problems() {
        let cfg = FlatConfig::parse("# comment\nepochs = 3\nbatch_size = x  # trailing\nstray = 1\n").unwrap();
        let mut r = cfg.reader();
        assert_eq!(r.or("epochs", 5usize), 3);
        assert_eq!(r.optional::<usize>("batch_size"), None);
        let _: Option<String> = r.required("architecture");
        let Err(Error::Config(problems)) = r.finish() else { panic!() };
        assert_eq!(problems.len(), 3, "{problems:?}");
        assert!(problems.iter().any(|p| p.contains("\"architecture\"")));
        assert!(problems.iter().any(|p| p.contains("\"stray\"")));
    }

    #[test]
    fn flags_override_file_values() {
        let mut cfg = FlatConfig::parse("seed = 1").unwrap();
        cfg.set("seed", "9");
        assert_eq!(cfg.reader().or("seed", 0u64), 9);
    }

    #[test]
    fn duplicate_keys_rejected() {
        assert!(FlatConfig::parse("a = 1\na = 2").is_err());
    }
}
