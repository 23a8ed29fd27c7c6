//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "HARDY_LAB_SEED";

pub const DEFAULT_SEED: u64 = 7;

/// Every key accepted in config files and as `--key` flags.
pub const KEYS: [&str; 27] = [
    "domain", "f", "g", "p", "q", "n", "zeta", "y", "id", "grid", "count", "seed", "out", "plot", "center",
    "radius", "complement", "method", "beta", "eta", "pairs", "delta", "targets", "bound", "terms", "criteria",
    "seeds",
];

/// A command plus its settings.
///
/// Values stay textual until a command reads them, so serialization is lossless.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub command: String,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(command: impl Into<String>) -> Self {
        Self { command: command.into(), values: BTreeMap::new() }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(CliError::usage(format!("unknown key '{key}'")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Overlays `other`; its values win.
    pub fn merge(&mut self, other: &ExperimentConfig) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        self.raw(key).ok_or_else(|| CliError::usage(format!("{} needs --{key}", self.command)))
    }

    pub fn text_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| v.trim().parse::<T>().map_err(|_| CliError::usage(format!("invalid value '{v}' for {key}"))))
            .transpose()
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?.ok_or_else(|| CliError::usage(format!("{} needs --{key}", self.command)))
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key).map(str::trim) {
            None => Ok(false),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(CliError::usage(format!("invalid boolean '{v}' for {key}"))),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.or("seed", DEFAULT_SEED)
    }

    /// Parses the flat text form written by [`fmt::Display`].
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "command" {
                cfg.command = v.to_string();
            } else {
                cfg.set(k, v).map_err(|e| CliError::usage(format!("config line {}: {e}", i + 1)))?;
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_text(&text)
    }

    /// Seed from the environment, if set.
    pub fn from_env() -> Result<Self> {
        let mut cfg = Self::default();
        if let Ok(v) = std::env::var(SEED_ENV) {
            v.trim()
                .parse::<u64>()
                .map_err(|_| CliError::usage(format!("{SEED_ENV} must be an unsigned integer, got '{v}'")))?;
            cfg.set("seed", v.trim())?;
        }
        Ok(cfg)
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.command.is_empty() {
            writeln!(f, "command = {}", self.command)?;
        }
        for (k, v) in &self.values {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::new("norm");
        cfg.set("f", "power:q=1.5;zeta=1,0").unwrap();
        cfg.set("p", "1.2").unwrap();
        cfg.set("domain", "ellipsoid:a=1,2").unwrap();
        let back = ExperimentConfig::parse_text(&cfg.to_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn later_layers_win() {
        let mut base = ExperimentConfig::parse_text("seed = 3\np = 2\n# comment\n").unwrap();
        let flags = ExperimentConfig::parse_text("seed = 11").unwrap();
        base.merge(&flags);
        assert_eq!(base.seed().unwrap(), 11);
        assert_eq!(base.required::<f64>("p").unwrap(), 2.0);
    }

    #[test]
    fn malformed_lines_are_usage_errors() {
        assert!(matches!(ExperimentConfig::parse_text("p 2"), Err(CliError::Usage(_))));
        assert!(matches!(ExperimentConfig::parse_text("colour = red"), Err(CliError::Usage(_))));
        let cfg = ExperimentConfig::parse_text("p = two").unwrap();
        assert!(cfg.required::<f64>("p").is_err());
    }
}
