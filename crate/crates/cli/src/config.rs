use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use thiserror::Error;

/// Bad flags, config keys or paths. Exits with status 2.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

/// Every key a config file may set. Keys mirror the long flags with `_` for
/// `-`.
pub const KEYS: &[&str] = &[
    // global
    "seed",
    "threads",
    // generate
    "preset",
    "calls",
    "users",
    "out",
    "truth",
    "activity_gamma",
    "activity_xc",
    "ties",
    "tie_calls",
    "hotlines",
    "hotline_calls",
    "robots",
    "robot_calls",
    // build
    "input",
    "dir",
    "delimiter",
    "has_header",
    "timezone_offset_minutes",
    "excluded_dates",
    "max_parse_errors",
    // validate
    "alpha",
    "correction",
    "mcn_marginals",
    // components and analyze
    "sources",
    "max_distance",
    "tables",
    "only",
    "bins",
    "sample_edges",
    "ego_distance",
    // fit
    "table",
    "model",
    "x_min",
    "hint",
    "fit_lo",
    "fit_hi",
    "weighting",
    "network",
    "series",
];

/// Flat `key = value` settings. Blank lines and lines starting with `#` are
/// ignored; a key may appear once.
#[derive(Clone, Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    origin: Option<PathBuf>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return usage(format!("cannot read config {}: {e}", path.display())),
        };
        let mut cfg = Config::parse(&text).with_context(|| format!("config {}", path.display()))?;
        cfg.origin = Some(path.to_owned());
        Ok(cfg)
    }

    pub fn parse(text: &str) -> anyhow::Result<Config> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return usage(format!("line {}: expected key=value", n + 1));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return usage(format!("line {}: unknown key {key:?}", n + 1));
            }
            if values.insert(key.to_owned(), value.trim().to_owned()).is_some() {
                return usage(format!("line {}: duplicate key {key:?}", n + 1));
            }
        }
        Ok(Config { values, origin: None })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(KEYS.contains(&key), "undeclared key {key}");
        self.values.get(key).map(String::as_str)
    }

    /// The flag value if given, else the parsed config value.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> anyhow::Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(v) => match v.parse() {
                Ok(t) => Ok(Some(t)),
                Err(e) => usage(format!("{}: bad value {v:?} for {key}: {e}", self.origin_name())),
            },
        }
    }

    pub fn pick_or<T>(&self, flag: Option<T>, key: &str, default: T) -> anyhow::Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Like [`Config::pick`], failing with a usage error when neither source
    /// provides the value.
    pub fn require<T>(&self, flag: Option<T>, key: &str) -> anyhow::Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.pick(flag, key)? {
            Some(v) => Ok(v),
            None => usage(format!("missing --{} (or `{key}` in the config file)", key.replace('_', "-"))),
        }
    }

    fn origin_name(&self) -> String {
        self.origin.as_ref().map_or_else(|| "config".to_owned(), |p| p.display().to_string())
    }
}

/// An input path that must exist.
pub fn existing(path: PathBuf) -> anyhow::Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        usage(format!("{} does not exist", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cfg = Config::parse("# comment\nalpha = 0.05\n\ncorrection=fixed\n").unwrap();
        assert_eq!(cfg.pick::<f64>(None, "alpha").unwrap(), Some(0.05));
        assert_eq!(cfg.pick(Some(0.01), "alpha").unwrap(), Some(0.01));
        assert_eq!(cfg.pick::<u64>(None, "seed").unwrap(), None);
        assert_eq!(cfg.raw("correction"), Some("fixed"));
    }

    #[test]
    fn malformed_config_is_a_usage_error() {
        for text in ["alpha", "colour=red", "seed=1\nseed=2"] {
            let err = Config::parse(text).unwrap_err();
            assert!(err.downcast_ref::<UsageError>().is_some(), "{text}: {err}");
        }
        let cfg = Config::parse("bins=many").unwrap();
        assert!(cfg.pick::<usize>(None, "bins").unwrap_err().downcast_ref::<UsageError>().is_some());
        assert!(cfg.require::<f64>(None, "alpha").is_err());
    }
}
