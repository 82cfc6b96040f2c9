//! Plain `key = value` configuration files supplying defaults for
//! command-line flags. Precedence is: explicit flag, then config file,
//! then built-in default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ctr_core::{CtrError, Result};

/// Parsed configuration defaults.
#[derive(Debug, Default, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Loads `key = value` lines; `#` starts a comment, blank lines are
    /// skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CtrError::Parse(format!(
                    "{}:{}: expected `key = value`, got {raw:?}",
                    path.display(),
                    no + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    /// Resolves a typed value: `flag` wins, then the config file, then
    /// `default`.
    pub fn resolve<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v.clone());
        }
        match self.values.get(key) {
            Some(raw) => raw.parse().map_err(|e| {
                CtrError::Parse(format!("config key {key}: invalid value {raw:?} ({e})"))
            }),
            None => Ok(default),
        }
    }

    /// Resolves an optional path: the flag wins over the config file.
    pub fn resolve_path(&self, flag: &Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.clone().or_else(|| self.values.get(key).map(PathBuf::from))
    }
}
