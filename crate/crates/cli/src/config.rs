//! Flat `key=value` run configuration files.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Parsed config file; keys use the long flag names (`train-fraction` or `train_fraction`).
#[derive(Debug, Default)]
pub struct FileConfig {
    path: String,
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("{origin}:{}: expected key=value", i + 1)));
            };
            let key = k.trim().replace('_', "-");
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("{origin}:{}: duplicate key {key}", i + 1)));
            }
        }
        Ok(Self {
            path: origin.to_string(),
            values,
        })
    }

    /// Rejects keys the current command does not understand.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        let unknown: Vec<&str> = self
            .values
            .keys()
            .map(String::as_str)
            .filter(|k| !allowed.contains(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "{}: unknown keys: {}",
                self.path,
                unknown.join(", ")
            )))
        }
    }

    /// The flag value if given, otherwise the file value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::Usage(format!("{}: bad value for {key}: {e}", self.path)))
            })
            .transpose()
    }

    /// Boolean switch: true when the flag is set or the file says so.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}
