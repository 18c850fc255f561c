//! Run configuration files.
//!
//! One `key = value` pair per line. Blank lines and lines starting with `#`
//! are ignored. Keys are the long flag names of the subcommand, with `-` or
//! `_` accepted interchangeably; list values are comma-separated. Values given
//! on the command line take precedence.
//!
//! ```text
//! # analyze settings
//! granularity = word
//! n_max = 6
//! exclude = **/annotations/**
//! max_missing_mass = 0.05
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::failure::Failure;

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    origin: String,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Settings, Failure> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Settings::parse(&raw, &path.display().to_string())
    }

    pub fn parse(raw: &str, origin: &str) -> Result<Settings, Failure> {
        let mut values = BTreeMap::new();
        for (i, line) in raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("{origin}:{}: expected key = value", i + 1)))?;
            if values.insert(normalize(key), value.trim().to_owned()).is_some() {
                return Err(Failure::Usage(format!(
                    "{origin}:{}: duplicate key {}",
                    i + 1,
                    key.trim()
                )));
            }
        }
        Ok(Settings {
            values,
            origin: origin.to_owned(),
        })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    fn convert<T: FromStr>(&self, key: &str, value: &str) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        value
            .parse()
            .map_err(|e| Failure::Usage(format!("{}: invalid value {value:?} for {key}: {e}", self.origin)))
    }

    /// The flag value if given, else the config value, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        match (flag, self.raw(key)) {
            (Some(v), _) => Ok(Some(v)),
            (None, Some(raw)) => self.convert(key, raw).map(Some),
            (None, None) => Ok(None),
        }
    }

    pub fn pick_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Non-empty flag lists win over the config's comma-separated list.
    pub fn pick_list<T: FromStr>(&self, flag: Vec<T>, key: &str) -> Result<Vec<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        if !flag.is_empty() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(Vec::new()),
            Some(raw) => raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| self.convert(key, s))
                .collect(),
        }
    }

    pub fn flag(&self, flag: bool, key: &str) -> Result<bool, Failure> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}
