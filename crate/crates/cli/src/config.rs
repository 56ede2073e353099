//! Plain-text `key = value` files used for `--config` and `--grid`.
//!
//! One pair per line; blank lines and lines starting with `#` are ignored.
//! Keys use the long flag names, with `-` or `_` accepted interchangeably.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default, Clone, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
    source: String,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_").to_ascii_lowercase()
}

impl KeyValues {
    pub fn parse(source: &str, text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{source}:{}: expected key = value", i + 1)))?;
            let key = normalize(k);
            if key.is_empty() {
                return Err(CliError::Usage(format!("{source}:{}: empty key", i + 1)));
            }
            if entries
                .insert(key.clone(), (i + 1, v.trim().to_string()))
                .is_some()
            {
                return Err(CliError::Usage(format!(
                    "{source}:{}: duplicate key {key}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            entries,
            source: source.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        let Some((line, value)) = self.entries.get(&normalize(key)) else {
            return Ok(None);
        };
        value.parse().map(Some).map_err(|_| {
            CliError::Usage(format!(
                "{}:{line}: invalid value {value:?} for {key}",
                self.source
            ))
        })
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        let Some((line, value)) = self.entries.get(&normalize(key)) else {
            return Ok(None);
        };
        value
            .split(',')
            .map(|v| {
                v.trim().parse().map_err(|_| {
                    CliError::Usage(format!(
                        "{}:{line}: invalid list item {v:?} for {key}",
                        self.source
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Flag value, else config value, else default.
pub fn resolve<T: FromStr>(
    flag: Option<T>,
    config: &KeyValues,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(config.get(key)?.unwrap_or(default)),
    }
}
