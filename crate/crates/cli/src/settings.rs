//! Effective run settings: command-line flags layered over a config file.
//!
//! The config file holds `[section]` headers and `key = value` lines. Keys
//! under `[common]` apply to every command and keys under a section named
//! after the command apply to that command only. Keys are the long flag
//! names; `_` and `-` are interchangeable.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const COMMANDS: [&str; 8] = [
    "shoot",
    "scan",
    "geometry",
    "solve",
    "flow",
    "stability",
    "volume",
    "verify-all",
];

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

pub struct Settings {
    file: BTreeMap<String, String>,
    effective: Map<String, Value>,
}

impl Settings {
    pub fn empty() -> Self {
        Self { file: BTreeMap::new(), effective: Map::new() }
    }

    pub fn load(path: &Path, command: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, command)
    }

    pub fn parse(text: &str, command: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        let mut common = BTreeMap::new();
        let mut own = BTreeMap::new();
        for (section, props) in ini.iter() {
            let target = match section.map(normalize) {
                None => {
                    if let Some((key, _)) = props.iter().next() {
                        return Err(CliError::Usage(format!(
                            "config key `{key}` must sit under a [section] header"
                        )));
                    }
                    continue;
                }
                Some(s) if s == "common" => &mut common,
                Some(s) if s == command => &mut own,
                Some(s) if COMMANDS.contains(&s.as_str()) => continue,
                Some(s) => return Err(CliError::Usage(format!("unknown config section [{s}]"))),
            };
            for (key, value) in props.iter() {
                target.insert(normalize(key), value.trim().to_string());
            }
        }
        common.extend(own);
        Ok(Self { file: common, effective: Map::new() })
    }

    fn resolve<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_file = self.file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`: {e}")))
            })
            .transpose()
    }

    fn record(&mut self, key: &str, value: Value) {
        self.effective.insert(key.to_string(), value);
    }

    pub fn f64_or(&mut self, key: &str, flag: Option<f64>, default: f64) -> Result<f64, CliError> {
        let v = self.resolve(key, flag)?.unwrap_or(default);
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn f64_opt(&mut self, key: &str, flag: Option<f64>) -> Result<Option<f64>, CliError> {
        let v = self.resolve(key, flag)?;
        self.record(key, v.map_or(Value::Null, Value::from));
        Ok(v)
    }

    pub fn f64_required(&mut self, key: &str, flag: Option<f64>) -> Result<f64, CliError> {
        self.f64_opt(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required setting `{key}`")))
    }

    pub fn usize_or(&mut self, key: &str, flag: Option<usize>, default: usize) -> Result<usize, CliError> {
        let v = self.resolve(key, flag)?.unwrap_or(default);
        self.record(key, Value::from(v));
        Ok(v)
    }

    pub fn string_or(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<String, CliError> {
        let v = self.resolve(key, flag)?.unwrap_or_else(|| default.to_string());
        self.record(key, Value::from(v.clone()));
        Ok(v)
    }

    pub fn string_opt(&mut self, key: &str, flag: Option<String>) -> Result<Option<String>, CliError> {
        let v = self.resolve(key, flag)?;
        self.record(key, v.clone().map_or(Value::Null, Value::from));
        Ok(v)
    }

    /// Comma-separated list of numbers.
    pub fn list_opt(&mut self, key: &str, flag: Option<Vec<f64>>) -> Result<Option<Vec<f64>>, CliError> {
        let from_file = self.file.remove(key);
        let v = match (flag, from_file) {
            (Some(v), _) => Some(v),
            (None, Some(raw)) => Some(
                raw.split(',')
                    .map(|item| {
                        item.trim().parse::<f64>().map_err(|e| {
                            CliError::Usage(format!("config key `{key}`: cannot parse `{item}`: {e}"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            (None, None) => None,
        };
        self.record(key, v.clone().map_or(Value::Null, Value::from));
        Ok(v)
    }

    pub fn list_or(&mut self, key: &str, flag: Option<Vec<f64>>, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let v = self.list_opt(key, flag)?.unwrap_or_else(|| default.to_vec());
        self.record(key, Value::from(v.clone()));
        Ok(v)
    }

    pub fn list_required(&mut self, key: &str, flag: Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
        self.list_opt(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required setting `{key}`")))
    }

    /// Fails on config keys no setting consumed; returns the effective
    /// settings.
    pub fn finish(self) -> Result<Map<String, Value>, CliError> {
        if let Some(key) = self.file.keys().next() {
            return Err(CliError::Usage(format!("unknown config key `{key}`")));
        }
        Ok(self.effective)
    }
}
