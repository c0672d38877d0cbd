//! Layered settings: command-line flags, then the `--config` JSON file, then
//! built-in defaults.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Resolves one command's settings and records what was used.
///
/// Config-file keys use the flag names (`tau-max`, `n-l`, ...). A key the
/// command never asks for is an error, as is a flag that does not apply.
pub struct Layer {
    file: Map<String, Value>,
    resolved: Map<String, Value>,
}

impl Layer {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            None => Map::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                match serde_json::from_str(&text) {
                    Ok(Value::Object(map)) => map,
                    Ok(_) => return Err(CliError::Usage("config file must hold a JSON object".into())),
                    Err(e) => return Err(CliError::Usage(format!("config {}: {e}", p.display()))),
                }
            }
        };
        Ok(Self {
            file,
            resolved: Map::new(),
        })
    }

    fn take<T: DeserializeOwned>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        let from_file = self.file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|v| {
                serde_json::from_value(v)
                    .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }

    fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).expect("settings serialise");
        self.resolved.insert(key.to_owned(), v);
    }

    /// Flag, else config value, else `default`; recorded in the header.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: Serialize + DeserializeOwned,
    {
        let v = self.take(key, flag)?.unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    /// Like [`Layer::get`] with no default.
    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: Serialize + DeserializeOwned,
    {
        let v = self
            .take(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required --{key}")))?;
        self.record(key, &v);
        Ok(v)
    }

    /// Settings that change where or how fast output is produced, but not
    /// its content; kept out of the header so output bytes do not depend on
    /// them.
    pub fn unrecorded<T: DeserializeOwned>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        self.take(key, flag)
    }

    /// Reject a setting that does not apply in the current mode.
    pub fn forbid(&mut self, key: &str, flag_given: bool, why: &str) -> Result<(), CliError> {
        if flag_given || self.file.contains_key(key) {
            return Err(CliError::Usage(format!("--{key} does not apply {why}")));
        }
        Ok(())
    }

    /// The resolved settings, failing on leftover config-file keys.
    pub fn finish(self) -> Result<Map<String, Value>, CliError> {
        if !self.file.is_empty() {
            let keys: Vec<_> = self.file.keys().map(String::as_str).collect();
            return Err(CliError::Usage(format!(
                "config keys not used by this command: {}",
                keys.join(", ")
            )));
        }
        Ok(self.resolved)
    }
}
