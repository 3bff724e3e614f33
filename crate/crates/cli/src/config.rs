//! `key = value` config files.
//!
//! Top-level keys apply to every subcommand; a `[subcommand]` table
//! overrides them for that subcommand. Keys may use `-` or `_`.

use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Config {
    table: toml::Table,
}

fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

fn normalized(table: &toml::Table) -> toml::Table {
    table
        .iter()
        .map(|(k, v)| {
            let v = match v {
                toml::Value::Table(t) => toml::Value::Table(normalized(t)),
                other => other.clone(),
            };
            (normalize(k), v)
        })
        .collect()
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        if !path.is_file() {
            return Err(CliError::usage(format!(
                "config file {} does not exist",
                path.display()
            )));
        }
        let text = std::fs::read_to_string(path)?;
        Config::parse(&text).map_err(|e| e.context(path.display()))
    }

    pub fn parse(text: &str) -> Result<Config, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::usage(e.message().to_string()))?;
        Ok(Config {
            table: normalized(&table),
        })
    }

    fn raw(&self, section: &str, key: &str) -> Option<&toml::Value> {
        let key = normalize(key);
        self.table
            .get(&normalize(section))
            .and_then(|s| s.as_table())
            .and_then(|s| s.get(&key))
            .or_else(|| self.table.get(&key).filter(|v| !v.is_table()))
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(value) = self.raw(section, key) else {
            return Ok(None);
        };
        let text = match value {
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            other => {
                return Err(CliError::usage(format!(
                    "config key {key}: unsupported value {other}"
                )))
            }
        };
        text.parse::<T>()
            .map(Some)
            .map_err(|e| CliError::usage(format!("config key {key}: {e}")))
    }

    /// Flag value, else config value, else `default`.
    pub fn pick<T: FromStr>(
        &self,
        flag: Option<T>,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(section, key)?.unwrap_or(default)),
        }
    }

    /// Flag value, else config value.
    pub fn pick_opt<T: FromStr>(
        &self,
        flag: Option<T>,
        section: &str,
        key: &str,
    ) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(section, key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_override_top_level() {
        let cfg = Config::parse(
            "floor = 60\nlog-level = \"info\"\n[pitch]\nfloor = 90.5\n[simsynth]\nkappa = 0.2\n",
        )
        .unwrap();
        assert_eq!(cfg.get::<f64>("pitch", "floor").unwrap(), Some(90.5));
        assert_eq!(cfg.get::<f64>("align", "floor").unwrap(), Some(60.0));
        assert_eq!(
            cfg.get::<String>("pitch", "log_level").unwrap(),
            Some("info".into())
        );
        assert_eq!(cfg.get::<f64>("pitch", "kappa").unwrap(), None);
        assert_eq!(cfg.pick(Some(1.0), "simsynth", "kappa", 0.5).unwrap(), 1.0);
        assert_eq!(cfg.pick(None, "simsynth", "kappa", 0.5).unwrap(), 0.2);
        assert_eq!(cfg.pick(None, "pitch", "kappa", 0.5).unwrap(), 0.5);
    }

    #[test]
    fn bad_values() {
        let cfg = Config::parse("jobs = \"many\"").unwrap();
        assert!(cfg.get::<usize>("x", "jobs").is_err());
        assert!(Config::parse("this is not toml").is_err());
    }
}
