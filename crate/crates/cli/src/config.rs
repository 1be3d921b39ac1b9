//! Flat key-value run configuration.
//!
//! A config file is TOML with top-level keys named after the subcommand's
//! long flags (`alpha = 2.0`, `N = 1e6`, `alphas = [1.2, 1.7]`). Values given
//! on the command line replace file values; everything else takes the
//! subcommand's default. A `.json` file is read as a flat object instead;
//! passing a run manifest replays the configuration it recorded.

use std::path::Path;

use serde::de::{self, DeserializeOwned, Deserializer};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

/// Parses a file into a key-value table. A missing path yields an empty table.
pub fn read_table(path: Option<&Path>) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let bad = |e: &dyn std::fmt::Display| CliError::Config(format!("{}: {e}", path.display()));
    let value = if path.extension().is_some_and(|e| e == "json") {
        let v: Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
        // A run manifest carries its resolved config under `config`.
        match v.get("config") {
            Some(inner) if v.get("subcommand").is_some() => inner.clone(),
            _ => v,
        }
    } else {
        let table: toml::Table = toml::from_str(&text).map_err(|e| bad(&e))?;
        serde_json::to_value(table).map_err(|e| bad(&e))?
    };
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(bad(&"expected a table of keys")),
    }
}

/// Resolves `file` overlaid with `overrides` into `T`, starting from
/// `T::default()`.
///
/// Keys not present in `T` are rejected with the nearest valid key.
pub fn resolve<T, O>(file: Map<String, Value>, overrides: &O) -> Result<T, CliError>
where
    T: DeserializeOwned + Serialize + Default,
    O: Serialize,
{
    let valid = valid_keys::<T>();
    for key in file.keys() {
        if !valid.iter().any(|k| k == key) {
            return Err(unknown_key(key, &valid));
        }
    }
    let mut merged = file;
    if let Value::Object(cli) = serde_json::to_value(overrides).map_err(|e| CliError::Config(e.to_string()))? {
        for (k, v) in cli {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged.clone())).map_err(|err| {
        // Pin the message to the first key that fails on its own.
        for (k, v) in &merged {
            let mut single = Map::new();
            single.insert(k.clone(), v.clone());
            if let Err(e) = serde_json::from_value::<T>(Value::Object(single)) {
                return CliError::Config(format!("key `{k}`: {e}"));
            }
        }
        CliError::Config(err.to_string())
    })
}

pub fn valid_keys<T: Serialize + Default>() -> Vec<String> {
    match serde_json::to_value(T::default()) {
        Ok(Value::Object(map)) => map.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

fn unknown_key(key: &str, valid: &[String]) -> CliError {
    let nearest = valid
        .iter()
        .min_by_key(|k| strsim::levenshtein(key, k))
        .cloned()
        .unwrap_or_default();
    CliError::Config(format!(
        "unknown config key `{key}` (did you mean `{nearest}`?); valid keys: {}",
        valid.join(", ")
    ))
}

/// Parses counts such as `1000`, `1e6` or `1_000_000`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let cleaned = s.replace('_', "");
    if let Ok(v) = cleaned.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = cleaned.parse().map_err(|_| format!("`{s}` is not a count"))?;
    float_to_count(v).ok_or_else(|| format!("`{s}` is not a nonnegative integer"))
}

pub fn parse_usize(s: &str) -> Result<usize, String> {
    parse_count(s).map(|v| v as usize)
}

fn float_to_count(v: f64) -> Option<u64> {
    (v >= 0.0 && v.fract() == 0.0 && v <= 2f64.powi(53)).then_some(v as u64)
}

/// Deserializes a count written as an integer, an integral float or a string.
pub fn count<'de, D: Deserializer<'de>, T: TryFrom<u64>>(d: D) -> Result<T, D::Error> {
    let v = Value::deserialize(d)?;
    let raw = match &v {
        Value::Number(n) => n
            .as_u64()
            .or_else(|| n.as_f64().and_then(float_to_count))
            .ok_or_else(|| de::Error::custom(format!("expected a nonnegative integer, got {n}"))),
        Value::String(s) => parse_count(s).map_err(de::Error::custom),
        other => Err(de::Error::custom(format!("expected a nonnegative integer, got {other}"))),
    }?;
    T::try_from(raw).map_err(|_| de::Error::custom(format!("count {raw} out of range")))
}

/// [`count`] for lists.
pub fn counts<'de, D: Deserializer<'de>, T: TryFrom<u64>>(d: D) -> Result<Vec<T>, D::Error> {
    let items = Vec::<Value>::deserialize(d)?;
    items
        .into_iter()
        .map(|v| count::<_, T>(v).map_err(de::Error::custom))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        alpha: f64,
        #[serde(rename = "N", deserialize_with = "count")]
        n: usize,
    }

    impl Default for Demo {
        fn default() -> Self {
            Self { alpha: 2.0, n: 100 }
        }
    }

    #[derive(Serialize, Default)]
    struct Flags {
        #[serde(skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    }

    fn table(text: &str) -> Map<String, Value> {
        match serde_json::to_value(toml::from_str::<toml::Table>(text).unwrap()).unwrap() {
            Value::Object(m) => m,
            _ => unreachable!(),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let d: Demo = resolve(Map::new(), &Flags::default()).unwrap();
        assert_eq!(d, Demo::default());
    }

    #[test]
    fn flags_override_file() {
        let d: Demo = resolve(table("alpha = 2.0\nN = 1e6"), &Flags { alpha: Some(3.0) }).unwrap();
        assert_eq!(d, Demo { alpha: 3.0, n: 1_000_000 });
    }

    #[test]
    fn unknown_key_names_nearest() {
        let e = resolve::<Demo, _>(table("alfa = 2.0"), &Flags::default()).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("`alfa`") && msg.contains("did you mean `alpha`"), "{msg}");
    }

    #[test]
    fn type_mismatch_names_key() {
        let e = resolve::<Demo, _>(table("alpha = \"big\""), &Flags::default()).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("`alpha`") && msg.contains("f64"), "{msg}");
        let e = resolve::<Demo, _>(table("N = 1.5"), &Flags::default()).unwrap_err();
        assert!(e.to_string().contains("nonnegative integer"));
    }

    #[test]
    fn count_parsing() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("32768"), Ok(32768));
        assert_eq!(parse_count("1_000"), Ok(1000));
        assert!(parse_count("2.5").is_err());
        assert!(parse_count("-3").is_err());
        assert!(parse_count("x").is_err());
    }
}
