//! Loading, validating, hashing and re-emitting run configurations.

use std::fs;
use std::path::Path;

use moqd_core::{AlgorithmConfig, AlgorithmId};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

pub fn load_config(path: &Path) -> Result<AlgorithmConfig> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_config(&text, path)
}

/// Parses TOML into a validated config. Errors name the offending field.
pub fn parse_config(text: &str, path: &Path) -> Result<AlgorithmConfig> {
    let config_err = |message: String| BenchError::Config {
        path: path.to_path_buf(),
        message,
    };
    let de = toml::Deserializer::parse(text).map_err(|e| config_err(e.to_string().trim_end().to_string()))?;
    let cfg: AlgorithmConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner().to_string();
        config_err(format!("field `{field}`: {}", inner.trim_end()))
    })?;
    cfg.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(cfg)
}

pub fn to_toml(cfg: &AlgorithmConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| BenchError::Runtime(format!("cannot serialise config: {e}")))
}

/// Hex SHA-256 of the config with its seed cleared, serialised as JSON with
/// object keys sorted. Replications of one setup share the hash, and key
/// order in the source file does not matter.
pub fn config_hash(cfg: &AlgorithmConfig) -> String {
    let mut cfg = cfg.clone();
    cfg.seed = 0;
    let value = serde_json::to_value(&cfg).expect("config serialises to JSON");
    let mut canonical = String::new();
    write_canonical(&value, &mut canonical);
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Name used to group replications: the algorithm id, plus the
/// policy-gradient objectives for MO-PGA when they are restricted.
pub fn run_label(cfg: &AlgorithmConfig) -> String {
    match (&cfg.algorithm, &cfg.pg_objectives) {
        (AlgorithmId::MoPga, Some(objs)) => {
            let list: Vec<String> = objs.iter().map(usize::to_string).collect();
            format!("mo_pga[{}]", list.join(","))
        }
        (a, _) => a.to_string(),
    }
}
