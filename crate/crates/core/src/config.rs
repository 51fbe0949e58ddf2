//! Flat key-value configuration files with `include` support.
//!
//! Files are TOML restricted to top-level scalar or array values. An
//! `include` key (a string or list of strings) pulls in a bundled preset by
//! name or another file relative to the including one; keys in the including
//! file override included ones.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::params::ExperimentParams;

const TABLE1: &str = include_str!("../presets/table1.toml");

/// Source text of a bundled preset.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "table1" => Some(TABLE1),
        _ => None,
    }
}

const MAX_INCLUDE_DEPTH: usize = 8;

pub fn load_file(path: &Path) -> Result<Table> {
    load_file_depth(path, 0)
}

pub fn parse_str(text: &str, base: Option<&Path>) -> Result<Table> {
    parse_depth(text, base, 0)
}

fn load_file_depth(path: &Path, depth: usize) -> Result<Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_depth(&text, path.parent(), depth)
}

fn parse_depth(text: &str, base: Option<&Path>, depth: usize) -> Result<Table> {
    if depth > MAX_INCLUDE_DEPTH {
        return Err(Error::Config("include nesting too deep".into()));
    }
    let mut own: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for (k, v) in &own {
        if matches!(v, Value::Table(_)) {
            return Err(Error::Config(format!("key `{k}`: nested tables are not allowed")));
        }
    }
    let includes = match own.remove("include") {
        None => vec![],
        Some(Value::String(s)) => vec![s],
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                other => Err(Error::Config(format!("include entry {other} is not a string"))),
            })
            .collect::<Result<_>>()?,
        Some(other) => return Err(Error::Config(format!("include must be a string, got {other}"))),
    };
    let mut merged = Table::new();
    for inc in includes {
        let table = match preset(&inc) {
            Some(src) => parse_depth(src, None, depth + 1)?,
            None => {
                let p = base.map(|b| b.join(&inc)).unwrap_or_else(|| PathBuf::from(&inc));
                load_file_depth(&p, depth + 1)?
            }
        };
        merged.extend(table);
    }
    merged.extend(own);
    Ok(merged)
}

/// Builds experiment parameters from a table, starting at the reference defaults.
/// Keys that are not experiment parameters are returned for the caller to
/// interpret.
pub fn split_params(table: &Table) -> Result<(ExperimentParams, Table)> {
    let mut params = ExperimentParams::table1();
    let mut rest = Table::new();
    for (k, v) in table {
        if !params.set_key(k, v)? {
            rest.insert(k.clone(), v.clone());
        }
    }
    Ok((params, rest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_reproduces_table1() {
        let t = parse_str("include = \"table1\"", None).unwrap();
        let (p, rest) = split_params(&t).unwrap();
        assert!(rest.is_empty());
        let q = ExperimentParams::table1();
        assert!((p.omega_z - q.omega_z).abs() <= 1e-12 * q.omega_z);
        assert_eq!(p.sphere_radius, q.sphere_radius);
        assert_eq!(p.dielectric_const, q.dielectric_const);
        assert_eq!(p.eta, q.eta);
        assert_eq!(p.gas_pressure, q.gas_pressure);
    }

    #[test]
    fn override_after_include() {
        let t = parse_str("include = \"table1\"\ngas_pressure = 2e-8\nratio = 0.5", None).unwrap();
        let (p, rest) = split_params(&t).unwrap();
        assert_eq!(p.gas_pressure, 2e-8);
        assert!(rest.contains_key("ratio"));
    }

    #[test]
    fn rejects_nested_tables_and_bad_types() {
        assert!(parse_str("[section]\na = 1", None).is_err());
        let t = parse_str("density = \"heavy\"", None).unwrap();
        assert!(split_params(&t).is_err());
        assert!(parse_str("include = \"no-such-preset.toml\"", None).is_err());
    }
}
