//! Layered configuration: built-in defaults, then a TOML file, then flags.
//!
//! A config file holds one table per verb (`[generate]`, `[fit]`, ...).
//! Every run writes the fully resolved table back out as a run manifest;
//! passing that manifest as `--config` reproduces the run.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use tokenobs::dataset::write_atomic;

use crate::error::{CliError, CliResult};

/// Recursively overlay `top` onto `base`.
pub fn merge(base: &mut toml::Table, top: &toml::Table) {
    for (k, v) in top {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

pub fn to_table<T: Serialize>(value: &T) -> CliResult<toml::Table> {
    toml::Table::try_from(value).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
}

pub fn from_table<T: DeserializeOwned>(table: toml::Table, what: &str) -> CliResult<T> {
    table
        .try_into()
        .map_err(|e| CliError::Config(format!("invalid [{what}] config: {e}")))
}

/// The `[section]` table of a config file, or an empty table.
pub fn load_section(path: Option<&Path>, section: &str) -> CliResult<toml::Table> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| tokenobs::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let doc: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match doc.get(section) {
        None => Ok(toml::Table::new()),
        Some(toml::Value::Table(t)) => Ok(t.clone()),
        Some(_) => Err(CliError::Config(format!("{}: [{section}] must be a table", path.display()))),
    }
}

/// Defaults, overlaid with the file section, overlaid with explicit flags.
pub fn resolve<T: Serialize + DeserializeOwned>(
    defaults: &T,
    file: &toml::Table,
    flags: &toml::Table,
    section: &str,
) -> CliResult<T> {
    let mut t = to_table(defaults)?;
    merge(&mut t, file);
    merge(&mut t, flags);
    from_table(t, section)
}

/// Write `[run]` metadata plus the resolved `[section]` table.
pub fn write_run_manifest<T: Serialize>(path: &Path, section: &str, resolved: &T, seed: Option<u64>) -> CliResult<()> {
    let mut run = toml::Table::new();
    run.insert("verb".into(), section.into());
    run.insert("tool_version".into(), env!("CARGO_PKG_VERSION").into());
    if let Some(s) = seed {
        run.insert("seed".into(), toml::Value::Integer(s as i64));
    }
    let mut doc = toml::Table::new();
    doc.insert("run".into(), toml::Value::Table(run));
    doc.insert(section.into(), toml::Value::Table(to_table(resolved)?));
    let text = toml::to_string(&doc).map_err(|e| CliError::Config(e.to_string()))?;
    write_atomic(path, |w| w.write_all(text.as_bytes()))?;
    Ok(())
}

/// Collects flag overrides as TOML values, skipping unset flags.
#[derive(Default)]
pub struct Flags(pub toml::Table);

impl Flags {
    pub fn set<V: Into<toml::Value>>(&mut self, key: &str, v: Option<V>) -> &mut Self {
        if let Some(v) = v {
            self.0.insert(key.into(), v.into());
        }
        self
    }

    pub fn set_u64(&mut self, key: &str, v: Option<u64>) -> &mut Self {
        self.set(key, v.map(|x| x as i64))
    }

    pub fn set_usize(&mut self, key: &str, v: Option<usize>) -> &mut Self {
        self.set(key, v.map(|x| x as i64))
    }

    pub fn set_path(&mut self, key: &str, v: Option<&Path>) -> &mut Self {
        self.set(key, v.map(|p| p.to_string_lossy().into_owned()))
    }

    pub fn nested(&mut self, key: &str, table: toml::Table) -> &mut Self {
        if !table.is_empty() {
            self.0.insert(key.into(), toml::Value::Table(table));
        }
        self
    }
}
