//! Optional TOML defaults. Each subcommand reads its own table; the entries
//! are turned into flags placed before the user's own, so flags win.

use std::ffi::OsString;
use std::path::Path;

use crate::CliError;

/// Flags for `subcommand` from the config file's `[subcommand]` table.
pub fn config_flags(path: &Path, subcommand: &str) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let Some(section) = doc.get(subcommand) else {
        return Ok(Vec::new());
    };
    let table = section
        .as_table()
        .ok_or_else(|| CliError::Usage(format!("config {}: [{subcommand}] must be a table", path.display())))?;
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &toml::Value| -> Result<String, CliError> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                other => Err(CliError::Usage(format!("config key {key}: unsupported value {other}"))),
            }
        };
        match value {
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                out.push(format!("{flag}={}", parts.join(",")).into());
            }
            v => out.push(format!("{flag}={}", scalar(v)?).into()),
        }
    }
    Ok(out)
}
