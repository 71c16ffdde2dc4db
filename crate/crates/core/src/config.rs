//! TOML configuration: scenario base, config file merge and dotted-key
//! overrides, resolved into a typed config with line-anchored errors.

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::collocation::ProblemSpec;
use crate::error::{Error, Result};
use crate::sim::log::Provenance;
use crate::sim::{builtin, ScenarioConfig};

/// Where a run's configuration comes from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigSource {
    pub scenario: Option<String>,
    /// Path and contents of a TOML config file.
    pub file: Option<(String, String)>,
    /// `dotted.key=value` pairs, applied in order.
    pub overrides: Vec<String>,
}

/// 1-based line and column of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn anchored(origin: &str, text: &str, e: &toml::de::Error) -> Error {
    let msg = e.message().trim();
    match e.span() {
        Some(span) => {
            let (l, c) = line_col(text, span.start);
            Error::Config(format!("{origin}: line {l}, column {c}: {msg}"))
        }
        None => Error::Config(format!("{origin}: {msg}")),
    }
}

/// Typed parse of a TOML document with line-anchored errors.
pub fn parse_toml<T: DeserializeOwned>(origin: &str, text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| anchored(origin, text, &e))
}

pub fn load_problem_spec(origin: &str, text: &str) -> Result<ProblemSpec> {
    let spec: ProblemSpec = parse_toml(origin, text)?;
    spec.validate()?;
    Ok(spec)
}

/// Recursively overlays `top` onto `base`; tables merge, everything else
/// replaces.
pub fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses an override value as TOML, falling back to a bare string.
fn override_value(raw: &str) -> Value {
    let raw = raw.trim();
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies one `dotted.key=value` override. Every parent must already be a
/// table; the leaf is checked by the typed parse.
pub fn apply_override(root: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) =
        spec.split_once('=').ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override `{spec}` has an empty key segment")));
    }
    let (leaf, parents) = parts.split_last().unwrap();
    let mut table = root;
    for (depth, p) in parents.iter().enumerate() {
        table = match table.get_mut(*p) {
            Some(Value::Table(t)) => t,
            _ => {
                return Err(Error::Config(format!(
                    "override `{spec}`: `{}` is not a config table",
                    parts[..=depth].join(".")
                )))
            }
        };
    }
    table.insert(leaf.to_string(), override_value(raw));
    Ok(())
}

fn to_table(cfg: &ScenarioConfig) -> Result<Table> {
    match Value::try_from(cfg) {
        Ok(Value::Table(t)) => Ok(t),
        Ok(_) => Err(Error::Config("scenario config did not serialize to a table".into())),
        Err(e) => Err(Error::Config(format!("cannot serialize scenario config: {e}"))),
    }
}

/// Resolves the scenario base, config file and overrides into a validated
/// config plus the provenance block embedded in run outputs.
pub fn resolve(source: &ConfigSource) -> Result<(ScenarioConfig, Provenance)> {
    let base = match &source.scenario {
        Some(name) => builtin(name)?,
        None => ScenarioConfig::default(),
    };
    let mut root = to_table(&base)?;
    if let Some((path, text)) = &source.file {
        let top: Table = parse_toml(path, text)?;
        merge(&mut root, top);
    }
    for o in &source.overrides {
        apply_override(&mut root, o)?;
    }
    let cfg: ScenarioConfig = match Value::Table(root.clone()).try_into() {
        Ok(cfg) => cfg,
        Err(merged) => {
            // Prefer the file's own location when the file alone shows the
            // same problem; overrides and defaults carry no lines.
            let merged: toml::de::Error = merged;
            if let Some((path, text)) = &source.file {
                if let Err(e) = toml::from_str::<ScenarioConfig>(text) {
                    if !e.message().contains("missing field") {
                        return Err(anchored(path, text, &e));
                    }
                }
            }
            let origin = if source.overrides.is_empty() { "config" } else { "config after overrides" };
            return Err(Error::Config(format!("{origin}: {}", merged.message().trim())));
        }
    };
    cfg.validate()?;
    let provenance = Provenance {
        scenario: source.scenario.clone(),
        config_path: source.file.as_ref().map(|(p, _)| p.clone()),
        overrides: source.overrides.clone(),
        config: cfg.clone(),
    };
    Ok((cfg, provenance))
}
