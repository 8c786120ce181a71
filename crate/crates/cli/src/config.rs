//! JSON run configs and process-level settings.
//!
//! `--config run.json` is expanded into ordinary flags placed before the
//! command line's own flags, so explicit flags win. Keys are flag names in
//! camelCase or kebab-case; arrays are joined with commas and `true` turns
//! a switch on.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

pub const THREADS_ENV: &str = "MONOSIG_THREADS";

pub fn expand(argv: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(it.next().context("--config needs a path")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    if rest.len() < 2 {
        bail!("--config must follow a subcommand");
    }
    let flags = flags_from_file(Path::new(&path))?;
    let mut out = rest[..2].to_vec();
    out.extend(flags);
    out.extend(rest.into_iter().skip(2));
    Ok(out)
}

fn flags_from_file(path: &Path) -> Result<Vec<String>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    flags_from_value(&value).with_context(|| format!("in {}", path.display()))
}

pub fn flags_from_value(value: &Value) -> Result<Vec<String>> {
    let Value::Object(map) = value else {
        bail!("config must be a JSON object");
    };
    let mut flags = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", kebab(key));
        match v {
            Value::Bool(true) => flags.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_>>()?;
                flags.push(flag);
                flags.push(parts.join(","));
            }
            other => {
                flags.push(flag);
                flags.push(scalar(other)?);
            }
        }
    }
    Ok(flags)
}

fn scalar(v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => bail!("unsupported config value {other}"),
    }
}

fn kebab(key: &str) -> String {
    let mut out = String::with_capacity(key.len() + 4);
    for c in key.chars() {
        if c.is_ascii_uppercase() {
            out.push('-');
            out.push(c.to_ascii_lowercase());
        } else if c == '_' {
            out.push('-');
        } else {
            out.push(c);
        }
    }
    out
}

/// Caps the rayon pool at `MONOSIG_THREADS` workers when set.
pub fn limit_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        bail!("{THREADS_ENV} must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring worker threads")
}
