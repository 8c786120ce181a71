//! Named system builders: `long`, `kng:K`, `counterexample` and
//! `committed:[base:]X[=alpha],...`.

use anyhow::{bail, Context, Result};
use monosig_core::{make_counterexample, make_kng, make_long, SignallingSystem};

pub fn build(name: &str) -> Result<SignallingSystem> {
    let name = name.trim();
    if let Some(rest) = name.strip_prefix("committed:") {
        return committed(rest);
    }
    if let Some(k) = name.strip_prefix("kng:") {
        let k: usize = k
            .parse()
            .with_context(|| format!("bad K in builder {name:?}"))?;
        return Ok(make_kng(k)?);
    }
    match name {
        "long" => Ok(make_long()),
        "counterexample" => Ok(make_counterexample()),
        other => bail!(
            "unknown builder {other:?} (expected long, kng:K, counterexample or committed:[base:]X=alpha,...)"
        ),
    }
}

/// `rest` is `[base:]entries`; the base defaults to `long`. An entry without
/// `=alpha` takes the speaking probability of the state it copies.
fn committed(rest: &str) -> Result<SignallingSystem> {
    let (base, entries) = match rest.rsplit_once(':') {
        Some((b, e)) => (build(b)?, e),
        None => (make_long(), rest),
    };
    let mut parsed = Vec::new();
    for entry in entries.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let (label, alpha) = match entry.split_once('=') {
            Some((l, a)) => {
                let a: f64 = a
                    .trim()
                    .parse()
                    .with_context(|| format!("bad alpha in committed entry {entry:?}"))?;
                (l.trim(), a)
            }
            None => (entry, base.alpha()[base.index_of(entry)?]),
        };
        parsed.push((label, alpha));
    }
    if parsed.is_empty() {
        bail!("committed builder needs at least one entry, e.g. committed:A=1");
    }
    Ok(base.with_committed(&parsed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(build("long").unwrap().k(), 3);
        assert_eq!(build("kng:4").unwrap().k(), 5);
        assert_eq!(build("counterexample").unwrap().k(), 3);
        let c = build("committed:A=1").unwrap();
        assert_eq!(c.labels()[3], "C_A");
        let c = build("committed:kng:3:3,0=0").unwrap();
        assert_eq!(c.k(), 6);
        assert_eq!(c.alpha()[4], 1.0);
        assert!(build("kng:x").is_err());
        assert!(build("committed:").is_err());
        assert!(build("committed:Z=1").is_err());
        assert!(build("nope").is_err());
    }
}
