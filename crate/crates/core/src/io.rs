//! Canonical JSON, content hashes and CSV sweeps.
//!
//! Struct fields serialize in declaration order, maps are `BTreeMap`s and
//! floats use the shortest round-trip form, so a value has exactly one
//! JSON encoding and identical inputs give identical bytes.

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::{format_sig17, Real};

/// Version stamped on every top-level artifact.
pub const SCHEMA_VERSION: u32 = 1;

/// Compact canonical encoding.
pub fn canonical_json<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    Ok(serde_json::to_string(value)?)
}

/// Pretty encoding with the same field order (for files on disk).
pub fn pretty_json<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<D: DeserializeOwned>(text: &str) -> Result<D> {
    Ok(serde_json::from_str(text)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content id: SHA-256 of the canonical encoding.
pub fn content_id<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    Ok(sha256_hex(canonical_json(value)?.as_bytes()))
}

/// Tool and configuration stamp carried by every JSON artifact. Contains no
/// timestamps so reruns are byte-identical.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
}

impl RunProvenance {
    pub fn new(config: &str) -> Self {
        Self {
            tool: "ineqforge".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: sha256_hex(config.as_bytes()),
        }
    }
}

/// Top-level wrapper for artifacts written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact<B> {
    pub schema_version: u32,
    pub provenance: RunProvenance,
    pub body: B,
}

impl<B: Serialize + DeserializeOwned> Artifact<B> {
    pub fn new(body: B, config: &str) -> Self {
        Self { schema_version: SCHEMA_VERSION, provenance: RunProvenance::new(config), body }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let a: Self = from_json(text)?;
        if a.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported schema_version {}", a.schema_version)));
        }
        Ok(a)
    }
}

/// `s,beta` sweep with 17 significant digits.
pub fn sweep_csv<T: Real>(rows: &[(T, T)]) -> String {
    let mut out = String::from("s,beta\n");
    for (s, b) in rows {
        let _ = writeln!(out, "{},{}", format_sig17(*s), format_sig17(*b));
    }
    out
}

/// Parses a sweep written by [`sweep_csv`].
pub fn parse_sweep_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    if lines.next() != Some("s,beta") {
        return Err(Error::InvalidArgument("missing `s,beta` header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (a, b) = l.split_once(',').ok_or_else(|| Error::InvalidArgument(format!("bad row `{l}`")))?;
            Ok((parse_f64(a)?, parse_f64(b)?))
        })
        .collect()
}

fn parse_f64(t: &str) -> Result<f64> {
    crate::scalar::ext::parse::<f64>(t)
        .map(Ok)
        .unwrap_or_else(|| t.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad number `{t}`"))))
}

/// Generic table with a header row, same float format as sweeps.
pub fn table_csv<T: Real>(header: &[&str], rows: &[Vec<T>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| format_sig17(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn content_id_is_stable() {
        let mut m = BTreeMap::new();
        m.insert("b", 1.5);
        m.insert("a", 0.1);
        assert_eq!(canonical_json(&m).unwrap(), r#"{"a":0.1,"b":1.5}"#);
        assert_eq!(content_id(&m).unwrap(), content_id(&m).unwrap());
        assert_eq!(content_id(&m).unwrap().len(), 64);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![(0.01, 1.0 / 3.0), (1.0, f64::INFINITY)];
        let text = sweep_csv(&rows);
        assert!(text.starts_with("s,beta\n1.0000000000000000e-2,"));
        assert_eq!(parse_sweep_csv(&text).unwrap(), rows);
    }

    #[test]
    fn artifact_version_checked() {
        let a = Artifact::new(3u8, "cfg");
        let text = canonical_json(&a).unwrap();
        assert_eq!(Artifact::<u8>::parse(&text).unwrap(), a);
        let bad = text.replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(Artifact::<u8>::parse(&bad).is_err());
    }
}
