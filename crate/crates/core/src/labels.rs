//! `labels.jsonl`: one judgment per line, later lines overriding earlier
//! ones for the same (design, judge) pair.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub design_id: String,
    pub judge_id: String,
    /// 1 = like, 0 = dislike.
    pub label: u8,
    pub ts: String,
}

impl LabelRecord {
    pub fn liked(&self) -> bool {
        self.label == 1
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Parses a JSONL document; blank lines are skipped.
pub fn parse_jsonl(text: &str) -> Result<Vec<LabelRecord>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(format!("labels line {}", k + 1), e))?;
        if rec.label > 1 {
            return Err(Error::parse(format!("labels line {}", k + 1), format!("label must be 0 or 1, got {}", rec.label)));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Reads a labels file; a missing file reads as empty.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    let path = path.as_ref();
    match std::fs::read_to_string(path) {
        Ok(text) => parse_jsonl(&text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Appends records and syncs them to disk before returning.
pub fn append_jsonl(path: impl AsRef<Path>, records: &[LabelRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = String::new();
    for r in records {
        buf.push_str(&r.to_line());
        buf.push('\n');
    }
    f.write_all(buf.as_bytes()).and_then(|_| f.sync_data()).map_err(|e| Error::io(path, e))
}

/// Final label per (design, judge): the last record wins.
pub fn latest(records: &[LabelRecord]) -> BTreeMap<(String, String), bool> {
    let mut m = BTreeMap::new();
    for r in records {
        m.insert((r.design_id.clone(), r.judge_id.clone()), r.liked());
    }
    m
}
