//! Append-only, SHA-256 hash-chained audit log.
//!
//! Each entry stores its event as canonical JSON text plus that text's
//! digest, and a hash over (seq, timestamp, stage, actor, digest, previous
//! hash). Any change to a stored field breaks either the digest or the chain.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("audit chain broken at entry {index}: {reason}")]
    ChainBroken { index: usize, reason: &'static str },
    #[error("audit log line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditEntry {
    pub seq: u64,
    pub timestamp: String,
    pub stage: String,
    pub actor: String,
    /// Canonical JSON of the event.
    pub event: String,
    pub event_digest: String,
    pub prev_hash: String,
    pub hash: String,
}

impl AuditEntry {
    fn compute_hash(&self) -> String {
        let material = serde_json::to_string(&(
            self.seq,
            &self.timestamp,
            &self.stage,
            &self.actor,
            &self.event_digest,
            &self.prev_hash,
        ))
        .expect("tuple of strings serializes");
        sha256_hex(material.as_bytes())
    }

    pub fn event_value(&self) -> serde_json::Result<serde_json::Value> {
        serde_json::from_str(&self.event)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditLog {
    entries: Vec<AuditEntry>,
    /// Prefix length already checked.
    verified: usize,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wrap entries without checking them; the next append or `verify` does.
    pub fn from_entries(entries: Vec<AuditEntry>) -> Self {
        Self {
            entries,
            verified: 0,
        }
    }

    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<AuditEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head_hash(&self) -> &str {
        self.entries.last().map_or(GENESIS_HASH, |e| e.hash.as_str())
    }

    fn check_from(&self, start: usize) -> Result<(), AuditError> {
        for i in start..self.entries.len() {
            let entry = &self.entries[i];
            let prev = if i == 0 {
                GENESIS_HASH
            } else {
                self.entries[i - 1].hash.as_str()
            };
            let broken = |reason| AuditError::ChainBroken { index: i, reason };
            if entry.seq != i as u64 {
                return Err(broken("sequence number"));
            }
            if entry.prev_hash != prev {
                return Err(broken("previous hash"));
            }
            if entry.event_digest != sha256_hex(entry.event.as_bytes()) {
                return Err(broken("event digest"));
            }
            if entry.hash != entry.compute_hash() {
                return Err(broken("entry hash"));
            }
        }
        Ok(())
    }

    /// Verify the whole chain from genesis.
    pub fn verify(&self) -> Result<(), AuditError> {
        self.check_from(0)
    }

    pub fn append<E: Serialize + ?Sized>(
        &mut self,
        stage: &str,
        actor: &str,
        event: &E,
    ) -> Result<&AuditEntry, AuditError> {
        let now = Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true);
        self.append_at(&now, stage, actor, event)
    }

    /// Append with an explicit timestamp. Unverified entries are checked first.
    pub fn append_at<E: Serialize + ?Sized>(
        &mut self,
        timestamp: &str,
        stage: &str,
        actor: &str,
        event: &E,
    ) -> Result<&AuditEntry, AuditError> {
        self.check_from(self.verified)?;
        let event = serde_json::to_string(event)?;
        let mut entry = AuditEntry {
            seq: self.entries.len() as u64,
            timestamp: timestamp.to_string(),
            stage: stage.to_string(),
            actor: actor.to_string(),
            event_digest: sha256_hex(event.as_bytes()),
            event,
            prev_hash: self.head_hash().to_string(),
            hash: String::new(),
        };
        entry.hash = entry.compute_hash();
        self.entries.push(entry);
        self.verified = self.entries.len();
        Ok(self.entries.last().expect("just pushed"))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    /// Parse JSONL without verifying the chain.
    pub fn parse_jsonl(text: &str) -> Result<Self, AuditError> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|source| AuditError::Parse { line: i + 1, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_entries(entries))
    }

    /// Read an audit file; a missing file is an empty log.
    pub fn read(path: &Path) -> Result<Self, AuditError> {
        if !path.exists() {
            return Ok(Self::new());
        }
        let mut text = String::new();
        for line in BufReader::new(File::open(path)?).lines() {
            text.push_str(&line?);
            text.push('\n');
        }
        Self::parse_jsonl(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), AuditError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_jsonl().as_bytes())?;
        w.flush()?;
        Ok(())
    }

    /// Append the entries from index `from` onward to an existing file.
    pub fn append_to_file(&self, path: &Path, from: usize) -> Result<(), AuditError> {
        let mut w = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
        for e in &self.entries[from.min(self.entries.len())..] {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Verify `log`, then append one event.
pub fn audit_append<E: Serialize + ?Sized>(
    mut log: AuditLog,
    stage: &str,
    actor: &str,
    event: &E,
) -> Result<AuditLog, AuditError> {
    log.verify()?;
    log.append(stage, actor, event)?;
    Ok(log)
}
