//! Append-only, SHA3-256 hash-chained audit ledger.
//!
//! Each [`AuditEntry`] commits to its predecessor through `prev_hash`; entry 0
//! chains from 32 zero bytes. `entry_hash = SHA3-256(prev_hash || body)` where
//! `body` is the canonical JSON of every other field. There is no deletion or
//! compaction; the JSON Lines export is the archive format, and importing it
//! re-validates both the canonical form of each line and the whole chain.
//!
//! Ownership snapshots are written into `lifecycle` entries (`owner_id` in the
//! payload), so [`AuditLedger::reconstruct`] can attribute actions to the
//! owner that was accountable at the time without consulting the registry.

use std::ops::Range;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::canonical::{to_canonical_json, Digest32};
use crate::scope::DataClass;
use crate::uri::WorkloadUri;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Lifecycle,
    Issuance,
    Revocation,
    Delegation,
    Decision,
    EscalationResolution,
    Certification,
    ConfigChange,
    Alert,
}

/// An event before it is chained into the ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditEvent {
    pub timestamp: DateTime<Utc>,
    pub actor: WorkloadUri,
    pub kind: EventKind,
    pub payload: Value,
    pub data_class: Option<DataClass>,
    pub session_id: Option<String>,
    pub task_id: Option<String>,
    pub decision_ref: Option<String>,
}

impl AuditEvent {
    pub fn new(timestamp: DateTime<Utc>, actor: WorkloadUri, kind: EventKind, payload: Value) -> Self {
        Self {
            timestamp,
            actor,
            kind,
            payload,
            data_class: None,
            session_id: None,
            task_id: None,
            decision_ref: None,
        }
    }

    pub fn data_class(mut self, class: DataClass) -> Self {
        self.data_class = Some(class);
        self
    }

    pub fn session(mut self, session: impl Into<String>) -> Self {
        self.session_id = Some(session.into());
        self
    }

    pub fn task(mut self, task: impl Into<String>) -> Self {
        self.task_id = Some(task.into());
        self
    }

    pub fn decision_ref(mut self, decision: impl Into<String>) -> Self {
        self.decision_ref = Some(decision.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditEntry {
    pub sequence: u64,
    pub prev_hash: Digest32,
    pub entry_hash: Digest32,
    pub timestamp: DateTime<Utc>,
    pub actor: WorkloadUri,
    pub kind: EventKind,
    pub payload: Value,
    pub data_class: Option<DataClass>,
    pub session_id: Option<String>,
    pub task_id: Option<String>,
    pub decision_ref: Option<String>,
}

impl AuditEntry {
    /// Canonical serialization of every field except the two hashes.
    pub fn canonical_body(&self) -> String {
        let body = json!({
            "sequence": self.sequence,
            "timestamp": self.timestamp,
            "actor": self.actor,
            "kind": self.kind,
            "payload": self.payload,
            "data_class": self.data_class,
            "session_id": self.session_id,
            "task_id": self.task_id,
            "decision_ref": self.decision_ref,
        });
        to_canonical_json(&body)
    }

    pub fn compute_hash(&self) -> Digest32 {
        let body = self.canonical_body();
        let mut buf = Vec::with_capacity(32 + body.len());
        buf.extend_from_slice(&self.prev_hash.0);
        buf.extend_from_slice(body.as_bytes());
        Digest32::of(&buf)
    }

    /// One JSON Lines record (no trailing newline).
    pub fn to_json_line(&self) -> String {
        to_canonical_json(&serde_json::to_value(self).expect("audit entry serializes"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum ChainVerdict {
    Valid,
    BrokenAt { sequence: u64 },
}

impl ChainVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChainVerdict::Valid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("range {start}..{end} is outside the ledger (length {len})")]
    RangeOutOfBounds { start: u64, end: u64, len: u64 },
    #[error("reconstruction query must name at least one filter")]
    UnfilteredQuery,
    #[error("line {line}: {reason}")]
    Import { line: usize, reason: String },
    #[error("imported chain is broken at sequence {0}")]
    ImportChainBroken(u64),
}

/// Filters for [`AuditLedger::reconstruct`]; all present filters must match.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReconstructQuery {
    pub identity: Option<WorkloadUri>,
    pub session: Option<String>,
    pub task: Option<String>,
    /// Inclusive lower bound.
    pub from: Option<DateTime<Utc>>,
    /// Exclusive upper bound.
    pub to: Option<DateTime<Utc>>,
}

impl ReconstructQuery {
    fn is_empty(&self) -> bool {
        self.identity.is_none()
            && self.session.is_none()
            && self.task.is_none()
            && self.from.is_none()
            && self.to.is_none()
    }

    pub fn matches(&self, e: &AuditEntry) -> bool {
        self.identity.as_ref().is_none_or(|id| &e.actor == id)
            && self
                .session
                .as_ref()
                .is_none_or(|s| e.session_id.as_deref() == Some(s.as_str()))
            && self
                .task
                .as_ref()
                .is_none_or(|t| e.task_id.as_deref() == Some(t.as_str()))
            && self.from.is_none_or(|from| e.timestamp >= from)
            && self.to.is_none_or(|to| e.timestamp < to)
    }
}

/// Owner accountable for a contiguous run of reconstructed entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnerSpan {
    pub owner_id: Option<String>,
    pub first_sequence: u64,
    pub last_sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub agent: WorkloadUri,
    pub aibom_ref: Option<String>,
    pub owners: Vec<OwnerSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub entries: Vec<AuditEntry>,
    pub attribution: Vec<Attribution>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AuditLedger {
    entries: Vec<AuditEntry>,
}

impl AuditLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps entries without validating them. Used by verification tooling
    /// that must report *where* an untrusted export breaks.
    pub fn from_entries_unchecked(entries: Vec<AuditEntry>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    pub fn get(&self, sequence: u64) -> Option<&AuditEntry> {
        self.entries.get(sequence as usize)
    }

    pub fn head_hash(&self) -> Digest32 {
        self.entries.last().map(|e| e.entry_hash).unwrap_or(Digest32::ZERO)
    }

    pub fn append(&mut self, event: AuditEvent) -> &AuditEntry {
        let mut entry = AuditEntry {
            sequence: self.len(),
            prev_hash: self.head_hash(),
            entry_hash: Digest32::ZERO,
            timestamp: event.timestamp,
            actor: event.actor,
            kind: event.kind,
            payload: event.payload,
            data_class: event.data_class,
            session_id: event.session_id,
            task_id: event.task_id,
            decision_ref: event.decision_ref,
        };
        entry.entry_hash = entry.compute_hash();
        self.entries.push(entry);
        self.entries.last().expect("just pushed")
    }

    pub fn verify_all(&self) -> ChainVerdict {
        self.verify_range(0..self.len())
            .expect("full range is always in bounds")
    }

    /// Recomputes every hash in `range` and reports the first break.
    pub fn verify_range(&self, range: Range<u64>) -> Result<ChainVerdict, AuditError> {
        if range.start > range.end || range.end > self.len() {
            return Err(AuditError::RangeOutOfBounds {
                start: range.start,
                end: range.end,
                len: self.len(),
            });
        }
        for seq in range {
            let entry = &self.entries[seq as usize];
            let expected_prev = if seq == 0 {
                Digest32::ZERO
            } else {
                self.entries[seq as usize - 1].entry_hash
            };
            if entry.sequence != seq
                || entry.prev_hash != expected_prev
                || entry.compute_hash() != entry.entry_hash
            {
                return Ok(ChainVerdict::BrokenAt { sequence: seq });
            }
        }
        Ok(ChainVerdict::Valid)
    }

    pub fn reconstruct(&self, query: &ReconstructQuery) -> Result<Reconstruction, AuditError> {
        if query.is_empty() {
            return Err(AuditError::UnfilteredQuery);
        }
        let entries: Vec<AuditEntry> = self
            .entries
            .iter()
            .filter(|e| query.matches(e))
            .cloned()
            .collect();

        let mut agents: Vec<&WorkloadUri> = entries.iter().map(|e| &e.actor).collect();
        agents.sort();
        agents.dedup();
        let attribution = agents
            .into_iter()
            .map(|agent| self.attribute(agent, &entries))
            .collect();
        Ok(Reconstruction {
            entries,
            attribution,
        })
    }

    fn attribute(&self, agent: &WorkloadUri, matched: &[AuditEntry]) -> Attribution {
        // (sequence, owner) snapshots for this agent, in ledger order.
        let mut history: Vec<(u64, Option<String>)> = Vec::new();
        let mut aibom_ref = None;
        for e in self
            .entries
            .iter()
            .filter(|e| &e.actor == agent && e.kind == EventKind::Lifecycle)
        {
            if let Some(owner) = e.payload.get("owner_id") {
                history.push((e.sequence, owner.as_str().map(str::to_string)));
            }
            if let Some(r) = e.payload.get("aibom_ref").and_then(Value::as_str) {
                aibom_ref = Some(r.to_string());
            }
        }

        let mut owners: Vec<OwnerSpan> = Vec::new();
        for e in matched.iter().filter(|e| &e.actor == agent) {
            let idx = history.partition_point(|(seq, _)| *seq <= e.sequence);
            let owner = if idx == 0 { None } else { history[idx - 1].1.clone() };
            match owners.last_mut() {
                Some(span) if span.owner_id == owner => span.last_sequence = e.sequence,
                _ => owners.push(OwnerSpan {
                    owner_id: owner,
                    first_sequence: e.sequence,
                    last_sequence: e.sequence,
                }),
            }
        }
        Attribution {
            agent: agent.clone(),
            aibom_ref,
            owners,
        }
    }

    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_json_line());
            out.push('\n');
        }
        out
    }

    /// Parses an export, rejecting non-canonical lines and broken chains.
    pub fn import_jsonl(text: &str) -> Result<Self, AuditError> {
        let entries = parse_lines(text).map_err(|(line, reason)| AuditError::Import { line, reason })?;
        let ledger = Self { entries };
        match ledger.verify_all() {
            ChainVerdict::Valid => Ok(ledger),
            ChainVerdict::BrokenAt { sequence } => Err(AuditError::ImportChainBroken(sequence)),
        }
    }

    pub fn count_kind(&self, kind: EventKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }
}

fn parse_lines(text: &str) -> Result<Vec<AuditEntry>, (usize, String)> {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let entry: AuditEntry = serde_json::from_str(line).map_err(|e| (idx, e.to_string()))?;
        if entry.to_json_line() != line {
            return Err((idx, "line is not in canonical form".to_string()));
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// Verifies an untrusted JSON Lines export. A line that fails to parse or is
/// not canonical is reported as the break point.
pub fn verify_export(text: &str) -> ChainVerdict {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().filter(|l| !l.is_empty()).enumerate() {
        let parsed = serde_json::from_str::<AuditEntry>(line)
            .ok()
            .filter(|e| e.to_json_line() == line);
        match parsed {
            Some(e) => entries.push(e),
            None => return ChainVerdict::BrokenAt { sequence: idx as u64 },
        }
    }
    AuditLedger::from_entries_unchecked(entries).verify_all()
}
