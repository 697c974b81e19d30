//! AI bills of materials, model integrity checks and the deployment gate.

use std::collections::BTreeMap;
use std::io::{self, Read};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha3::{Digest as _, Sha3_256};
use thiserror::Error;

use crate::canonical::Digest32;
use crate::registry::IdentityKind;

/// Read unit for streamed hashing.
pub const CHUNK: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSource {
    pub source: String,
    /// Free-form governance status, e.g. `licensed` or `unreviewed`.
    pub governance_status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModificationRecord {
    pub at: DateTime<Utc>,
    pub previous_digest: Option<Digest32>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AibomRecord {
    pub model_id: String,
    pub architecture: String,
    #[serde(default)]
    pub training_data: Vec<TrainingSource>,
    #[serde(default)]
    pub fine_tuning: Vec<String>,
    #[serde(default)]
    pub dependencies: Vec<Dependency>,
    #[serde(default)]
    pub modifications: Vec<ModificationRecord>,
    pub parameter_digest: Option<Digest32>,
    #[serde(default)]
    pub gpai: bool,
    #[serde(default)]
    pub gpai_doc_ref: Option<String>,
}

impl AibomRecord {
    fn check(&self) -> Result<Digest32, ProvenanceError> {
        let digest = self
            .parameter_digest
            .ok_or_else(|| ProvenanceError::MissingDigest(self.model_id.clone()))?;
        if self.gpai && self.gpai_doc_ref.as_deref().is_none_or(|r| r.trim().is_empty()) {
            return Err(ProvenanceError::GpaiDocMissing(self.model_id.clone()));
        }
        Ok(digest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrityVerdict {
    Match,
    Mismatch,
    UnknownModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateFailure {
    NoAibom,
    UnknownAibom,
    NotVerified,
    Integrity,
    GpaiDocumentation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", content = "reasons", rename_all = "kebab-case")]
pub enum GateOutcome {
    Pass,
    Fail(Vec<GateFailure>),
}

impl GateOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, GateOutcome::Pass)
    }
}

#[derive(Debug, Error)]
pub enum ProvenanceError {
    #[error("AIBOM for {0} has no parameter digest")]
    MissingDigest(String),
    #[error("AIBOM for GPAI model {0} lacks a documentation reference")]
    GpaiDocMissing(String),
    #[error("artifact read failed: {0}")]
    Io(#[from] io::Error),
}

/// SHA3-256 over a stream, read in fixed chunks.
pub fn digest_stream(mut reader: impl Read) -> io::Result<Digest32> {
    let mut hasher = Sha3_256::new();
    let mut buf = vec![0u8; CHUNK];
    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        hasher.update(&buf[..n]);
    }
    Ok(Digest32(hasher.finalize().into()))
}

/// Verdict as a function of the stored digest and the artifact bytes only.
pub fn integrity_verdict(stored: Option<&Digest32>, reader: impl Read) -> io::Result<IntegrityVerdict> {
    let Some(stored) = stored else {
        return Ok(IntegrityVerdict::UnknownModel);
    };
    Ok(if digest_stream(reader)? == *stored {
        IntegrityVerdict::Match
    } else {
        IntegrityVerdict::Mismatch
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredAibom {
    pub record: AibomRecord,
    pub digest: Digest32,
    pub registered_at: DateTime<Utc>,
    pub last_check: Option<IntegrityVerdict>,
    pub last_checked_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProvenanceStore {
    models: BTreeMap<String, StoredAibom>,
    by_digest: BTreeMap<Digest32, String>,
}

impl ProvenanceStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn get(&self, model_id: &str) -> Option<&StoredAibom> {
        self.models.get(model_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoredAibom> {
        self.models.values()
    }

    /// Resolves an identity's `aibom_ref` (a parameter digest in hex).
    pub fn resolve_ref(&self, aibom_ref: &str) -> Option<&StoredAibom> {
        let d = Digest32::from_hex(aibom_ref).ok()?;
        self.by_digest.get(&d).and_then(|m| self.models.get(m))
    }

    /// Stores the record. A second registration for the same model
    /// supersedes the first, carrying its history forward with a new
    /// modification record, and clears the integrity state.
    pub fn register(&mut self, mut record: AibomRecord, now: DateTime<Utc>) -> Result<&StoredAibom, ProvenanceError> {
        let digest = record.check()?;
        if let Some(prev) = self.models.remove(&record.model_id) {
            self.by_digest.remove(&prev.digest);
            let mut history = prev.record.modifications;
            history.extend(record.modifications);
            history.push(ModificationRecord {
                at: now,
                previous_digest: Some(prev.digest),
                note: format!("superseded record registered at {}", prev.registered_at.to_rfc3339()),
            });
            record.modifications = history;
        }
        self.by_digest.insert(digest, record.model_id.clone());
        let id = record.model_id.clone();
        self.models.insert(
            id.clone(),
            StoredAibom {
                record,
                digest,
                registered_at: now,
                last_check: None,
                last_checked_at: None,
            },
        );
        Ok(&self.models[&id])
    }

    /// Hashes the artifact, compares it with the stored digest and records
    /// the verdict against the model.
    pub fn verify_model_integrity(
        &mut self,
        model_id: &str,
        artifact: impl Read,
        now: DateTime<Utc>,
    ) -> Result<IntegrityVerdict, ProvenanceError> {
        let stored = self.models.get(model_id).map(|m| m.digest);
        let verdict = integrity_verdict(stored.as_ref(), artifact)?;
        self.record_verdict(model_id, verdict, now);
        Ok(verdict)
    }

    /// As `verify_model_integrity`, for an artifact already hashed with
    /// `digest_stream`.
    pub fn verify_model_digest(&mut self, model_id: &str, artifact: &Digest32, now: DateTime<Utc>) -> IntegrityVerdict {
        let verdict = match self.models.get(model_id) {
            None => IntegrityVerdict::UnknownModel,
            Some(m) if m.digest == *artifact => IntegrityVerdict::Match,
            Some(_) => IntegrityVerdict::Mismatch,
        };
        self.record_verdict(model_id, verdict, now);
        verdict
    }

    fn record_verdict(&mut self, model_id: &str, verdict: IntegrityVerdict, now: DateTime<Utc>) {
        if let Some(m) = self.models.get_mut(model_id) {
            m.last_check = Some(verdict);
            m.last_checked_at = Some(now);
        }
    }

    /// Agents must reference a registered AIBOM whose last integrity check
    /// matched. Other identity kinds pass.
    pub fn deployment_gate(&self, kind: IdentityKind, aibom_ref: Option<&str>) -> GateOutcome {
        if kind != IdentityKind::Agent {
            return GateOutcome::Pass;
        }
        let Some(r) = aibom_ref else {
            return GateOutcome::Fail(vec![GateFailure::NoAibom]);
        };
        let Some(m) = self.resolve_ref(r) else {
            return GateOutcome::Fail(vec![GateFailure::UnknownAibom]);
        };
        let mut reasons = Vec::new();
        match m.last_check {
            Some(IntegrityVerdict::Match) => {}
            Some(_) => reasons.push(GateFailure::Integrity),
            None => reasons.push(GateFailure::NotVerified),
        }
        if m.record.gpai && m.record.gpai_doc_ref.is_none() {
            reasons.push(GateFailure::GpaiDocumentation);
        }
        if reasons.is_empty() {
            GateOutcome::Pass
        } else {
            GateOutcome::Fail(reasons)
        }
    }
}
