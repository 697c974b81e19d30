//! Signed agent-to-agent delegation edges.

use chrono::{DateTime, Duration, Utc};
use ed25519_dalek::{Signature, Signer, Verifier};
use serde::{Deserialize, Serialize};

use super::{b64, CredentialAuthority, CredentialError};
use crate::canonical::{canonical_json_of, FieldWriter};
use crate::scope::Scope;
use crate::uri::WorkloadUri;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelegationEdge {
    pub edge_id: String,
    pub delegator: WorkloadUri,
    pub delegatee: WorkloadUri,
    pub task_id: String,
    pub scope: Scope,
    pub issued_at: DateTime<Utc>,
    pub ttl_seconds: u64,
    /// Id of the delegator key that signed the edge.
    pub kid: String,
    #[serde(with = "b64::url")]
    pub signature: Vec<u8>,
    #[serde(default)]
    pub revoked: bool,
}

impl DelegationEdge {
    pub fn signed_body(&self) -> Vec<u8> {
        let mut w = FieldWriter::new();
        w.str(&self.edge_id)
            .str(&self.kid)
            .str(self.delegator.as_str())
            .str(self.delegatee.as_str())
            .str(&self.task_id)
            .str(&canonical_json_of(&self.scope).expect("scope serializes"))
            .i64(self.issued_at.timestamp())
            .u64(self.ttl_seconds);
        w.finish()
    }

    pub fn expires_at(&self) -> DateTime<Utc> {
        self.issued_at + Duration::seconds(self.ttl_seconds as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "index", rename_all = "kebab-case")]
pub enum ChainVerdict {
    Valid,
    /// Edge at this index fails signature verification or does not
    /// continue from the previous edge.
    BrokenSignature(usize),
    ScopeWidening(usize),
    DepthExceeded,
    ExpiredLink(usize),
}

impl ChainVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChainVerdict::Valid)
    }
}

impl CredentialAuthority {
    /// Scope a workload can exercise for a task: its live credentials plus
    /// live edges delegated to it.
    pub fn effective_scope(&self, subject: &WorkloadUri, task_id: &str, now: DateTime<Utc>) -> Scope {
        let mut scope = Scope::new();
        for c in self.live_credentials(now).filter(|c| &c.subject == subject && c.task_id == task_id) {
            scope.extend(&c.scope);
        }
        for e in self.edges.values() {
            if &e.delegatee == subject && e.task_id == task_id && !e.revoked && now < e.expires_at() {
                scope.extend(&e.scope);
            }
        }
        scope
    }

    pub fn record_delegation(
        &mut self,
        delegator: &WorkloadUri,
        delegatee: &WorkloadUri,
        task_id: &str,
        scope: Scope,
        now: DateTime<Utc>,
    ) -> Result<DelegationEdge, CredentialError> {
        let holds_live = self
            .live_credentials(now)
            .any(|c| &c.subject == delegator && c.task_id == task_id);
        let inbound = self
            .edges
            .values()
            .any(|e| &e.delegatee == delegator && e.task_id == task_id && !e.revoked && now < e.expires_at());
        if !holds_live && !inbound {
            return Err(CredentialError::NoLiveCredential(delegator.clone(), task_id.to_string()));
        }
        if scope.is_empty() || !self.effective_scope(delegator, task_id, now).covers(&scope) {
            return Err(CredentialError::ScopeWidening);
        }
        let key = self
            .workload_secret(delegator)
            .ok_or_else(|| CredentialError::NoWorkloadKey(delegator.clone()))?
            .clone();
        let kid = self.key_record(delegator).expect("secret implies record").kid.clone();
        self.edges_recorded += 1;
        let mut edge = DelegationEdge {
            edge_id: format!("edge-{:010}", self.edges_recorded),
            delegator: delegator.clone(),
            delegatee: delegatee.clone(),
            task_id: task_id.to_string(),
            scope,
            issued_at: DateTime::from_timestamp(now.timestamp(), 0).expect("in range"),
            ttl_seconds: self.config.default_ttl_seconds,
            kid,
            signature: Vec::new(),
            revoked: false,
        };
        edge.signature = key.sign(&edge.signed_body()).to_bytes().to_vec();
        self.edges.insert(edge.edge_id.clone(), edge.clone());
        Ok(edge)
    }

    pub fn edges(&self) -> impl Iterator<Item = &DelegationEdge> {
        self.edges.values()
    }

    /// Delegation graph export, one edge per line.
    pub fn export_edges_jsonl(&self) -> String {
        self.edges
            .values()
            .map(|e| canonical_json_of(e).expect("edge serializes") + "\n")
            .collect()
    }

    fn edge_signature_ok(&self, edge: &DelegationEdge) -> bool {
        let Some(record) = self.key_record(&edge.delegator) else {
            return false;
        };
        let Some(key) = record.key_for(&edge.kid, edge.issued_at) else {
            return false;
        };
        let Ok(sig) = Signature::from_slice(&edge.signature) else {
            return false;
        };
        key.verify(&edge.signed_body(), &sig).is_ok()
    }

    /// Verifies an ordered chain. Each edge is checked for signature and
    /// continuity, then liveness, then narrowing against its predecessor.
    pub fn verify_delegation_chain(&self, chain: &[DelegationEdge], now: DateTime<Utc>) -> ChainVerdict {
        if chain.len() > self.config.max_delegation_depth {
            return ChainVerdict::DepthExceeded;
        }
        for (i, edge) in chain.iter().enumerate() {
            let prev = i.checked_sub(1).map(|p| &chain[p]);
            let continues = prev.is_none_or(|p| p.delegatee == edge.delegator && p.task_id == edge.task_id);
            if !continues || !self.edge_signature_ok(edge) {
                return ChainVerdict::BrokenSignature(i);
            }
            let stored_revoked = self.edges.get(&edge.edge_id).is_some_and(|e| e.revoked);
            if edge.revoked || stored_revoked || now >= edge.expires_at() {
                return ChainVerdict::ExpiredLink(i);
            }
            if let Some(p) = prev {
                if !p.scope.covers(&edge.scope) {
                    return ChainVerdict::ScopeWidening(i);
                }
            }
        }
        ChainVerdict::Valid
    }
}
