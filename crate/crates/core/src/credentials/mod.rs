//! Credential authority: signing keys, ephemeral task-scoped credentials,
//! delegation edges, the static-credential inventory and toolset
//! measurement.
//!
//! Credentials are Ed25519-signed over a length-prefixed body and travel as
//! `base64url(body) "." base64url(signature)`. Nothing is issued without a
//! permissive access decision for the same identity and task, and every
//! credential for a task is revoked when the task completes.

use std::collections::BTreeMap;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use chrono::{DateTime, Duration, Utc};
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{canonical_json_of, Digest32, FieldReader, FieldWriter};
use crate::governor::{Decision, RiskAssessment};
use crate::registry::AgentIdentity;
use crate::scope::{ActionVerb, Scope, ScopeItem};
use crate::uri::WorkloadUri;

mod b64;
pub mod delegation;
pub mod inventory;
pub mod toolset;

pub use delegation::{ChainVerdict, DelegationEdge};
pub use inventory::{StaticCredential, StandingViolation, Waiver};
pub use toolset::{ToolDescriptor, ToolsetMeasurement};

pub const ALGORITHM: &str = "ed25519";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuthorityConfig {
    pub default_ttl_seconds: u64,
    pub max_ttl_seconds: u64,
    pub max_delegation_depth: usize,
    pub waiver_max_days: i64,
    /// Static credentials rotated within this many days count as in policy.
    pub rotation_policy_days: i64,
}

impl Default for AuthorityConfig {
    fn default() -> Self {
        Self {
            default_ttl_seconds: 300,
            max_ttl_seconds: 300,
            max_delegation_depth: 8,
            waiver_max_days: 180,
            rotation_policy_days: 90,
        }
    }
}

/// Key id: first 16 hex characters of the SHA3-256 of the public key.
pub fn key_id(key: &VerifyingKey) -> String {
    Digest32::of(key.as_bytes()).to_hex()[..16].to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetiredKey {
    pub kid: String,
    #[serde(with = "b64::standard")]
    pub public_key: Vec<u8>,
    pub retired_at: DateTime<Utc>,
}

/// A workload's registered public key plus keys it rotated away from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyRecord {
    pub uri: WorkloadUri,
    pub kid: String,
    #[serde(with = "b64::standard")]
    pub public_key: Vec<u8>,
    pub algorithm: String,
    pub rotated_at: DateTime<Utc>,
    #[serde(default)]
    pub retired: Vec<RetiredKey>,
}

impl KeyRecord {
    /// Looks up a verifying key by id. Retired keys only verify material
    /// produced before their retirement.
    fn key_for(&self, kid: &str, signed_at: DateTime<Utc>) -> Option<VerifyingKey> {
        let raw = if self.kid == kid {
            &self.public_key
        } else {
            let r = self.retired.iter().find(|r| r.kid == kid && signed_at <= r.retired_at)?;
            &r.public_key
        };
        VerifyingKey::from_bytes(raw.as_slice().try_into().ok()?).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub credential_id: String,
    pub kid: String,
    pub subject: WorkloadUri,
    pub task_id: String,
    pub scope: Scope,
    pub issued_at: DateTime<Utc>,
    pub ttl_seconds: u64,
    #[serde(with = "b64::url")]
    pub signature: Vec<u8>,
    #[serde(default)]
    pub revoked: bool,
}

impl Credential {
    pub fn expires_at(&self) -> DateTime<Utc> {
        self.issued_at + Duration::seconds(self.ttl_seconds as i64)
    }

    pub fn is_expired(&self, now: DateTime<Utc>) -> bool {
        now >= self.expires_at()
    }

    pub fn is_live(&self, now: DateTime<Utc>) -> bool {
        !self.revoked && !self.is_expired(now)
    }

    fn body(&self) -> Vec<u8> {
        encode_body(
            &self.credential_id,
            &self.kid,
            &self.subject,
            &self.task_id,
            &self.scope,
            self.issued_at,
            self.ttl_seconds,
        )
    }

    pub fn token(&self) -> String {
        format!("{}.{}", URL_SAFE_NO_PAD.encode(self.body()), URL_SAFE_NO_PAD.encode(&self.signature))
    }
}

fn encode_body(
    id: &str,
    kid: &str,
    subject: &WorkloadUri,
    task: &str,
    scope: &Scope,
    issued_at: DateTime<Utc>,
    ttl: u64,
) -> Vec<u8> {
    let mut w = FieldWriter::new();
    w.str(id)
        .str(kid)
        .str(subject.as_str())
        .str(task)
        .str(&canonical_json_of(scope).expect("scope serializes"))
        .i64(issued_at.timestamp())
        .u64(ttl);
    w.finish()
}

struct ParsedToken {
    body: Vec<u8>,
    signature: Signature,
    credential_id: String,
    kid: String,
    scope: Scope,
    issued_at: DateTime<Utc>,
    ttl: u64,
}

fn parse_token(token: &str) -> Option<ParsedToken> {
    let (body_b64, sig_b64) = token.split_once('.')?;
    let body = URL_SAFE_NO_PAD.decode(body_b64).ok()?;
    let sig = URL_SAFE_NO_PAD.decode(sig_b64).ok()?;
    let signature = Signature::from_slice(&sig).ok()?;
    let mut r = FieldReader::new(&body);
    let credential_id = r.str().ok()?.to_string();
    let kid = r.str().ok()?.to_string();
    WorkloadUri::parse(r.str().ok()?).ok()?;
    r.str().ok()?;
    let scope: Scope = serde_json::from_str(r.str().ok()?).ok()?;
    let issued_at = DateTime::from_timestamp(r.i64().ok()?, 0)?;
    let ttl = r.u64().ok()?;
    r.finish().ok()?;
    Some(ParsedToken {
        body,
        signature,
        credential_id,
        kid,
        scope,
        issued_at,
        ttl,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CredentialVerdict {
    Valid,
    Expired,
    Revoked,
    OutOfScope,
    BadSignature,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CredentialError {
    #[error("identity {0} is not active")]
    IdentityNotActive(WorkloadUri),
    #[error("access decision {0} does not permit issuance")]
    DecisionNotPermissive(Decision),
    #[error("access decision was made for {identity} task {task}, not this request")]
    DecisionMismatch { identity: WorkloadUri, task: String },
    #[error("requested scope is empty")]
    EmptyScope,
    #[error("requested scope exceeds grants and the approved request")]
    ScopeExceedsPolicy,
    #[error("ttl {ttl}s exceeds maximum {max}s")]
    TtlExceedsMax { ttl: u64, max: u64 },
    #[error("{0} holds no live credential for task {1}")]
    NoLiveCredential(WorkloadUri, String),
    #[error("delegated scope is wider than the delegator's")]
    ScopeWidening,
    #[error("no workload key enrolled for {0}")]
    NoWorkloadKey(WorkloadUri),
    #[error("tool manifest is empty")]
    EmptyManifest,
    #[error("invalid waiver: {0}")]
    InvalidWaiver(String),
    #[error("credential {0} already in inventory")]
    DuplicateCredential(String),
    #[error("unknown credential {0}")]
    UnknownCredential(String),
}

#[derive(Debug, Clone)]
struct RetiredAuthorityKey {
    key: VerifyingKey,
    retired_at: DateTime<Utc>,
}

/// Issues and verifies credentials and holds workload keys.
#[derive(Debug, Clone)]
pub struct CredentialAuthority {
    config: AuthorityConfig,
    rng: ChaCha20Rng,
    signing: SigningKey,
    kid: String,
    retired: BTreeMap<String, RetiredAuthorityKey>,
    workload_keys: BTreeMap<WorkloadUri, KeyRecord>,
    workload_secrets: BTreeMap<WorkloadUri, SigningKey>,
    credentials: BTreeMap<String, Credential>,
    by_task: BTreeMap<String, Vec<String>>,
    issued: u64,
    pub(crate) edges: BTreeMap<String, DelegationEdge>,
    pub(crate) edges_recorded: u64,
    pub(crate) statics: BTreeMap<String, StaticCredential>,
    pub(crate) waivers: BTreeMap<String, Waiver>,
    pub(crate) measurements: BTreeMap<(WorkloadUri, String), toolset::Measured>,
}

fn fresh_key(rng: &mut ChaCha20Rng) -> SigningKey {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    SigningKey::from_bytes(&seed)
}

impl CredentialAuthority {
    /// Keys are drawn from a ChaCha20 stream seeded with `seed`, so an
    /// authority rebuilt from the same seed and command history holds the
    /// same keys.
    pub fn new(config: AuthorityConfig, seed: [u8; 32]) -> Self {
        let mut rng = ChaCha20Rng::from_seed(seed);
        let signing = fresh_key(&mut rng);
        let kid = key_id(&signing.verifying_key());
        Self {
            config,
            rng,
            signing,
            kid,
            retired: BTreeMap::new(),
            workload_keys: BTreeMap::new(),
            workload_secrets: BTreeMap::new(),
            credentials: BTreeMap::new(),
            by_task: BTreeMap::new(),
            issued: 0,
            edges: BTreeMap::new(),
            edges_recorded: 0,
            statics: BTreeMap::new(),
            waivers: BTreeMap::new(),
            measurements: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &AuthorityConfig {
        &self.config
    }

    pub fn authority_kid(&self) -> &str {
        &self.kid
    }

    pub fn authority_public_key(&self) -> VerifyingKey {
        self.signing.verifying_key()
    }

    /// Replaces the authority signing key. The old key keeps verifying
    /// credentials issued before the rotation.
    pub fn rotate_authority_key(&mut self, now: DateTime<Utc>) -> String {
        let max = Duration::seconds(self.config.max_ttl_seconds as i64);
        self.retired.retain(|_, r| now < r.retired_at + max);
        let old = std::mem::replace(&mut self.signing, fresh_key(&mut self.rng));
        self.retired.insert(
            self.kid.clone(),
            RetiredAuthorityKey {
                key: old.verifying_key(),
                retired_at: now,
            },
        );
        self.kid = key_id(&self.signing.verifying_key());
        self.kid.clone()
    }

    /// Generates (or rotates) the signing key for a workload.
    pub fn enroll_workload(&mut self, uri: &WorkloadUri, now: DateTime<Utc>) -> &KeyRecord {
        let key = fresh_key(&mut self.rng);
        let public = key.verifying_key();
        let kid = key_id(&public);
        let mut retired = Vec::new();
        if let Some(prev) = self.workload_keys.remove(uri) {
            retired = prev.retired;
            retired.push(RetiredKey {
                kid: prev.kid,
                public_key: prev.public_key,
                retired_at: now,
            });
        }
        self.workload_secrets.insert(uri.clone(), key);
        self.workload_keys.insert(
            uri.clone(),
            KeyRecord {
                uri: uri.clone(),
                kid,
                public_key: public.as_bytes().to_vec(),
                algorithm: ALGORITHM.to_string(),
                rotated_at: now,
                retired,
            },
        );
        &self.workload_keys[uri]
    }

    pub fn key_record(&self, uri: &WorkloadUri) -> Option<&KeyRecord> {
        self.workload_keys.get(uri)
    }

    pub fn key_records(&self) -> impl Iterator<Item = &KeyRecord> {
        self.workload_keys.values()
    }

    pub(crate) fn workload_secret(&self, uri: &WorkloadUri) -> Option<&SigningKey> {
        self.workload_secrets.get(uri)
    }

    /// Key registry export: one JSON document, raw public keys in base64.
    pub fn export_keys(&self) -> String {
        let records: Vec<&KeyRecord> = self.workload_keys.values().collect();
        serde_json::to_string_pretty(&records).expect("key records serialize")
    }

    pub fn issue_jit_credential(
        &mut self,
        identity: &AgentIdentity,
        task_id: &str,
        requested: Scope,
        assessment: &RiskAssessment,
        now: DateTime<Utc>,
    ) -> Result<Credential, CredentialError> {
        if !identity.is_active() {
            return Err(CredentialError::IdentityNotActive(identity.id.clone()));
        }
        if assessment.request.identity != identity.id || assessment.request.task_id != task_id {
            return Err(CredentialError::DecisionMismatch {
                identity: assessment.request.identity.clone(),
                task: assessment.request.task_id.clone(),
            });
        }
        if !assessment.decision.is_permissive() {
            return Err(CredentialError::DecisionNotPermissive(assessment.decision));
        }
        if requested.is_empty() {
            return Err(CredentialError::EmptyScope);
        }
        let mut allowed = identity.grant_scope();
        let req = &assessment.request;
        allowed.insert(ScopeItem::new(req.tool.clone(), req.resource.clone(), req.action));
        if !allowed.covers(&requested) {
            return Err(CredentialError::ScopeExceedsPolicy);
        }
        let ttl = self.config.default_ttl_seconds;
        if ttl > self.config.max_ttl_seconds {
            return Err(CredentialError::TtlExceedsMax {
                ttl,
                max: self.config.max_ttl_seconds,
            });
        }
        self.issued += 1;
        let issued_at = DateTime::from_timestamp(now.timestamp(), 0).expect("in range");
        let credential_id = format!("cred-{:010}", self.issued);
        let body = encode_body(&credential_id, &self.kid, &identity.id, task_id, &requested, issued_at, ttl);
        let signature = self.signing.sign(&body).to_bytes().to_vec();
        let cred = Credential {
            credential_id: credential_id.clone(),
            kid: self.kid.clone(),
            subject: identity.id.clone(),
            task_id: task_id.to_string(),
            scope: requested,
            issued_at,
            ttl_seconds: ttl,
            signature,
            revoked: false,
        };
        self.by_task.entry(task_id.to_string()).or_default().push(credential_id.clone());
        self.credentials.insert(credential_id, cred.clone());
        Ok(cred)
    }

    fn authority_key(&self, kid: &str, signed_at: DateTime<Utc>) -> Option<VerifyingKey> {
        if kid == self.kid {
            return Some(self.signing.verifying_key());
        }
        self.retired
            .get(kid)
            .filter(|r| signed_at <= r.retired_at)
            .map(|r| r.key)
    }

    /// Checks a presented token. Exactly one verdict applies, taken in the
    /// order bad-signature, revoked, expired, out-of-scope, valid.
    pub fn verify_credential(
        &self,
        token: &str,
        system: &str,
        resource: &str,
        action: ActionVerb,
        now: DateTime<Utc>,
    ) -> CredentialVerdict {
        let Some(t) = parse_token(token) else {
            return CredentialVerdict::BadSignature;
        };
        let Some(key) = self.authority_key(&t.kid, t.issued_at) else {
            return CredentialVerdict::BadSignature;
        };
        if key.verify(&t.body, &t.signature).is_err() {
            return CredentialVerdict::BadSignature;
        }
        // Unknown ids were not issued by this authority's history.
        match self.credentials.get(&t.credential_id) {
            None => return CredentialVerdict::BadSignature,
            Some(c) if c.revoked => return CredentialVerdict::Revoked,
            Some(_) => {}
        }
        if now >= t.issued_at + Duration::seconds(t.ttl as i64) {
            return CredentialVerdict::Expired;
        }
        if !t.scope.permits(system, resource, action) {
            return CredentialVerdict::OutOfScope;
        }
        CredentialVerdict::Valid
    }

    pub fn credential(&self, id: &str) -> Option<&Credential> {
        self.credentials.get(id)
    }

    pub fn credentials(&self) -> impl Iterator<Item = &Credential> {
        self.credentials.values()
    }

    pub fn live_credentials(&self, now: DateTime<Utc>) -> impl Iterator<Item = &Credential> {
        self.credentials.values().filter(move |c| c.is_live(now))
    }

    pub fn live_for(&self, subject: &WorkloadUri, now: DateTime<Utc>) -> Vec<&Credential> {
        self.live_credentials(now).filter(|c| &c.subject == subject).collect()
    }

    /// Revokes every unrevoked credential bound to the task and expires the
    /// task's delegation edges. Returns the number of credentials revoked.
    pub fn revoke_on_completion(&mut self, task_id: &str) -> usize {
        let mut n = 0;
        if let Some(ids) = self.by_task.get(task_id) {
            for id in ids {
                if let Some(c) = self.credentials.get_mut(id) {
                    if !c.revoked {
                        c.revoked = true;
                        n += 1;
                    }
                }
            }
        }
        for e in self.edges.values_mut().filter(|e| e.task_id == task_id) {
            e.revoked = true;
        }
        n
    }

    /// Revokes every credential held by `subject`; used on decommission.
    pub fn revoke_subject(&mut self, subject: &WorkloadUri) -> usize {
        let mut n = 0;
        for c in self.credentials.values_mut().filter(|c| &c.subject == subject && !c.revoked) {
            c.revoked = true;
            n += 1;
        }
        for e in self.edges.values_mut() {
            if &e.delegator == subject || &e.delegatee == subject {
                e.revoked = true;
            }
        }
        n
    }

    /// Tasks that still have unrevoked credentials.
    pub fn open_tasks(&self) -> Vec<String> {
        self.by_task
            .iter()
            .filter(|(_, ids)| ids.iter().any(|id| self.credentials.get(id).is_some_and(|c| !c.revoked)))
            .map(|(t, _)| t.clone())
            .collect()
    }
}
