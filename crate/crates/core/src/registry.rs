//! The identity registry: inventory of every non-human identity with its
//! owner, purpose, grants and lifecycle state.
//!
//! Lifecycle transitions follow a fixed table:
//!
//! ```text
//! Requested --approve--> Approved --activate--> Active
//! Active --suspend--> Suspended --resume--> Active
//! Active | Suspended --decommission--> Decommissioned (terminal)
//! ```
//!
//! An identity may only be `Active` while it has an owner. Releasing the owner
//! of an active identity suspends it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{canonical_json_of, Digest32, FieldWriter};
use crate::governor::TaskSpec;
use crate::regulatory::JurisdictionTier;
use crate::scope::{ActionVerb, DataClass, ResourcePattern, Scope, ScopeItem};
use crate::uri::{UriError, WorkloadUri};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityKind {
    Agent,
    ServiceAccount,
    ApiToken,
    Workflow,
    Device,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleState {
    Requested,
    Approved,
    Active,
    Suspended,
    Decommissioned,
}

impl fmt::Display for LifecycleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LifecycleState::Requested => "requested",
            LifecycleState::Approved => "approved",
            LifecycleState::Active => "active",
            LifecycleState::Suspended => "suspended",
            LifecycleState::Decommissioned => "decommissioned",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleEvent {
    Approve,
    Activate,
    Suspend,
    Resume,
    Decommission,
}

impl LifecycleState {
    /// The transition table. `None` means the event is illegal in this state.
    pub fn apply(self, event: LifecycleEvent) -> Option<LifecycleState> {
        use LifecycleEvent as E;
        use LifecycleState as S;
        match (self, event) {
            (S::Requested, E::Approve) => Some(S::Approved),
            (S::Approved, E::Activate) => Some(S::Active),
            (S::Active, E::Suspend) => Some(S::Suspended),
            (S::Suspended, E::Resume) => Some(S::Active),
            (S::Active | S::Suspended, E::Decommission) => Some(S::Decommissioned),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lifecycle {
    pub state: LifecycleState,
    pub decommissioned_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccountabilityLevel {
    Individual,
    TeamLead,
    Executive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnerRef {
    pub owner_id: String,
    pub display_name: String,
    pub contact: String,
    pub accountability_level: AccountabilityLevel,
}

impl OwnerRef {
    pub fn new(owner_id: impl Into<String>, display_name: impl Into<String>) -> Self {
        let owner_id = owner_id.into();
        Self {
            contact: format!("{owner_id}@example.invalid"),
            owner_id,
            display_name: display_name.into(),
            accountability_level: AccountabilityLevel::Individual,
        }
    }
}

/// An entitlement on one system. Non-standing grants are eligibility for JIT
/// issuance only; `standing` grants are held at rest and need a waiver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessGrant {
    pub system: String,
    pub resource: ResourcePattern,
    pub actions: BTreeSet<ActionVerb>,
    #[serde(default)]
    pub admin: bool,
    #[serde(default)]
    pub standing: bool,
    #[serde(default)]
    pub waiver_id: Option<String>,
    /// Highest data class reachable through this grant.
    #[serde(default)]
    pub data_class: DataClass,
}

impl AccessGrant {
    pub fn jit(system: impl Into<String>, resource: ResourcePattern, actions: impl IntoIterator<Item = ActionVerb>) -> Self {
        Self {
            system: system.into(),
            resource,
            actions: actions.into_iter().collect(),
            admin: false,
            standing: false,
            waiver_id: None,
            data_class: DataClass::Internal,
        }
    }

    pub fn scope(&self) -> Scope {
        self.actions
            .iter()
            .map(|a| ScopeItem::new(self.system.clone(), self.resource.clone(), *a))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityFlag {
    Shadow,
    PamAdjacent,
    ForeignExposed,
}

/// A discovery-scan hit that referred to this identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoverySighting {
    pub source: String,
    pub discovered_locator: String,
    pub digest: Digest32,
    pub seen_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentIdentity {
    pub id: WorkloadUri,
    pub kind: IdentityKind,
    pub purpose: String,
    pub owner: Option<OwnerRef>,
    pub provisioned_at: DateTime<Utc>,
    pub review_due: DateTime<Utc>,
    pub lifecycle: Lifecycle,
    pub autonomy: u8,
    pub grants: Vec<AccessGrant>,
    pub associated_systems: BTreeSet<String>,
    pub flags: BTreeSet<IdentityFlag>,
    pub jurisdiction_tier: JurisdictionTier,
    pub aibom_ref: Option<String>,
    #[serde(default)]
    pub approved_by: Option<String>,
    #[serde(default)]
    pub discovery: Vec<DiscoverySighting>,
    #[serde(default)]
    pub migrations: Vec<String>,
}

impl AgentIdentity {
    pub fn state(&self) -> LifecycleState {
        self.lifecycle.state
    }

    pub fn is_active(&self) -> bool {
        self.lifecycle.state == LifecycleState::Active
    }

    pub fn owner_id(&self) -> Option<&str> {
        self.owner.as_ref().map(|o| o.owner_id.as_str())
    }

    pub fn has_flag(&self, flag: IdentityFlag) -> bool {
        self.flags.contains(&flag)
    }

    /// Flagged by the threat overlay (PAM-adjacent or foreign-exposed).
    pub fn threat_flagged(&self) -> bool {
        self.has_flag(IdentityFlag::PamAdjacent) || self.has_flag(IdentityFlag::ForeignExposed)
    }

    /// Union of every grant's scope, standing or not.
    pub fn grant_scope(&self) -> Scope {
        let mut scope = Scope::new();
        for g in &self.grants {
            scope.extend(&g.scope());
        }
        scope
    }
}

/// Provisioning request for [`Registry::register`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentitySpec {
    pub id: WorkloadUri,
    pub kind: IdentityKind,
    pub purpose: String,
    pub owner: Option<OwnerRef>,
    #[serde(default)]
    pub grants: Vec<AccessGrant>,
    #[serde(default)]
    pub associated_systems: BTreeSet<String>,
    #[serde(default = "default_tier")]
    pub jurisdiction_tier: JurisdictionTier,
    #[serde(default)]
    pub aibom_ref: Option<String>,
    #[serde(default = "default_autonomy")]
    pub autonomy: u8,
}

fn default_tier() -> JurisdictionTier {
    JurisdictionTier::Single
}

fn default_autonomy() -> u8 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificationVerdict {
    Recertified,
    RevokeRecommended,
}

/// Output of the automated behavioral review that accompanies an owner's
/// attestation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehavioralSummary {
    pub decisions: u64,
    pub escalations: u64,
    pub confirmed_violations: u64,
    pub deviations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificationRecord {
    pub identity: WorkloadUri,
    pub certified_at: DateTime<Utc>,
    pub certifier: String,
    pub behavioral_summary_digest: Digest32,
    pub verdict: CertificationVerdict,
    pub review_due: DateTime<Utc>,
}

/// One line of a discovery scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub source: String,
    pub discovered_locator: String,
    #[serde(default)]
    pub kind_hint: Option<IdentityKind>,
}

impl ScanRecord {
    /// Idempotency key for re-imports.
    pub fn digest(&self) -> Digest32 {
        let mut w = FieldWriter::new();
        w.str(&self.source).str(&self.discovered_locator);
        Digest32::of(&w.finish())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImportOutcome {
    /// A new shadow identity was created.
    Created,
    /// The record had been imported before; nothing changed.
    AlreadyImported,
    /// The locator named a registered identity; the sighting was attached.
    SightingAdded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct PendingTransfer {
    new_owner: OwnerRef,
    token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("identity has no designated owner")]
    MissingOwner,
    #[error("purpose must not be empty")]
    EmptyPurpose,
    #[error("identity {0} already exists")]
    DuplicateId(WorkloadUri),
    #[error("unknown identity {0}")]
    UnknownIdentity(WorkloadUri),
    #[error("illegal transition: {event:?} from {from}")]
    IllegalTransition { from: LifecycleState, event: LifecycleEvent },
    #[error("only the current owner may certify")]
    NotOwner,
    #[error("identity is not active")]
    NotActive,
    #[error("standing grant on `{0}` has no waiver")]
    StandingWithoutWaiver(String),
    #[error("autonomy level {0} outside 1..=4")]
    InvalidAutonomy(u8),
    #[error("no pending ownership transfer for {0}")]
    NoPendingTransfer(WorkloadUri),
    #[error("ownership transfer token does not match")]
    BadTransferToken,
    #[error("identity {0} is decommissioned")]
    Decommissioned(WorkloadUri),
    #[error("owner id must not be empty")]
    EmptyOwnerId,
    #[error("task {0} already registered")]
    DuplicateTask(String),
    #[error("task spec declares no tools")]
    EmptyTaskScope,
    #[error(transparent)]
    Uri(#[from] UriError),
    #[error("line {line}: {reason}")]
    Import { line: usize, reason: String },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Registry {
    identities: BTreeMap<WorkloadUri, AgentIdentity>,
    discovery_index: HashMap<String, WorkloadUri>,
    transfers: HashMap<WorkloadUri, PendingTransfer>,
    tasks: BTreeMap<String, TaskSpec>,
}

fn check_owner(owner: &OwnerRef) -> Result<(), RegistryError> {
    if owner.owner_id.trim().is_empty() {
        Err(RegistryError::EmptyOwnerId)
    } else {
        Ok(())
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    pub fn get(&self, id: &WorkloadUri) -> Option<&AgentIdentity> {
        self.identities.get(id)
    }

    pub fn require(&self, id: &WorkloadUri) -> Result<&AgentIdentity, RegistryError> {
        self.identities
            .get(id)
            .ok_or_else(|| RegistryError::UnknownIdentity(id.clone()))
    }

    fn require_mut(&mut self, id: &WorkloadUri) -> Result<&mut AgentIdentity, RegistryError> {
        self.identities
            .get_mut(id)
            .ok_or_else(|| RegistryError::UnknownIdentity(id.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &AgentIdentity> {
        self.identities.values()
    }

    /// Validates a provisioning request without mutating anything.
    pub fn validate_spec(&self, spec: &IdentitySpec) -> Result<(), RegistryError> {
        if spec.purpose.trim().is_empty() {
            return Err(RegistryError::EmptyPurpose);
        }
        let owner = spec.owner.as_ref().ok_or(RegistryError::MissingOwner)?;
        check_owner(owner)?;
        if !(1..=4).contains(&spec.autonomy) {
            return Err(RegistryError::InvalidAutonomy(spec.autonomy));
        }
        if let Some(g) = spec.grants.iter().find(|g| g.standing && g.waiver_id.is_none()) {
            return Err(RegistryError::StandingWithoutWaiver(g.system.clone()));
        }
        if self.identities.contains_key(&spec.id) {
            return Err(RegistryError::DuplicateId(spec.id.clone()));
        }
        Ok(())
    }

    /// Records a provisioning request in state `Requested`.
    pub fn register(
        &mut self,
        spec: IdentitySpec,
        approver: &OwnerRef,
        now: DateTime<Utc>,
        cadence: Duration,
    ) -> Result<&AgentIdentity, RegistryError> {
        self.validate_spec(&spec)?;
        check_owner(approver)?;
        let mut associated = spec.associated_systems;
        associated.extend(spec.grants.iter().map(|g| g.system.clone()));
        let identity = AgentIdentity {
            id: spec.id.clone(),
            kind: spec.kind,
            purpose: spec.purpose,
            owner: spec.owner,
            provisioned_at: now,
            review_due: now + cadence,
            lifecycle: Lifecycle {
                state: LifecycleState::Requested,
                decommissioned_at: None,
            },
            autonomy: spec.autonomy,
            grants: spec.grants,
            associated_systems: associated,
            flags: BTreeSet::new(),
            jurisdiction_tier: spec.jurisdiction_tier,
            aibom_ref: spec.aibom_ref,
            approved_by: Some(approver.owner_id.clone()),
            discovery: Vec::new(),
            migrations: Vec::new(),
        };
        Ok(self.identities.entry(spec.id).or_insert(identity))
    }

    pub fn transition(
        &mut self,
        id: &WorkloadUri,
        event: LifecycleEvent,
        now: DateTime<Utc>,
    ) -> Result<(LifecycleState, LifecycleState), RegistryError> {
        let identity = self.require_mut(id)?;
        let from = identity.lifecycle.state;
        let to = from
            .apply(event)
            .ok_or(RegistryError::IllegalTransition { from, event })?;
        if to == LifecycleState::Active && identity.owner.is_none() {
            return Err(RegistryError::MissingOwner);
        }
        identity.lifecycle.state = to;
        if to == LifecycleState::Decommissioned {
            identity.lifecycle.decommissioned_at = Some(now);
        }
        Ok((from, to))
    }

    /// Non-decommissioned identities that are ownerless or overdue for review.
    pub fn detect_orphans(&self, now: DateTime<Utc>) -> Vec<WorkloadUri> {
        self.identities
            .values()
            .filter(|i| i.lifecycle.state != LifecycleState::Decommissioned)
            .filter(|i| i.owner.is_none() || i.review_due < now)
            .map(|i| i.id.clone())
            .collect()
    }

    pub fn certify(
        &mut self,
        id: &WorkloadUri,
        summary: &BehavioralSummary,
        attesting_owner: &str,
        now: DateTime<Utc>,
        cadence: Duration,
    ) -> Result<CertificationRecord, RegistryError> {
        let identity = self.require_mut(id)?;
        if identity.owner_id() != Some(attesting_owner) {
            return Err(RegistryError::NotOwner);
        }
        if !identity.is_active() {
            return Err(RegistryError::NotActive);
        }
        let verdict = if summary.confirmed_violations == 0 {
            CertificationVerdict::Recertified
        } else {
            CertificationVerdict::RevokeRecommended
        };
        if verdict == CertificationVerdict::Recertified {
            identity.review_due = identity.review_due.max(now) + cadence;
        }
        let digest = Digest32::of(
            canonical_json_of(summary)
                .expect("summary serializes")
                .as_bytes(),
        );
        Ok(CertificationRecord {
            identity: id.clone(),
            certified_at: now,
            certifier: attesting_owner.to_string(),
            behavioral_summary_digest: digest,
            verdict,
            review_due: identity.review_due,
        })
    }

    /// Imports discovery-scan hits as ownerless, suspended shadow identities.
    pub fn import_discovered(
        &mut self,
        records: &[ScanRecord],
        trust_domain: &str,
        now: DateTime<Utc>,
    ) -> Result<Vec<(WorkloadUri, ImportOutcome)>, RegistryError> {
        let mut out = Vec::with_capacity(records.len());
        for record in records {
            let digest = record.digest();
            let key = digest.to_hex();
            if let Some(existing) = self.discovery_index.get(&key) {
                out.push((existing.clone(), ImportOutcome::AlreadyImported));
                continue;
            }
            let sighting = DiscoverySighting {
                source: record.source.clone(),
                discovered_locator: record.discovered_locator.clone(),
                digest,
                seen_at: now,
            };
            if let Ok(uri) = WorkloadUri::parse(&record.discovered_locator) {
                if let Some(identity) = self.identities.get_mut(&uri) {
                    identity.discovery.push(sighting);
                    self.discovery_index.insert(key, uri.clone());
                    out.push((uri, ImportOutcome::SightingAdded));
                    continue;
                }
            }
            let id = WorkloadUri::new(trust_domain, &format!("shadow/{}", &key[..16]))?;
            let identity = AgentIdentity {
                id: id.clone(),
                kind: record.kind_hint.unwrap_or(IdentityKind::ServiceAccount),
                purpose: format!("discovered by {} at {}", record.source, record.discovered_locator),
                owner: None,
                provisioned_at: now,
                review_due: now,
                lifecycle: Lifecycle {
                    state: LifecycleState::Suspended,
                    decommissioned_at: None,
                },
                autonomy: 1,
                grants: Vec::new(),
                associated_systems: BTreeSet::new(),
                flags: BTreeSet::from([IdentityFlag::Shadow]),
                jurisdiction_tier: JurisdictionTier::Single,
                aibom_ref: None,
                approved_by: None,
                discovery: vec![sighting],
                migrations: Vec::new(),
            };
            self.identities.insert(id.clone(), identity);
            self.discovery_index.insert(key, id.clone());
            out.push((id, ImportOutcome::Created));
        }
        Ok(out)
    }

    /// Removes the owner (e.g. the owner left the organization). Returns
    /// whether the identity had to be suspended as a consequence.
    pub fn release_owner(&mut self, id: &WorkloadUri) -> Result<bool, RegistryError> {
        let identity = self.require_mut(id)?;
        identity.owner = None;
        if identity.is_active() {
            identity.lifecycle.state = LifecycleState::Suspended;
            return Ok(true);
        }
        Ok(false)
    }

    /// Starts an ownership transfer; the returned token must be presented by
    /// the new owner to [`Registry::accept_transfer`].
    pub fn offer_transfer(
        &mut self,
        id: &WorkloadUri,
        new_owner: OwnerRef,
        nonce: u64,
    ) -> Result<String, RegistryError> {
        check_owner(&new_owner)?;
        let identity = self.require(id)?;
        if identity.state() == LifecycleState::Decommissioned {
            return Err(RegistryError::Decommissioned(id.clone()));
        }
        let mut w = FieldWriter::new();
        w.str(id.as_str()).str(&new_owner.owner_id).u64(nonce);
        let token = Digest32::of(&w.finish()).to_hex()[..32].to_string();
        self.transfers.insert(
            id.clone(),
            PendingTransfer {
                new_owner,
                token: token.clone(),
            },
        );
        Ok(token)
    }

    /// Completes a transfer. Returns `(previous owner, new owner)`.
    pub fn accept_transfer(
        &mut self,
        id: &WorkloadUri,
        token: &str,
    ) -> Result<(Option<OwnerRef>, OwnerRef), RegistryError> {
        let pending = self
            .transfers
            .get(id)
            .ok_or_else(|| RegistryError::NoPendingTransfer(id.clone()))?;
        if pending.token != token {
            return Err(RegistryError::BadTransferToken);
        }
        let pending = self.transfers.remove(id).expect("checked above");
        let identity = self.require_mut(id)?;
        let previous = identity.owner.replace(pending.new_owner.clone());
        Ok((previous, pending.new_owner))
    }

    /// Migrations are metadata-only: the note is appended, state is untouched.
    pub fn record_migration(&mut self, id: &WorkloadUri, note: &str) -> Result<(), RegistryError> {
        self.require_mut(id)?.migrations.push(note.to_string());
        Ok(())
    }

    pub fn set_autonomy(&mut self, id: &WorkloadUri, level: u8) -> Result<(), RegistryError> {
        if !(1..=4).contains(&level) {
            return Err(RegistryError::InvalidAutonomy(level));
        }
        self.require_mut(id)?.autonomy = level;
        Ok(())
    }

    /// Adds a flag; returns whether it was newly added. The shadow flag is
    /// reserved for discovery imports.
    pub fn add_flag(&mut self, id: &WorkloadUri, flag: IdentityFlag) -> Result<bool, RegistryError> {
        debug_assert_ne!(flag, IdentityFlag::Shadow);
        Ok(self.require_mut(id)?.flags.insert(flag))
    }

    pub fn register_task(&mut self, spec: TaskSpec) -> Result<(), RegistryError> {
        self.require(&spec.identity)?;
        if spec.scope.is_empty() {
            return Err(RegistryError::EmptyTaskScope);
        }
        if self.tasks.contains_key(&spec.task_id) {
            return Err(RegistryError::DuplicateTask(spec.task_id));
        }
        self.tasks.insert(spec.task_id.clone(), spec);
        Ok(())
    }

    pub fn task(&self, task_id: &str) -> Option<&TaskSpec> {
        self.tasks.get(task_id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskSpec> {
        self.tasks.values()
    }

    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for identity in self.identities.values() {
            out.push_str(&serde_json::to_string(identity).expect("identity serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses an export produced by [`Registry::export_jsonl`].
    pub fn parse_jsonl(text: &str) -> Result<Vec<AgentIdentity>, RegistryError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(line, l)| {
                serde_json::from_str(l).map_err(|e| RegistryError::Import {
                    line: line + 1,
                    reason: e.to_string(),
                })
            })
            .collect()
    }

    /// Loads identities from an export, preserving their recorded state.
    /// Fails on duplicate ids or records violating the active-has-owner rule.
    pub fn import_jsonl(text: &str) -> Result<Self, RegistryError> {
        let mut registry = Registry::new();
        for (idx, identity) in Self::parse_jsonl(text)?.into_iter().enumerate() {
            if identity.is_active() && identity.owner.is_none() {
                return Err(RegistryError::Import {
                    line: idx + 1,
                    reason: "active identity without owner".into(),
                });
            }
            if registry.identities.contains_key(&identity.id) {
                return Err(RegistryError::DuplicateId(identity.id));
            }
            for s in &identity.discovery {
                registry.discovery_index.insert(s.digest.to_hex(), identity.id.clone());
            }
            registry.identities.insert(identity.id.clone(), identity);
        }
        Ok(registry)
    }
}
