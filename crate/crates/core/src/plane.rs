//! The control plane: every module behind one façade, with each write
//! recorded in the audit ledger.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Read;

use chrono::{DateTime, Duration, Utc};
use serde_json::{json, Value};
use thiserror::Error;

use crate::audit::{AuditError, AuditEvent, AuditLedger, ChainVerdict, EventKind, ReconstructQuery, Reconstruction};
use crate::canonical::Digest32;
use crate::config::{ConfigError, PlaneConfig};
use crate::credentials::{
    ChainVerdict as DelegationVerdict, Credential, CredentialAuthority, CredentialError, DelegationEdge, StandingViolation,
    StaticCredential, ToolDescriptor, ToolsetMeasurement, Waiver,
};
use crate::governor::{
    aggregate_privilege, build_baseline, classify, composite_score, dimension_scores, update_autonomy, AccessRequest,
    AlignmentInput, BehavioralBaseline, Decision, Escalation, EscalationQueue, ExecutionContext, GovernorError,
    IntentChecker, Modifier, Outcome, PrivilegeReport, ReferenceChecker, Resolution, ResolutionVerdict, RiskAssessment,
    TaskSpec,
};
use crate::metrics::{compute_metrics, MetricsReport, MetricsSnapshot, ProgramSettings};
use crate::provenance::{AibomRecord, GateFailure, IntegrityVerdict, ProvenanceError, ProvenanceStore};
use crate::registry::{
    AgentIdentity, BehavioralSummary, CertificationRecord, IdentityFlag, IdentitySpec, ImportOutcome,
    LifecycleEvent, LifecycleState, OwnerRef, Registry, RegistryError, ScanRecord,
};
use crate::regulatory::{ConflictEntry, ConflictRegistry, ConflictStatus, JurisdictionMatrix, RegulatoryError};
use crate::risk::{detect_intersections, IntersectionAlert, IntersectionSnapshot, RiskCatalog};
use crate::scope::Scope;
use crate::threat::{ExposureReport, ThreatError, ThreatStore};
use crate::uri::WorkloadUri;

#[derive(Debug, Error)]
pub enum PlaneError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Credential(#[from] CredentialError),
    #[error(transparent)]
    Governor(#[from] GovernorError),
    #[error(transparent)]
    Provenance(#[from] ProvenanceError),
    #[error(transparent)]
    Regulatory(#[from] RegulatoryError),
    #[error(transparent)]
    Threat(#[from] ThreatError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error("provenance gate failed: {0:?}")]
    ProvenanceGateFailed(Vec<GateFailure>),
    #[error("identity {0} is not active")]
    IdentityNotActive(WorkloadUri),
    #[error("unknown or expired assessment {0}")]
    UnknownAssessment(String),
}

pub type PlaneResult<T> = Result<T, PlaneError>;

/// Counters behind an identity's certification summary.
#[derive(Debug, Clone, Default)]
struct Stats {
    summary: BehavioralSummary,
    /// Outcomes since the last autonomy change, newest last.
    window: VecDeque<Outcome>,
}

pub struct ControlPlane {
    config: PlaneConfig,
    registry: Registry,
    authority: CredentialAuthority,
    ledger: AuditLedger,
    escalations: EscalationQueue,
    provenance: ProvenanceStore,
    matrix: JurisdictionMatrix,
    conflicts: ConflictRegistry,
    threats: ThreatStore,
    catalog: RiskCatalog,
    baselines: BTreeMap<WorkloadUri, BehavioralBaseline>,
    recent: BTreeMap<String, RiskAssessment>,
    recent_order: VecDeque<String>,
    stats: BTreeMap<WorkloadUri, Stats>,
    checker: Box<dyn IntentChecker>,
    actor: WorkloadUri,
    assessments_issued: u64,
}

impl ControlPlane {
    /// `seed` fixes the authority's signing keys so a replayed command log
    /// reproduces identical credentials.
    pub fn new(config: PlaneConfig, seed: [u8; 32]) -> PlaneResult<Self> {
        Self::with_checker(config, seed, Box::new(ReferenceChecker))
    }

    pub fn with_checker(config: PlaneConfig, seed: [u8; 32], checker: Box<dyn IntentChecker>) -> PlaneResult<Self> {
        config.validate()?;
        Ok(Self {
            authority: CredentialAuthority::new(config.authority, seed),
            actor: config.plane_actor(),
            config,
            registry: Registry::new(),
            ledger: AuditLedger::new(),
            escalations: EscalationQueue::new(),
            provenance: ProvenanceStore::new(),
            matrix: JurisdictionMatrix::bundled(),
            conflicts: ConflictRegistry::new(),
            threats: ThreatStore::new(),
            catalog: RiskCatalog::seeded(),
            baselines: BTreeMap::new(),
            recent: BTreeMap::new(),
            recent_order: VecDeque::new(),
            stats: BTreeMap::new(),
            checker,
            assessments_issued: 0,
        })
    }

    pub fn config(&self) -> &PlaneConfig {
        &self.config
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn authority(&self) -> &CredentialAuthority {
        &self.authority
    }

    pub fn ledger(&self) -> &AuditLedger {
        &self.ledger
    }

    pub fn escalations(&self) -> &EscalationQueue {
        &self.escalations
    }

    pub fn provenance(&self) -> &ProvenanceStore {
        &self.provenance
    }

    pub fn matrix(&self) -> &JurisdictionMatrix {
        &self.matrix
    }

    pub fn conflicts(&self) -> &ConflictRegistry {
        &self.conflicts
    }

    pub fn threats(&self) -> &ThreatStore {
        &self.threats
    }

    pub fn catalog(&self) -> &RiskCatalog {
        &self.catalog
    }

    pub fn baseline(&self, id: &WorkloadUri) -> Option<&BehavioralBaseline> {
        self.baselines.get(id)
    }

    pub fn assessment(&self, id: &str) -> Option<&RiskAssessment> {
        self.recent.get(id)
    }

    /// Retained assessments, oldest first.
    pub fn recent_assessments(&self) -> Vec<RiskAssessment> {
        self.recent_order.iter().map(|id| self.recent[id].clone()).collect()
    }

    fn audit(&mut self, at: DateTime<Utc>, kind: EventKind, payload: Value) -> u64 {
        let actor = self.actor.clone();
        self.ledger.append(AuditEvent::new(at, actor, kind, payload)).sequence
    }

    // Registry ---------------------------------------------------------------

    /// Records a provisioning request. Agents must pass the provenance gate.
    pub fn register_identity(&mut self, spec: IdentitySpec, approver: &OwnerRef, now: DateTime<Utc>) -> PlaneResult<AgentIdentity> {
        self.registry.validate_spec(&spec)?;
        if let crate::provenance::GateOutcome::Fail(reasons) =
            self.provenance.deployment_gate(spec.kind, spec.aibom_ref.as_deref())
        {
            return Err(PlaneError::ProvenanceGateFailed(reasons));
        }
        let cadence = Duration::days(self.config.certification_cadence_days);
        let identity = self.registry.register(spec, approver, now, cadence)?.clone();
        self.audit(
            now,
            EventKind::Lifecycle,
            json!({"identity": identity.id, "event": "register", "to": LifecycleState::Requested, "approver": approver.owner_id}),
        );
        Ok(identity)
    }

    /// Applies a lifecycle event. Decommissioning revokes every live
    /// credential and retires static credentials in the same step.
    pub fn transition(&mut self, id: &WorkloadUri, event: LifecycleEvent, now: DateTime<Utc>) -> PlaneResult<LifecycleState> {
        let (from, to) = self.registry.transition(id, event, now)?;
        let mut payload = json!({"identity": id, "event": event, "from": from, "to": to});
        if to == LifecycleState::Decommissioned {
            payload["revoked_credentials"] = json!(self.authority.revoke_subject(id));
            payload["retired_statics"] = json!(self.authority.retire_statics_of(id));
        }
        self.audit(now, EventKind::Lifecycle, payload);
        Ok(to)
    }

    /// Removes the owner; an active identity is suspended as a consequence.
    pub fn release_owner(&mut self, id: &WorkloadUri, now: DateTime<Utc>) -> PlaneResult<bool> {
        let suspended = self.registry.release_owner(id)?;
        let mut payload = json!({"identity": id, "event": "release_owner"});
        if suspended {
            payload["from"] = json!(LifecycleState::Active);
            payload["to"] = json!(LifecycleState::Suspended);
        }
        self.audit(now, EventKind::Lifecycle, payload);
        Ok(suspended)
    }

    pub fn offer_transfer(&mut self, id: &WorkloadUri, new_owner: OwnerRef, now: DateTime<Utc>) -> PlaneResult<String> {
        let nonce = self.ledger.len();
        let owner_id = new_owner.owner_id.clone();
        let token = self.registry.offer_transfer(id, new_owner, nonce)?;
        self.audit(now, EventKind::ConfigChange, json!({"identity": id, "event": "offer_transfer", "to_owner": owner_id}));
        Ok(token)
    }

    pub fn accept_transfer(&mut self, id: &WorkloadUri, token: &str, now: DateTime<Utc>) -> PlaneResult<OwnerRef> {
        let (previous, owner) = self.registry.accept_transfer(id, token)?;
        self.audit(
            now,
            EventKind::ConfigChange,
            json!({"identity": id, "event": "accept_transfer", "from_owner": previous.map(|p| p.owner_id), "to_owner": owner.owner_id}),
        );
        Ok(owner)
    }

    pub fn import_discovered(&mut self, records: &[ScanRecord], now: DateTime<Utc>) -> PlaneResult<Vec<(WorkloadUri, ImportOutcome)>> {
        let out = self.registry.import_discovered(records, &self.config.trust_domain.clone(), now)?;
        for (id, outcome) in &out {
            let payload = match outcome {
                ImportOutcome::Created => {
                    json!({"identity": id, "event": "import", "to": LifecycleState::Suspended})
                }
                other => json!({"identity": id, "event": "sighting", "outcome": other}),
            };
            let kind = if *outcome == ImportOutcome::Created {
                EventKind::Lifecycle
            } else {
                EventKind::ConfigChange
            };
            self.audit(now, kind, payload);
        }
        Ok(out)
    }

    pub fn detect_orphans(&self, now: DateTime<Utc>) -> Vec<WorkloadUri> {
        self.registry.detect_orphans(now)
    }

    pub fn certify(&mut self, id: &WorkloadUri, attesting_owner: &str, now: DateTime<Utc>) -> PlaneResult<CertificationRecord> {
        let summary = self.stats.get(id).map(|s| s.summary.clone()).unwrap_or_default();
        let cadence = Duration::days(self.config.certification_cadence_days);
        let record = self.registry.certify(id, &summary, attesting_owner, now, cadence)?;
        self.audit(now, EventKind::Certification, json!({"identity": id, "record": record, "summary": summary}));
        Ok(record)
    }

    pub fn register_task(&mut self, spec: TaskSpec, now: DateTime<Utc>) -> PlaneResult<()> {
        let payload = json!({"event": "register_task", "task": spec});
        self.registry.register_task(spec)?;
        self.audit(now, EventKind::ConfigChange, payload);
        Ok(())
    }

    // Governor ---------------------------------------------------------------

    /// Builds (or replaces) the behavioral baseline for an identity.
    pub fn rebuild_baseline(&mut self, id: &WorkloadUri, history: &[AccessRequest], now: DateTime<Utc>) -> PlaneResult<()> {
        self.registry.require(id)?;
        let b = build_baseline(id, history, self.config.baseline_min_history, now)?;
        self.audit(
            now,
            EventKind::ConfigChange,
            json!({"identity": id, "event": "baseline", "window": b.window, "volume_p95": b.volume_p95}),
        );
        self.baselines.insert(id.clone(), b);
        Ok(())
    }

    /// Scores and classifies one request at its own timestamp, records the
    /// assessment and queues escalations.
    pub fn decide(&mut self, request: AccessRequest) -> PlaneResult<RiskAssessment> {
        let identity = self.registry.require(&request.identity)?;
        if !identity.is_active() {
            return Err(PlaneError::IdentityNotActive(identity.id.clone()));
        }
        let task = self.registry.task(&request.task_id).filter(|t| t.identity == request.identity);
        let baseline = self.baselines.get(&request.identity);
        let dims = dimension_scores(&request, task, baseline)?;
        let composite = composite_score(&dims, &self.config.policy.weights);
        let flagged = identity.threat_flagged();
        let level = identity.autonomy;
        let context = ExecutionContext {
            measurement_violation: self
                .authority
                .measurement_violation(&request.identity, &request.session_id, &request.tool),
        };
        let mut checker_failed = false;
        let (decision, alignment) = classify(
            composite,
            || {
                let input = AlignmentInput {
                    task,
                    request: &request,
                    context: &context,
                };
                self.checker.alignment(&input).unwrap_or_else(|_| {
                    checker_failed = true;
                    0.0
                })
            },
            level,
            dims.is_irreversible(),
            flagged,
            &self.config.policy,
        );
        let mut modifiers = Vec::new();
        if flagged {
            modifiers.push(Modifier::ThreatOverlay);
        }
        let would_permit = alignment.is_none_or(|a| a >= self.config.policy.t_align);
        if level <= 1 && dims.is_irreversible() && decision == Decision::Escalate && would_permit {
            modifiers.push(Modifier::AutonomyGate);
        }
        if checker_failed {
            modifiers.push(Modifier::CheckerUnavailable);
        }
        if context.measurement_violation {
            modifiers.push(Modifier::MeasurementViolation);
        }
        if baseline.is_none() {
            modifiers.push(Modifier::MissingBaseline);
        }
        self.assessments_issued += 1;
        let assessment = RiskAssessment {
            assessment_id: format!("asmt-{:012}", self.assessments_issued),
            request,
            dims,
            composite,
            alignment,
            decision,
            modifiers,
        };
        let r = &assessment.request;
        let event = AuditEvent::new(
            r.timestamp,
            r.identity.clone(),
            EventKind::Decision,
            serde_json::to_value(&assessment).expect("assessment serializes"),
        )
        .data_class(r.data_class)
        .session(r.session_id.clone())
        .task(r.task_id.clone())
        .decision_ref(assessment.assessment_id.clone());
        let sequence = self.ledger.append(event).sequence;
        if decision == Decision::Escalate {
            self.escalations.enqueue(Escalation {
                escalation_id: format!("esc-{:012}", self.assessments_issued),
                assessment: assessment.clone(),
                decision_sequence: sequence,
                enqueued_at: r.timestamp,
                resolution: None,
            });
        }
        let stats = self.stats.entry(r.identity.clone()).or_default();
        stats.summary.decisions += 1;
        stats.summary.escalations += u64::from(decision == Decision::Escalate);
        stats.summary.deviations += u64::from(assessment.dims.deviation >= self.config.deviation_alert);
        let outcome = match decision {
            Decision::Allow | Decision::AllowEnhancedLogging => Some(Outcome::Compliant),
            Decision::Deny => Some(Outcome::NonCompliant),
            Decision::Escalate => None,
        };
        if let Some(o) = outcome {
            self.record_outcome(&r.identity.clone(), o, r.timestamp)?;
        }
        self.remember(assessment.clone());
        Ok(assessment)
    }

    fn remember(&mut self, assessment: RiskAssessment) {
        self.recent_order.push_back(assessment.assessment_id.clone());
        self.recent.insert(assessment.assessment_id.clone(), assessment);
        while self.recent_order.len() > self.config.recent_window {
            if let Some(old) = self.recent_order.pop_front() {
                self.recent.remove(&old);
            }
        }
    }

    /// Appends an outcome and applies any autonomy change it earns.
    fn record_outcome(&mut self, id: &WorkloadUri, outcome: Outcome, now: DateTime<Utc>) -> PlaneResult<Option<u8>> {
        let k = self.config.autonomy_promote_after;
        let level = self.registry.require(id)?.autonomy;
        let stats = self.stats.entry(id.clone()).or_default();
        stats.window.push_back(outcome);
        while stats.window.len() > k {
            stats.window.pop_front();
        }
        let next = update_autonomy(level, stats.window.make_contiguous(), k);
        if next == level {
            return Ok(None);
        }
        stats.window.clear();
        self.registry.set_autonomy(id, next)?;
        self.audit(now, EventKind::ConfigChange, json!({"identity": id, "event": "autonomy", "from": level, "to": next}));
        Ok(Some(next))
    }

    /// Records a human resolution. A confirmed violation demotes autonomy.
    /// Returns the escalation and the identity's autonomy level afterwards.
    pub fn resolve_escalation(
        &mut self,
        escalation_id: &str,
        verdict: ResolutionVerdict,
        resolver: &str,
        note: &str,
        now: DateTime<Utc>,
    ) -> PlaneResult<(Escalation, u8)> {
        let resolution = Resolution {
            verdict,
            resolver: resolver.to_string(),
            resolved_at: now,
            note: note.to_string(),
        };
        let escalation = self.escalations.resolve(escalation_id, resolution)?.clone();
        let id = escalation.assessment.request.identity.clone();
        self.audit(
            now,
            EventKind::EscalationResolution,
            json!({
                "escalation_id": escalation_id,
                "identity": id,
                "decision_sequence": escalation.decision_sequence,
                "verdict": verdict,
                "resolver": resolver,
            }),
        );
        let outcome = match verdict {
            ResolutionVerdict::Approved => Outcome::Compliant,
            ResolutionVerdict::ConfirmedViolation => {
                if let Some(s) = self.stats.get_mut(&id) {
                    s.summary.confirmed_violations += 1;
                }
                Outcome::ConfirmedViolation
            }
        };
        self.record_outcome(&id, outcome, now)?;
        let level = self.registry.require(&id)?.autonomy;
        Ok((escalation, level))
    }

    pub fn aggregate_privilege(&self, id: &WorkloadUri, now: DateTime<Utc>) -> PlaneResult<PrivilegeReport> {
        let identity = self.registry.require(id)?;
        let live: Vec<Scope> = self.authority.live_for(id, now).into_iter().map(|c| c.scope.clone()).collect();
        Ok(aggregate_privilege(identity, live.iter(), self.config.privilege_threshold))
    }

    // Credentials ------------------------------------------------------------

    pub fn enroll_workload(&mut self, id: &WorkloadUri, now: DateTime<Utc>) -> PlaneResult<String> {
        self.registry.require(id)?;
        let kid = self.authority.enroll_workload(id, now).kid.clone();
        self.audit(now, EventKind::Issuance, json!({"identity": id, "event": "workload_key", "kid": kid}));
        Ok(kid)
    }

    /// Issues a task-scoped credential backed by a permissive assessment.
    pub fn issue_credential(
        &mut self,
        id: &WorkloadUri,
        task_id: &str,
        scope: Scope,
        assessment_id: &str,
        now: DateTime<Utc>,
    ) -> PlaneResult<Credential> {
        let identity = self.registry.require(id)?.clone();
        let assessment = self
            .recent
            .get(assessment_id)
            .ok_or_else(|| PlaneError::UnknownAssessment(assessment_id.to_string()))?;
        let credential = self.authority.issue_jit_credential(&identity, task_id, scope, assessment, now)?;
        self.ledger.append(
            AuditEvent::new(
                now,
                self.actor.clone(),
                EventKind::Issuance,
                json!({
                    "identity": id,
                    "credential_id": credential.credential_id,
                    "scope": credential.scope,
                    "ttl_seconds": credential.ttl_seconds,
                    "kid": credential.kid,
                }),
            )
            .task(task_id)
            .decision_ref(assessment_id),
        );
        Ok(credential)
    }

    /// Revokes every credential and delegation edge of a finished task.
    pub fn complete_task(&mut self, task_id: &str, now: DateTime<Utc>) -> usize {
        let n = self.authority.revoke_on_completion(task_id);
        self.ledger.append(
            AuditEvent::new(now, self.actor.clone(), EventKind::Revocation, json!({"event": "task_complete", "revoked": n}))
                .task(task_id),
        );
        n
    }

    pub fn record_delegation(
        &mut self,
        delegator: &WorkloadUri,
        delegatee: &WorkloadUri,
        task_id: &str,
        scope: Scope,
        now: DateTime<Utc>,
    ) -> PlaneResult<DelegationEdge> {
        self.registry.require(delegatee)?;
        let edge = self.authority.record_delegation(delegator, delegatee, task_id, scope, now)?;
        self.ledger.append(
            AuditEvent::new(
                now,
                delegator.clone(),
                EventKind::Delegation,
                json!({"edge_id": edge.edge_id, "delegator": delegator, "delegatee": delegatee, "scope": edge.scope}),
            )
            .task(task_id),
        );
        Ok(edge)
    }

    pub fn verify_delegation_chain(&self, chain: &[DelegationEdge], now: DateTime<Utc>) -> DelegationVerdict {
        self.authority.verify_delegation_chain(chain, now)
    }

    pub fn measure_toolset(
        &mut self,
        id: &WorkloadUri,
        session_id: &str,
        manifest: &[ToolDescriptor],
        now: DateTime<Utc>,
    ) -> PlaneResult<ToolsetMeasurement> {
        self.registry.require(id)?;
        let m = self.authority.measure_toolset(id, session_id, manifest, now)?;
        self.ledger.append(
            AuditEvent::new(
                now,
                id.clone(),
                EventKind::ConfigChange,
                json!({"event": "toolset_measurement", "manifest_digest": m.manifest_digest}),
            )
            .session(session_id),
        );
        Ok(m)
    }

    pub fn register_waiver(&mut self, waiver: Waiver, now: DateTime<Utc>) -> PlaneResult<()> {
        let payload = json!({"event": "waiver", "waiver": waiver});
        self.authority.register_waiver(waiver)?;
        self.audit(now, EventKind::ConfigChange, payload);
        Ok(())
    }

    /// Records a credential found at rest (inventory import).
    pub fn add_static_credential(&mut self, cred: StaticCredential, now: DateTime<Utc>) -> PlaneResult<()> {
        let payload = json!({"event": "static_credential", "credential_id": cred.credential_id, "holder": cred.holder});
        self.authority.add_static(cred)?;
        self.audit(now, EventKind::ConfigChange, payload);
        Ok(())
    }

    pub fn retire_static_credential(&mut self, id: &str, now: DateTime<Utc>) -> PlaneResult<()> {
        self.authority.retire_static(id)?;
        self.audit(now, EventKind::Revocation, json!({"event": "retire_static", "credential_id": id}));
        Ok(())
    }

    pub fn standing_privilege(&self, now: DateTime<Utc>) -> Vec<StandingViolation> {
        self.authority.list_standing_privilege(&self.registry, now)
    }

    // Provenance -------------------------------------------------------------

    /// Stores an AIBOM; returns the reference identities cite.
    pub fn register_aibom(&mut self, record: AibomRecord, now: DateTime<Utc>) -> PlaneResult<String> {
        let stored = self.provenance.register(record, now)?;
        let (model, digest) = (stored.record.model_id.clone(), stored.digest.to_hex());
        self.audit(now, EventKind::ConfigChange, json!({"event": "aibom", "model_id": model, "digest": digest}));
        Ok(digest)
    }

    pub fn verify_model_integrity(&mut self, model_id: &str, artifact: impl Read, now: DateTime<Utc>) -> PlaneResult<IntegrityVerdict> {
        let verdict = self.provenance.verify_model_integrity(model_id, artifact, now)?;
        self.audit(now, EventKind::ConfigChange, json!({"event": "integrity_check", "model_id": model_id, "verdict": verdict}));
        Ok(verdict)
    }

    pub fn verify_model_digest(&mut self, model_id: &str, artifact: &Digest32, now: DateTime<Utc>) -> IntegrityVerdict {
        let verdict = self.provenance.verify_model_digest(model_id, artifact, now);
        self.audit(now, EventKind::ConfigChange, json!({"event": "integrity_check", "model_id": model_id, "verdict": verdict}));
        verdict
    }

    // Regulatory -------------------------------------------------------------

    pub fn register_conflict(&mut self, entry: ConflictEntry, now: DateTime<Utc>) -> PlaneResult<()> {
        let payload = json!({"event": "conflict", "conflict": entry});
        self.conflicts.register(entry)?;
        self.audit(now, EventKind::ConfigChange, payload);
        Ok(())
    }

    pub fn set_conflict_status(
        &mut self,
        id: &str,
        status: ConflictStatus,
        approach: Option<String>,
        now: DateTime<Utc>,
    ) -> PlaneResult<ConflictEntry> {
        let entry = self.conflicts.set_status(id, status, approach)?.clone();
        self.audit(now, EventKind::ConfigChange, json!({"event": "conflict_status", "conflict_id": id, "status": status}));
        Ok(entry)
    }

    // Threat overlay ---------------------------------------------------------

    /// Loads an indicator feed and re-evaluates identity flags.
    pub fn ingest_indicators(&mut self, feed: &str, now: DateTime<Utc>) -> PlaneResult<usize> {
        let n = self.threats.ingest(feed, now)?;
        self.audit(now, EventKind::ConfigChange, json!({"event": "indicators", "effective": n, "stored": self.threats.len()}));
        self.apply_threat_flags(now)?;
        Ok(n)
    }

    /// Writes newly earned threat flags back to the registry, one audit
    /// entry per identity whose flags changed.
    pub fn apply_threat_flags(&mut self, now: DateTime<Utc>) -> PlaneResult<BTreeMap<WorkloadUri, BTreeSet<IdentityFlag>>> {
        let wanted = self.threats.flag_identities(&self.registry, &self.authority, &self.config.pam_systems);
        let mut added: BTreeMap<WorkloadUri, BTreeSet<IdentityFlag>> = BTreeMap::new();
        for (id, flags) in wanted {
            for flag in flags {
                if self.registry.add_flag(&id, flag)? {
                    added.entry(id.clone()).or_default().insert(flag);
                }
            }
        }
        for (id, flags) in &added {
            self.audit(now, EventKind::ConfigChange, json!({"identity": id, "event": "threat_flags", "added": flags}));
        }
        Ok(added)
    }

    pub fn exposure_assessment(&self, now: DateTime<Utc>) -> ExposureReport {
        self.threats.exposure_assessment(&self.authority, now)
    }

    // Risk and reporting -----------------------------------------------------

    pub fn intersections(&self, now: DateTime<Utc>) -> Vec<IntersectionAlert> {
        let recent = self.recent_assessments();
        detect_intersections(&IntersectionSnapshot {
            registry: &self.registry,
            authority: &self.authority,
            provenance: &self.provenance,
            recent: &recent,
            audit_valid: self.ledger.verify_all().is_valid(),
            privilege_threshold: self.config.privilege_threshold,
            t_align: self.config.policy.t_align,
            now,
        })
    }

    /// Detects intersections and records each alert in the ledger.
    pub fn scan_intersections(&mut self, now: DateTime<Utc>) -> Vec<IntersectionAlert> {
        let alerts = self.intersections(now);
        for a in &alerts {
            self.audit(now, EventKind::Alert, json!({"identity": a.identity, "alert": a}));
        }
        alerts
    }

    pub fn metrics(&self, now: DateTime<Utc>) -> MetricsReport {
        let baselined: BTreeSet<WorkloadUri> = self.baselines.keys().cloned().collect();
        let recent = self.recent_assessments();
        compute_metrics(&MetricsSnapshot {
            registry: &self.registry,
            authority: &self.authority,
            ledger: &self.ledger,
            escalations: &self.escalations,
            provenance: &self.provenance,
            matrix: &self.matrix,
            conflicts: &self.conflicts,
            threats: &self.threats,
            baselined: &baselined,
            assessments: &recent,
            deviation_alert: self.config.deviation_alert,
            settings: ProgramSettings {
                provisioning_process: self.config.provisioning_process,
                pdp_automation: self.config.pdp_automation,
            },
            now,
        })
    }

    pub fn verify_audit(&self) -> ChainVerdict {
        self.ledger.verify_all()
    }

    pub fn reconstruct(&self, query: &ReconstructQuery) -> PlaneResult<Reconstruction> {
        Ok(self.ledger.reconstruct(query)?)
    }
}
