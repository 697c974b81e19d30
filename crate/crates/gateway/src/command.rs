//! Write commands. Every state change made through the API or the CLI is a
//! `Command`; the store logs each applied command so a restart can replay
//! them into an identical control plane.

use agentgov_core::canonical::Digest32;
use agentgov_core::credentials::{StaticCredential, Waiver};
use agentgov_core::governor::{AccessRequest, ResolutionVerdict, TaskSpec};
use agentgov_core::plane::{ControlPlane, PlaneResult};
use agentgov_core::provenance::AibomRecord;
use agentgov_core::registry::{IdentitySpec, LifecycleEvent, OwnerRef, ScanRecord};
use agentgov_core::regulatory::{ConflictEntry, ConflictStatus};
use agentgov_core::scope::Scope;
use agentgov_core::uri::WorkloadUri;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Command {
    RegisterIdentity {
        spec: IdentitySpec,
        approver: OwnerRef,
    },
    Lifecycle {
        id: WorkloadUri,
        event: LifecycleEvent,
    },
    ReleaseOwner {
        id: WorkloadUri,
    },
    OfferTransfer {
        id: WorkloadUri,
        new_owner: OwnerRef,
    },
    AcceptTransfer {
        id: WorkloadUri,
        token: String,
    },
    ImportDiscovered {
        records: Vec<ScanRecord>,
    },
    Certify {
        id: WorkloadUri,
        attesting_owner: String,
    },
    RegisterTask {
        spec: TaskSpec,
    },
    RebuildBaseline {
        id: WorkloadUri,
        history: Vec<AccessRequest>,
    },
    Decide {
        request: AccessRequest,
    },
    ResolveEscalation {
        escalation_id: String,
        verdict: ResolutionVerdict,
        resolver: String,
        #[serde(default)]
        note: String,
    },
    EnrollWorkload {
        id: WorkloadUri,
    },
    IssueCredential {
        id: WorkloadUri,
        task_id: String,
        scope: Scope,
        assessment_id: String,
    },
    CompleteTask {
        task_id: String,
    },
    RecordDelegation {
        delegator: WorkloadUri,
        delegatee: WorkloadUri,
        task_id: String,
        scope: Scope,
    },
    RegisterWaiver {
        waiver: Waiver,
    },
    AddStaticCredential {
        credential: StaticCredential,
    },
    RetireStaticCredential {
        credential_id: String,
    },
    RegisterAibom {
        record: AibomRecord,
    },
    /// Artifact already hashed by the caller, so replay never rereads it.
    VerifyModelDigest {
        model_id: String,
        digest: Digest32,
    },
    RegisterConflict {
        entry: ConflictEntry,
    },
    SetConflictStatus {
        conflict_id: String,
        status: ConflictStatus,
        #[serde(default)]
        approach: Option<String>,
    },
    IngestIndicators {
        feed: String,
    },
    ScanIntersections,
}

/// A command stamped with the time it was accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedCommand {
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub command: Command,
}

impl Command {
    /// Applies the command and returns its JSON result.
    pub fn apply(&self, plane: &mut ControlPlane, at: DateTime<Utc>) -> PlaneResult<Value> {
        Ok(match self {
            Command::RegisterIdentity { spec, approver } => v(&plane.register_identity(spec.clone(), approver, at)?),
            Command::Lifecycle { id, event } => {
                let state = plane.transition(id, *event, at)?;
                json!({"id": id, "state": state})
            }
            Command::ReleaseOwner { id } => json!({"id": id, "suspended": plane.release_owner(id, at)?}),
            Command::OfferTransfer { id, new_owner } => {
                json!({"id": id, "token": plane.offer_transfer(id, new_owner.clone(), at)?})
            }
            Command::AcceptTransfer { id, token } => json!({"id": id, "owner": plane.accept_transfer(id, token, at)?}),
            Command::ImportDiscovered { records } => {
                let out = plane.import_discovered(records, at)?;
                Value::Array(out.into_iter().map(|(id, o)| json!({"id": id, "outcome": o})).collect())
            }
            Command::Certify { id, attesting_owner } => v(&plane.certify(id, attesting_owner, at)?),
            Command::RegisterTask { spec } => {
                plane.register_task(spec.clone(), at)?;
                json!({"task_id": spec.task_id})
            }
            Command::RebuildBaseline { id, history } => {
                plane.rebuild_baseline(id, history, at)?;
                v(&plane.baseline(id))
            }
            Command::Decide { request } => v(&plane.decide(request.clone())?),
            Command::ResolveEscalation {
                escalation_id,
                verdict,
                resolver,
                note,
            } => {
                let (escalation, autonomy) = plane.resolve_escalation(escalation_id, *verdict, resolver, note, at)?;
                json!({"escalation": escalation, "autonomy": autonomy})
            }
            Command::EnrollWorkload { id } => json!({"id": id, "kid": plane.enroll_workload(id, at)?}),
            Command::IssueCredential {
                id,
                task_id,
                scope,
                assessment_id,
            } => {
                let c = plane.issue_credential(id, task_id, scope.clone(), assessment_id, at)?;
                json!({"credential": c, "token": c.token(), "expires_at": c.expires_at()})
            }
            Command::CompleteTask { task_id } => json!({"task_id": task_id, "revoked": plane.complete_task(task_id, at)}),
            Command::RecordDelegation {
                delegator,
                delegatee,
                task_id,
                scope,
            } => v(&plane.record_delegation(delegator, delegatee, task_id, scope.clone(), at)?),
            Command::RegisterWaiver { waiver } => {
                plane.register_waiver(waiver.clone(), at)?;
                v(waiver)
            }
            Command::AddStaticCredential { credential } => {
                plane.add_static_credential(credential.clone(), at)?;
                json!({"credential_id": credential.credential_id})
            }
            Command::RetireStaticCredential { credential_id } => {
                plane.retire_static_credential(credential_id, at)?;
                json!({"credential_id": credential_id, "retired": true})
            }
            Command::RegisterAibom { record } => {
                json!({"model_id": record.model_id, "aibom_ref": plane.register_aibom(record.clone(), at)?})
            }
            Command::VerifyModelDigest { model_id, digest } => {
                json!({"model_id": model_id, "verdict": plane.verify_model_digest(model_id, digest, at)})
            }
            Command::RegisterConflict { entry } => {
                plane.register_conflict(entry.clone(), at)?;
                v(entry)
            }
            Command::SetConflictStatus {
                conflict_id,
                status,
                approach,
            } => v(&plane.set_conflict_status(conflict_id, *status, approach.clone(), at)?),
            Command::IngestIndicators { feed } => json!({"effective": plane.ingest_indicators(feed, at)?}),
            Command::ScanIntersections => v(&plane.scan_intersections(at)),
        })
    }
}

fn v<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plane types serialize")
}
