//! Fixtures shared by unit tests.

use chrono::{DateTime, Duration, TimeZone, Utc};

use crate::governor::{AccessRequest, Decision, Dimensions, RiskAssessment};
use crate::registry::{AccessGrant, AgentIdentity, IdentityKind, IdentitySpec, LifecycleEvent, OwnerRef, Registry};
use crate::regulatory::JurisdictionTier;
use crate::scope::{ActionVerb, DataClass, ResourcePattern};
use crate::uri::WorkloadUri;

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 1, 5, 9, 0, 0).unwrap()
}

pub fn uri(path: &str) -> WorkloadUri {
    WorkloadUri::new("corp.example", path).unwrap()
}

pub fn spec(path: &str, grants: Vec<AccessGrant>) -> IdentitySpec {
    IdentitySpec {
        id: uri(path),
        kind: IdentityKind::ServiceAccount,
        purpose: "test workload".into(),
        owner: Some(OwnerRef::new("alice", "Alice")),
        grants,
        associated_systems: Default::default(),
        jurisdiction_tier: JurisdictionTier::Single,
        aibom_ref: None,
        autonomy: 2,
    }
}

pub fn read_grant(system: &str) -> AccessGrant {
    AccessGrant::jit(system, ResourcePattern::any(), [ActionVerb::Read])
}

/// Registers and activates an identity.
pub fn active(reg: &mut Registry, spec: IdentitySpec) -> AgentIdentity {
    let id = spec.id.clone();
    reg.register(spec, &OwnerRef::new("bob", "Bob"), t0(), Duration::days(90)).unwrap();
    reg.transition(&id, LifecycleEvent::Approve, t0()).unwrap();
    reg.transition(&id, LifecycleEvent::Activate, t0()).unwrap();
    reg.get(&id).unwrap().clone()
}

pub fn request(identity: &WorkloadUri, task: &str, tool: &str, action: ActionVerb) -> AccessRequest {
    AccessRequest {
        identity: identity.clone(),
        session_id: "sess-1".into(),
        task_id: task.into(),
        tool: tool.into(),
        resource: ResourcePattern::any(),
        action,
        data_class: DataClass::Internal,
        recipients: Default::default(),
        data_volume: 100,
        timestamp: t0(),
        context_notes: String::new(),
    }
}

pub fn assessment(request: AccessRequest, decision: Decision) -> RiskAssessment {
    RiskAssessment {
        assessment_id: "asmt-1".into(),
        request,
        dims: Dimensions::new(0.25, 0.25, 0.0, 0.0),
        composite: 0.125,
        alignment: None,
        decision,
        modifiers: vec![],
    }
}
