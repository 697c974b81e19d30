#![allow(dead_code)]

use agentgov_core::config::PlaneConfig;
use agentgov_core::governor::{AccessRequest, ToolScope, TaskSpec};
use agentgov_core::plane::ControlPlane;
use agentgov_core::registry::{AccessGrant, IdentityKind, IdentitySpec, LifecycleEvent, OwnerRef};
use agentgov_core::regulatory::JurisdictionTier;
use agentgov_core::scope::{ActionVerb, DataClass, ResourcePattern, Scope, ScopeItem};
use agentgov_core::uri::WorkloadUri;
use chrono::{DateTime, TimeZone, Utc};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, 2, 10, 0, 0).unwrap()
}

pub fn plane() -> ControlPlane {
    ControlPlane::new(PlaneConfig::default(), [11; 32]).unwrap()
}

pub fn uri(path: &str) -> WorkloadUri {
    WorkloadUri::new("corp.example", path).unwrap()
}

pub fn owner() -> OwnerRef {
    OwnerRef::new("alice", "Alice")
}

pub fn approver() -> OwnerRef {
    OwnerRef::new("bob", "Bob")
}

pub fn grant(system: &str, actions: &[ActionVerb]) -> AccessGrant {
    AccessGrant::jit(system, ResourcePattern::any(), actions.iter().copied())
}

pub fn spec(path: &str, kind: IdentityKind, grants: Vec<AccessGrant>) -> IdentitySpec {
    IdentitySpec {
        id: uri(path),
        kind,
        purpose: "integration fixture".into(),
        owner: Some(owner()),
        grants,
        associated_systems: Default::default(),
        jurisdiction_tier: JurisdictionTier::Single,
        aibom_ref: None,
        autonomy: 2,
    }
}

/// Registers, approves and activates.
pub fn activate(p: &mut ControlPlane, spec: IdentitySpec) -> WorkloadUri {
    let id = spec.id.clone();
    p.register_identity(spec, &approver(), t0()).unwrap();
    p.transition(&id, LifecycleEvent::Approve, t0()).unwrap();
    p.transition(&id, LifecycleEvent::Activate, t0()).unwrap();
    id
}

pub fn task(p: &mut ControlPlane, id: &WorkloadUri, task_id: &str, tools: &[(&str, DataClass)]) {
    p.register_task(
        TaskSpec {
            task_id: task_id.into(),
            identity: id.clone(),
            description: "fixture task".into(),
            scope: tools
                .iter()
                .map(|(t, c)| ToolScope {
                    tool: t.to_string(),
                    max_data_class: *c,
                })
                .collect(),
            recipients_allowlist: Default::default(),
        },
        t0(),
    )
    .unwrap();
}

pub fn request(id: &WorkloadUri, task: &str, tool: &str, action: ActionVerb, class: DataClass) -> AccessRequest {
    AccessRequest {
        identity: id.clone(),
        session_id: "s-1".into(),
        task_id: task.into(),
        tool: tool.into(),
        resource: ResourcePattern::any(),
        action,
        data_class: class,
        recipients: Default::default(),
        data_volume: 10,
        timestamp: t0(),
        context_notes: String::new(),
    }
}

pub fn scope(system: &str, action: ActionVerb) -> Scope {
    [ScopeItem::new(system, ResourcePattern::any(), action)].into_iter().collect()
}
