#![allow(dead_code)]

use std::sync::Arc;

use agentgov_core::config::PlaneConfig;
use agentgov_core::governor::{AccessRequest, TaskSpec, ToolScope};
use agentgov_core::registry::{AccessGrant, IdentityKind, IdentitySpec, OwnerRef};
use agentgov_core::regulatory::JurisdictionTier;
use agentgov_core::scope::{ActionVerb, DataClass, ResourcePattern};
use agentgov_core::uri::WorkloadUri;
use agentgov_gateway::api::{router, AppState};
use agentgov_gateway::store::Store;
use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{DateTime, TimeZone, Utc};
use serde_json::Value;
use tower::ServiceExt;

pub const SEED: [u8; 32] = [5; 32];

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, 2, 10, 0, 0).unwrap()
}

pub fn uri(path: &str) -> WorkloadUri {
    WorkloadUri::new("corp.example", path).unwrap()
}

pub fn approver() -> OwnerRef {
    OwnerRef::new("bob", "Bob")
}

pub fn spec(path: &str) -> IdentitySpec {
    IdentitySpec {
        id: uri(path),
        kind: IdentityKind::ServiceAccount,
        purpose: "gateway fixture".into(),
        owner: Some(OwnerRef::new("alice", "Alice")),
        grants: vec![AccessGrant::jit("crm", ResourcePattern::any(), [ActionVerb::Read, ActionVerb::Write])],
        associated_systems: Default::default(),
        jurisdiction_tier: JurisdictionTier::Single,
        aibom_ref: None,
        autonomy: 2,
    }
}

pub fn task(id: &WorkloadUri, task_id: &str) -> TaskSpec {
    TaskSpec {
        task_id: task_id.into(),
        identity: id.clone(),
        description: "fixture task".into(),
        scope: vec![ToolScope {
            tool: "crm".into(),
            max_data_class: DataClass::Confidential,
        }],
        recipients_allowlist: Default::default(),
    }
}

pub fn request(id: &WorkloadUri, task_id: &str, tool: &str, action: ActionVerb, class: DataClass) -> AccessRequest {
    AccessRequest {
        identity: id.clone(),
        session_id: "s-1".into(),
        task_id: task_id.into(),
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

/// Percent-encodes an identity for use as a path segment.
pub fn path_id(id: &WorkloadUri) -> String {
    id.as_str().replace(':', "%3A").replace('/', "%2F")
}

pub fn app() -> (Router, AppState) {
    let store = Store::in_memory(PlaneConfig::default(), SEED).unwrap();
    let state = AppState::with_clock(store, Arc::new(t0));
    (router(state.clone()), state)
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    raw(app, req).await
}

pub async fn raw(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}
