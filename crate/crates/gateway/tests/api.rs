mod common;

use std::io::Write as _;

use agentgov_core::canonical::Digest32;
use agentgov_core::config::PlaneConfig;
use agentgov_core::credentials::StaticCredential;
use agentgov_core::governor::{AccessRequest, ResolutionVerdict};
use agentgov_core::plane::ControlPlane;
use agentgov_core::provenance::AibomRecord;
use agentgov_core::registry::{AccessGrant, LifecycleEvent};
use agentgov_core::scope::{ActionVerb, DataClass, ResourcePattern, Scope, ScopeItem};
use agentgov_core::uri::WorkloadUri;
use agentgov_gateway::command::Command;
use agentgov_gateway::store::Store;
use axum::http::StatusCode;
use axum::Router;
use chrono::Duration;
use common::*;
use serde_json::{json, Value};

async fn active_identity(app: &Router, path: &str) -> WorkloadUri {
    let s = spec(path);
    let id = s.id.clone();
    let (st, _) = call(app, "POST", "/identities", Some(json!({"spec": s, "approver": approver()}))).await;
    assert_eq!(st, StatusCode::CREATED);
    for event in ["approve", "activate"] {
        let (st, _) = call(app, "POST", &format!("/identities/{}/lifecycle", path_id(&id)), Some(json!({"event": event}))).await;
        assert_eq!(st, StatusCode::OK);
    }
    id
}

async fn with_task(app: &Router, id: &WorkloadUri, task_id: &str) {
    let (st, _) = call(app, "POST", "/tasks", Some(json!(task(id, task_id)))).await;
    assert_eq!(st, StatusCode::CREATED);
}

async fn ledger_len(app: &Router) -> u64 {
    let (_, v) = call(app, "GET", "/audit/verify", None).await;
    v["entries"].as_u64().unwrap()
}

/// An out-of-task read of internal data: composite in the escalation band.
fn escalating(id: &WorkloadUri, task_id: &str) -> AccessRequest {
    request(id, task_id, "shell", ActionVerb::Read, DataClass::Internal)
}

#[tokio::test]
async fn health_and_empty_audit() {
    let (app, _) = app();
    let (st, v) = call(&app, "GET", "/health", None).await;
    assert_eq!((st, v), (StatusCode::OK, json!({"status": "ok"})));
    let (st, v) = call(&app, "GET", "/audit/verify", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["valid"], json!(true));
}

#[tokio::test]
async fn benign_decide_allows_with_scores() {
    let (app, _) = app();
    let id = active_identity(&app, "agents/triage").await;
    with_task(&app, &id, "T-1").await;
    let req = request(&id, "T-1", "crm", ActionVerb::Read, DataClass::Public);
    let (st, v) = call(&app, "POST", "/decide", Some(json!(req))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["decision"], "ALLOW");
    for dim in ["sensitivity", "irreversibility", "deviation", "alignment_static"] {
        assert!(v["dims"][dim].is_number(), "missing {dim}");
    }
    assert!(v["composite"].as_f64().unwrap() < 0.5);
    let (_, audit) = call(&app, "GET", "/audit/verify", None).await;
    assert_eq!(audit["valid"], json!(true));
}

#[tokio::test]
async fn provisioning_request_moves_through_approval() {
    let (app, _) = app();
    let s = spec("agents/pending");
    let id = s.id.clone();
    call(&app, "POST", "/identities", Some(json!({"spec": s, "approver": approver()}))).await;
    let (_, pending) = call(&app, "GET", "/identities?state=requested", None).await;
    assert_eq!(pending.as_array().unwrap().len(), 1);
    assert_eq!(pending[0]["id"], json!(id));
    let (st, v) = call(&app, "POST", &format!("/identities/{}/lifecycle", path_id(&id)), Some(json!({"event": "approve"}))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["state"], "approved");
    let (_, pending) = call(&app, "GET", "/identities?state=requested", None).await;
    assert!(pending.as_array().unwrap().is_empty());
    let (_, got) = call(&app, "GET", &format!("/identities/{}", path_id(&id)), None).await;
    assert_eq!(got["lifecycle"]["state"], "approved");
}

#[tokio::test]
async fn violation_resolution_demotes_autonomy() {
    let (app, _) = app();
    let id = active_identity(&app, "agents/drifter").await;
    with_task(&app, &id, "T-1").await;
    let (_, v) = call(&app, "POST", "/decide", Some(json!(escalating(&id, "T-1")))).await;
    assert_eq!(v["decision"], "ESCALATE");
    let (_, pending) = call(&app, "GET", "/escalations?pending=true", None).await;
    let esc = pending[0]["escalation_id"].as_str().unwrap().to_string();
    let body = json!({"verdict": "violation", "resolver": "alice", "note": "confirmed"});
    let (st, v) = call(&app, "POST", &format!("/escalations/{esc}/resolve"), Some(body.clone())).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["autonomy"], json!(1));
    let (_, got) = call(&app, "GET", &format!("/identities/{}", path_id(&id)), None).await;
    assert_eq!(got["autonomy"], json!(1));
    let (_, pending) = call(&app, "GET", "/escalations?pending=true", None).await;
    assert!(pending.as_array().unwrap().is_empty());
    let (st, _) = call(&app, "POST", &format!("/escalations/{esc}/resolve"), Some(body)).await;
    assert_eq!(st, StatusCode::CONFLICT);
}

#[tokio::test]
async fn resolution_by_body_is_equivalent() {
    let (app, _) = app();
    let id = active_identity(&app, "agents/drifter").await;
    with_task(&app, &id, "T-1").await;
    call(&app, "POST", "/decide", Some(json!(escalating(&id, "T-1")))).await;
    let (_, all) = call(&app, "GET", "/escalations", None).await;
    let esc = all[0]["escalation_id"].clone();
    let body = json!({"escalation_id": esc, "verdict": "approved", "resolver": "alice", "note": ""});
    let (st, v) = call(&app, "POST", "/escalations", Some(body)).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["escalation"]["resolution"]["verdict"], "approved");
    assert_eq!(v["autonomy"], json!(2));
}

#[tokio::test]
async fn error_statuses() {
    let (app, _) = app();
    let ghost = uri("agents/ghost");
    let (st, v) = call(&app, "GET", &format!("/identities/{}", path_id(&ghost)), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert!(v["error"].is_string());
    let (st, _) = call(&app, "POST", &format!("/identities/{}/lifecycle", path_id(&ghost)), Some(json!({"event": "approve"}))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = call(&app, "POST", "/escalations/esc-404/resolve", Some(json!({"verdict": "approved", "resolver": "a"}))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);

    let id = active_identity(&app, "agents/a").await;
    let (st, _) = call(&app, "POST", "/identities", Some(json!({"spec": spec("agents/a"), "approver": approver()}))).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let (st, _) = call(&app, "POST", &format!("/identities/{}/lifecycle", path_id(&id)), Some(json!({"event": "approve"}))).await;
    assert_eq!(st, StatusCode::CONFLICT);

    let (st, _) = call(&app, "GET", "/identities/not-a-uri", None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&app, "GET", "/metrics/phase/9", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = call(&app, "POST", "/threat/indicators", Some(json!({"not": "a feed line"}))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let history: Vec<AccessRequest> = vec![request(&id, "T", "crm", ActionVerb::Read, DataClass::Public)];
    let (st, _) = call(&app, "POST", &format!("/identities/{}/baseline", path_id(&id)), Some(json!({"history": history}))).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn credentials_follow_a_permissive_decision() {
    let (app, _) = app();
    let id = active_identity(&app, "agents/worker").await;
    with_task(&app, &id, "T-1").await;
    let (_, d) = call(&app, "POST", "/decide", Some(json!(request(&id, "T-1", "crm", ActionVerb::Read, DataClass::Public)))).await;
    let read: Scope = [ScopeItem::new("crm", ResourcePattern::any(), ActionVerb::Read)].into_iter().collect();
    let body = |scope: &Scope, assessment: &Value| json!({"id": id, "task_id": "T-1", "scope": scope, "assessment_id": assessment});
    let (st, _) = call(&app, "POST", "/credentials", Some(body(&read, &json!("asmt-missing")))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let wider: Scope = [ScopeItem::new("billing", ResourcePattern::any(), ActionVerb::Write)].into_iter().collect();
    let (st, _) = call(&app, "POST", "/credentials", Some(body(&wider, &d["assessment_id"]))).await;
    assert_eq!(st, StatusCode::FORBIDDEN);
    let (st, v) = call(&app, "POST", "/credentials", Some(body(&read, &d["assessment_id"]))).await;
    assert_eq!(st, StatusCode::CREATED);
    assert!(v["token"].is_string());
    assert!(v["expires_at"].is_string());
    let (_, standing) = call(&app, "GET", "/standing", None).await;
    assert_eq!(standing, json!([]));
    let (st, v) = call(&app, "POST", "/tasks/T-1/complete", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["revoked"], json!(1));
}

#[tokio::test]
async fn every_write_is_ledgered() {
    let (app, state) = app();
    let id = active_identity(&app, "agents/w").await;
    let writes: Vec<(&str, String, Value)> = vec![
        ("POST", "/tasks".into(), json!(task(&id, "T-1"))),
        ("POST", "/decide".into(), json!(request(&id, "T-1", "crm", ActionVerb::Read, DataClass::Public))),
        ("POST", format!("/identities/{}/certify", path_id(&id)), json!({"attesting_owner": "alice"})),
        ("POST", format!("/identities/{}/lifecycle", path_id(&id)), json!({"event": "suspend"})),
        ("POST", "/aibom".into(), json!(aibom("m-1", b"weights"))),
        ("POST", "/aibom/m-1/verify".into(), json!({"digest": Digest32::of(b"weights")})),
        ("POST", "/regulatory/conflicts".into(), conflict("c-1")),
        ("POST", "/regulatory/conflicts/c-1/status".into(), json!({"status": "managed", "approach": "dual track"})),
    ];
    for (method, uri, body) in writes {
        let before = ledger_len(&app).await;
        let (st, v) = call(&app, method, &uri, Some(body)).await;
        assert!(st.is_success(), "{uri}: {st} {v}");
        assert!(ledger_len(&app).await > before, "{uri} did not append to the ledger");
    }
    let before = state.store().plane().ledger().len();
    let (st, _) = call(&app, "POST", "/tasks/T-1/complete", None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(state.store().plane().ledger().len() > before);
    assert_eq!(state.store().applied(), 12);
}

fn aibom(model: &str, weights: &[u8]) -> AibomRecord {
    AibomRecord {
        model_id: model.into(),
        architecture: "decoder-only transformer".into(),
        training_data: vec![],
        fine_tuning: vec![],
        dependencies: vec![],
        modifications: vec![],
        parameter_digest: Some(Digest32::of(weights)),
        gpai: false,
        gpai_doc_ref: None,
    }
}

fn conflict(id: &str) -> Value {
    json!({
        "conflict_id": id,
        "domains": ["IV"],
        "jurisdictions": ["EU", "CN"],
        "description": "retention versus localization",
        "status": "open",
        "opened_at": t0(),
    })
}

#[tokio::test]
async fn model_integrity_by_digest_and_path() {
    let (app, _) = app();
    let (st, v) = call(&app, "POST", "/aibom", Some(json!(aibom("m-1", b"good weights")))).await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(v["aibom_ref"].as_str().unwrap().len(), 64);
    let (_, v) = call(&app, "POST", "/aibom/m-1/verify", Some(json!({"digest": Digest32::of(b"good weights")}))).await;
    let ok = v["verdict"].clone();
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(b"bad weights").unwrap();
    let path = file.path().to_str().unwrap();
    let (st, v) = call(&app, "POST", "/aibom/m-1/verify", Some(json!({"path": path}))).await;
    assert_eq!(st, StatusCode::OK);
    assert_ne!(v["verdict"], ok);
    let (st, _) = call(&app, "POST", "/aibom/m-1/verify", Some(json!({"path": "/nonexistent/weights.bin"}))).await;
    assert!(st.is_client_error());
}

#[tokio::test]
async fn threat_feed_drives_exposure_and_intersections() {
    let (app, state) = app();
    let mut bridge = spec("svc/bridge");
    let mut mail = AccessGrant::jit("mail", ResourcePattern::any(), [ActionVerb::Read, ActionVerb::Send]);
    mail.data_class = DataClass::Confidential;
    bridge.grants.push(mail);
    let id = bridge.id.clone();
    call(&app, "POST", "/identities", Some(json!({"spec": bridge, "approver": approver()}))).await;
    for event in ["approve", "activate"] {
        call(&app, "POST", &format!("/identities/{}/lifecycle", path_id(&id)), Some(json!({"event": event}))).await;
    }
    let key = StaticCredential {
        credential_id: "AKIA-ST-0001".into(),
        holder: id.clone(),
        systems: ["cyberark".to_string()].into(),
        created_at: t0(),
        last_rotated: t0(),
        waiver_id: None,
        retired: false,
    };
    state.store().execute(Command::AddStaticCredential { credential: key }, t0()).unwrap();
    let expires = t0() + Duration::days(30);
    let feed = [
        json!({"indicator_id": "st-cred-01", "kind": "credential-pattern", "matcher": "AKIA-ST-*",
               "campaign": "silk-typhoon", "expires_at": expires}),
        json!({"indicator_id": "st-sys-01", "kind": "system-target", "matcher": "cyberark",
               "campaign": "silk-typhoon", "expires_at": expires}),
    ]
    .iter()
    .map(Value::to_string)
    .collect::<Vec<_>>()
    .join("\n");
    let req = axum::http::Request::builder()
        .method("POST")
        .uri("/threat/indicators")
        .body(axum::body::Body::from(feed))
        .unwrap();
    let (st, v) = raw(&app, req).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["effective"], json!(2));

    let (_, exposure) = call(&app, "GET", "/threat/exposure", None).await;
    let row = exposure["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["credential_id"] == "AKIA-ST-0001")
        .expect("planted key listed")
        .clone();
    assert_eq!(row["standing"], json!(true));
    assert_eq!(row["campaigns"], json!(["silk-typhoon"]));

    let (_, preview) = call(&app, "GET", "/risk/intersections", None).await;
    let before = ledger_len(&app).await;
    let (st, scanned) = call(&app, "POST", "/risk/intersections/scan", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(scanned, preview);
    assert!(!scanned.as_array().unwrap().is_empty());
    assert_eq!(ledger_len(&app).await, before + scanned.as_array().unwrap().len() as u64);

    let (_, catalog) = call(&app, "GET", "/risk/catalog", None).await;
    assert!(!catalog.as_array().unwrap().is_empty());
}

#[tokio::test]
async fn reads_report_plane_state() {
    let (app, _) = app();
    let id = active_identity(&app, "agents/r").await;
    with_task(&app, &id, "T-1").await;
    call(&app, "POST", "/decide", Some(json!(request(&id, "T-1", "crm", ActionVerb::Read, DataClass::Public)))).await;
    let (st, m) = call(&app, "GET", "/metrics", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(m["coverage"]["registered"]["value"], json!(100.0));
    assert_eq!(m["program"]["chain_valid"], json!(true));
    let (_, p) = call(&app, "GET", "/metrics/phase/1", None).await;
    assert_eq!(p["passed"], json!(true));
    let (_, r) = call(&app, "GET", "/audit/reconstruct?task=T-1", None).await;
    assert!(r.is_object());
    let (_, orphans) = call(&app, "GET", "/orphans", None).await;
    assert_eq!(orphans, json!([]));
    let (_, c) = call(&app, "GET", "/regulatory/conflicts", None).await;
    assert_eq!(c["matrix"].as_array().unwrap().len(), 18);
}

/// The same operations through HTTP and directly on a plane built from the
/// same seed produce the same responses and the same ledger head.
#[tokio::test]
async fn api_matches_direct_plane_calls() {
    let (app, state) = app();
    let mut p = ControlPlane::new(PlaneConfig::default(), SEED).unwrap();
    let id = uri("agents/parity");
    let s = spec("agents/parity");

    let (_, v) = call(&app, "POST", "/identities", Some(json!({"spec": s, "approver": approver()}))).await;
    assert_eq!(v, json!(p.register_identity(s.clone(), &approver(), t0()).unwrap()));
    for event in [LifecycleEvent::Approve, LifecycleEvent::Activate] {
        let (_, v) = call(&app, "POST", &format!("/identities/{}/lifecycle", path_id(&id)), Some(json!({"event": event}))).await;
        assert_eq!(v["state"], json!(p.transition(&id, event, t0()).unwrap()));
    }
    let (_, v) = call(&app, "GET", &format!("/identities/{}", path_id(&id)), None).await;
    assert_eq!(v, json!(p.registry().get(&id).unwrap()));

    call(&app, "POST", "/tasks", Some(json!(task(&id, "T-1")))).await;
    p.register_task(task(&id, "T-1"), t0()).unwrap();

    let allow = request(&id, "T-1", "crm", ActionVerb::Read, DataClass::Public);
    let (_, v) = call(&app, "POST", "/decide", Some(json!(allow))).await;
    assert_eq!(v, json!(p.decide(allow).unwrap()));
    let esc = escalating(&id, "T-1");
    let (_, v) = call(&app, "POST", "/decide", Some(json!(esc))).await;
    assert_eq!(v, json!(p.decide(esc).unwrap()));

    let (_, v) = call(&app, "GET", "/escalations", None).await;
    assert_eq!(v, json!(p.escalations().all().collect::<Vec<_>>()));
    let esc_id = v[0]["escalation_id"].as_str().unwrap().to_string();
    let (_, v) = call(
        &app,
        "POST",
        &format!("/escalations/{esc_id}/resolve"),
        Some(json!({"verdict": "violation", "resolver": "alice", "note": ""})),
    )
    .await;
    let (escalation, autonomy) = p
        .resolve_escalation(&esc_id, ResolutionVerdict::ConfirmedViolation, "alice", "", t0())
        .unwrap();
    assert_eq!(v, json!({"escalation": escalation, "autonomy": autonomy}));

    let (_, v) = call(&app, "POST", "/aibom", Some(json!(aibom("m-1", b"w")))).await;
    assert_eq!(v["aibom_ref"], json!(p.register_aibom(aibom("m-1", b"w"), t0()).unwrap()));

    let (_, v) = call(&app, "GET", "/metrics", None).await;
    assert_eq!(v, json!(p.metrics(t0())));
    let (_, v) = call(&app, "GET", "/standing", None).await;
    assert_eq!(v, json!(p.standing_privilege(t0())));
    let (_, v) = call(&app, "GET", "/risk/intersections", None).await;
    assert_eq!(v, json!(p.intersections(t0())));
    let (_, v) = call(&app, "GET", "/threat/exposure", None).await;
    assert_eq!(v, json!(p.exposure_assessment(t0())));

    let store = state.store();
    assert_eq!(store.plane().ledger().len(), p.ledger().len());
    assert_eq!(store.plane().ledger().head_hash(), p.ledger().head_hash());
}

#[test]
fn restart_replays_to_the_same_ledger_head() {
    let dir = tempfile::tempdir().unwrap();
    let id = uri("agents/durable");
    let commands = vec![
        Command::RegisterIdentity {
            spec: spec("agents/durable"),
            approver: approver(),
        },
        Command::Lifecycle {
            id: id.clone(),
            event: LifecycleEvent::Approve,
        },
        Command::Lifecycle {
            id: id.clone(),
            event: LifecycleEvent::Activate,
        },
        Command::EnrollWorkload { id: id.clone() },
        Command::RegisterTask { spec: task(&id, "T-1") },
        Command::Decide {
            request: request(&id, "T-1", "crm", ActionVerb::Read, DataClass::Public),
        },
    ];
    let (head, len, assessment) = {
        let mut store = Store::open(dir.path(), PlaneConfig::default()).unwrap();
        let mut last = Value::Null;
        for c in commands {
            last = store.execute(c, t0()).unwrap();
        }
        let scope: Scope = [ScopeItem::new("crm", ResourcePattern::any(), ActionVerb::Read)].into_iter().collect();
        let issued = store
            .execute(
                Command::IssueCredential {
                    id: id.clone(),
                    task_id: "T-1".into(),
                    scope,
                    assessment_id: last["assessment_id"].as_str().unwrap().into(),
                },
                t0(),
            )
            .unwrap();
        assert!(issued["token"].is_string());
        let failed = store.execute(Command::Lifecycle { id: id.clone(), event: LifecycleEvent::Approve }, t0());
        assert!(failed.is_err());
        (store.plane().ledger().head_hash(), store.plane().ledger().len(), last)
    };
    let reopened = Store::open(dir.path(), PlaneConfig::default()).unwrap();
    assert_eq!(reopened.applied(), 7, "rejected commands are not logged");
    assert_eq!(reopened.plane().ledger().len(), len);
    assert_eq!(reopened.plane().ledger().head_hash(), head);
    let id_str = assessment["assessment_id"].as_str().unwrap();
    assert_eq!(json!(reopened.plane().assessment(id_str).unwrap()), assessment);
    assert_eq!(reopened.plane().authority().credentials().count(), 1);
}
