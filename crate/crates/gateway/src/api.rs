//! HTTP/JSON service. Handlers are thin: writes become [`Command`]s executed
//! by the store, reads go through [`crate::query`].

use std::fs::File;
use std::sync::{Arc, Mutex, MutexGuard};

use agentgov_core::audit::ReconstructQuery;
use agentgov_core::canonical::Digest32;
use agentgov_core::governor::{AccessRequest, GovernorError, ResolutionVerdict, TaskSpec};
use agentgov_core::plane::PlaneError;
use agentgov_core::provenance::{digest_stream, AibomRecord};
use agentgov_core::registry::{IdentitySpec, LifecycleEvent, LifecycleState, OwnerRef, RegistryError};
use agentgov_core::regulatory::{ConflictEntry, ConflictStatus, RegulatoryError};
use agentgov_core::scope::Scope;
use agentgov_core::uri::WorkloadUri;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::command::Command;
use crate::query;
use crate::store::{Store, StoreError};

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<Store>>,
    clock: Clock,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        Self::with_clock(store, Arc::new(Utc::now))
    }

    pub fn with_clock(store: Store, clock: Clock) -> Self {
        Self {
            store: Arc::new(Mutex::new(store)),
            clock,
        }
    }

    pub fn store(&self) -> MutexGuard<'_, Store> {
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    fn execute(&self, command: Command) -> Result<Value, ApiError> {
        let now = self.now();
        Ok(self.store().execute(command, now)?)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("not found: {what}"))
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::Plane(p) => plane_status(p),
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

fn plane_status(e: &PlaneError) -> StatusCode {
    match e {
        PlaneError::Registry(RegistryError::UnknownIdentity(_))
        | PlaneError::Governor(GovernorError::UnknownEscalation(_))
        | PlaneError::Regulatory(RegulatoryError::UnknownConflict(_))
        | PlaneError::UnknownAssessment(_) => StatusCode::NOT_FOUND,
        PlaneError::Registry(
            RegistryError::DuplicateId(_) | RegistryError::DuplicateTask(_) | RegistryError::IllegalTransition { .. },
        )
        | PlaneError::Governor(GovernorError::AlreadyResolved(_))
        | PlaneError::Regulatory(RegulatoryError::DuplicateConflict(_))
        | PlaneError::IdentityNotActive(_) => StatusCode::CONFLICT,
        PlaneError::Credential(_) => StatusCode::FORBIDDEN,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message}))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn ok(value: impl serde::Serialize) -> ApiResult {
    Ok(Json(value).into_response())
}

fn created(value: Value) -> ApiResult {
    Ok((StatusCode::CREATED, Json(value)).into_response())
}

fn parse_id(raw: &str) -> Result<WorkloadUri, ApiError> {
    WorkloadUri::parse(raw).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/identities", post(register_identity).get(list_identities))
        .route("/identities/{id}", get(get_identity))
        .route("/identities/{id}/lifecycle", post(lifecycle))
        .route("/identities/{id}/baseline", post(rebuild_baseline))
        .route("/identities/{id}/certify", post(certify))
        .route("/orphans", get(orphans))
        .route("/tasks", post(register_task))
        .route("/tasks/{task_id}/complete", post(complete_task))
        .route("/credentials", post(issue_credential))
        .route("/standing", get(standing))
        .route("/decide", post(decide))
        .route("/escalations", get(list_escalations).post(resolve_escalation_body))
        .route("/escalations/{id}/resolve", post(resolve_escalation))
        .route("/audit/verify", get(audit_verify))
        .route("/audit/reconstruct", get(reconstruct))
        .route("/aibom", post(register_aibom))
        .route("/aibom/{model_id}/verify", post(verify_model))
        .route("/regulatory/conflicts", get(conflicts).post(register_conflict))
        .route("/regulatory/conflicts/{id}/status", post(conflict_status))
        .route("/metrics", get(metrics))
        .route("/metrics/phase/{n}", get(phase))
        .route("/threat/indicators", post(ingest_indicators))
        .route("/threat/exposure", get(exposure))
        .route("/risk/intersections", get(intersections))
        .route("/risk/intersections/scan", post(scan_intersections))
        .route("/risk/catalog", get(catalog))
        .with_state(state)
}

#[derive(Deserialize)]
struct RegisterBody {
    spec: IdentitySpec,
    approver: OwnerRef,
}

async fn register_identity(State(s): State<AppState>, Json(b): Json<RegisterBody>) -> ApiResult {
    created(s.execute(Command::RegisterIdentity {
        spec: b.spec,
        approver: b.approver,
    })?)
}

#[derive(Deserialize)]
struct StateFilter {
    state: Option<LifecycleState>,
}

async fn list_identities(State(s): State<AppState>, Query(q): Query<StateFilter>) -> ApiResult {
    ok(query::identities(s.store().plane(), q.state))
}

async fn get_identity(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let id = parse_id(&id)?;
    let found = query::identity(s.store().plane(), &id);
    found.map_or_else(|| Err(ApiError::not_found(&id)), ok)
}

#[derive(Deserialize)]
struct LifecycleBody {
    event: LifecycleEvent,
}

async fn lifecycle(State(s): State<AppState>, Path(id): Path<String>, Json(b): Json<LifecycleBody>) -> ApiResult {
    ok(s.execute(Command::Lifecycle {
        id: parse_id(&id)?,
        event: b.event,
    })?)
}

#[derive(Deserialize)]
struct BaselineBody {
    history: Vec<AccessRequest>,
}

async fn rebuild_baseline(State(s): State<AppState>, Path(id): Path<String>, Json(b): Json<BaselineBody>) -> ApiResult {
    ok(s.execute(Command::RebuildBaseline {
        id: parse_id(&id)?,
        history: b.history,
    })?)
}

#[derive(Deserialize)]
struct CertifyBody {
    attesting_owner: String,
}

async fn certify(State(s): State<AppState>, Path(id): Path<String>, Json(b): Json<CertifyBody>) -> ApiResult {
    ok(s.execute(Command::Certify {
        id: parse_id(&id)?,
        attesting_owner: b.attesting_owner,
    })?)
}

async fn orphans(State(s): State<AppState>) -> ApiResult {
    let now = s.now();
    ok(query::orphans(s.store().plane(), now))
}

async fn register_task(State(s): State<AppState>, Json(spec): Json<TaskSpec>) -> ApiResult {
    created(s.execute(Command::RegisterTask { spec })?)
}

async fn complete_task(State(s): State<AppState>, Path(task_id): Path<String>) -> ApiResult {
    ok(s.execute(Command::CompleteTask { task_id })?)
}

#[derive(Deserialize)]
struct CredentialBody {
    id: WorkloadUri,
    task_id: String,
    scope: Scope,
    assessment_id: String,
}

async fn issue_credential(State(s): State<AppState>, Json(b): Json<CredentialBody>) -> ApiResult {
    created(s.execute(Command::IssueCredential {
        id: b.id,
        task_id: b.task_id,
        scope: b.scope,
        assessment_id: b.assessment_id,
    })?)
}

async fn standing(State(s): State<AppState>) -> ApiResult {
    let now = s.now();
    ok(query::standing(s.store().plane(), now))
}

async fn decide(State(s): State<AppState>, Json(request): Json<AccessRequest>) -> ApiResult {
    ok(s.execute(Command::Decide { request })?)
}

#[derive(Deserialize)]
struct EscalationFilter {
    #[serde(default)]
    pending: bool,
}

async fn list_escalations(State(s): State<AppState>, Query(q): Query<EscalationFilter>) -> ApiResult {
    ok(query::escalations(s.store().plane(), q.pending))
}

#[derive(Deserialize)]
struct ResolveBody {
    verdict: ResolutionVerdict,
    resolver: String,
    #[serde(default)]
    note: String,
}

#[derive(Deserialize)]
struct ResolveByIdBody {
    escalation_id: String,
    #[serde(flatten)]
    resolution: ResolveBody,
}

fn resolve(s: &AppState, escalation_id: String, b: ResolveBody) -> ApiResult {
    ok(s.execute(Command::ResolveEscalation {
        escalation_id,
        verdict: b.verdict,
        resolver: b.resolver,
        note: b.note,
    })?)
}

async fn resolve_escalation(State(s): State<AppState>, Path(id): Path<String>, Json(b): Json<ResolveBody>) -> ApiResult {
    resolve(&s, id, b)
}

async fn resolve_escalation_body(State(s): State<AppState>, Json(b): Json<ResolveByIdBody>) -> ApiResult {
    resolve(&s, b.escalation_id, b.resolution)
}

async fn audit_verify(State(s): State<AppState>) -> ApiResult {
    ok(query::audit_verify(s.store().plane()))
}

async fn reconstruct(State(s): State<AppState>, Query(q): Query<ReconstructQuery>) -> ApiResult {
    let out = query::reconstruct(s.store().plane(), &q).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    ok(out)
}

async fn register_aibom(State(s): State<AppState>, Json(record): Json<AibomRecord>) -> ApiResult {
    created(s.execute(Command::RegisterAibom { record })?)
}

/// Either a path readable by the service or a digest computed elsewhere.
#[derive(Deserialize)]
#[serde(untagged)]
enum ArtifactBody {
    Path { path: String },
    Digest { digest: Digest32 },
}

async fn verify_model(State(s): State<AppState>, Path(model_id): Path<String>, Json(b): Json<ArtifactBody>) -> ApiResult {
    let digest = match b {
        ArtifactBody::Digest { digest } => digest,
        ArtifactBody::Path { path } => File::open(&path)
            .and_then(digest_stream)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("{path}: {e}")))?,
    };
    ok(s.execute(Command::VerifyModelDigest { model_id, digest })?)
}

async fn conflicts(State(s): State<AppState>) -> ApiResult {
    ok(query::conflicts(s.store().plane()))
}

async fn register_conflict(State(s): State<AppState>, Json(entry): Json<ConflictEntry>) -> ApiResult {
    created(s.execute(Command::RegisterConflict { entry })?)
}

#[derive(Deserialize)]
struct ConflictStatusBody {
    status: ConflictStatus,
    #[serde(default)]
    approach: Option<String>,
}

async fn conflict_status(State(s): State<AppState>, Path(id): Path<String>, Json(b): Json<ConflictStatusBody>) -> ApiResult {
    ok(s.execute(Command::SetConflictStatus {
        conflict_id: id,
        status: b.status,
        approach: b.approach,
    })?)
}

async fn metrics(State(s): State<AppState>) -> ApiResult {
    let now = s.now();
    ok(query::metrics(s.store().plane(), now))
}

async fn phase(State(s): State<AppState>, Path(n): Path<u8>) -> ApiResult {
    let now = s.now();
    let report = query::phase(s.store().plane(), n, now).map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e.to_string()))?;
    ok(report)
}

/// Body is the JSON Lines feed itself.
async fn ingest_indicators(State(s): State<AppState>, feed: String) -> ApiResult {
    ok(s.execute(Command::IngestIndicators { feed })?)
}

async fn exposure(State(s): State<AppState>) -> ApiResult {
    let now = s.now();
    ok(query::exposure(s.store().plane(), now))
}

async fn intersections(State(s): State<AppState>) -> ApiResult {
    let now = s.now();
    ok(query::intersections(s.store().plane(), now))
}

async fn scan_intersections(State(s): State<AppState>) -> ApiResult {
    ok(s.execute(Command::ScanIntersections)?)
}

async fn catalog(State(s): State<AppState>) -> ApiResult {
    ok(s.store().plane().catalog().iter().cloned().collect::<Vec<_>>())
}

/// Binds and serves until ctrl-c.
pub async fn serve(listen: &str, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
