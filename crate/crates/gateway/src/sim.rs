//! Seeded workload simulator. Drives the control plane through the full
//! pipeline (register, measure, decide, issue, act, revoke, audit) on a
//! single thread, so equal `(name, seed)` pairs give identical ledgers.

use std::collections::{BTreeMap, BTreeSet};

use agentgov_core::canonical::Digest32;
use agentgov_core::config::PlaneConfig;
use agentgov_core::credentials::{CredentialVerdict, StandingViolation, StaticCredential, ToolDescriptor};
use agentgov_core::governor::{AccessRequest, Decision, ResolutionVerdict, TaskSpec, ToolScope};
use agentgov_core::metrics::MetricsReport;
use agentgov_core::plane::{ControlPlane, PlaneResult};
use agentgov_core::provenance::AibomRecord;
use agentgov_core::registry::{AccessGrant, IdentityKind, IdentitySpec, LifecycleEvent, OwnerRef};
use agentgov_core::regulatory::JurisdictionTier;
use agentgov_core::risk::IntersectionAlert;
use agentgov_core::scope::{ActionVerb, DataClass, ResourcePattern, Scope, ScopeItem};
use agentgov_core::threat::ExposureReport;
use agentgov_core::uri::WorkloadUri;
use chrono::{DateTime, Duration, TimeZone, Timelike, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

const TRUST_DOMAIN: &str = "sim.example";
const SYSTEMS: [&str; 7] = ["crm", "tickets", "wiki", "billing", "analytics", "storage", "mail"];
const INJECTED_TOOLS: [&str; 3] = ["shell", "paste-service", "dns-tunnel"];
const INJECTED_ACTIONS: [ActionVerb; 5] = [
    ActionVerb::Write,
    ActionVerb::Send,
    ActionVerb::Publish,
    ActionVerb::Execute,
    ActionVerb::Delete,
];
const INJECTED_CLASSES: [DataClass; 4] = [
    DataClass::Internal,
    DataClass::Confidential,
    DataClass::Restricted,
    DataClass::Critical,
];
const OWNERS: usize = 25;
const WORK_START: u32 = 8;
const WORK_END: u32 = 18;
const HISTORY_PER_HOUR: usize = 3;
const VOLUME_MIN: u64 = 10;
const VOLUME_P95: u64 = 50;
const RESOLVE_EVERY: usize = 25;
pub const PLANTED_KEY: &str = "AKIA-ST-0001";
pub const CAMPAIGN: &str = "silk-typhoon";
const BRIDGE_PATH: &str = "svc/sync-bridge";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    Benign,
    InjectionDrift,
    SilkTyphoon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: ScenarioName,
    pub seed: u64,
    pub identities: usize,
    pub requests: usize,
    /// Gaps between requests are uniform on `1..=2 * mean_gap_secs`.
    pub mean_gap_secs: u64,
    /// Share of identities whose sessions are hijacked (injection-drift).
    pub compromised_share: f64,
    /// Chance that a hijacked identity's request is an injected one.
    pub injection_rate: f64,
}

impl Scenario {
    pub fn new(name: ScenarioName, seed: u64) -> Self {
        let (identities, requests) = match name {
            ScenarioName::Benign => (1_000, 10_000),
            ScenarioName::InjectionDrift => (200, 4_000),
            ScenarioName::SilkTyphoon => (200, 2_000),
        };
        Self {
            name,
            seed,
            identities,
            requests,
            mean_gap_secs: 3,
            compromised_share: 0.1,
            injection_rate: 0.3,
        }
    }

    pub fn sized(mut self, identities: usize, requests: usize) -> Self {
        self.identities = identities;
        self.requests = requests;
        self
    }
}

/// Injection-drift bookkeeping. Injected requests use a tool outside the
/// task; conforming ones stay inside the task and the baseline.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftOutcome {
    pub injected: u64,
    pub injected_contained: u64,
    pub conforming: u64,
    pub conforming_denied: u64,
    /// Conforming requests that scored any deviation or misalignment; a
    /// nonzero value means the generator left the baseline.
    pub conforming_off_baseline: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub scenario: Scenario,
    pub decisions: BTreeMap<Decision, u64>,
    pub credentials_issued: u64,
    /// Issued tokens that failed verification when presented.
    pub credential_failures: u64,
    pub escalations_resolved: u64,
    pub confirmed_violations: u64,
    pub drift: Option<DriftOutcome>,
    pub alerts: Vec<IntersectionAlert>,
    pub exposure: ExposureReport,
    pub standing_violations: Vec<StandingViolation>,
    pub live_credentials: usize,
    pub audit_valid: bool,
    pub ledger_entries: u64,
    pub ledger_head: Digest32,
    pub metrics: MetricsReport,
}

impl SimulationReport {
    pub fn count(&self, d: Decision) -> u64 {
        self.decisions.get(&d).copied().unwrap_or(0)
    }
}

pub fn run_simulation(scenario: &Scenario) -> SimulationReport {
    simulate(scenario).1
}

/// Runs the scenario and also returns the final plane for inspection.
pub fn simulate(scenario: &Scenario) -> (ControlPlane, SimulationReport) {
    Simulator::new(scenario.clone())
        .run()
        .expect("simulator only issues operations the plane accepts")
}

struct Profile {
    id: WorkloadUri,
    /// Each tool with the actions its grant allows.
    tools: Vec<(String, Vec<ActionVerb>)>,
    partner: String,
    session: String,
    compromised: bool,
}

struct Simulator {
    scenario: Scenario,
    rng: ChaCha8Rng,
    plane: ControlPlane,
    clock: DateTime<Utc>,
    profiles: Vec<Profile>,
    decisions: BTreeMap<Decision, u64>,
    injected: BTreeSet<String>,
    drift: DriftOutcome,
    credentials_issued: u64,
    credential_failures: u64,
    escalations_resolved: u64,
    confirmed_violations: u64,
    alerts: BTreeSet<IntersectionAlert>,
}

fn uri(path: &str) -> WorkloadUri {
    WorkloadUri::new(TRUST_DOMAIN, path).expect("simulator paths are valid")
}

fn start_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 1, 5, WORK_START, 0, 0).unwrap()
}

impl Simulator {
    fn new(scenario: Scenario) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let key_seed: [u8; 32] = rng.random();
        let config = PlaneConfig {
            trust_domain: TRUST_DOMAIN.into(),
            ..PlaneConfig::default()
        };
        Self {
            plane: ControlPlane::new(config, key_seed).expect("default config is valid"),
            rng,
            clock: start_time(),
            profiles: Vec::new(),
            decisions: BTreeMap::new(),
            injected: BTreeSet::new(),
            drift: DriftOutcome::default(),
            credentials_issued: 0,
            credential_failures: 0,
            escalations_resolved: 0,
            confirmed_violations: 0,
            alerts: BTreeSet::new(),
            scenario,
        }
    }

    fn run(mut self) -> PlaneResult<(ControlPlane, SimulationReport)> {
        for i in 0..self.scenario.identities {
            self.onboard(i)?;
        }
        if self.scenario.name == ScenarioName::SilkTyphoon {
            self.plant_bridge()?;
        }
        for n in 0..self.scenario.requests {
            self.tick();
            if self.scenario.name == ScenarioName::SilkTyphoon && n == self.scenario.requests / 2 {
                self.ingest_campaign_feed()?;
            }
            let p = self.rng.random_range(0..self.profiles.len());
            self.episode(p, n)?;
            if (n + 1) % RESOLVE_EVERY == 0 {
                self.triage()?;
            }
        }
        self.triage()?;
        let now = self.clock;
        self.alerts.extend(self.plane.scan_intersections(now));
        let report = SimulationReport {
            drift: (self.scenario.name == ScenarioName::InjectionDrift).then(|| self.drift.clone()),
            decisions: self.decisions,
            credentials_issued: self.credentials_issued,
            credential_failures: self.credential_failures,
            escalations_resolved: self.escalations_resolved,
            confirmed_violations: self.confirmed_violations,
            alerts: self.alerts.into_iter().collect(),
            exposure: self.plane.exposure_assessment(now),
            standing_violations: self.plane.standing_privilege(now),
            live_credentials: self.plane.authority().live_credentials(now).count(),
            audit_valid: self.plane.verify_audit().is_valid(),
            ledger_entries: self.plane.ledger().len(),
            ledger_head: self.plane.ledger().head_hash(),
            metrics: self.plane.metrics(now),
            scenario: self.scenario,
        };
        Ok((self.plane, report))
    }

    /// Advances the clock, skipping nights so every request falls in the
    /// working hours the baselines were built over.
    fn tick(&mut self) {
        let gap = self.rng.random_range(1..=2 * self.scenario.mean_gap_secs.max(1));
        self.clock += Duration::seconds(gap as i64);
        if self.clock.hour() >= WORK_END {
            let next = self.clock.date_naive().succ_opt().expect("in range");
            self.clock = next.and_hms_opt(WORK_START, 0, 0).expect("valid time").and_utc();
        }
    }

    fn onboard(&mut self, i: usize) -> PlaneResult<()> {
        let now = self.clock;
        let agent = i.is_multiple_of(10);
        let (kind, path) = if agent {
            (IdentityKind::Agent, format!("agents/{i:05}"))
        } else {
            (IdentityKind::ServiceAccount, format!("svc/{i:05}"))
        };
        let id = uri(&path);
        let n_tools = self.rng.random_range(2..=3);
        let mut systems = SYSTEMS.to_vec();
        systems.shuffle(&mut self.rng);
        let tools: Vec<(String, Vec<ActionVerb>)> = systems[..n_tools]
            .iter()
            .map(|s| {
                let actions = if *s == "mail" {
                    vec![ActionVerb::Read, ActionVerb::Send]
                } else {
                    vec![ActionVerb::Read, ActionVerb::Write]
                };
                (s.to_string(), actions)
            })
            .collect();
        let owner = format!("owner-{:02}", self.rng.random_range(0..OWNERS));
        let aibom_ref = if agent { Some(self.register_model(i)?) } else { None };
        let grants = tools
            .iter()
            .map(|(t, actions)| {
                let mut g = AccessGrant::jit(t.clone(), ResourcePattern::any(), actions.iter().copied());
                g.data_class = DataClass::Confidential;
                g
            })
            .collect();
        self.plane.register_identity(
            IdentitySpec {
                id: id.clone(),
                kind,
                purpose: format!("simulated workload {i}"),
                owner: Some(OwnerRef::new(owner.clone(), owner.clone())),
                grants,
                associated_systems: Default::default(),
                jurisdiction_tier: JurisdictionTier::Single,
                aibom_ref,
                autonomy: 2,
            },
            &OwnerRef::new("sec-approver", "Provisioning approver"),
            now,
        )?;
        self.plane.transition(&id, LifecycleEvent::Approve, now)?;
        self.plane.transition(&id, LifecycleEvent::Activate, now)?;
        self.plane.enroll_workload(&id, now)?;
        let session = format!("sess-{i:05}");
        let manifest: Vec<ToolDescriptor> = tools
            .iter()
            .map(|(t, _)| ToolDescriptor {
                name: t.clone(),
                version: "1".into(),
                description: String::new(),
            })
            .collect();
        self.plane.measure_toolset(&id, &session, &manifest, now)?;
        let compromised = self.scenario.name == ScenarioName::InjectionDrift
            && self.rng.random_bool(self.scenario.compromised_share);
        let profile = Profile {
            id: id.clone(),
            tools,
            partner: format!("partner-{}.example", i % 5),
            session,
            compromised,
        };
        let history = self.history(&profile);
        self.plane.rebuild_baseline(&id, &history, now)?;
        // Every twentieth identity arrives with a legacy key from the
        // inventory scan; onboarding to JIT retires it.
        if i.is_multiple_of(20) {
            let key = format!("legacy-{i:05}");
            self.plane.add_static_credential(
                StaticCredential {
                    credential_id: key.clone(),
                    holder: id,
                    systems: [profile.tools[0].0.clone()].into(),
                    created_at: now - Duration::days(400),
                    last_rotated: now - Duration::days(400),
                    waiver_id: None,
                    retired: false,
                },
                now,
            )?;
            self.plane.retire_static_credential(&key, now)?;
        }
        self.profiles.push(profile);
        Ok(())
    }

    fn register_model(&mut self, i: usize) -> PlaneResult<String> {
        let now = self.clock;
        let model_id = format!("model-{i:05}");
        let weights = Digest32::of(format!("weights-{i}").as_bytes());
        let reference = self.plane.register_aibom(
            AibomRecord {
                model_id: model_id.clone(),
                architecture: "decoder-only transformer".into(),
                training_data: vec![],
                fine_tuning: vec![],
                dependencies: vec![],
                modifications: vec![],
                parameter_digest: Some(weights),
                gpai: false,
                gpai_doc_ref: None,
            },
            now,
        )?;
        self.plane.verify_model_digest(&model_id, &weights, now);
        Ok(reference)
    }

    /// Synthetic pre-deployment history: every working hour, every tool,
    /// volumes whose nearest-rank p95 is exactly `VOLUME_P95`.
    fn history(&mut self, p: &Profile) -> Vec<AccessRequest> {
        let day = start_time() - Duration::days(1);
        let mut out = Vec::new();
        for hour in WORK_START..WORK_END {
            for k in 0..HISTORY_PER_HOUR {
                let (tool, actions) = &p.tools[(hour as usize + k) % p.tools.len()];
                let action = actions[k % actions.len()];
                let minute = self.rng.random_range(0..60);
                out.push(AccessRequest {
                    identity: p.id.clone(),
                    session_id: "history".into(),
                    task_id: "history".into(),
                    tool: tool.clone(),
                    resource: ResourcePattern::any(),
                    action,
                    data_class: DataClass::Internal,
                    recipients: self.recipients(p, tool, action),
                    data_volume: self.rng.random_range(VOLUME_MIN..=VOLUME_P95),
                    timestamp: day + Duration::hours(i64::from(hour - WORK_START)) + Duration::minutes(minute),
                    context_notes: String::new(),
                });
            }
        }
        for r in out.iter_mut().rev().take(2) {
            r.data_volume = VOLUME_P95;
        }
        out
    }

    fn recipients(&self, p: &Profile, tool: &str, action: ActionVerb) -> BTreeSet<String> {
        if tool == "mail" && action == ActionVerb::Send {
            [format!("ops@{}", p.partner)].into()
        } else {
            BTreeSet::new()
        }
    }

    fn plant_bridge(&mut self) -> PlaneResult<()> {
        let now = self.clock;
        let id = uri(BRIDGE_PATH);
        let mut send = AccessGrant::jit("mail", ResourcePattern::any(), [ActionVerb::Read, ActionVerb::Send]);
        send.data_class = DataClass::Confidential;
        let vault = AccessGrant::jit("cyberark", ResourcePattern::any(), [ActionVerb::Read]);
        let owner = OwnerRef::new("owner-00", "owner-00");
        self.plane.register_identity(
            IdentitySpec {
                id: id.clone(),
                kind: IdentityKind::ServiceAccount,
                purpose: "directory sync bridge".into(),
                owner: Some(owner),
                grants: vec![vault, send],
                associated_systems: ["cyberark".to_string()].into(),
                jurisdiction_tier: JurisdictionTier::Single,
                aibom_ref: None,
                autonomy: 2,
            },
            &OwnerRef::new("sec-approver", "Provisioning approver"),
            now,
        )?;
        self.plane.transition(&id, LifecycleEvent::Approve, now)?;
        self.plane.transition(&id, LifecycleEvent::Activate, now)?;
        // The stolen key: long-lived, never rotated, never retired.
        self.plane.add_static_credential(
            StaticCredential {
                credential_id: PLANTED_KEY.into(),
                holder: id.clone(),
                systems: ["cyberark".to_string(), "mail".to_string()].into(),
                created_at: now - Duration::days(700),
                last_rotated: now - Duration::days(700),
                waiver_id: None,
                retired: false,
            },
            now,
        )?;
        let profile = Profile {
            id,
            tools: vec![
                ("cyberark".into(), vec![ActionVerb::Read]),
                ("mail".into(), vec![ActionVerb::Read, ActionVerb::Send]),
            ],
            partner: "partner-0.example".into(),
            session: "sess-bridge".into(),
            compromised: false,
        };
        let history = self.history(&profile);
        self.plane.rebuild_baseline(&profile.id, &history, now)?;
        self.profiles.push(profile);
        Ok(())
    }

    fn ingest_campaign_feed(&mut self) -> PlaneResult<()> {
        let now = self.clock;
        let expires = now + Duration::days(30);
        let feed = [
            json!({"indicator_id": "st-cred-01", "kind": "credential-pattern", "matcher": "AKIA-ST-*",
                   "campaign": CAMPAIGN, "expires_at": expires}),
            json!({"indicator_id": "st-sys-01", "kind": "system-target", "matcher": "cyberark",
                   "campaign": CAMPAIGN, "expires_at": expires}),
        ]
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("\n");
        self.plane.ingest_indicators(&feed, now)?;
        self.alerts.extend(self.plane.scan_intersections(now));
        Ok(())
    }

    fn episode(&mut self, p: usize, n: usize) -> PlaneResult<()> {
        let now = self.clock;
        let task_id = format!("task-{n:06}");
        let profile = &self.profiles[p];
        let id = profile.id.clone();
        let session = profile.session.clone();
        let tools = profile.tools.clone();
        let allowlist: BTreeSet<String> = [profile.partner.clone()].into();
        let injected = profile.compromised && self.rng.random_bool(self.scenario.injection_rate);
        self.plane.register_task(
            TaskSpec {
                task_id: task_id.clone(),
                identity: id.clone(),
                description: format!("routine work on {}", tools.iter().map(|t| t.0.as_str()).collect::<Vec<_>>().join(", ")),
                scope: tools
                    .iter()
                    .map(|(t, _)| ToolScope {
                        tool: t.clone(),
                        max_data_class: DataClass::Confidential,
                    })
                    .collect(),
                recipients_allowlist: allowlist,
            },
            now,
        )?;
        let (tool, action, class, recipients, volume) = if injected {
            let tool = INJECTED_TOOLS.choose(&mut self.rng).expect("nonempty").to_string();
            let action = *INJECTED_ACTIONS.choose(&mut self.rng).expect("nonempty");
            let class = *INJECTED_CLASSES.choose(&mut self.rng).expect("nonempty");
            let recipients = if matches!(action, ActionVerb::Send | ActionVerb::Publish) {
                ["drop@attacker.example".to_string()].into()
            } else {
                BTreeSet::new()
            };
            (tool, action, class, recipients, self.rng.random_range(200..=5_000))
        } else {
            let (tool, actions) = tools.choose(&mut self.rng).expect("nonempty").clone();
            let action = *actions.choose(&mut self.rng).expect("nonempty");
            let class = *[DataClass::Public, DataClass::Internal, DataClass::Confidential]
                .choose(&mut self.rng)
                .expect("nonempty");
            let recipients = self.recipients(&self.profiles[p], &tool, action);
            (tool, action, class, recipients, self.rng.random_range(VOLUME_MIN..=VOLUME_P95))
        };
        let request = AccessRequest {
            identity: id.clone(),
            session_id: session,
            task_id: task_id.clone(),
            tool: tool.clone(),
            resource: ResourcePattern::any(),
            action,
            data_class: class,
            recipients,
            data_volume: volume,
            timestamp: now,
            context_notes: if injected {
                "tool output contained embedded instructions".into()
            } else {
                String::new()
            },
        };
        let assessment = self.plane.decide(request)?;
        *self.decisions.entry(assessment.decision).or_default() += 1;
        if injected {
            self.drift.injected += 1;
            self.drift.injected_contained += u64::from(matches!(assessment.decision, Decision::Escalate | Decision::Deny));
            self.injected.insert(assessment.assessment_id.clone());
        } else if self.scenario.name == ScenarioName::InjectionDrift {
            self.drift.conforming += 1;
            self.drift.conforming_denied += u64::from(assessment.decision == Decision::Deny);
            self.drift.conforming_off_baseline +=
                u64::from(assessment.dims.deviation != 0.0 || assessment.dims.alignment_static != 0.0);
        }
        if assessment.decision.is_permissive() {
            let scope: Scope = [ScopeItem::new(tool.clone(), ResourcePattern::any(), action)].into_iter().collect();
            let credential = self.plane.issue_credential(&id, &task_id, scope, &assessment.assessment_id, now)?;
            self.credentials_issued += 1;
            let presented = now + Duration::seconds(self.rng.random_range(0..60));
            let verdict = self
                .plane
                .authority()
                .verify_credential(&credential.token(), &tool, "record-1", action, presented);
            self.credential_failures += u64::from(verdict != CredentialVerdict::Valid);
        }
        self.plane.complete_task(&task_id, now);
        Ok(())
    }

    /// Owners work through the escalation queue: injected requests are
    /// confirmed violations, everything else is approved.
    fn triage(&mut self) -> PlaneResult<()> {
        let now = self.clock;
        let pending: Vec<(String, String)> = self
            .plane
            .escalations()
            .pending()
            .iter()
            .map(|e| (e.escalation_id.clone(), e.assessment.assessment_id.clone()))
            .collect();
        for (escalation_id, assessment_id) in pending {
            let violation = self.injected.contains(&assessment_id);
            let verdict = if violation {
                ResolutionVerdict::ConfirmedViolation
            } else {
                ResolutionVerdict::Approved
            };
            let resolver = self
                .plane
                .escalations()
                .get(&escalation_id)
                .and_then(|e| self.plane.registry().get(&e.assessment.request.identity))
                .and_then(|i| i.owner_id().map(str::to_string))
                .unwrap_or_else(|| "sec-oncall".into());
            self.plane.resolve_escalation(&escalation_id, verdict, &resolver, "simulated triage", now)?;
            self.escalations_resolved += 1;
            self.confirmed_violations += u64::from(violation);
        }
        Ok(())
    }
}
