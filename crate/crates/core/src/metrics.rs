//! Program metrics and phase gates over a snapshot of the control plane.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{AuditLedger, ChainVerdict, EventKind};
use crate::credentials::CredentialAuthority;
use crate::governor::{EscalationQueue, RiskAssessment};
use crate::provenance::ProvenanceStore;
use crate::registry::{AgentIdentity, IdentityFlag, IdentityKind, LifecycleState, Registry};
use crate::regulatory::{ConflictRegistry, GovernanceDomain, Jurisdiction, JurisdictionMatrix};
use crate::threat::ThreatStore;
use crate::uri::WorkloadUri;

/// A ratio kept as integers so threshold checks are exact. An empty
/// population reads as 100%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percent {
    pub num: u64,
    pub den: u64,
    pub value: f64,
}

impl Percent {
    pub fn of(num: u64, den: u64) -> Self {
        assert!(num <= den, "ratio {num}/{den} exceeds one");
        let value = if den == 0 { 100.0 } else { num as f64 * 100.0 / den as f64 };
        Self { num, den, value }
    }

    pub fn at_least(&self, threshold: u64) -> bool {
        self.den == 0 || self.num * 100 >= threshold * self.den
    }

    fn count<T>(items: &[T], pred: impl Fn(&T) -> bool) -> Self {
        Self::of(items.iter().filter(|x| pred(x)).count() as u64, items.len() as u64)
    }
}

impl Default for Percent {
    fn default() -> Self {
        Self::of(0, 0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub registered: Percent,
    pub owner: Percent,
    pub crypto_id: Percent,
    pub crypto_id_tier1: Percent,
    pub baseline: Percent,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Hygiene {
    pub rotated_in_policy: Percent,
    pub jit: Percent,
    pub tier1_standing_static: u64,
    pub standing_violations: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Behavioral {
    pub deviations: u64,
    pub mean_time_to_investigate_secs: Option<f64>,
    pub threat_attributed: Percent,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Accountability {
    pub reconstructable_incidents: Percent,
    pub mean_time_to_attribution_secs: Option<f64>,
    pub orphans: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocStatus {
    Complete,
    Incomplete,
    #[default]
    NotApplicable,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Compliance {
    pub obligations_mapped: Percent,
    pub open_conflicts: u64,
    pub eu_ai_act_doc: DocStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgramStatus {
    pub provisioning_process: bool,
    pub jit_pilot_active: bool,
    pub pdp_automation: bool,
    pub threat_feed_loaded: bool,
    pub chain_valid: bool,
    pub aibom_coverage: Percent,
    pub conflict_registry_populated: bool,
    pub changelog_entries: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub generated_at: Option<DateTime<Utc>>,
    pub coverage: Coverage,
    pub hygiene: Hygiene,
    pub behavioral: Behavioral,
    pub accountability: Accountability,
    pub compliance: Compliance,
    pub program: ProgramStatus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramSettings {
    pub provisioning_process: bool,
    pub pdp_automation: bool,
}

pub struct MetricsSnapshot<'a> {
    pub registry: &'a Registry,
    pub authority: &'a CredentialAuthority,
    pub ledger: &'a AuditLedger,
    pub escalations: &'a EscalationQueue,
    pub provenance: &'a ProvenanceStore,
    pub matrix: &'a JurisdictionMatrix,
    pub conflicts: &'a ConflictRegistry,
    pub threats: &'a ThreatStore,
    pub baselined: &'a BTreeSet<WorkloadUri>,
    pub assessments: &'a [RiskAssessment],
    /// Deviation score at or above which a decision counts as a deviation.
    pub deviation_alert: f64,
    pub settings: ProgramSettings,
    pub now: DateTime<Utc>,
}

/// PAM-adjacent identities and holders of administrative grants.
pub fn is_tier1(identity: &AgentIdentity) -> bool {
    identity.has_flag(IdentityFlag::PamAdjacent) || identity.grants.iter().any(|g| g.admin)
}

/// Discovered but never adopted.
fn is_shadow(identity: &AgentIdentity) -> bool {
    identity.has_flag(IdentityFlag::Shadow) && identity.owner.is_none()
}

fn mean_secs(spans: impl IntoIterator<Item = chrono::Duration>) -> Option<f64> {
    let (sum, n) = spans
        .into_iter()
        .fold((0i64, 0u64), |(s, n), d| (s + d.num_milliseconds(), n + 1));
    (n > 0).then(|| sum as f64 / 1000.0 / n as f64)
}

pub fn compute_metrics(s: &MetricsSnapshot<'_>) -> MetricsReport {
    let population: Vec<&AgentIdentity> = s
        .registry
        .iter()
        .filter(|i| i.state() != LifecycleState::Decommissioned)
        .collect();
    let registered: Vec<&AgentIdentity> = population.iter().copied().filter(|i| !is_shadow(i)).collect();
    let tier1: Vec<&AgentIdentity> = population.iter().copied().filter(|i| is_tier1(i)).collect();
    let enrolled = |i: &&AgentIdentity| s.authority.key_record(&i.id).is_some();

    let coverage = Coverage {
        registered: Percent::count(&population, |i| !is_shadow(i)),
        owner: Percent::count(&population, |i| i.owner.is_some()),
        crypto_id: Percent::count(&population, enrolled),
        crypto_id_tier1: Percent::count(&tier1, enrolled),
        baseline: Percent::count(&registered, |i| s.baselined.contains(&i.id)),
    };

    let statics: Vec<_> = s.authority.active_statics().collect();
    let holds_standing =
        |i: &AgentIdentity| i.grants.iter().any(|g| g.standing) || statics.iter().any(|c| c.holder == i.id);
    let tier1_standing_static = tier1
        .iter()
        .map(|i| {
            let grants = i.grants.iter().filter(|g| g.standing).count();
            let keys = statics.iter().filter(|c| c.holder == i.id).count();
            (grants + keys) as u64
        })
        .sum();
    let (rotated, total) = s.authority.rotation_in_policy(s.now);
    let hygiene = Hygiene {
        rotated_in_policy: Percent::of(rotated, total),
        jit: Percent::count(&population, |i| !holds_standing(i)),
        tier1_standing_static,
        standing_violations: s.authority.list_standing_privilege(s.registry, s.now).len() as u64,
    };

    let deviations: Vec<&RiskAssessment> = s
        .assessments
        .iter()
        .filter(|a| a.dims.deviation >= s.deviation_alert)
        .collect();
    let flagged = |a: &&RiskAssessment| s.registry.get(&a.request.identity).is_some_and(AgentIdentity::threat_flagged);
    let escalations: Vec<_> = s.escalations.all().collect();
    let behavioral = Behavioral {
        deviations: deviations.len() as u64,
        mean_time_to_investigate_secs: mean_secs(
            escalations
                .iter()
                .map(|e| e.resolution.as_ref().map_or(s.now, |r| r.resolved_at) - e.enqueued_at),
        ),
        threat_attributed: Percent::count(&deviations, flagged),
    };

    let verdict = s.ledger.verify_all();
    let intact_below = match verdict {
        ChainVerdict::Valid => s.ledger.len(),
        ChainVerdict::BrokenAt { sequence } => sequence,
    };
    let reconstructable = |seq: u64| {
        seq < intact_below && s.ledger.get(seq).is_some_and(|e| e.kind == EventKind::Decision)
    };
    let accountability = Accountability {
        reconstructable_incidents: Percent::count(&escalations, |e| reconstructable(e.decision_sequence)),
        mean_time_to_attribution_secs: mean_secs(escalations.iter().filter_map(|e| {
            let decided = s.ledger.get(e.decision_sequence)?.timestamp;
            Some(e.resolution.as_ref()?.resolved_at - decided)
        })),
        orphans: s.registry.detect_orphans(s.now).len() as u64,
    };

    let cells: Vec<(GovernanceDomain, Jurisdiction)> = GovernanceDomain::ALL
        .into_iter()
        .flat_map(|d| [Jurisdiction::Eu, Jurisdiction::Us, Jurisdiction::Cn].map(|j| (d, j)))
        .collect();
    let mapped = |(d, j): &(GovernanceDomain, Jurisdiction)| {
        s.matrix.domain(*d).is_some_and(|e| {
            e.obligations
                .iter()
                .any(|o| &o.jurisdiction == j && !o.text.trim().is_empty() && !o.citations.is_empty())
        })
    };
    let gpai: Vec<_> = s.provenance.iter().filter(|m| m.record.gpai).collect();
    let compliance = Compliance {
        obligations_mapped: Percent::count(&cells, mapped),
        open_conflicts: s.conflicts.open_conflicts().len() as u64,
        eu_ai_act_doc: if gpai.is_empty() {
            DocStatus::NotApplicable
        } else if gpai.iter().all(|m| m.record.gpai_doc_ref.is_some()) {
            DocStatus::Complete
        } else {
            DocStatus::Incomplete
        },
    };

    let production_agents: Vec<&AgentIdentity> = population
        .iter()
        .copied()
        .filter(|i| i.kind == IdentityKind::Agent && i.is_active())
        .collect();
    let program = ProgramStatus {
        provisioning_process: s.settings.provisioning_process,
        jit_pilot_active: s.authority.credentials().next().is_some(),
        pdp_automation: s.settings.pdp_automation,
        threat_feed_loaded: !s.threats.is_empty(),
        chain_valid: verdict.is_valid(),
        aibom_coverage: Percent::count(&production_agents, |i| {
            s.provenance.deployment_gate(i.kind, i.aibom_ref.as_deref()).passed()
        }),
        conflict_registry_populated: !s.conflicts.is_empty(),
        changelog_entries: s.matrix.changelog.len() as u64,
    };

    MetricsReport {
        generated_at: Some(s.now),
        coverage,
        hygiene,
        behavioral,
        accountability,
        compliance,
        program,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateCriterion {
    Registered,
    Owner,
    Tier1Zsp,
    ProvisioningProcess,
    CryptoIdTier1,
    Baselines,
    JitPilot,
    CryptoId,
    ChainValid,
    AibomCoverage,
    ConflictRegistry,
    PdpAutomation,
    ThreatFeed,
    VelocityChangelog,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseOutcome {
    pub phase: u8,
    pub failed: Vec<GateCriterion>,
}

impl PhaseOutcome {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("unknown phase {0} (expected 1-4)")]
    UnknownPhase(u8),
}

/// The criteria checked for a phase, each paired with whether it holds.
pub fn phase_criteria(phase: u8, r: &MetricsReport) -> Result<Vec<(GateCriterion, bool)>, MetricsError> {
    use GateCriterion::*;
    let zsp = r.hygiene.tier1_standing_static == 0;
    Ok(match phase {
        1 => vec![
            (Registered, r.coverage.registered.at_least(80)),
            (Owner, r.coverage.owner.at_least(90)),
            (Tier1Zsp, zsp),
            (ProvisioningProcess, r.program.provisioning_process),
        ],
        2 => vec![
            (CryptoIdTier1, r.coverage.crypto_id_tier1.at_least(50)),
            (Baselines, r.coverage.baseline.at_least(80)),
            (JitPilot, r.program.jit_pilot_active),
        ],
        3 => vec![
            (CryptoId, r.coverage.crypto_id.at_least(95)),
            (Tier1Zsp, zsp),
            (ChainValid, r.program.chain_valid),
            (AibomCoverage, r.program.aibom_coverage.at_least(100)),
            (ConflictRegistry, r.program.conflict_registry_populated),
        ],
        4 => vec![
            (PdpAutomation, r.program.pdp_automation),
            (ThreatFeed, r.program.threat_feed_loaded),
            (VelocityChangelog, r.program.changelog_entries > 0),
        ],
        other => return Err(MetricsError::UnknownPhase(other)),
    })
}

pub fn phase_gate(phase: u8, report: &MetricsReport) -> Result<PhaseOutcome, MetricsError> {
    let failed = phase_criteria(phase, report)?
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(c, _)| c)
        .collect();
    Ok(PhaseOutcome { phase, failed })
}
