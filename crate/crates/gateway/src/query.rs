//! Read-only views shared by the HTTP API and the CLI.

use agentgov_core::audit::{verify_export, ChainVerdict, ReconstructQuery, Reconstruction};
use agentgov_core::credentials::StandingViolation;
use agentgov_core::governor::Escalation;
use agentgov_core::metrics::{phase_gate, GateCriterion, MetricsError, MetricsReport};
use agentgov_core::plane::{ControlPlane, PlaneResult};
use agentgov_core::registry::{AgentIdentity, LifecycleState};
use agentgov_core::regulatory::{ConflictEntry, ObligationRow};
use agentgov_core::risk::IntersectionAlert;
use agentgov_core::threat::ExposureReport;
use agentgov_core::uri::WorkloadUri;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditStatus {
    pub valid: bool,
    pub broken_at: Option<u64>,
    pub entries: u64,
}

impl AuditStatus {
    fn from_verdict(verdict: ChainVerdict, entries: u64) -> Self {
        let broken_at = match verdict {
            ChainVerdict::Valid => None,
            ChainVerdict::BrokenAt { sequence } => Some(sequence),
        };
        Self {
            valid: broken_at.is_none(),
            broken_at,
            entries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: u8,
    pub passed: bool,
    pub failed: Vec<GateCriterion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictsView {
    pub conflicts: Vec<ConflictEntry>,
    pub open: usize,
    pub matrix: Vec<ObligationRow>,
}

pub fn identities(plane: &ControlPlane, state: Option<LifecycleState>) -> Vec<AgentIdentity> {
    plane
        .registry()
        .iter()
        .filter(|i| state.is_none_or(|s| i.state() == s))
        .cloned()
        .collect()
}

pub fn identity(plane: &ControlPlane, id: &WorkloadUri) -> Option<AgentIdentity> {
    plane.registry().get(id).cloned()
}

pub fn orphans(plane: &ControlPlane, now: DateTime<Utc>) -> Vec<WorkloadUri> {
    plane.detect_orphans(now)
}

pub fn escalations(plane: &ControlPlane, pending_only: bool) -> Vec<Escalation> {
    plane
        .escalations()
        .all()
        .filter(|e| !pending_only || e.is_pending())
        .cloned()
        .collect()
}

pub fn audit_verify(plane: &ControlPlane) -> AuditStatus {
    AuditStatus::from_verdict(plane.verify_audit(), plane.ledger().len())
}

/// Verifies a JSON Lines ledger export without loading it into a plane.
pub fn audit_verify_export(text: &str) -> AuditStatus {
    let entries = text.lines().filter(|l| !l.trim().is_empty()).count() as u64;
    AuditStatus::from_verdict(verify_export(text), entries)
}

pub fn reconstruct(plane: &ControlPlane, query: &ReconstructQuery) -> PlaneResult<Reconstruction> {
    plane.reconstruct(query)
}

pub fn conflicts(plane: &ControlPlane) -> ConflictsView {
    ConflictsView {
        conflicts: plane.conflicts().iter().cloned().collect(),
        open: plane.conflicts().open_conflicts().len(),
        matrix: plane.matrix().rows(),
    }
}

pub fn metrics(plane: &ControlPlane, now: DateTime<Utc>) -> MetricsReport {
    plane.metrics(now)
}

pub fn phase(plane: &ControlPlane, phase: u8, now: DateTime<Utc>) -> Result<PhaseReport, MetricsError> {
    phase_report(&plane.metrics(now), phase)
}

pub fn phase_report(report: &MetricsReport, phase: u8) -> Result<PhaseReport, MetricsError> {
    let outcome = phase_gate(phase, report)?;
    Ok(PhaseReport {
        phase,
        passed: outcome.passed(),
        failed: outcome.failed,
    })
}

pub fn intersections(plane: &ControlPlane, now: DateTime<Utc>) -> Vec<IntersectionAlert> {
    plane.intersections(now)
}

pub fn exposure(plane: &ControlPlane, now: DateTime<Utc>) -> ExposureReport {
    plane.exposure_assessment(now)
}

pub fn standing(plane: &ControlPlane, now: DateTime<Utc>) -> Vec<StandingViolation> {
    plane.standing_privilege(now)
}
