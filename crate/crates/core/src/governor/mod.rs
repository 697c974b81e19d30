//! Policy decision point for agent access requests.
//!
//! Every request is scored on four dimensions (data sensitivity, action
//! irreversibility, deviation from the identity's behavioral baseline, and
//! static task alignment). The weighted composite decides whether the request
//! passes directly or goes through the intent-verification gate, whose
//! alignment score then separates enhanced-logging approvals from escalations
//! and denials. See [`decision::classify`] for the full matrix.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scope::{ActionVerb, DataClass, ResourcePattern};
use crate::uri::WorkloadUri;

pub mod autonomy;
pub mod baseline;
pub mod decision;
pub mod escalation;
pub mod intent;
pub mod privilege;
pub mod scoring;

pub use autonomy::{update_autonomy, Outcome};
pub use baseline::{build_baseline, deviation_score, BehavioralBaseline, DeviationBreakdown};
pub use decision::{classify, Decision, Modifier};
pub use escalation::{Escalation, EscalationQueue, Resolution, ResolutionVerdict};
pub use intent::{AlignmentInput, CheckerUnavailable, ExecutionContext, IntentChecker, ReferenceChecker};
pub use privilege::{aggregate_privilege, PrivilegeAlert, PrivilegeReport};
pub use scoring::{composite_score, dimension_scores, irreversibility_score, sensitivity_score, Dimensions};

/// A tool-data-action-context event submitted for a decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessRequest {
    pub identity: WorkloadUri,
    pub session_id: String,
    pub task_id: String,
    pub tool: String,
    /// Resource on the tool's system; defaults to the whole system.
    #[serde(default = "ResourcePattern::any")]
    pub resource: ResourcePattern,
    pub action: ActionVerb,
    pub data_class: DataClass,
    #[serde(default)]
    pub recipients: BTreeSet<String>,
    #[serde(default)]
    pub data_volume: u64,
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub context_notes: String,
}

/// Domain part of an external-party id (`user@domain` → `domain`).
pub fn recipient_domain(recipient: &str) -> &str {
    recipient.rsplit_once('@').map(|(_, d)| d).unwrap_or(recipient)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolScope {
    pub tool: String,
    pub max_data_class: DataClass,
}

/// The task an identity was deployed for; the intent boundary for alignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub identity: WorkloadUri,
    pub description: String,
    pub scope: Vec<ToolScope>,
    #[serde(default)]
    pub recipients_allowlist: BTreeSet<String>,
}

impl TaskSpec {
    pub fn allows_tool(&self, tool: &str, class: DataClass) -> bool {
        self.scope
            .iter()
            .any(|s| s.tool == tool && class <= s.max_data_class)
    }

    /// Every recipient is allowlisted by exact id or by domain.
    pub fn allows_recipients(&self, recipients: &BTreeSet<String>) -> bool {
        recipients.iter().all(|r| {
            self.recipients_allowlist.contains(r)
                || self.recipients_allowlist.contains(recipient_domain(r))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionWeights {
    pub sensitivity: f64,
    pub irreversibility: f64,
    pub deviation: f64,
    pub alignment: f64,
}

impl DimensionWeights {
    pub fn sum(&self) -> f64 {
        self.sensitivity + self.irreversibility + self.deviation + self.alignment
    }
}

impl Default for DimensionWeights {
    fn default() -> Self {
        Self {
            sensitivity: 0.25,
            irreversibility: 0.25,
            deviation: 0.25,
            alignment: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskPolicy {
    pub weights: DimensionWeights,
    pub t_risk: f64,
    pub t_align: f64,
    pub t_critical: f64,
    /// Multiplier applied to `t_risk` for threat-flagged identities.
    pub threat_multiplier: f64,
}

impl Default for RiskPolicy {
    fn default() -> Self {
        Self {
            weights: DimensionWeights::default(),
            t_risk: 0.5,
            t_align: 0.7,
            t_critical: 0.85,
            threat_multiplier: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("weights must be non-negative and sum to 1 (got {0})")]
    Weights(f64),
    #[error("thresholds must satisfy 0 < t_risk < t_critical <= 1 and 0 < t_align < 1")]
    Thresholds,
    #[error("threat multiplier must lie in (0, 1]")]
    Multiplier,
}

impl RiskPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let w = self.weights;
        let all = [w.sensitivity, w.irreversibility, w.deviation, w.alignment];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) || (w.sum() - 1.0).abs() > 1e-9 {
            return Err(PolicyError::Weights(w.sum()));
        }
        let thresholds_ok = 0.0 < self.t_risk
            && self.t_risk < self.t_critical
            && self.t_critical <= 1.0
            && 0.0 < self.t_align
            && self.t_align < 1.0;
        if !thresholds_ok {
            return Err(PolicyError::Thresholds);
        }
        if !(self.threat_multiplier > 0.0 && self.threat_multiplier <= 1.0) {
            return Err(PolicyError::Multiplier);
        }
        Ok(())
    }

    pub fn effective_t_risk(&self, threat_flagged: bool) -> f64 {
        if threat_flagged {
            self.t_risk * self.threat_multiplier
        } else {
            self.t_risk
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub assessment_id: String,
    pub request: AccessRequest,
    pub dims: Dimensions,
    pub composite: f64,
    /// Gate output; absent when the gate was not invoked.
    pub alignment: Option<f64>,
    pub decision: Decision,
    pub modifiers: Vec<Modifier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GovernorError {
    #[error("history has {have} requests, at least {need} required")]
    InsufficientHistory { have: usize, need: usize },
    #[error("request or history belongs to {found}, expected {expected}")]
    IdentityMismatch { expected: WorkloadUri, found: WorkloadUri },
    #[error("unknown escalation {0}")]
    UnknownEscalation(String),
    #[error("escalation {0} already resolved")]
    AlreadyResolved(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_policy_is_valid() {
        RiskPolicy::default().validate().unwrap();
    }

    #[test]
    fn policy_validation() {
        let mut p = RiskPolicy::default();
        p.weights.alignment = 0.3;
        assert!(matches!(p.validate(), Err(PolicyError::Weights(_))));
        let p = RiskPolicy {
            weights: DimensionWeights {
                sensitivity: 1.2,
                irreversibility: -0.2,
                deviation: 0.0,
                alignment: 0.0,
            },
            ..RiskPolicy::default()
        };
        assert!(matches!(p.validate(), Err(PolicyError::Weights(_))));
        let p = RiskPolicy {
            t_critical: 0.4,
            ..RiskPolicy::default()
        };
        assert_eq!(p.validate(), Err(PolicyError::Thresholds));
        let p = RiskPolicy {
            threat_multiplier: 1.5,
            ..RiskPolicy::default()
        };
        assert_eq!(p.validate(), Err(PolicyError::Multiplier));
    }

    #[test]
    fn recipient_allowlist_by_domain() {
        let spec = TaskSpec {
            task_id: "t".into(),
            identity: WorkloadUri::new("c", "a").unwrap(),
            description: String::new(),
            scope: vec![ToolScope {
                tool: "mail".into(),
                max_data_class: DataClass::Internal,
            }],
            recipients_allowlist: ["partner.example".to_string()].into(),
        };
        assert!(spec.allows_recipients(&["bob@partner.example".to_string()].into()));
        assert!(!spec.allows_recipients(&["eve@evil.example".to_string()].into()));
        assert!(spec.allows_recipients(&BTreeSet::new()));
        assert!(spec.allows_tool("mail", DataClass::Public));
        assert!(!spec.allows_tool("mail", DataClass::Confidential));
    }
}
