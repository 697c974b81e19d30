//! Queue of escalated decisions awaiting human resolution.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{GovernorError, RiskAssessment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolutionVerdict {
    Approved,
    #[serde(alias = "violation")]
    ConfirmedViolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub verdict: ResolutionVerdict,
    pub resolver: String,
    pub resolved_at: DateTime<Utc>,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Escalation {
    pub escalation_id: String,
    pub assessment: RiskAssessment,
    /// Ledger sequence of the decision entry.
    pub decision_sequence: u64,
    pub enqueued_at: DateTime<Utc>,
    pub resolution: Option<Resolution>,
}

impl Escalation {
    pub fn is_pending(&self) -> bool {
        self.resolution.is_none()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EscalationQueue {
    items: BTreeMap<String, Escalation>,
}

impl EscalationQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enqueue(&mut self, escalation: Escalation) {
        self.items.insert(escalation.escalation_id.clone(), escalation);
    }

    pub fn get(&self, id: &str) -> Option<&Escalation> {
        self.items.get(id)
    }

    /// Pending escalations, oldest first.
    pub fn pending(&self) -> Vec<&Escalation> {
        let mut out: Vec<_> = self.items.values().filter(|e| e.is_pending()).collect();
        out.sort_by_key(|e| (e.enqueued_at, e.decision_sequence));
        out
    }

    pub fn all(&self) -> impl Iterator<Item = &Escalation> {
        self.items.values()
    }

    pub fn resolve(&mut self, id: &str, resolution: Resolution) -> Result<&Escalation, GovernorError> {
        let e = self
            .items
            .get_mut(id)
            .ok_or_else(|| GovernorError::UnknownEscalation(id.to_string()))?;
        if e.resolution.is_some() {
            return Err(GovernorError::AlreadyResolved(id.to_string()));
        }
        e.resolution = Some(resolution);
        Ok(e)
    }
}
