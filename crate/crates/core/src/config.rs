//! Control-plane settings.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::credentials::AuthorityConfig;
use crate::governor::{PolicyError, RiskPolicy};
use crate::uri::WorkloadUri;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaneConfig {
    pub trust_domain: String,
    pub policy: RiskPolicy,
    pub authority: AuthorityConfig,
    /// Systems whose grants make an identity PAM-adjacent.
    pub pam_systems: BTreeSet<String>,
    pub certification_cadence_days: i64,
    /// Consecutive compliant decisions needed to earn the next autonomy level.
    pub autonomy_promote_after: usize,
    pub privilege_threshold: usize,
    pub baseline_min_history: usize,
    /// Deviation score at or above which a decision counts as a deviation.
    pub deviation_alert: f64,
    /// Assessments kept in memory for credential issuance and intersection
    /// detection.
    pub recent_window: usize,
    pub provisioning_process: bool,
    pub pdp_automation: bool,
}

impl Default for PlaneConfig {
    fn default() -> Self {
        Self {
            trust_domain: "corp.example".into(),
            policy: RiskPolicy::default(),
            authority: AuthorityConfig::default(),
            pam_systems: ["cyberark", "beyondtrust", "delinea", "hashicorp-vault"]
                .map(String::from)
                .into(),
            certification_cadence_days: 90,
            autonomy_promote_after: 100,
            privilege_threshold: 10,
            baseline_min_history: 20,
            deviation_alert: 0.5,
            recent_window: 10_000,
            provisioning_process: true,
            pdp_automation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("invalid trust domain `{0}`")]
    TrustDomain(String),
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("default ttl exceeds the maximum ttl")]
    TtlOrder,
    #[error("deviation alert must lie in [0, 1]")]
    DeviationAlert,
}

impl PlaneConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.policy.validate()?;
        if WorkloadUri::new(&self.trust_domain, "control-plane").is_err() {
            return Err(ConfigError::TrustDomain(self.trust_domain.clone()));
        }
        let a = &self.authority;
        let positives = [
            ("certification_cadence_days", self.certification_cadence_days > 0),
            ("autonomy_promote_after", self.autonomy_promote_after > 0),
            ("privilege_threshold", self.privilege_threshold > 0),
            ("baseline_min_history", self.baseline_min_history > 0),
            ("recent_window", self.recent_window > 0),
            ("authority.default_ttl_seconds", a.default_ttl_seconds > 0),
            ("authority.max_delegation_depth", a.max_delegation_depth > 0),
            ("authority.waiver_max_days", a.waiver_max_days > 0),
            ("authority.rotation_policy_days", a.rotation_policy_days > 0),
        ];
        if let Some((name, _)) = positives.iter().find(|(_, ok)| !ok) {
            return Err(ConfigError::NotPositive(name));
        }
        if a.default_ttl_seconds > a.max_ttl_seconds {
            return Err(ConfigError::TtlOrder);
        }
        if !(0.0..=1.0).contains(&self.deviation_alert) {
            return Err(ConfigError::DeviationAlert);
        }
        Ok(())
    }

    /// The URI the control plane uses as actor for its own audit entries.
    pub fn plane_actor(&self) -> WorkloadUri {
        WorkloadUri::new(&self.trust_domain, "control-plane").expect("validated trust domain")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = PlaneConfig::default();
        c.validate().unwrap();
        assert_eq!(c.policy.t_risk, 0.5);
        assert_eq!(c.authority.max_ttl_seconds, 300);
        assert_eq!(c.authority.max_delegation_depth, 8);
        assert_eq!(c.certification_cadence_days, 90);
        assert_eq!(c.autonomy_promote_after, 100);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = PlaneConfig::default();
        c.policy.weights.sensitivity = 0.5;
        assert!(matches!(c.validate(), Err(ConfigError::Policy(PolicyError::Weights(_)))));
        let c = PlaneConfig {
            trust_domain: "bad domain/".into(),
            ..PlaneConfig::default()
        };
        assert!(matches!(c.validate(), Err(ConfigError::TrustDomain(_))));
        let c = PlaneConfig {
            autonomy_promote_after: 0,
            ..PlaneConfig::default()
        };
        assert_eq!(c.validate(), Err(ConfigError::NotPositive("autonomy_promote_after")));
        let mut c = PlaneConfig::default();
        c.authority.default_ttl_seconds = 600;
        assert_eq!(c.validate(), Err(ConfigError::TtlOrder));
    }
}
