//! Static (long-lived) credentials, standing-privilege waivers and the
//! standing-privilege scan.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{CredentialAuthority, CredentialError};
use crate::registry::{LifecycleState, Registry};
use crate::uri::WorkloadUri;

/// A recorded exception to zero standing privilege.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Waiver {
    pub waiver_id: String,
    pub owner_id: String,
    pub granted_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
    #[serde(default)]
    pub reason: String,
}

impl Waiver {
    pub fn is_current(&self, now: DateTime<Utc>) -> bool {
        self.granted_at <= now && now < self.expires_at
    }
}

/// A credential that exists at rest: API key, service-account password,
/// hardcoded secret.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticCredential {
    pub credential_id: String,
    pub holder: WorkloadUri,
    pub systems: BTreeSet<String>,
    pub created_at: DateTime<Utc>,
    pub last_rotated: DateTime<Utc>,
    #[serde(default)]
    pub waiver_id: Option<String>,
    #[serde(default)]
    pub retired: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StandingViolation {
    StandingGrant {
        identity: WorkloadUri,
        system: String,
        waiver_id: Option<String>,
    },
    StaticCredential {
        identity: WorkloadUri,
        credential_id: String,
    },
    TtlExceedsMax {
        identity: WorkloadUri,
        credential_id: String,
        ttl_seconds: u64,
    },
}

impl CredentialAuthority {
    pub fn register_waiver(&mut self, waiver: Waiver) -> Result<(), CredentialError> {
        if waiver.owner_id.trim().is_empty() {
            return Err(CredentialError::InvalidWaiver("owner id is empty".into()));
        }
        if waiver.expires_at <= waiver.granted_at {
            return Err(CredentialError::InvalidWaiver("expiry precedes grant".into()));
        }
        if waiver.expires_at - waiver.granted_at > Duration::days(self.config.waiver_max_days) {
            return Err(CredentialError::InvalidWaiver(format!(
                "expiry more than {} days after grant",
                self.config.waiver_max_days
            )));
        }
        self.waivers.insert(waiver.waiver_id.clone(), waiver);
        Ok(())
    }

    pub fn waiver(&self, id: &str) -> Option<&Waiver> {
        self.waivers.get(id)
    }

    fn waiver_covers(&self, id: Option<&str>, now: DateTime<Utc>) -> bool {
        id.and_then(|w| self.waivers.get(w)).is_some_and(|w| w.is_current(now))
    }

    pub fn add_static(&mut self, cred: StaticCredential) -> Result<(), CredentialError> {
        if self.statics.contains_key(&cred.credential_id) {
            return Err(CredentialError::DuplicateCredential(cred.credential_id));
        }
        self.statics.insert(cred.credential_id.clone(), cred);
        Ok(())
    }

    pub fn retire_static(&mut self, id: &str) -> Result<(), CredentialError> {
        let c = self
            .statics
            .get_mut(id)
            .ok_or_else(|| CredentialError::UnknownCredential(id.to_string()))?;
        c.retired = true;
        Ok(())
    }

    pub fn retire_statics_of(&mut self, holder: &WorkloadUri) -> usize {
        let mut n = 0;
        for c in self.statics.values_mut().filter(|c| &c.holder == holder && !c.retired) {
            c.retired = true;
            n += 1;
        }
        n
    }

    pub fn statics(&self) -> impl Iterator<Item = &StaticCredential> {
        self.statics.values()
    }

    pub fn active_statics(&self) -> impl Iterator<Item = &StaticCredential> {
        self.statics.values().filter(|c| !c.retired)
    }

    /// Every privilege held at rest without a current waiver, plus any
    /// unrevoked credential whose ttl exceeds the configured maximum.
    pub fn list_standing_privilege(&self, registry: &Registry, now: DateTime<Utc>) -> Vec<StandingViolation> {
        let mut out = Vec::new();
        for identity in registry.iter().filter(|i| i.state() != LifecycleState::Decommissioned) {
            for g in identity.grants.iter().filter(|g| g.standing) {
                if !self.waiver_covers(g.waiver_id.as_deref(), now) {
                    out.push(StandingViolation::StandingGrant {
                        identity: identity.id.clone(),
                        system: g.system.clone(),
                        waiver_id: g.waiver_id.clone(),
                    });
                }
            }
        }
        for c in self.active_statics() {
            if !self.waiver_covers(c.waiver_id.as_deref(), now) {
                out.push(StandingViolation::StaticCredential {
                    identity: c.holder.clone(),
                    credential_id: c.credential_id.clone(),
                });
            }
        }
        for c in self.credentials().filter(|c| !c.revoked && c.ttl_seconds > self.config.max_ttl_seconds) {
            out.push(StandingViolation::TtlExceedsMax {
                identity: c.subject.clone(),
                credential_id: c.credential_id.clone(),
                ttl_seconds: c.ttl_seconds,
            });
        }
        out.sort();
        out
    }

    /// Share of static credentials rotated within policy, as
    /// `(in_policy, total)` over active static credentials.
    pub fn rotation_in_policy(&self, now: DateTime<Utc>) -> (u64, u64) {
        let window = Duration::days(self.config.rotation_policy_days);
        self.active_statics().fold((0, 0), |(ok, total), c| {
            (ok + u64::from(now - c.last_rotated <= window), total + 1)
        })
    }
}
