//! Cross-system privilege aggregation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::registry::AgentIdentity;
use crate::scope::Scope;
use crate::uri::WorkloadUri;

pub const DEFAULT_SYSTEM_THRESHOLD: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrivilegeAlert {
    TooManySystems,
    AdminGrant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivilegeReport {
    pub identity: WorkloadUri,
    pub distinct_systems: usize,
    pub systems: BTreeSet<String>,
    pub admin_grants: usize,
    pub union_scope: Scope,
    pub alerts: Vec<PrivilegeAlert>,
}

impl PrivilegeReport {
    pub fn has_alert(&self) -> bool {
        !self.alerts.is_empty()
    }
}

/// Unions registry grants with the scopes of live credentials and flags
/// identities spanning more than `threshold` systems or holding admin.
pub fn aggregate_privilege<'a>(
    identity: &AgentIdentity,
    live_scopes: impl IntoIterator<Item = &'a Scope>,
    threshold: usize,
) -> PrivilegeReport {
    let mut union_scope = identity.grant_scope();
    for s in live_scopes {
        union_scope.extend(s);
    }
    let mut systems: BTreeSet<String> = union_scope.systems().into_iter().map(str::to_string).collect();
    systems.extend(identity.associated_systems.iter().cloned());
    systems.extend(identity.grants.iter().map(|g| g.system.clone()));
    let admin_grants = identity.grants.iter().filter(|g| g.admin).count();
    let mut alerts = Vec::new();
    if systems.len() > threshold {
        alerts.push(PrivilegeAlert::TooManySystems);
    }
    if admin_grants > 0 {
        alerts.push(PrivilegeAlert::AdminGrant);
    }
    PrivilegeReport {
        identity: identity.id.clone(),
        distinct_systems: systems.len(),
        systems,
        admin_grants,
        union_scope,
        alerts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::{AccessGrant, IdentityKind, IdentitySpec, OwnerRef, Registry};
    use crate::regulatory::JurisdictionTier;
    use crate::scope::{ActionVerb, ResourcePattern, ScopeItem};
    use chrono::{Duration, Utc};

    fn identity(systems: usize, admin: bool) -> AgentIdentity {
        let mut grants: Vec<_> = (0..systems)
            .map(|i| AccessGrant::jit(format!("sys{i}"), ResourcePattern::any(), [ActionVerb::Read]))
            .collect();
        if admin {
            grants[0].admin = true;
        }
        let spec = IdentitySpec {
            id: WorkloadUri::new("corp", "agents/p").unwrap(),
            kind: IdentityKind::Agent,
            purpose: "reporting".into(),
            owner: Some(OwnerRef::new("alice", "Alice")),
            grants,
            associated_systems: Default::default(),
            jurisdiction_tier: JurisdictionTier::Single,
            aibom_ref: None,
            autonomy: 1,
        };
        let mut reg = Registry::new();
        reg.register(spec, &OwnerRef::new("bob", "Bob"), Utc::now(), Duration::days(90))
            .unwrap()
            .clone()
    }

    #[test]
    fn three_systems_no_alert() {
        let r = aggregate_privilege(&identity(3, false), [], DEFAULT_SYSTEM_THRESHOLD);
        assert_eq!(r.distinct_systems, 3);
        assert!(!r.has_alert());
    }

    #[test]
    fn admin_grant_alerts() {
        let r = aggregate_privilege(&identity(3, true), [], DEFAULT_SYSTEM_THRESHOLD);
        assert_eq!(r.admin_grants, 1);
        assert_eq!(r.alerts, vec![PrivilegeAlert::AdminGrant]);
    }

    #[test]
    fn eleven_systems_alert() {
        let r = aggregate_privilege(&identity(11, false), [], DEFAULT_SYSTEM_THRESHOLD);
        assert_eq!(r.alerts, vec![PrivilegeAlert::TooManySystems]);
        let r = aggregate_privilege(&identity(10, false), [], DEFAULT_SYSTEM_THRESHOLD);
        assert!(!r.has_alert());
    }

    #[test]
    fn live_credentials_count_toward_union() {
        let live: Scope = [ScopeItem::new("extra", ResourcePattern::any(), ActionVerb::Write)].into_iter().collect();
        let r = aggregate_privilege(&identity(10, false), [&live], DEFAULT_SYSTEM_THRESHOLD);
        assert_eq!(r.distinct_systems, 11);
        assert!(r.union_scope.permits("extra", "x", ActionVerb::Write));
        assert_eq!(r.alerts, vec![PrivilegeAlert::TooManySystems]);
    }
}
