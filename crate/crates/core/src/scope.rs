//! Actions, data classes and access scopes shared by grants, credentials and
//! delegations.
//!
//! Resource patterns are either literals or a literal prefix followed by a
//! single trailing `*`. Restricting wildcards to the tail keeps containment
//! between two patterns decidable with a prefix test, which is what scope
//! narrowing along delegation chains relies on.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionVerb {
    Read,
    Write,
    Delete,
    Send,
    Publish,
    Execute,
}

impl ActionVerb {
    pub const ALL: [ActionVerb; 6] = [
        ActionVerb::Read,
        ActionVerb::Write,
        ActionVerb::Delete,
        ActionVerb::Send,
        ActionVerb::Publish,
        ActionVerb::Execute,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionVerb::Read => "read",
            ActionVerb::Write => "write",
            ActionVerb::Delete => "delete",
            ActionVerb::Send => "send",
            ActionVerb::Publish => "publish",
            ActionVerb::Execute => "execute",
        }
    }

    /// Actions that move data to a party outside the organization.
    pub fn is_exfiltration_capable(self) -> bool {
        matches!(self, ActionVerb::Send | ActionVerb::Publish)
    }
}

impl FromStr for ActionVerb {
    type Err = ScopeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionVerb::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| ScopeError::UnknownAction(s.to_string()))
    }
}

impl fmt::Display for ActionVerb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sensitivity scale, ordered from least to most sensitive.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum DataClass {
    Public,
    #[default]
    Internal,
    Confidential,
    Restricted,
    Critical,
}

impl DataClass {
    pub const ALL: [DataClass; 5] = [
        DataClass::Public,
        DataClass::Internal,
        DataClass::Confidential,
        DataClass::Restricted,
        DataClass::Critical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataClass::Public => "public",
            DataClass::Internal => "internal",
            DataClass::Confidential => "confidential",
            DataClass::Restricted => "restricted",
            DataClass::Critical => "critical",
        }
    }
}

impl FromStr for DataClass {
    type Err = ScopeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DataClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ScopeError::UnknownDataClass(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScopeError {
    #[error("unknown action verb `{0}`")]
    UnknownAction(String),
    #[error("unknown data class `{0}`")]
    UnknownDataClass(String),
    #[error("invalid resource pattern `{0}`: `*` is only allowed as the final character")]
    Pattern(String),
}

/// A literal resource name or a `prefix*` wildcard.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResourcePattern(String);

impl ResourcePattern {
    pub fn parse(raw: &str) -> Result<Self, ScopeError> {
        let body = raw.strip_suffix('*').unwrap_or(raw);
        if body.contains('*') || raw.is_empty() {
            return Err(ScopeError::Pattern(raw.to_string()));
        }
        Ok(Self(raw.to_string()))
    }

    pub fn any() -> Self {
        Self("*".to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn prefix(&self) -> Option<&str> {
        self.0.strip_suffix('*')
    }

    /// Whether a concrete resource name is matched by this pattern.
    pub fn matches(&self, resource: &str) -> bool {
        match self.prefix() {
            Some(prefix) => resource.starts_with(prefix),
            None => self.0 == resource,
        }
    }

    /// Whether every resource matched by `other` is matched by `self`.
    pub fn covers(&self, other: &ResourcePattern) -> bool {
        match (self.prefix(), other.prefix()) {
            (None, None) => self.0 == other.0,
            (None, Some(_)) => false,
            (Some(p), None) => other.0.starts_with(p),
            (Some(p), Some(q)) => q.starts_with(p),
        }
    }
}

impl fmt::Display for ResourcePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for ResourcePattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ResourcePattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Self::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// One `(system, resource pattern, action)` permission.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScopeItem {
    pub system: String,
    pub resource: ResourcePattern,
    pub action: ActionVerb,
}

impl ScopeItem {
    pub fn new(system: impl Into<String>, resource: ResourcePattern, action: ActionVerb) -> Self {
        Self {
            system: system.into(),
            resource,
            action,
        }
    }

    pub fn covers(&self, other: &ScopeItem) -> bool {
        self.system == other.system
            && self.action == other.action
            && self.resource.covers(&other.resource)
    }

    pub fn permits(&self, system: &str, resource: &str, action: ActionVerb) -> bool {
        self.system == system && self.action == action && self.resource.matches(resource)
    }
}

/// A set of scope items with coverage semantics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scope(BTreeSet<ScopeItem>);

impl Scope {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, item: ScopeItem) -> bool {
        self.0.insert(item)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ScopeItem> {
        self.0.iter()
    }

    pub fn extend(&mut self, other: &Scope) {
        self.0.extend(other.0.iter().cloned());
    }

    /// Every item of `other` is covered by some item of `self`.
    pub fn covers(&self, other: &Scope) -> bool {
        other
            .0
            .iter()
            .all(|want| self.0.iter().any(|have| have.covers(want)))
    }

    pub fn permits(&self, system: &str, resource: &str, action: ActionVerb) -> bool {
        self.0.iter().any(|i| i.permits(system, resource, action))
    }

    pub fn systems(&self) -> BTreeSet<&str> {
        self.0.iter().map(|i| i.system.as_str()).collect()
    }
}

impl FromIterator<ScopeItem> for Scope {
    fn from_iter<T: IntoIterator<Item = ScopeItem>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Scope {
    type Item = &'a ScopeItem;
    type IntoIter = std::collections::btree_set::Iter<'a, ScopeItem>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pat(s: &str) -> ResourcePattern {
        ResourcePattern::parse(s).unwrap()
    }

    #[test]
    fn pattern_rejects_inner_wildcards() {
        assert!(ResourcePattern::parse("a*b").is_err());
        assert!(ResourcePattern::parse("").is_err());
        assert!(ResourcePattern::parse("**").is_err());
        assert!(ResourcePattern::parse("reports/*").is_ok());
    }

    #[test]
    fn pattern_coverage() {
        assert!(pat("*").covers(&pat("anything")));
        assert!(pat("reports/*").covers(&pat("reports/q3*")));
        assert!(pat("reports/*").covers(&pat("reports/q3.pdf")));
        assert!(!pat("reports/q3*").covers(&pat("reports/*")));
        assert!(!pat("reports/q3.pdf").covers(&pat("reports/*")));
        assert!(pat("x").covers(&pat("x")));
    }

    #[test]
    fn scope_coverage_requires_same_system_and_action() {
        let have: Scope = [ScopeItem::new("crm", pat("*"), ActionVerb::Read)]
            .into_iter()
            .collect();
        let same_sys: Scope = [ScopeItem::new("crm", pat("acct/1"), ActionVerb::Read)]
            .into_iter()
            .collect();
        let other_action: Scope = [ScopeItem::new("crm", pat("acct/1"), ActionVerb::Write)]
            .into_iter()
            .collect();
        assert!(have.covers(&same_sys));
        assert!(!have.covers(&other_action));
        assert!(have.covers(&Scope::new()));
    }

    fn arb_pattern() -> impl Strategy<Value = ResourcePattern> {
        ("[ab]{0,3}", any::<bool>()).prop_map(|(p, wild)| {
            if wild {
                ResourcePattern::parse(&format!("{p}*")).unwrap()
            } else if p.is_empty() {
                ResourcePattern::parse("a").unwrap()
            } else {
                ResourcePattern::parse(&p).unwrap()
            }
        })
    }

    proptest! {
        // covers(a, b) must agree with matching over a finite universe of names.
        #[test]
        fn covers_agrees_with_matching(a in arb_pattern(), b in arb_pattern()) {
            let mut names = vec![String::new()];
            for len in 1..=5 {
                let mut next = Vec::new();
                for n in names.iter().filter(|n| n.len() == len - 1) {
                    next.push(format!("{n}a"));
                    next.push(format!("{n}b"));
                }
                names.extend(next);
            }
            let brute = names
                .iter()
                .filter(|n| !n.is_empty())
                .all(|n| !b.matches(n) || a.matches(n));
            prop_assert_eq!(a.covers(&b), brute);
        }
    }
}
