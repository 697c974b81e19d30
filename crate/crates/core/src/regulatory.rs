//! Jurisdiction mapping matrix, conflict registry and deployment tiering.
//!
//! The matrix is data: the bundled dataset ships in `data/` and further
//! jurisdictions are added by editing it. Versioning and the changelog carry
//! regulatory-velocity bookkeeping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const BUNDLED_MATRIX: &str = include_str!("../data/jurisdiction_matrix.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GovernanceDomain {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl GovernanceDomain {
    pub const ALL: [GovernanceDomain; 6] = [Self::I, Self::II, Self::III, Self::IV, Self::V, Self::VI];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::I => "I",
            Self::II => "II",
            Self::III => "III",
            Self::IV => "IV",
            Self::V => "V",
            Self::VI => "VI",
        }
    }
}

impl FromStr for GovernanceDomain {
    type Err = RegulatoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| RegulatoryError::UnknownDomain(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Jurisdiction {
    Eu,
    Us,
    Cn,
    /// Any other jurisdiction, written `other:<tag>`.
    Other(String),
}

impl Jurisdiction {
    pub fn as_string(&self) -> String {
        match self {
            Self::Eu => "EU".into(),
            Self::Us => "US".into(),
            Self::Cn => "CN".into(),
            Self::Other(tag) => format!("other:{tag}"),
        }
    }
}

impl fmt::Display for Jurisdiction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_string())
    }
}

impl FromStr for Jurisdiction {
    type Err = RegulatoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "EU" => Ok(Self::Eu),
            "US" => Ok(Self::Us),
            "CN" => Ok(Self::Cn),
            _ => match s.strip_prefix("other:") {
                Some(tag) if !tag.is_empty() => Ok(Self::Other(tag.to_string())),
                _ => Err(RegulatoryError::UnknownJurisdiction(s.to_string())),
            },
        }
    }
}

impl Serialize for Jurisdiction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.as_string())
    }
}

impl<'de> Deserialize<'de> for Jurisdiction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConflictLevel {
    Low,
    Moderate,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JurisdictionTier {
    Single,
    Dual,
    TriPlus,
}

impl JurisdictionTier {
    pub fn for_count(n: usize) -> Option<Self> {
        match n {
            0 => None,
            1 => Some(Self::Single),
            2 => Some(Self::Dual),
            _ => Some(Self::TriPlus),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obligation {
    pub jurisdiction: Jurisdiction,
    pub text: String,
    pub citations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainEntry {
    pub domain: GovernanceDomain,
    pub name: String,
    pub conflict_level: ConflictLevel,
    pub assessment: String,
    pub obligations: Vec<Obligation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangelogEntry {
    pub version: String,
    pub date: String,
    pub note: String,
}

/// Flattened view: one obligation with its domain's shared conflict level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObligationRow {
    pub domain: GovernanceDomain,
    pub jurisdiction: Jurisdiction,
    pub obligation: String,
    pub citations: Vec<String>,
    pub conflict_level: ConflictLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JurisdictionMatrix {
    pub version: String,
    pub changelog: Vec<ChangelogEntry>,
    pub domains: Vec<DomainEntry>,
}

impl JurisdictionMatrix {
    pub fn load(dataset: &str) -> Result<Self, RegulatoryError> {
        let m: Self = serde_json::from_str(dataset).map_err(|e| RegulatoryError::MalformedDataset(e.to_string()))?;
        let mut seen = BTreeSet::new();
        for d in &m.domains {
            if !seen.insert(d.domain) {
                return Err(RegulatoryError::MalformedDataset(format!("domain {} listed twice", d.domain.as_str())));
            }
            let mut js = BTreeSet::new();
            if let Some(o) = d.obligations.iter().find(|o| !js.insert(o.jurisdiction.clone())) {
                return Err(RegulatoryError::MalformedDataset(format!(
                    "domain {} has two {} obligations",
                    d.domain.as_str(),
                    o.jurisdiction
                )));
            }
        }
        if m.version.trim().is_empty() {
            return Err(RegulatoryError::MalformedDataset("empty version".into()));
        }
        Ok(m)
    }

    pub fn bundled() -> Self {
        Self::load(BUNDLED_MATRIX).expect("bundled matrix is well-formed")
    }

    /// Pretty JSON with a trailing newline; the bundled file is stored in
    /// this exact form.
    pub fn export(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("matrix serializes");
        s.push('\n');
        s
    }

    pub fn domain(&self, domain: GovernanceDomain) -> Option<&DomainEntry> {
        self.domains.iter().find(|d| d.domain == domain)
    }

    pub fn conflict_level(&self, domain: GovernanceDomain) -> Option<ConflictLevel> {
        self.domain(domain).map(|d| d.conflict_level)
    }

    /// All rows ordered by (domain, jurisdiction).
    pub fn rows(&self) -> Vec<ObligationRow> {
        let mut rows: Vec<_> = self
            .domains
            .iter()
            .flat_map(|d| {
                d.obligations.iter().map(|o| ObligationRow {
                    domain: d.domain,
                    jurisdiction: o.jurisdiction.clone(),
                    obligation: o.text.clone(),
                    citations: o.citations.clone(),
                    conflict_level: d.conflict_level,
                })
            })
            .collect();
        rows.sort_by(|a, b| (a.domain, &a.jurisdiction).cmp(&(b.domain, &b.jurisdiction)));
        rows
    }

    pub fn applicable_obligations(&self, jurisdictions: &BTreeSet<Jurisdiction>, domain: GovernanceDomain) -> Vec<ObligationRow> {
        self.rows()
            .into_iter()
            .filter(|r| r.domain == domain && jurisdictions.contains(&r.jurisdiction))
            .collect()
    }

    /// Classifies a deployment by jurisdictional exposure. `domains_in_use`
    /// defaults to all six when empty.
    pub fn tier_deployment(
        &self,
        jurisdictions: &BTreeSet<Jurisdiction>,
        domains_in_use: &BTreeSet<GovernanceDomain>,
    ) -> Result<TierAssessment, RegulatoryError> {
        let tier = JurisdictionTier::for_count(jurisdictions.len()).ok_or(RegulatoryError::EmptyJurisdictions)?;
        let in_use: Vec<GovernanceDomain> = if domains_in_use.is_empty() {
            GovernanceDomain::ALL.to_vec()
        } else {
            domains_in_use.iter().copied().collect()
        };
        let domains: BTreeMap<GovernanceDomain, ConflictLevel> = in_use
            .into_iter()
            .filter_map(|d| self.conflict_level(d).map(|l| (d, l)))
            .collect();
        // Conflicts are cross-jurisdictional, so a single-jurisdiction
        // deployment carries none.
        let max_conflict = match tier {
            JurisdictionTier::Single => None,
            _ => domains.values().copied().max(),
        };
        let requires_conflict_linkage = tier == JurisdictionTier::TriPlus && max_conflict == Some(ConflictLevel::High);
        Ok(TierAssessment {
            tier,
            domains,
            max_conflict,
            requires_conflict_linkage,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierAssessment {
    pub tier: JurisdictionTier,
    pub domains: BTreeMap<GovernanceDomain, ConflictLevel>,
    pub max_conflict: Option<ConflictLevel>,
    pub requires_conflict_linkage: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictStatus {
    Open,
    Managed,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictEntry {
    pub conflict_id: String,
    pub domains: BTreeSet<GovernanceDomain>,
    pub jurisdictions: BTreeSet<Jurisdiction>,
    pub description: String,
    #[serde(default)]
    pub management_approach: String,
    #[serde(default)]
    pub residual_risk: String,
    pub status: ConflictStatus,
    pub opened_at: DateTime<Utc>,
}

impl ConflictEntry {
    fn check(&self) -> Result<(), RegulatoryError> {
        if self.status == ConflictStatus::Managed && self.management_approach.trim().is_empty() {
            return Err(RegulatoryError::ManagedWithoutApproach(self.conflict_id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConflictRegistry {
    entries: BTreeMap<String, ConflictEntry>,
}

impl ConflictRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ConflictEntry> {
        self.entries.get(id)
    }

    pub fn register(&mut self, entry: ConflictEntry) -> Result<(), RegulatoryError> {
        entry.check()?;
        if self.entries.contains_key(&entry.conflict_id) {
            return Err(RegulatoryError::DuplicateConflict(entry.conflict_id));
        }
        self.entries.insert(entry.conflict_id.clone(), entry);
        Ok(())
    }

    pub fn set_status(
        &mut self,
        id: &str,
        status: ConflictStatus,
        management_approach: Option<String>,
    ) -> Result<&ConflictEntry, RegulatoryError> {
        let current = self
            .entries
            .get(id)
            .ok_or_else(|| RegulatoryError::UnknownConflict(id.to_string()))?;
        let mut next = current.clone();
        next.status = status;
        if let Some(a) = management_approach {
            next.management_approach = a;
        }
        next.check()?;
        let slot = self.entries.get_mut(id).expect("checked above");
        *slot = next;
        Ok(slot)
    }

    pub fn with_status(&self, status: ConflictStatus) -> Vec<&ConflictEntry> {
        let mut v: Vec<_> = self.entries.values().filter(|e| e.status == status).collect();
        v.sort_by(|a, b| (a.opened_at, &a.conflict_id).cmp(&(b.opened_at, &b.conflict_id)));
        v
    }

    /// Open conflicts, oldest first.
    pub fn open_conflicts(&self) -> Vec<&ConflictEntry> {
        self.with_status(ConflictStatus::Open)
    }

    /// A non-closed entry references one of the given domains.
    pub fn links_any(&self, domains: &BTreeSet<GovernanceDomain>) -> bool {
        self.entries
            .values()
            .any(|e| e.status != ConflictStatus::Closed && !e.domains.is_disjoint(domains))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConflictEntry> {
        self.entries.values()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegulatoryError {
    #[error("malformed dataset: {0}")]
    MalformedDataset(String),
    #[error("unknown governance domain `{0}`")]
    UnknownDomain(String),
    #[error("unknown jurisdiction `{0}`")]
    UnknownJurisdiction(String),
    #[error("conflict {0} marked managed without a management approach")]
    ManagedWithoutApproach(String),
    #[error("conflict {0} already registered")]
    DuplicateConflict(String),
    #[error("unknown conflict {0}")]
    UnknownConflict(String),
    #[error("deployment lists no jurisdictions")]
    EmptyJurisdictions,
}
