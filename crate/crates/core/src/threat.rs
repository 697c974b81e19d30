//! Threat-intelligence overlay: indicator feed, identity flagging and
//! credential exposure assessment.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use glob::Pattern;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::credentials::CredentialAuthority;
use crate::registry::{AgentIdentity, IdentityFlag, LifecycleState, Registry};
use crate::uri::WorkloadUri;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndicatorKind {
    /// Matches credential ids.
    CredentialPattern,
    /// Matches system ids.
    SystemTarget,
    /// Matches workload URIs.
    ActorCampaign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreatIndicator {
    pub indicator_id: String,
    pub kind: IndicatorKind,
    /// Exact id or a glob pattern.
    pub matcher: String,
    pub campaign: String,
    pub ingested_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedLine {
    indicator_id: String,
    kind: IndicatorKind,
    matcher: String,
    campaign: String,
    expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThreatError {
    #[error("malformed feed at line {line}: {reason}")]
    MalformedFeed { line: usize, reason: String },
}

#[derive(Debug, Clone)]
struct Stored {
    indicator: ThreatIndicator,
    pattern: Pattern,
}

impl Stored {
    fn matches(&self, kind: IndicatorKind, candidate: &str) -> bool {
        self.indicator.kind == kind && (self.indicator.matcher == candidate || self.pattern.matches(candidate))
    }
}

#[derive(Debug, Clone, Default)]
pub struct ThreatStore {
    indicators: BTreeMap<String, Stored>,
}

impl ThreatStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.indicators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicators.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ThreatIndicator> {
        self.indicators.values().map(|s| &s.indicator)
    }

    /// Parses the whole feed before storing anything. Returns how many of
    /// its indicators remain in force after expired ones are pruned.
    pub fn ingest(&mut self, feed: &str, now: DateTime<Utc>) -> Result<usize, ThreatError> {
        let mut parsed = Vec::new();
        for (i, raw) in feed.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| ThreatError::MalformedFeed { line: i + 1, reason };
            let line: FeedLine = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
            if line.indicator_id.trim().is_empty() || line.matcher.is_empty() {
                return Err(malformed("empty indicator id or matcher".into()));
            }
            let pattern = Pattern::new(&line.matcher).map_err(|e| malformed(e.to_string()))?;
            parsed.push(Stored {
                indicator: ThreatIndicator {
                    indicator_id: line.indicator_id,
                    kind: line.kind,
                    matcher: line.matcher,
                    campaign: line.campaign,
                    ingested_at: now,
                    expires_at: line.expires_at,
                },
                pattern,
            });
        }
        let effective = parsed.iter().filter(|s| s.indicator.expires_at > now).count();
        for s in parsed {
            self.indicators.insert(s.indicator.indicator_id.clone(), s);
        }
        self.prune(now);
        Ok(effective)
    }

    /// Drops indicators at or past expiry; returns how many were removed.
    pub fn prune(&mut self, now: DateTime<Utc>) -> usize {
        let before = self.indicators.len();
        self.indicators.retain(|_, s| s.indicator.expires_at > now);
        before - self.indicators.len()
    }

    fn matching<'a>(&'a self, kind: IndicatorKind, candidate: &'a str) -> impl Iterator<Item = &'a ThreatIndicator> + 'a {
        self.indicators
            .values()
            .filter(move |s| s.matches(kind, candidate))
            .map(|s| &s.indicator)
    }

    fn any_match<'a>(&self, kind: IndicatorKind, mut candidates: impl Iterator<Item = &'a str>) -> bool {
        candidates.any(|c| self.matching(kind, c).next().is_some())
    }

    /// Flags each non-decommissioned identity should carry. Grants or static
    /// credentials on a PAM-tagged system give `PamAdjacent`; a match on any
    /// indicator gives `ForeignExposed`.
    pub fn flag_identities(
        &self,
        registry: &Registry,
        authority: &CredentialAuthority,
        pam_systems: &BTreeSet<String>,
    ) -> BTreeMap<WorkloadUri, BTreeSet<IdentityFlag>> {
        let mut statics: BTreeMap<&WorkloadUri, Vec<(&str, &BTreeSet<String>)>> = BTreeMap::new();
        for c in authority.active_statics() {
            statics.entry(&c.holder).or_default().push((&c.credential_id, &c.systems));
        }
        let mut out = BTreeMap::new();
        for identity in registry.iter().filter(|i| i.state() != LifecycleState::Decommissioned) {
            let held = statics.get(&identity.id).map(Vec::as_slice).unwrap_or_default();
            let mut systems = identity_systems(identity);
            systems.extend(held.iter().flat_map(|(_, s)| s.iter().map(String::as_str)));
            let mut flags = BTreeSet::new();
            if systems.iter().any(|s| pam_systems.contains(*s)) {
                flags.insert(IdentityFlag::PamAdjacent);
            }
            let exposed = self.any_match(IndicatorKind::CredentialPattern, held.iter().map(|(id, _)| *id))
                || self.any_match(IndicatorKind::SystemTarget, systems.iter().copied())
                || self.any_match(IndicatorKind::ActorCampaign, std::iter::once(identity.id.as_str()));
            if exposed {
                flags.insert(IdentityFlag::ForeignExposed);
            }
            if !flags.is_empty() {
                out.insert(identity.id.clone(), flags);
            }
        }
        out
    }

    /// One row per active static credential and per live JIT credential.
    pub fn exposure_assessment(&self, authority: &CredentialAuthority, now: DateTime<Utc>) -> ExposureReport {
        let mut rows = Vec::new();
        for c in authority.active_statics() {
            rows.push(self.row(&c.credential_id, &c.holder, true, c.systems.clone()));
        }
        for c in authority.live_credentials(now) {
            let systems = c.scope.systems().into_iter().map(str::to_string).collect();
            rows.push(self.row(&c.credential_id, &c.subject, false, systems));
        }
        let summary = ExposureSummary {
            credentials: rows.len(),
            standing: rows.iter().filter(|r| r.standing).count(),
            exposed: rows.iter().filter(|r| r.is_exposed()).count(),
            exposed_standing: rows.iter().filter(|r| r.standing && r.is_exposed()).count(),
        };
        ExposureReport { rows, summary }
    }

    fn row(&self, id: &str, holder: &WorkloadUri, standing: bool, downstream_systems: BTreeSet<String>) -> ExposureRow {
        let hits: BTreeMap<&str, &str> = self
            .matching(IndicatorKind::CredentialPattern, id)
            .chain(self.matching(IndicatorKind::ActorCampaign, holder.as_str()))
            .chain(downstream_systems.iter().flat_map(|s| self.matching(IndicatorKind::SystemTarget, s)))
            .map(|i| (i.indicator_id.as_str(), i.campaign.as_str()))
            .collect();
        ExposureRow {
            credential_id: id.to_string(),
            holder: holder.clone(),
            standing,
            matched_indicators: hits.keys().map(|k| k.to_string()).collect(),
            campaigns: hits.values().map(|v| v.to_string()).collect(),
            downstream_systems,
        }
    }
}

fn identity_systems(identity: &AgentIdentity) -> BTreeSet<&str> {
    identity
        .grants
        .iter()
        .map(|g| g.system.as_str())
        .chain(identity.associated_systems.iter().map(String::as_str))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureRow {
    pub credential_id: String,
    pub holder: WorkloadUri,
    pub standing: bool,
    pub matched_indicators: Vec<String>,
    pub campaigns: BTreeSet<String>,
    pub downstream_systems: BTreeSet<String>,
}

impl ExposureRow {
    pub fn is_exposed(&self) -> bool {
        !self.matched_indicators.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureSummary {
    pub credentials: usize,
    pub standing: usize,
    pub exposed: usize,
    pub exposed_standing: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureReport {
    pub rows: Vec<ExposureRow>,
    pub summary: ExposureSummary,
}
