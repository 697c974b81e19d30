//! Risk catalog, severity rubric and compound-intersection detection.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::credentials::CredentialAuthority;
use crate::governor::{aggregate_privilege, Decision, RiskAssessment};
use crate::provenance::{IntegrityVerdict, ProvenanceStore};
use crate::registry::{LifecycleState, Registry};
use crate::scope::{DataClass, Scope};
use crate::uri::WorkloadUri;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskDomain {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Medium,
    High,
    Critical,
}

impl Severity {
    fn raised(self) -> Self {
        match self {
            Severity::Medium => Severity::High,
            Severity::High | Severity::Critical => Severity::Critical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evidence {
    DocumentedIncident,
    RegulatoryRecognition,
    PractitionerPrevalence,
    ThreatIntelAttributed,
}

impl Evidence {
    pub const ALL: [Evidence; 4] = [
        Evidence::DocumentedIncident,
        Evidence::RegulatoryRecognition,
        Evidence::PractitionerPrevalence,
        Evidence::ThreatIntelAttributed,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RiskError {
    #[error("impact and likelihood must be in 1..=3 (got {impact}, {likelihood})")]
    OutOfRange { impact: u8, likelihood: u8 },
    #[error("entry {id} claims {claimed:?} but the rubric gives {expected:?}")]
    SeverityInconsistent {
        id: String,
        claimed: Severity,
        expected: Severity,
    },
}

/// Two-factor severity with evidence adjustments.
///
/// Threat-intel attribution forces Critical. Otherwise an entry with both
/// factors at most 2 starts at Medium, a product of 3 starts at High and a
/// product of 6 or 9 at Critical. A documented incident or regulatory
/// recognition raises the result one band. Practitioner prevalence is
/// recorded but does not move the rating.
pub fn assess_severity(impact: u8, likelihood: u8, evidence: &BTreeSet<Evidence>) -> Result<Severity, RiskError> {
    if !(1..=3).contains(&impact) || !(1..=3).contains(&likelihood) {
        return Err(RiskError::OutOfRange { impact, likelihood });
    }
    if evidence.contains(&Evidence::ThreatIntelAttributed) {
        return Ok(Severity::Critical);
    }
    let base = if impact <= 2 && likelihood <= 2 {
        Severity::Medium
    } else if impact * likelihood >= 6 {
        Severity::Critical
    } else {
        Severity::High
    };
    let elevated = evidence.contains(&Evidence::DocumentedIncident) || evidence.contains(&Evidence::RegulatoryRecognition);
    Ok(if elevated { base.raised() } else { base })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskEntry {
    pub risk_id: String,
    pub domain: RiskDomain,
    pub name: String,
    pub description: String,
    pub severity: Severity,
    pub primary_vector: String,
    pub governance_implications: String,
    pub evidence: BTreeSet<Evidence>,
    pub impact: u8,
    pub likelihood: u8,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RiskCatalog {
    entries: BTreeMap<String, RiskEntry>,
}

impl RiskCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, entry: RiskEntry) -> Result<&RiskEntry, RiskError> {
        let expected = assess_severity(entry.impact, entry.likelihood, &entry.evidence)?;
        if expected != entry.severity {
            return Err(RiskError::SeverityInconsistent {
                id: entry.risk_id,
                claimed: entry.severity,
                expected,
            });
        }
        let id = entry.risk_id.clone();
        self.entries.insert(id.clone(), entry);
        Ok(&self.entries[&id])
    }

    pub fn get(&self, id: &str) -> Option<&RiskEntry> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RiskEntry> {
        self.entries.values()
    }

    pub fn by_domain(&self, domain: RiskDomain) -> Vec<&RiskEntry> {
        self.entries.values().filter(|e| e.domain == domain).collect()
    }

    /// Catalog seeded with the named sub-categories. Rows are id, domain,
    /// name, vector, impact, likelihood and evidence.
    pub fn seeded() -> Self {
        use Evidence::*;
        use RiskDomain::*;
        type Row<'a> = (&'a str, RiskDomain, &'a str, &'a str, u8, u8, &'a [Evidence]);
        let rows: &[Row] = &[
            ("R-I-01", I, "Static Credential Persistence", "long-lived keys and secrets held at rest", 3, 3, &[DocumentedIncident, ThreatIntelAttributed]),
            ("R-I-02", I, "Cryptographic Identity Absence", "workloads without verifiable key material", 3, 2, &[RegulatoryRecognition]),
            ("R-I-03", I, "Authentication Mechanism Mismatch", "human-oriented authentication applied to agents", 2, 2, &[PractitionerPrevalence]),
            ("R-II-01", II, "Orphaned AI Identity", "identities without an accountable owner", 2, 3, &[PractitionerPrevalence]),
            ("R-II-02", II, "Shadow AI Identity", "identities created outside provisioning", 2, 3, &[DocumentedIncident]),
            ("R-II-03", II, "Dynamic Access Requirement Mismatch", "static roles for task-varying access", 2, 2, &[]),
            ("R-II-04", II, "Cross-System Privilege Accumulation", "privilege spread across many systems", 3, 2, &[]),
            ("R-II-05", II, "Certification Gap", "identities never re-attested", 2, 2, &[RegulatoryRecognition]),
            ("R-III-01", III, "High-Volume Autonomous Exfiltration", "machine-speed bulk transfer", 3, 2, &[DocumentedIncident]),
            ("R-III-02", III, "Multi-Agent Privilege Escalation", "delegation used to widen privilege", 3, 2, &[DocumentedIncident]),
            ("R-IV-01", IV, "Indirect Prompt Injection", "untrusted content steering agent actions", 3, 3, &[DocumentedIncident]),
            ("R-V-01", V, "Audit Trail Insufficiency", "agent actions that cannot be reconstructed", 3, 2, &[RegulatoryRecognition]),
            ("R-V-02", V, "Diffuse Accountability", "no single human answerable for an agent", 2, 2, &[RegulatoryRecognition]),
            ("R-V-03", V, "Human Oversight Nominalism", "approval steps that do not constrain", 2, 2, &[]),
            ("R-VI-01", VI, "AI Supply Chain Compromise", "tampered models or components", 3, 2, &[DocumentedIncident]),
            ("R-VII-01", VII, "State-Sponsored API Credential Theft", "attributed theft of machine credentials", 3, 3, &[ThreatIntelAttributed]),
            ("R-VII-02", VII, "AI-Enhanced Identity Fraud", "synthetic identities used for access", 3, 2, &[ThreatIntelAttributed]),
            ("R-VII-03", VII, "Algorithmic Foreign Influence", "influence operations through enterprise AI", 2, 2, &[ThreatIntelAttributed]),
            ("R-VII-04", VII, "AI Model as Critical Infrastructure Target", "models targeted as strategic assets", 3, 2, &[ThreatIntelAttributed]),
            ("R-VII-05", VII, "Cross-Jurisdictional Regulatory Weaponization", "regulatory access claims used for leverage", 3, 1, &[]),
            ("R-VIII-01", VIII, "Compute Governance Exposure", "concentration of AI compute and its controls", 2, 2, &[]),
        ];
        let mut catalog = Self::new();
        for (id, domain, name, vector, impact, likelihood, evidence) in rows {
            let evidence: BTreeSet<Evidence> = evidence.iter().copied().collect();
            let severity = assess_severity(*impact, *likelihood, &evidence).expect("seed factors in range");
            catalog
                .register(RiskEntry {
                    risk_id: id.to_string(),
                    domain: *domain,
                    name: name.to_string(),
                    description: vector.to_string(),
                    severity,
                    primary_vector: vector.to_string(),
                    governance_implications: String::new(),
                    evidence,
                    impact: *impact,
                    likelihood: *likelihood,
                })
                .expect("seed is consistent");
        }
        catalog
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntersectionKind {
    /// Standing credential, exfiltration capability and a threat flag.
    CredentialExfiltrationStateActor,
    /// Low-alignment escalation or denial, privilege alert and an audit gap.
    InjectionEscalationAccountabilityVoid,
    /// Provenance failure on an active identity.
    SupplyChainAuthInfluence,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntersectionAlert {
    pub kind: IntersectionKind,
    pub identity: WorkloadUri,
    pub detail: String,
}

/// The state the detector reads.
pub struct IntersectionSnapshot<'a> {
    pub registry: &'a Registry,
    pub authority: &'a CredentialAuthority,
    pub provenance: &'a ProvenanceStore,
    pub recent: &'a [RiskAssessment],
    pub audit_valid: bool,
    pub privilege_threshold: usize,
    pub t_align: f64,
    pub now: DateTime<Utc>,
}

fn low_alignment_block(a: &RiskAssessment, t_align: f64) -> bool {
    matches!(a.decision, Decision::Escalate | Decision::Deny) && a.alignment.is_some_and(|x| x < t_align)
}

pub fn detect_intersections(s: &IntersectionSnapshot<'_>) -> Vec<IntersectionAlert> {
    let mut statics: BTreeMap<&WorkloadUri, Vec<&str>> = BTreeMap::new();
    for c in s.authority.active_statics() {
        statics.entry(&c.holder).or_default().push(&c.credential_id);
    }
    let blocked: BTreeSet<&WorkloadUri> = s
        .recent
        .iter()
        .filter(|a| low_alignment_block(a, s.t_align))
        .map(|a| &a.request.identity)
        .collect();
    let mut out = Vec::new();
    for identity in s.registry.iter().filter(|i| i.state() != LifecycleState::Decommissioned) {
        let standing = identity.grants.iter().any(|g| g.standing) || statics.contains_key(&identity.id);
        let exfil = identity
            .grants
            .iter()
            .any(|g| g.data_class >= DataClass::Confidential && g.actions.iter().any(|a| a.is_exfiltration_capable()));
        if standing && exfil && identity.threat_flagged() {
            out.push(IntersectionAlert {
                kind: IntersectionKind::CredentialExfiltrationStateActor,
                identity: identity.id.clone(),
                detail: format!("static credentials {:?}", statics.get(&identity.id).cloned().unwrap_or_default()),
            });
        }
        if blocked.contains(&identity.id) {
            let live: Vec<Scope> = s.authority.live_for(&identity.id, s.now).into_iter().map(|c| c.scope.clone()).collect();
            let report = aggregate_privilege(identity, live.iter(), s.privilege_threshold);
            let gap = !s.audit_valid || identity.owner.is_none();
            if report.has_alert() && gap {
                out.push(IntersectionAlert {
                    kind: IntersectionKind::InjectionEscalationAccountabilityVoid,
                    identity: identity.id.clone(),
                    detail: format!("privilege alerts {:?}", report.alerts),
                });
            }
        }
        if identity.is_active() {
            let gate = s.provenance.deployment_gate(identity.kind, identity.aibom_ref.as_deref());
            let mismatch = identity
                .aibom_ref
                .as_deref()
                .and_then(|r| s.provenance.resolve_ref(r))
                .is_some_and(|m| m.last_check == Some(IntegrityVerdict::Mismatch));
            if !gate.passed() || mismatch {
                out.push(IntersectionAlert {
                    kind: IntersectionKind::SupplyChainAuthInfluence,
                    identity: identity.id.clone(),
                    detail: format!("{gate:?}"),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use Evidence::*;

    /// Hand-written base bands indexed by [impact-1][likelihood-1].
    const BASE: [[Severity; 3]; 3] = [
        [Severity::Medium, Severity::Medium, Severity::High],
        [Severity::Medium, Severity::Medium, Severity::Critical],
        [Severity::High, Severity::Critical, Severity::Critical],
    ];

    fn oracle(impact: u8, likelihood: u8, flags: &BTreeSet<Evidence>) -> Severity {
        if flags.contains(&ThreatIntelAttributed) {
            return Severity::Critical;
        }
        let base = BASE[impact as usize - 1][likelihood as usize - 1];
        let bump = flags.contains(&DocumentedIncident) || flags.contains(&RegulatoryRecognition);
        match (base, bump) {
            (b, false) => b,
            (Severity::Medium, true) => Severity::High,
            (_, true) => Severity::Critical,
        }
    }

    fn subsets() -> Vec<BTreeSet<Evidence>> {
        (0..16u8)
            .map(|mask| Evidence::ALL.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, e)| *e).collect())
            .collect()
    }

    #[test]
    fn rubric_matches_oracle_exhaustively() {
        let mut n = 0;
        for impact in 1..=3 {
            for likelihood in 1..=3 {
                for flags in subsets() {
                    assert_eq!(assess_severity(impact, likelihood, &flags).unwrap(), oracle(impact, likelihood, &flags));
                    n += 1;
                }
            }
        }
        assert_eq!(n, 144);
    }

    #[test]
    fn anchored_cases() {
        assert_eq!(assess_severity(1, 1, &[ThreatIntelAttributed].into()).unwrap(), Severity::Critical);
        assert_eq!(assess_severity(2, 2, &BTreeSet::new()).unwrap(), Severity::Medium);
        assert_eq!(assess_severity(2, 2, &[DocumentedIncident].into()).unwrap(), Severity::High);
        assert_eq!(assess_severity(2, 2, &[PractitionerPrevalence].into()).unwrap(), Severity::Medium);
        assert!(matches!(assess_severity(0, 2, &BTreeSet::new()), Err(RiskError::OutOfRange { .. })));
        assert!(matches!(assess_severity(2, 4, &BTreeSet::new()), Err(RiskError::OutOfRange { .. })));
    }

    #[test]
    fn seeded_ratings() {
        let c = RiskCatalog::seeded();
        let sev = |name: &str| c.iter().find(|e| e.name == name).unwrap().severity;
        for critical in [
            "Static Credential Persistence",
            "High-Volume Autonomous Exfiltration",
            "Multi-Agent Privilege Escalation",
            "Cryptographic Identity Absence",
            "Audit Trail Insufficiency",
            "State-Sponsored API Credential Theft",
        ] {
            assert_eq!(sev(critical), Severity::Critical, "{critical}");
        }
        for e in c.by_domain(RiskDomain::VII) {
            assert!(e.severity >= Severity::High);
        }
        for e in c.by_domain(RiskDomain::VIII) {
            assert_eq!(e.severity, Severity::Medium);
        }
        assert_eq!(sev("Cross-Jurisdictional Regulatory Weaponization"), Severity::High);
    }

    fn entry(severity: Severity, evidence: &[Evidence], impact: u8, likelihood: u8) -> RiskEntry {
        RiskEntry {
            risk_id: "X".into(),
            domain: RiskDomain::VIII,
            name: "x".into(),
            description: String::new(),
            severity,
            primary_vector: String::new(),
            governance_implications: String::new(),
            evidence: evidence.iter().copied().collect(),
            impact,
            likelihood,
        }
    }

    #[test]
    fn register_checks_consistency() {
        let mut c = RiskCatalog::new();
        assert_eq!(
            c.register(entry(Severity::Critical, &[ThreatIntelAttributed], 3, 3)).unwrap().severity,
            Severity::Critical
        );
        c.register(entry(Severity::Medium, &[], 1, 2)).unwrap();
        assert!(matches!(
            c.register(entry(Severity::Medium, &[ThreatIntelAttributed], 1, 1)),
            Err(RiskError::SeverityInconsistent { .. })
        ));
    }

    mod nexus {
        use proptest::prelude::*;

        use super::super::*;
        use crate::credentials::{AuthorityConfig, StaticCredential};
        use crate::registry::{AccessGrant, IdentityFlag, IdentityKind};
        use crate::scope::{ActionVerb, ResourcePattern};
        use crate::testutil::{active, assessment, read_grant, request, spec, t0};

        #[derive(Debug, Clone, Copy)]
        struct Traits {
            standing: bool,
            exfil: bool,
            flagged: bool,
            blocked: bool,
            admin: bool,
            orphan: bool,
            agent: bool,
        }

        fn traits() -> impl Strategy<Value = Traits> {
            prop::array::uniform7(any::<bool>()).prop_map(|b| Traits {
                standing: b[0],
                exfil: b[1],
                flagged: b[2],
                blocked: b[3],
                admin: b[4],
                orphan: b[5],
                agent: b[6],
            })
        }

        fn expected(t: Traits, audit_valid: bool) -> BTreeSet<IntersectionKind> {
            let mut out = BTreeSet::new();
            if t.standing && t.exfil && t.flagged {
                out.insert(IntersectionKind::CredentialExfiltrationStateActor);
            }
            if t.blocked && t.admin && (t.orphan || !audit_valid) {
                out.insert(IntersectionKind::InjectionEscalationAccountabilityVoid);
            }
            // Releasing the owner suspends the identity, taking it out of
            // the active population.
            if t.agent && !t.orphan {
                out.insert(IntersectionKind::SupplyChainAuthInfluence);
            }
            out
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn detector_matches_brute_force(population in prop::collection::vec(traits(), 1..12), audit_valid: bool) {
                let mut reg = Registry::new();
                let mut ca = CredentialAuthority::new(AuthorityConfig::default(), [1; 32]);
                let prov = ProvenanceStore::new();
                let mut recent = Vec::new();
                for (i, t) in population.iter().enumerate() {
                    let mut grants = vec![read_grant("crm")];
                    if t.exfil {
                        let mut g = AccessGrant::jit("mail", ResourcePattern::any(), [ActionVerb::Send]);
                        g.data_class = DataClass::Confidential;
                        grants.push(g);
                    }
                    if t.admin {
                        let mut g = read_grant("root");
                        g.admin = true;
                        grants.push(g);
                    }
                    let mut s = spec(&format!("agents/n{i}"), grants);
                    if t.agent {
                        s.kind = IdentityKind::Agent;
                    }
                    let id = active(&mut reg, s).id;
                    if t.standing {
                        ca.add_static(StaticCredential {
                            credential_id: format!("key-{i}"),
                            holder: id.clone(),
                            systems: ["crm".to_string()].into(),
                            created_at: t0(),
                            last_rotated: t0(),
                            waiver_id: None,
                            retired: false,
                        }).unwrap();
                    }
                    if t.flagged {
                        reg.add_flag(&id, IdentityFlag::ForeignExposed).unwrap();
                    }
                    let mut a = assessment(request(&id, "T", "crm", ActionVerb::Read), Decision::Escalate);
                    if t.blocked {
                        a.decision = Decision::Deny;
                        a.alignment = Some(0.1);
                    }
                    recent.push(a);
                    if t.orphan {
                        reg.release_owner(&id).unwrap();
                    }
                }
                let snapshot = IntersectionSnapshot {
                    registry: &reg,
                    authority: &ca,
                    provenance: &prov,
                    recent: &recent,
                    audit_valid,
                    privilege_threshold: 10,
                    t_align: 0.5,
                    now: t0(),
                };
                let alerts = detect_intersections(&snapshot);
                for (i, t) in population.iter().enumerate() {
                    let id = format!("agents/n{i}");
                    let got: BTreeSet<IntersectionKind> = alerts
                        .iter()
                        .filter(|a| a.identity.path() == id)
                        .map(|a| a.kind)
                        .collect();
                    prop_assert_eq!(got, expected(*t, audit_valid), "{:?}", t);
                }
            }
        }
    }
}
