use agentgov_core::governor::Decision;
use agentgov_core::risk::IntersectionKind;
use agentgov_gateway::sim::{run_simulation, simulate, Scenario, ScenarioName, CAMPAIGN, PLANTED_KEY};

fn small(name: ScenarioName, seed: u64) -> Scenario {
    Scenario::new(name, seed).sized(40, 600)
}

#[test]
fn runs_are_deterministic_per_seed() {
    for name in [ScenarioName::Benign, ScenarioName::InjectionDrift, ScenarioName::SilkTyphoon] {
        let a = run_simulation(&small(name, 9));
        let b = run_simulation(&small(name, 9));
        assert_eq!(a, b, "{name:?}");
        let c = run_simulation(&small(name, 10));
        assert_ne!(a.ledger_head, c.ledger_head, "{name:?}");
    }
}

#[test]
fn benign_run_closes_every_credential() {
    let r = run_simulation(&small(ScenarioName::Benign, 1));
    assert_eq!(r.count(Decision::Allow), 600);
    assert_eq!(r.credentials_issued, 600);
    assert_eq!(r.credential_failures, 0);
    assert!(r.standing_violations.is_empty());
    assert_eq!(r.live_credentials, 0);
    assert!(r.audit_valid);
    assert!(r.alerts.is_empty());
    assert!(r.drift.is_none());
}

#[test]
fn injected_requests_are_contained_and_demote_autonomy() {
    let (plane, r) = simulate(&small(ScenarioName::InjectionDrift, 2));
    let drift = r.drift.clone().unwrap();
    assert!(drift.injected > 0);
    assert_eq!(drift.injected_contained, drift.injected);
    assert_eq!(drift.conforming_denied, 0);
    assert_eq!(drift.conforming_off_baseline, 0);
    assert_eq!(drift.injected + drift.conforming, 600);
    assert!(r.confirmed_violations > 0);
    let demoted = plane.registry().iter().filter(|i| i.autonomy < 2).count();
    assert!(demoted > 0);
    assert!(r.audit_valid);
}

#[test]
fn silk_typhoon_plant_is_found() {
    let r = run_simulation(&small(ScenarioName::SilkTyphoon, 3));
    assert!(r.alerts.iter().any(|a| a.kind == IntersectionKind::CredentialExfiltrationStateActor));
    let row = r.exposure.rows.iter().find(|row| row.credential_id == PLANTED_KEY).expect("planted key listed");
    assert!(row.standing);
    assert!(row.campaigns.contains(CAMPAIGN));
    assert_eq!(r.standing_violations.len(), 1, "only the planted key stands");
    assert!(r.audit_valid);
}
