//! Behavioral baselines and the contextual-deviation dimension.

use std::collections::BTreeSet;

use chrono::{DateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::{recipient_domain, AccessRequest, GovernorError};
use crate::uri::WorkloadUri;

/// Minimum observations for an hour bucket to count as "seen".
pub const HOUR_SMOOTHING_FLOOR: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehavioralBaseline {
    pub identity: WorkloadUri,
    pub hour_histogram: [u64; 24],
    pub known_tools: BTreeSet<String>,
    pub known_recipient_domains: BTreeSet<String>,
    pub volume_p95: u64,
    pub window: u64,
    pub built_at: DateTime<Utc>,
}

/// Nearest-rank percentile: the smallest value with at least `pct`% of
/// observations at or below it.
fn nearest_rank(values: &mut [u64], pct: u64) -> u64 {
    if values.is_empty() {
        return 0;
    }
    let n = values.len() as u64;
    let rank = (pct * n).div_ceil(100).max(1);
    let idx = (rank - 1) as usize;
    *values.select_nth_unstable(idx).1
}

pub fn build_baseline(
    identity: &WorkloadUri,
    history: &[AccessRequest],
    min_history: usize,
    built_at: DateTime<Utc>,
) -> Result<BehavioralBaseline, GovernorError> {
    if history.len() < min_history {
        return Err(GovernorError::InsufficientHistory {
            have: history.len(),
            need: min_history,
        });
    }
    if let Some(other) = history.iter().find(|r| &r.identity != identity) {
        return Err(GovernorError::IdentityMismatch {
            expected: identity.clone(),
            found: other.identity.clone(),
        });
    }
    let mut hour_histogram = [0u64; 24];
    let mut known_tools = BTreeSet::new();
    let mut known_recipient_domains = BTreeSet::new();
    let mut volumes = Vec::with_capacity(history.len());
    for r in history {
        hour_histogram[r.timestamp.hour() as usize] += 1;
        known_tools.insert(r.tool.clone());
        known_recipient_domains.extend(r.recipients.iter().map(|x| recipient_domain(x).to_string()));
        volumes.push(r.data_volume);
    }
    Ok(BehavioralBaseline {
        identity: identity.clone(),
        hour_histogram,
        known_tools,
        known_recipient_domains,
        volume_p95: nearest_rank(&mut volumes, 95),
        window: history.len() as u64,
        built_at,
    })
}

/// The four binary/graded sub-scores behind the deviation dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationBreakdown {
    pub tool: f64,
    pub recipient: f64,
    pub time: f64,
    pub volume: f64,
}

impl DeviationBreakdown {
    pub fn mean(&self) -> f64 {
        (self.tool + self.recipient + self.time + self.volume) / 4.0
    }
}

pub fn deviation_breakdown(
    baseline: &BehavioralBaseline,
    request: &AccessRequest,
) -> Result<DeviationBreakdown, GovernorError> {
    if baseline.identity != request.identity {
        return Err(GovernorError::IdentityMismatch {
            expected: baseline.identity.clone(),
            found: request.identity.clone(),
        });
    }
    let tool = if baseline.known_tools.contains(&request.tool) { 0.0 } else { 1.0 };
    let recipient = if request
        .recipients
        .iter()
        .all(|r| baseline.known_recipient_domains.contains(recipient_domain(r)))
    {
        0.0
    } else {
        1.0
    };
    let time = if baseline.hour_histogram[request.timestamp.hour() as usize] >= HOUR_SMOOTHING_FLOOR {
        0.0
    } else {
        1.0
    };
    let v = request.data_volume as f64;
    let p95 = baseline.volume_p95 as f64;
    let volume = if baseline.volume_p95 == 0 {
        if request.data_volume == 0 { 0.0 } else { 1.0 }
    } else {
        ((v - p95) / p95).clamp(0.0, 1.0)
    };
    Ok(DeviationBreakdown {
        tool,
        recipient,
        time,
        volume,
    })
}

/// Mean of the tool, recipient, time and volume sub-scores, in `[0, 1]`.
pub fn deviation_score(baseline: &BehavioralBaseline, request: &AccessRequest) -> Result<f64, GovernorError> {
    deviation_breakdown(baseline, request).map(|b| b.mean())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scope::{ActionVerb, DataClass, ResourcePattern};
    use chrono::TimeZone;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn who() -> WorkloadUri {
        WorkloadUri::new("corp", "agents/a").unwrap()
    }

    fn req(hour: u32, tool: &str, recipients: &[&str], volume: u64) -> AccessRequest {
        AccessRequest {
            identity: who(),
            session_id: "s".into(),
            task_id: "t".into(),
            tool: tool.into(),
            resource: ResourcePattern::any(),
            action: ActionVerb::Read,
            data_class: DataClass::Internal,
            recipients: recipients.iter().map(|s| s.to_string()).collect(),
            data_volume: volume,
            timestamp: Utc.with_ymd_and_hms(2026, 2, 1, hour, 30, 0).unwrap(),
            context_notes: String::new(),
        }
    }

    fn brute_p95(volumes: &[u64]) -> u64 {
        let mut v = volumes.to_vec();
        v.sort_unstable();
        let n = v.len() as f64;
        let rank = (0.95 * n).ceil() as usize;
        v[rank.max(1) - 1]
    }

    #[test]
    fn p95_matches_brute_force_on_uniform_history() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let history: Vec<_> = (0..1000)
            .map(|_| req(rng.random_range(8..18), "crm", &[], rng.random_range(0..10_000)))
            .collect();
        let volumes: Vec<u64> = history.iter().map(|r| r.data_volume).collect();
        let b = build_baseline(&who(), &history, 50, Utc::now()).unwrap();
        assert_eq!(b.volume_p95, brute_p95(&volumes));
        assert_eq!(b.hour_histogram.iter().sum::<u64>(), b.window);
    }

    #[test]
    fn insufficient_history() {
        let history: Vec<_> = (0..10).map(|_| req(9, "crm", &[], 1)).collect();
        assert_eq!(
            build_baseline(&who(), &history, 50, Utc::now()),
            Err(GovernorError::InsufficientHistory { have: 10, need: 50 })
        );
    }

    #[test]
    fn identical_histories_identical_baselines() {
        let history: Vec<_> = (0..60).map(|i| req(i % 24, "crm", &["a@x.io"], i as u64)).collect();
        let at = Utc::now();
        assert_eq!(
            build_baseline(&who(), &history, 50, at).unwrap(),
            build_baseline(&who(), &history, 50, at).unwrap()
        );
    }

    fn fixture() -> BehavioralBaseline {
        // Volumes 1..=100 give p95 = 95 by nearest rank.
        let history: Vec<_> = (1..=100).map(|i| req(9 + (i % 3) as u32, "crm", &["ops@partner.io"], i)).collect();
        build_baseline(&who(), &history, 50, Utc::now()).unwrap()
    }

    #[test]
    fn in_baseline_request_scores_zero() {
        let b = fixture();
        assert_eq!(b.volume_p95, 95);
        assert_eq!(deviation_score(&b, &req(10, "crm", &["x@partner.io"], 40)).unwrap(), 0.0);
    }

    #[test]
    fn fully_deviant_request_scores_one() {
        let b = fixture();
        let r = req(3, "shell", &["x@evil.io"], 2 * 95);
        assert_eq!(deviation_score(&b, &r).unwrap(), 1.0);
    }

    #[test]
    fn volume_only_deviation() {
        let b = fixture();
        // v = 1.5 * p95 with p95 = 95 is not an integer; use a p95 of 100.
        let history: Vec<_> = (0..100).map(|_| req(9, "crm", &[], 100)).collect();
        let b100 = build_baseline(&who(), &history, 50, Utc::now()).unwrap();
        assert_eq!(b100.volume_p95, 100);
        assert_eq!(deviation_score(&b100, &req(9, "crm", &[], 150)).unwrap(), 0.125);
        assert!(deviation_score(&b, &req(9, "crm", &[], 95)).unwrap() == 0.0);
    }

    #[test]
    fn zero_p95_edge_cases() {
        let history: Vec<_> = (0..50).map(|_| req(9, "crm", &[], 0)).collect();
        let b = build_baseline(&who(), &history, 50, Utc::now()).unwrap();
        assert_eq!(deviation_breakdown(&b, &req(9, "crm", &[], 0)).unwrap().volume, 0.0);
        assert_eq!(deviation_breakdown(&b, &req(9, "crm", &[], 1)).unwrap().volume, 1.0);
    }

    #[test]
    fn mismatched_identity() {
        let b = fixture();
        let mut r = req(9, "crm", &[], 1);
        r.identity = WorkloadUri::new("corp", "agents/other").unwrap();
        assert!(matches!(deviation_score(&b, &r), Err(GovernorError::IdentityMismatch { .. })));
    }

    proptest! {
        #[test]
        fn deviation_bounded_and_zero_on_replay(
            seed in any::<u64>(),
            n in 50usize..120,
            probe_hour in 0u32..24,
            probe_volume in 0u64..50_000,
            probe_tool in "[a-d]",
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tools = ["a", "b", "c"];
            let domains = ["x.io", "y.io"];
            let history: Vec<_> = (0..n)
                .map(|_| {
                    let d = domains[rng.random_range(0..2)];
                    let rcpt = format!("u@{d}");
                    req(rng.random_range(6..20), tools[rng.random_range(0..3)], &[rcpt.as_str()], rng.random_range(0..10_000))
                })
                .collect();
            let b = build_baseline(&who(), &history, 50, Utc::now()).unwrap();
            let probe = req(probe_hour, &probe_tool, &["z@q.io"], probe_volume);
            let d = deviation_score(&b, &probe).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            // Replayed history requests at or under p95 volume never deviate.
            for r in history.iter().filter(|r| r.data_volume <= b.volume_p95) {
                prop_assert_eq!(deviation_score(&b, r).unwrap(), 0.0);
            }
        }
    }
}
