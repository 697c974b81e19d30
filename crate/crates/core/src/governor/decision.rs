//! The decision matrix.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::RiskPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Allow,
    AllowEnhancedLogging,
    Escalate,
    Deny,
}

impl Decision {
    pub const ALL: [Decision; 4] = [Decision::Allow, Decision::AllowEnhancedLogging, Decision::Escalate, Decision::Deny];

    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::Allow => "ALLOW",
            Decision::AllowEnhancedLogging => "ALLOW_ENHANCED_LOGGING",
            Decision::Escalate => "ESCALATE",
            Decision::Deny => "DENY",
        }
    }

    /// The request may proceed without a human.
    pub fn is_permissive(&self) -> bool {
        matches!(self, Decision::Allow | Decision::AllowEnhancedLogging)
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Adjustments recorded on an assessment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modifier {
    /// Threat-intel flag lowered the risk threshold.
    ThreatOverlay,
    /// Autonomy level 1 forced an irreversible action to escalation.
    AutonomyGate,
    /// Intent checker failed; alignment taken as 0.
    CheckerUnavailable,
    /// Session toolset measurement did not match.
    MeasurementViolation,
    /// No behavioral baseline; deviation taken as 1.
    MissingBaseline,
}

/// Maps scores to a decision. `alignment` is only consulted when the
/// composite reaches the effective risk threshold; pass the checker output
/// (or 0 when unavailable). Returns the decision and whether the gate ran.
pub fn classify(
    composite: f64,
    alignment: impl FnOnce() -> f64,
    autonomy_level: u8,
    irreversible: bool,
    threat_flagged: bool,
    policy: &RiskPolicy,
) -> (Decision, Option<f64>) {
    let (decision, gate) = if composite < policy.effective_t_risk(threat_flagged) {
        (Decision::Allow, None)
    } else {
        let a = alignment();
        let d = if a >= policy.t_align {
            Decision::AllowEnhancedLogging
        } else if composite >= policy.t_critical {
            Decision::Deny
        } else {
            Decision::Escalate
        };
        (d, Some(a))
    };
    if autonomy_level <= 1 && irreversible && decision.is_permissive() {
        (Decision::Escalate, gate)
    } else {
        (decision, gate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d(composite: f64, alignment: f64, level: u8, irrev: bool, flagged: bool) -> Decision {
        classify(composite, || alignment, level, irrev, flagged, &RiskPolicy::default()).0
    }

    #[test]
    fn matrix_examples() {
        assert_eq!(d(0.3, 0.0, 3, false, false), Decision::Allow);
        assert_eq!(d(0.7, 0.9, 3, false, false), Decision::AllowEnhancedLogging);
        assert_eq!(d(0.9, 0.2, 3, false, false), Decision::Deny);
        assert_eq!(d(0.6, 0.2, 3, false, false), Decision::Escalate);
    }

    #[test]
    fn threat_flag_lowers_threshold() {
        assert_eq!(d(0.4, 0.2, 3, false, false), Decision::Allow);
        assert_eq!(d(0.4, 0.2, 3, false, true), Decision::Escalate);
    }

    #[test]
    fn autonomy_gate() {
        assert_eq!(d(0.1, 1.0, 1, true, false), Decision::Escalate);
        assert_eq!(d(0.7, 0.9, 1, true, false), Decision::Escalate);
        assert_eq!(d(0.9, 0.1, 1, true, false), Decision::Deny);
        assert_eq!(d(0.1, 1.0, 2, true, false), Decision::Allow);
        assert_eq!(d(0.1, 1.0, 1, false, false), Decision::Allow);
    }

    #[test]
    fn gate_not_invoked_below_threshold() {
        let (dec, gate) = classify(0.2, || panic!("gate ran"), 3, false, false, &RiskPolicy::default());
        assert_eq!(dec, Decision::Allow);
        assert_eq!(gate, None);
    }

    /// Independently coded table: each row is a guard and the resulting
    /// decision, evaluated top to bottom.
    fn oracle(c: f64, a: f64, level: u8, irrev: bool, flagged: bool) -> Decision {
        let t_risk = if flagged { 0.5 * 0.6 } else { 0.5 };
        let low = c < t_risk;
        let aligned = a >= 0.7;
        let critical = c >= 0.85;
        let gated = level == 1 && irrev;
        let rows: [(bool, Decision); 6] = [
            (gated && !low && !aligned && critical, Decision::Deny),
            (gated, Decision::Escalate),
            (low, Decision::Allow),
            (aligned, Decision::AllowEnhancedLogging),
            (critical, Decision::Deny),
            (true, Decision::Escalate),
        ];
        rows.iter().find(|(g, _)| *g).map(|(_, d)| *d).unwrap()
    }

    #[test]
    fn matches_oracle_on_random_tuples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = [0.0, 0.3, 0.5, 0.7, 0.85, 1.0];
        for i in 0..20_000 {
            // Mix exact threshold values with uniform draws.
            let c = if i % 4 == 0 { grid[rng.random_range(0..grid.len())] } else { rng.random::<f64>() };
            let a = if i % 3 == 0 { grid[rng.random_range(0..grid.len())] } else { rng.random::<f64>() };
            let level = rng.random_range(1..=4u8);
            let irrev = rng.random_bool(0.5);
            let flagged = rng.random_bool(0.5);
            assert_eq!(d(c, a, level, irrev, flagged), oracle(c, a, level, irrev, flagged), "c={c} a={a} level={level} irrev={irrev} flagged={flagged}");
        }
    }

    fn rank(d: Decision) -> u8 {
        match d {
            Decision::Allow => 0,
            Decision::AllowEnhancedLogging => 1,
            Decision::Escalate => 2,
            Decision::Deny => 3,
        }
    }

    proptest! {
        #[test]
        fn flagging_never_yields_allow(c in 0.0f64..=1.0, a in 0.0f64..=1.0, level in 1u8..=4, irrev: bool) {
            let plain = d(c, a, level, irrev, false);
            let flagged = d(c, a, level, irrev, true);
            if plain != Decision::Allow {
                prop_assert_ne!(flagged, Decision::Allow);
            }
            prop_assert!(rank(flagged) >= rank(plain));
        }

        #[test]
        fn lower_alignment_never_loosens(c in 0.0f64..=1.0, a in 0.0f64..=1.0, drop in 0.0f64..=1.0, level in 1u8..=4, irrev: bool, flagged: bool) {
            let hi = d(c, a, level, irrev, flagged);
            let lo = d(c, (a - drop).max(0.0), level, irrev, flagged);
            prop_assert!(rank(lo) >= rank(hi));
        }
    }
}
