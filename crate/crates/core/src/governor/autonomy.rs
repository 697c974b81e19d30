//! Earned autonomy levels.

use serde::{Deserialize, Serialize};

pub const MIN_LEVEL: u8 = 1;
pub const MAX_LEVEL: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// Permissive decision, or an escalation a human approved.
    Compliant,
    /// Denied request. Breaks a compliant run without demoting.
    NonCompliant,
    /// Escalation a human confirmed as a violation.
    ConfirmedViolation,
}

/// Returns the new level given the outcomes since the last level change.
/// Any confirmed violation demotes by one; otherwise a trailing run of at
/// least `promote_after` compliant outcomes promotes by one.
pub fn update_autonomy(level: u8, window: &[Outcome], promote_after: usize) -> u8 {
    let level = level.clamp(MIN_LEVEL, MAX_LEVEL);
    if window.contains(&Outcome::ConfirmedViolation) {
        return level.saturating_sub(1).max(MIN_LEVEL);
    }
    let run = window.iter().rev().take_while(|o| **o == Outcome::Compliant).count();
    if promote_after > 0 && run >= promote_after {
        (level + 1).min(MAX_LEVEL)
    } else {
        level
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn promotion_after_k_compliant() {
        assert_eq!(update_autonomy(2, &[Outcome::Compliant; 100], 100), 3);
        assert_eq!(update_autonomy(2, &[Outcome::Compliant; 99], 100), 2);
    }

    #[test]
    fn demotion_on_violation() {
        let mut w = vec![Outcome::Compliant; 150];
        w[3] = Outcome::ConfirmedViolation;
        assert_eq!(update_autonomy(3, &w, 100), 2);
        assert_eq!(update_autonomy(1, &w, 100), 1);
    }

    #[test]
    fn clamped_at_top() {
        assert_eq!(update_autonomy(4, &[Outcome::Compliant; 100], 100), 4);
    }

    #[test]
    fn denial_breaks_the_run() {
        let mut w = vec![Outcome::Compliant; 150];
        w[100] = Outcome::NonCompliant;
        assert_eq!(update_autonomy(2, &w, 100), 2);
    }

    fn outcome() -> impl Strategy<Value = Outcome> {
        prop_oneof![
            8 => Just(Outcome::Compliant),
            1 => Just(Outcome::NonCompliant),
            1 => Just(Outcome::ConfirmedViolation),
        ]
    }

    proptest! {
        #[test]
        fn level_moves_at_most_one(level in 1u8..=4, w in prop::collection::vec(outcome(), 0..300), k in 1usize..150) {
            let next = update_autonomy(level, &w, k);
            prop_assert!((MIN_LEVEL..=MAX_LEVEL).contains(&next));
            prop_assert!(next.abs_diff(level) <= 1);
        }
    }
}
