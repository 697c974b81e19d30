//! Dimension maps and the weighted composite.

use serde::{Deserialize, Serialize};

use super::baseline::{deviation_score, BehavioralBaseline};
use super::{AccessRequest, DimensionWeights, GovernorError, TaskSpec};
use crate::scope::{ActionVerb, DataClass};

/// Irreversibility at or above this value counts as an irreversible action.
pub const IRREVERSIBLE_AT: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    pub sensitivity: f64,
    pub irreversibility: f64,
    pub deviation: f64,
    pub alignment_static: f64,
}

impl Dimensions {
    pub fn new(sensitivity: f64, irreversibility: f64, deviation: f64, alignment_static: f64) -> Self {
        Self {
            sensitivity,
            irreversibility,
            deviation,
            alignment_static,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.sensitivity, self.irreversibility, self.deviation, self.alignment_static]
    }

    pub fn is_irreversible(&self) -> bool {
        self.irreversibility >= IRREVERSIBLE_AT
    }
}

pub fn sensitivity_score(class: DataClass) -> f64 {
    match class {
        DataClass::Public => 0.0,
        DataClass::Internal => 0.25,
        DataClass::Confidential => 0.5,
        DataClass::Restricted => 0.75,
        DataClass::Critical => 1.0,
    }
}

pub fn irreversibility_score(action: ActionVerb) -> f64 {
    match action {
        ActionVerb::Read => 0.25,
        ActionVerb::Write => 0.5,
        ActionVerb::Send | ActionVerb::Publish => 0.85,
        ActionVerb::Delete | ActionVerb::Execute => 1.0,
    }
}

/// 0 when the tool/data-class pair is in the task's declared scope and every
/// recipient is allowlisted. A missing task spec scores 1.
pub fn static_alignment(request: &AccessRequest, task: Option<&TaskSpec>) -> f64 {
    match task {
        Some(t) if t.allows_tool(&request.tool, request.data_class) && t.allows_recipients(&request.recipients) => 0.0,
        _ => 1.0,
    }
}

/// Scores all four dimensions. Without a baseline the deviation dimension is
/// pinned to 1.
pub fn dimension_scores(
    request: &AccessRequest,
    task: Option<&TaskSpec>,
    baseline: Option<&BehavioralBaseline>,
) -> Result<Dimensions, GovernorError> {
    let deviation = match baseline {
        Some(b) => deviation_score(b, request)?,
        None => 1.0,
    };
    Ok(Dimensions {
        sensitivity: sensitivity_score(request.data_class),
        irreversibility: irreversibility_score(request.action),
        deviation,
        alignment_static: static_alignment(request, task),
    })
}

pub fn composite_score(dims: &Dimensions, weights: &DimensionWeights) -> f64 {
    let w = [weights.sensitivity, weights.irreversibility, weights.deviation, weights.alignment];
    let s: f64 = w.iter().zip(dims.as_array()).map(|(w, d)| w * d).sum();
    s.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governor::ToolScope;
    use crate::scope::ResourcePattern;
    use crate::uri::WorkloadUri;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn request(tool: &str, action: ActionVerb, class: DataClass) -> AccessRequest {
        AccessRequest {
            identity: WorkloadUri::new("corp", "agents/a").unwrap(),
            session_id: "s".into(),
            task_id: "t".into(),
            tool: tool.into(),
            resource: ResourcePattern::any(),
            action,
            data_class: class,
            recipients: Default::default(),
            data_volume: 10,
            timestamp: Utc.with_ymd_and_hms(2026, 3, 2, 10, 0, 0).unwrap(),
            context_notes: String::new(),
        }
    }

    fn task() -> TaskSpec {
        TaskSpec {
            task_id: "t".into(),
            identity: WorkloadUri::new("corp", "agents/a").unwrap(),
            description: "summarize tickets".into(),
            scope: vec![ToolScope {
                tool: "tickets".into(),
                max_data_class: DataClass::Confidential,
            }],
            recipients_allowlist: Default::default(),
        }
    }

    #[test]
    fn in_scope_public_read() {
        let r = request("tickets", ActionVerb::Read, DataClass::Public);
        let history = vec![r.clone(); 50];
        let b = crate::governor::build_baseline(&r.identity, &history, 50, Utc::now()).unwrap();
        let d = dimension_scores(&r, Some(&task()), Some(&b)).unwrap();
        assert_eq!(d, Dimensions::new(0.0, 0.25, 0.0, 0.0));
    }

    #[test]
    fn top_of_both_scales() {
        let d = dimension_scores(&request("tickets", ActionVerb::Execute, DataClass::Critical), Some(&task()), None).unwrap();
        assert_eq!(d.sensitivity, 1.0);
        assert_eq!(d.irreversibility, 1.0);
        assert!(d.is_irreversible());
    }

    #[test]
    fn out_of_scope_tool_and_class() {
        let t = task();
        assert_eq!(static_alignment(&request("shell", ActionVerb::Read, DataClass::Public), Some(&t)), 1.0);
        assert_eq!(static_alignment(&request("tickets", ActionVerb::Read, DataClass::Restricted), Some(&t)), 1.0);
        assert_eq!(static_alignment(&request("tickets", ActionVerb::Read, DataClass::Public), None), 1.0);
    }

    #[test]
    fn missing_baseline_pins_deviation() {
        let d = dimension_scores(&request("tickets", ActionVerb::Read, DataClass::Public), Some(&task()), None).unwrap();
        assert_eq!(d.deviation, 1.0);
    }

    #[test]
    fn irreversibility_map() {
        let expected = [
            (ActionVerb::Read, 0.25),
            (ActionVerb::Write, 0.5),
            (ActionVerb::Send, 0.85),
            (ActionVerb::Publish, 0.85),
            (ActionVerb::Delete, 1.0),
            (ActionVerb::Execute, 1.0),
        ];
        for (a, v) in expected {
            assert_eq!(irreversibility_score(a), v);
        }
    }

    #[test]
    fn composite_examples() {
        let w = DimensionWeights::default();
        assert_eq!(composite_score(&Dimensions::new(0.0, 0.0, 0.0, 0.0), &w), 0.0);
        assert_eq!(composite_score(&Dimensions::new(1.0, 1.0, 1.0, 1.0), &w), 1.0);
        assert_eq!(composite_score(&Dimensions::new(1.0, 0.5, 0.0, 0.5), &w), 0.5);
        let skew = DimensionWeights {
            sensitivity: 0.7,
            irreversibility: 0.1,
            deviation: 0.1,
            alignment: 0.1,
        };
        assert!((composite_score(&Dimensions::new(1.0, 1.0, 1.0, 1.0), &skew) - 1.0).abs() < 1e-12);
    }

    fn weights() -> impl Strategy<Value = DimensionWeights> {
        prop::array::uniform4(0.0f64..1.0).prop_filter_map("non-zero", |raw| {
            let s: f64 = raw.iter().sum();
            (s > 1e-6).then(|| DimensionWeights {
                sensitivity: raw[0] / s,
                irreversibility: raw[1] / s,
                deviation: raw[2] / s,
                alignment: raw[3] / s,
            })
        })
    }

    proptest! {
        #[test]
        fn composite_is_monotone(
            w in weights(),
            d in prop::array::uniform4(0.0f64..=1.0),
            i in 0usize..4,
            bump in 0.0f64..=1.0,
        ) {
            let base = Dimensions::new(d[0], d[1], d[2], d[3]);
            let mut up = d;
            up[i] = (up[i] + bump).min(1.0);
            let raised = Dimensions::new(up[0], up[1], up[2], up[3]);
            let a = composite_score(&base, &w);
            let b = composite_score(&raised, &w);
            prop_assert!(b >= a);
            prop_assert!((0.0..=1.0).contains(&a));
            let manual = w.sensitivity * d[0] + w.irreversibility * d[1] + w.deviation * d[2] + w.alignment * d[3];
            prop_assert!((a - manual.clamp(0.0, 1.0)).abs() < 1e-9);
        }
    }
}
