//! Intent-verification gate.
//!
//! Checkers see the task spec, the request and a small execution context
//! assembled by the control plane. They never receive agent-generated text
//! beyond the request's context notes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scoring::static_alignment;
use super::{AccessRequest, TaskSpec};

/// Facts about the execution environment gathered outside the agent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionContext {
    /// The toolset measured for this session differs from the attested one.
    pub measurement_violation: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct AlignmentInput<'a> {
    pub task: Option<&'a TaskSpec>,
    pub request: &'a AccessRequest,
    pub context: &'a ExecutionContext,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("intent checker unavailable: {0}")]
pub struct CheckerUnavailable(pub String);

pub trait IntentChecker: Send + Sync {
    fn alignment(&self, input: &AlignmentInput<'_>) -> Result<f64, CheckerUnavailable>;
}

/// Deterministic rule-based checker used by default.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceChecker;

impl IntentChecker for ReferenceChecker {
    fn alignment(&self, input: &AlignmentInput<'_>) -> Result<f64, CheckerUnavailable> {
        let d_align = static_alignment(input.request, input.task);
        let recipient_violation = match input.task {
            Some(t) if t.allows_recipients(&input.request.recipients) => 0.0,
            Some(_) => 1.0,
            None => (!input.request.recipients.is_empty()) as u8 as f64,
        };
        let measurement = if input.context.measurement_violation { 1.0 } else { 0.0 };
        let score = 1.0 - (0.5 * d_align + 0.25 * recipient_violation + 0.25 * measurement);
        Ok(score.clamp(0.0, 1.0))
    }
}
