//! Session toolset measurement: the set of tools an agent registered at
//! initialization, fixed for the session.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CredentialAuthority, CredentialError};
use crate::canonical::{canonical_json_of, Digest32, FieldWriter};
use crate::uri::WorkloadUri;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    #[serde(default)]
    pub version: String,
    #[serde(default)]
    pub description: String,
}

impl ToolDescriptor {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            version: String::new(),
            description: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolsetMeasurement {
    pub identity: WorkloadUri,
    pub session_id: String,
    pub manifest_digest: Digest32,
    pub measured_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub(crate) struct Measured {
    pub(crate) measurement: ToolsetMeasurement,
    pub(crate) tools: BTreeSet<String>,
}

/// SHA3-256 over the sorted, de-duplicated canonical descriptors.
pub fn manifest_digest(manifest: &[ToolDescriptor]) -> Digest32 {
    let canon: BTreeSet<String> = manifest
        .iter()
        .map(|t| canonical_json_of(t).expect("descriptor serializes"))
        .collect();
    let mut w = FieldWriter::new();
    for c in &canon {
        w.str(c);
    }
    Digest32::of(&w.finish())
}

impl CredentialAuthority {
    pub fn measure_toolset(
        &mut self,
        identity: &WorkloadUri,
        session_id: &str,
        manifest: &[ToolDescriptor],
        now: DateTime<Utc>,
    ) -> Result<ToolsetMeasurement, CredentialError> {
        if manifest.is_empty() {
            return Err(CredentialError::EmptyManifest);
        }
        let measurement = ToolsetMeasurement {
            identity: identity.clone(),
            session_id: session_id.to_string(),
            manifest_digest: manifest_digest(manifest),
            measured_at: now,
        };
        self.measurements.insert(
            (identity.clone(), session_id.to_string()),
            Measured {
                measurement: measurement.clone(),
                tools: manifest.iter().map(|t| t.name.clone()).collect(),
            },
        );
        Ok(measurement)
    }

    pub fn measurement(&self, identity: &WorkloadUri, session_id: &str) -> Option<&ToolsetMeasurement> {
        self.measurements
            .get(&(identity.clone(), session_id.to_string()))
            .map(|m| &m.measurement)
    }

    /// True when the session was measured and `tool` is not in its manifest.
    /// Unmeasured sessions never flag.
    pub fn measurement_violation(&self, identity: &WorkloadUri, session_id: &str, tool: &str) -> bool {
        self.measurements
            .get(&(identity.clone(), session_id.to_string()))
            .is_some_and(|m| !m.tools.contains(tool))
    }

    pub fn measured_sessions(&self) -> usize {
        self.measurements.len()
    }
}
