//! Workload URIs of the form `migt://<trust-domain>/<path>`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const SCHEME: &str = "migt://";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UriError {
    #[error("workload uri must start with `{SCHEME}`: {0}")]
    Scheme(String),
    #[error("workload uri has an empty or invalid trust domain: {0}")]
    TrustDomain(String),
    #[error("workload uri has an empty or invalid path: {0}")]
    Path(String),
}

/// Identifier of a workload (agent, service account, token, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WorkloadUri(String);

impl WorkloadUri {
    pub fn parse(raw: &str) -> Result<Self, UriError> {
        let rest = raw
            .strip_prefix(SCHEME)
            .ok_or_else(|| UriError::Scheme(raw.to_string()))?;
        let (domain, path) = rest
            .split_once('/')
            .ok_or_else(|| UriError::Path(raw.to_string()))?;
        let domain_ok = !domain.is_empty()
            && domain
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '.' || c == '-');
        if !domain_ok {
            return Err(UriError::TrustDomain(raw.to_string()));
        }
        let path_ok = !path.is_empty()
            && !path.starts_with('/')
            && !path.ends_with('/')
            && !path.contains("//")
            && path
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-._~/:@".contains(c));
        if !path_ok {
            return Err(UriError::Path(raw.to_string()));
        }
        Ok(Self(raw.to_string()))
    }

    /// Builds `migt://<trust_domain>/<path>`, validating the result.
    pub fn new(trust_domain: &str, path: &str) -> Result<Self, UriError> {
        Self::parse(&format!("{SCHEME}{trust_domain}/{path}"))
    }

    pub fn trust_domain(&self) -> &str {
        let rest = &self.0[SCHEME.len()..];
        rest.split_once('/').map(|(d, _)| d).unwrap_or(rest)
    }

    pub fn path(&self) -> &str {
        let rest = &self.0[SCHEME.len()..];
        rest.split_once('/').map(|(_, p)| p).unwrap_or("")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for WorkloadUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for WorkloadUri {
    type Err = UriError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for WorkloadUri {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for WorkloadUri {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Self::parse(&raw).map_err(serde::de::Error::custom)
    }
}
