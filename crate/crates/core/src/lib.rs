//! Governance control plane for machine and AI-agent identities.

pub mod audit;
pub mod canonical;
pub mod config;
pub mod credentials;
pub mod governor;
pub mod metrics;
pub mod plane;
pub mod provenance;
pub mod registry;
pub mod regulatory;
pub mod risk;
pub mod scope;
pub mod threat;
pub mod uri;

#[cfg(test)]
mod testutil;
