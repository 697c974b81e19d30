//! HTTP/JSON API, command-line interface and seeded workload simulator for
//! the agentgov control plane.

pub mod api;
pub mod cli;
pub mod command;
pub mod config;
pub mod query;
pub mod sim;
pub mod store;
