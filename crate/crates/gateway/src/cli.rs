//! Command-line interface. `run` is the whole program minus process exit,
//! so tests drive it directly.

use std::fs;
use std::path::{Path, PathBuf};

use agentgov_core::audit::ReconstructQuery;
use agentgov_core::governor::{AccessRequest, ResolutionVerdict};
use agentgov_core::metrics::MetricsReport;
use agentgov_core::registry::{IdentitySpec, LifecycleEvent, OwnerRef};
use agentgov_core::uri::WorkloadUri;
use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::api::{self, AppState};
use crate::command::Command;
use crate::config::GatewayConfig;
use crate::query;
use crate::sim::{run_simulation, Scenario, ScenarioName};
use crate::store::Store;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "agentgov", version, about = "Identity governance control plane for AI agents")]
pub struct Cli {
    /// TOML configuration file; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured data directory.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Serve the HTTP/JSON API.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
    /// Submit a provisioning request from a JSON identity spec.
    Register {
        spec: PathBuf,
        #[arg(long, default_value = "cli")]
        approver: String,
    },
    /// Apply a lifecycle event to an identity.
    Lifecycle { id: String, event: LifecycleArg },
    /// Decide a JSON access request.
    Decide { request: PathBuf },
    /// Resolve a pending escalation.
    Resolve {
        escalation_id: String,
        #[arg(long)]
        verdict: VerdictArg,
        #[arg(long)]
        resolver: String,
        #[arg(long, default_value = "")]
        note: String,
    },
    /// Audit ledger operations.
    Audit {
        #[command(subcommand)]
        action: AuditVerb,
    },
    /// Program metrics report.
    Metrics,
    /// Evaluate a roadmap phase gate.
    PhaseCheck {
        phase: u8,
        /// Evaluate a saved metrics report instead of the store.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a seeded workload scenario.
    Simulate {
        scenario: ScenarioName,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        identities: Option<usize>,
        #[arg(long)]
        requests: Option<usize>,
    },
    /// List cross-jurisdiction conflicts.
    Conflicts,
    /// Write a report artifact.
    Export {
        what: ExportKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AuditVerb {
    /// Verify the hash chain of the store, or of a JSON Lines export.
    Verify {
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Reconstruct the entries matching the filters.
    Reconstruct {
        #[arg(long)]
        identity: Option<String>,
        #[arg(long)]
        session: Option<String>,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        from: Option<DateTime<Utc>>,
        #[arg(long)]
        to: Option<DateTime<Utc>>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LifecycleArg {
    Approve,
    Activate,
    Suspend,
    Resume,
    Decommission,
}

impl From<LifecycleArg> for LifecycleEvent {
    fn from(a: LifecycleArg) -> Self {
        match a {
            LifecycleArg::Approve => LifecycleEvent::Approve,
            LifecycleArg::Activate => LifecycleEvent::Activate,
            LifecycleArg::Suspend => LifecycleEvent::Suspend,
            LifecycleArg::Resume => LifecycleEvent::Resume,
            LifecycleArg::Decommission => LifecycleEvent::Decommission,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VerdictArg {
    Approved,
    Violation,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExportKind {
    /// Audit ledger, JSON Lines.
    Audit,
    /// Identity registry, JSON Lines.
    Registry,
    /// Identity registry, CSV.
    RegistryCsv,
    /// Jurisdiction matrix, CSV.
    MatrixCsv,
    /// Threat exposure assessment, CSV.
    ExposureCsv,
}

/// Exit code plus captured output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(stdout: String, stderr: String) -> Self {
        Self {
            code: EXIT_FAILURE,
            stdout,
            stderr,
        }
    }
}

type CliResult = Result<Outcome, String>;

pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome::ok(text)
            } else {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    execute(cli).unwrap_or_else(|e| Outcome::fail(String::new(), format!("error: {e}\n")))
}

fn load_config(cli: &Cli) -> Result<GatewayConfig, String> {
    let mut config = match &cli.config {
        Some(path) => GatewayConfig::load(path).map_err(|e| e.to_string())?,
        None => GatewayConfig::default(),
    };
    if let Some(dir) = &cli.data_dir {
        config.data_dir = dir.clone();
    }
    Ok(config)
}

fn open_store(config: &GatewayConfig) -> Result<Store, String> {
    Store::open(&config.data_dir, config.plane.clone()).map_err(|e| e.to_string())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn render<T: Serialize>(json: bool, value: &T) -> String {
    let v = serde_json::to_value(value).expect("outputs serialize");
    if json {
        return format!("{}\n", serde_json::to_string_pretty(&v).expect("json"));
    }
    let mut out = String::new();
    table(&v, "", &mut out);
    out
}

/// Flattens a JSON value into `dotted.key  value` lines. Percentages
/// (`{num, den, value}`) print as `value% (num/den)`.
fn table(v: &Value, prefix: &str, out: &mut String) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) if map.len() == 3 && ["num", "den", "value"].iter().all(|k| map.contains_key(*k)) => {
            out.push_str(&format!("{prefix:<48} {:.1}% ({}/{})\n", map["value"].as_f64().unwrap_or(0.0), map["num"], map["den"]));
        }
        Value::Object(map) if !map.is_empty() => map.iter().for_each(|(k, x)| table(x, &join(k), out)),
        Value::Array(items) if !items.is_empty() => {
            items.iter().enumerate().for_each(|(i, x)| table(x, &join(&i.to_string()), out))
        }
        Value::String(s) => out.push_str(&format!("{prefix:<48} {s}\n")),
        other => out.push_str(&format!("{prefix:<48} {other}\n")),
    }
}

fn execute(cli: Cli) -> CliResult {
    let config = load_config(&cli)?;
    let now = Utc::now();
    let json = cli.json;
    match cli.verb {
        Verb::Serve { listen } => {
            let listen = listen.unwrap_or(config.listen.clone());
            let store = open_store(&config)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime
                .block_on(api::serve(&listen, AppState::new(store)))
                .map_err(|e| format!("cannot serve on {listen}: {e}"))?;
            Ok(Outcome::ok(String::new()))
        }
        Verb::Register { spec, approver } => {
            let spec: IdentitySpec = read_json(&spec)?;
            let approver = OwnerRef::new(approver.clone(), approver);
            write(&config, Command::RegisterIdentity { spec, approver }, now, json)
        }
        Verb::Lifecycle { id, event } => {
            let id = WorkloadUri::parse(&id).map_err(|e| e.to_string())?;
            write(&config, Command::Lifecycle { id, event: event.into() }, now, json)
        }
        Verb::Decide { request } => {
            let request: AccessRequest = read_json(&request)?;
            write(&config, Command::Decide { request }, now, json)
        }
        Verb::Resolve {
            escalation_id,
            verdict,
            resolver,
            note,
        } => {
            let verdict = match verdict {
                VerdictArg::Approved => ResolutionVerdict::Approved,
                VerdictArg::Violation => ResolutionVerdict::ConfirmedViolation,
            };
            let command = Command::ResolveEscalation {
                escalation_id,
                verdict,
                resolver,
                note,
            };
            write(&config, command, now, json)
        }
        Verb::Audit {
            action: AuditVerb::Verify { export },
        } => {
            let status = match export {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                    query::audit_verify_export(&text)
                }
                None => query::audit_verify(open_store(&config)?.plane()),
            };
            let text = if json {
                render(true, &status)
            } else if let Some(seq) = status.broken_at {
                format!("BROKEN broken-at {seq} ({} entries)\n", status.entries)
            } else {
                format!("VALID ({} entries)\n", status.entries)
            };
            Ok(if status.valid { Outcome::ok(text) } else { Outcome::fail(text, String::new()) })
        }
        Verb::Audit {
            action:
                AuditVerb::Reconstruct {
                    identity,
                    session,
                    task,
                    from,
                    to,
                },
        } => {
            let identity = identity
                .map(|i| WorkloadUri::parse(&i))
                .transpose()
                .map_err(|e| e.to_string())?;
            let q = ReconstructQuery {
                identity,
                session,
                task,
                from,
                to,
            };
            let store = open_store(&config)?;
            let r = query::reconstruct(store.plane(), &q).map_err(|e| e.to_string())?;
            Ok(Outcome::ok(render(json, &r)))
        }
        Verb::Metrics => Ok(Outcome::ok(render(json, &query::metrics(open_store(&config)?.plane(), now)))),
        Verb::PhaseCheck { phase, report } => {
            let metrics: MetricsReport = match report {
                Some(path) => read_json(&path)?,
                None => query::metrics(open_store(&config)?.plane(), now),
            };
            let r = query::phase_report(&metrics, phase).map_err(|e| e.to_string())?;
            let text = if json {
                render(true, &r)
            } else {
                let failed: Vec<String> = r
                    .failed
                    .iter()
                    .map(|c| serde_json::to_value(c).expect("criterion").as_str().unwrap_or_default().to_string())
                    .collect();
                if r.passed {
                    format!("phase {phase}: PASS\n")
                } else {
                    format!("phase {phase}: FAIL {}\n", failed.join(", "))
                }
            };
            Ok(if r.passed { Outcome::ok(text) } else { Outcome::fail(text, String::new()) })
        }
        Verb::Simulate {
            scenario,
            seed,
            identities,
            requests,
        } => {
            let mut s = Scenario::new(scenario, seed);
            s.identities = identities.unwrap_or(s.identities);
            s.requests = requests.unwrap_or(s.requests);
            if s.identities == 0 {
                return Err("a scenario needs at least one identity".into());
            }
            let report = run_simulation(&s);
            Ok(Outcome::ok(render(json, &report)))
        }
        Verb::Conflicts => Ok(Outcome::ok(render(json, &query::conflicts(open_store(&config)?.plane())))),
        Verb::Export { what, out } => {
            let store = open_store(&config)?;
            let text = export(&store, what, now)?;
            match out {
                Some(path) => {
                    fs::write(&path, &text).map_err(|e| format!("{}: {e}", path.display()))?;
                    Ok(Outcome::ok(format!("wrote {}\n", path.display())))
                }
                None => Ok(Outcome::ok(text)),
            }
        }
    }
}

fn write(config: &GatewayConfig, command: Command, now: DateTime<Utc>, json: bool) -> CliResult {
    let mut store = open_store(config)?;
    let out = store.execute(command, now).map_err(|e| e.to_string())?;
    Ok(Outcome::ok(render(json, &out)))
}

fn csv_text<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| e.to_string())?;
    }
    String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct RegistryRow {
    id: String,
    kind: String,
    state: String,
    owner: String,
    autonomy: u8,
    grants: usize,
    flags: String,
    review_due: DateTime<Utc>,
}

#[derive(Serialize)]
struct MatrixCsvRow {
    domain: String,
    jurisdiction: String,
    obligation: String,
    citations: String,
    conflict_level: String,
}

#[derive(Serialize)]
struct ExposureCsvRow {
    credential_id: String,
    holder: String,
    standing: bool,
    indicators: String,
    campaigns: String,
    downstream_systems: String,
}

fn label<T: Serialize>(x: &T) -> String {
    match serde_json::to_value(x).expect("serializes") {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn export(store: &Store, what: ExportKind, now: DateTime<Utc>) -> Result<String, String> {
    let plane = store.plane();
    match what {
        ExportKind::Audit => Ok(plane.ledger().export_jsonl()),
        ExportKind::Registry => Ok(plane.registry().export_jsonl()),
        ExportKind::RegistryCsv => csv_text(plane.registry().iter().map(|i| RegistryRow {
            id: i.id.to_string(),
            kind: label(&i.kind),
            state: i.state().to_string(),
            owner: i.owner_id().unwrap_or_default().to_string(),
            autonomy: i.autonomy,
            grants: i.grants.len(),
            flags: i.flags.iter().map(label).collect::<Vec<_>>().join(";"),
            review_due: i.review_due,
        })),
        ExportKind::MatrixCsv => csv_text(plane.matrix().rows().into_iter().map(|r| MatrixCsvRow {
            domain: label(&r.domain),
            jurisdiction: label(&r.jurisdiction),
            obligation: r.obligation,
            citations: r.citations.join(";"),
            conflict_level: label(&r.conflict_level),
        })),
        ExportKind::ExposureCsv => csv_text(plane.exposure_assessment(now).rows.into_iter().map(|r| ExposureCsvRow {
            credential_id: r.credential_id,
            holder: r.holder.to_string(),
            standing: r.standing,
            indicators: r.matched_indicators.into_iter().collect::<Vec<_>>().join(";"),
            campaigns: r.campaigns.into_iter().collect::<Vec<_>>().join(";"),
            downstream_systems: r.downstream_systems.into_iter().collect::<Vec<_>>().join(";"),
        })),
    }
}
