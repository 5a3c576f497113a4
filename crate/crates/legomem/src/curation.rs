//! Offline memory construction: filter successful execution logs, distill
//! each into a structured memory unit via the curator model, validate, and
//! emit embedding-indexed banks.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bank::{build_banks, save_banks_with, BankError, BankManifest};
use crate::embedding::EmbeddingProvider;
use crate::gateway::{ChatMessage, GatewayError, ModelClient};
use crate::memory::{parse_memory_unit, MemoryError, MemoryTags, MemoryUnit};
use crate::office::AgentRegistry;
use crate::prompts::{curation_prompt, curation_retry_suffix};

/// Action runs longer than this are truncated when rendering a trajectory.
pub const ACTION_RUN_CAP: usize = 10;
const RUN_KEEP_HEAD: usize = 8;
const RUN_KEEP_TAIL: usize = 2;

/// Subtasks with more steps than this draw a validation warning.
pub const STEPS_WARN_CAP: usize = 10;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("curator output for log {log_id} could not be parsed after retry: {last_error}")]
    CurationParseFailure {
        log_id: String,
        last_error: String,
        /// The reply that failed to parse, preserved for audit.
        raw_text: String,
    },
    #[error("log {0} does not have a success outcome")]
    NotSuccessful(String),
    #[error("log at line {line} is malformed: {reason}")]
    MalformedLog { line: usize, reason: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error("curation io failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for CurationError {
    fn from(e: std::io::Error) -> Self {
        CurationError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
}

/// One event in an execution transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogEvent {
    Plan {
        steps: Vec<String>,
        revision: u32,
    },
    Directive {
        agent_name: String,
        subtask: String,
    },
    Action {
        agent_name: String,
        think: String,
        action: Value,
        observation: String,
        failed: bool,
    },
    Summary {
        agent_name: String,
        summary: String,
    },
    FinalAnswer {
        text: String,
    },
}

/// A full task transcript, the curation input and the run output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionLog {
    pub log_id: String,
    pub task_description: String,
    pub events: Vec<LogEvent>,
    pub outcome: Outcome,
}

impl ExecutionLog {
    /// A success outcome requires a final answer event.
    pub fn is_well_formed(&self) -> bool {
        self.outcome != Outcome::Success
            || self
                .events
                .iter()
                .any(|e| matches!(e, LogEvent::FinalAnswer { .. }))
    }

    /// Agent names mentioned anywhere in the events.
    pub fn agent_names(&self) -> BTreeSet<&str> {
        self.events
            .iter()
            .filter_map(|e| match e {
                LogEvent::Directive { agent_name, .. }
                | LogEvent::Action { agent_name, .. }
                | LogEvent::Summary { agent_name, .. } => Some(agent_name.as_str()),
                _ => None,
            })
            .collect()
    }
}

/// Reads JSON Lines execution logs, one per line, rejecting logs that
/// claim success without a final answer event.
pub fn load_logs(path: &Path) -> Result<Vec<ExecutionLog>, CurationError> {
    let raw = std::fs::read_to_string(path)?;
    let mut logs = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let log: ExecutionLog = serde_json::from_str(line)
            .map_err(|e| CurationError::Io(format!("line {}: {e}", i + 1)))?;
        if !log.is_well_formed() {
            return Err(CurationError::MalformedLog {
                line: i + 1,
                reason: format!(
                    "log {} has a success outcome but no final answer event",
                    log.log_id
                ),
            });
        }
        logs.push(log);
    }
    Ok(logs)
}

/// Writes logs as JSON Lines.
pub fn save_logs(logs: &[ExecutionLog], path: &Path) -> Result<(), CurationError> {
    let mut out = String::new();
    for log in logs {
        out.push_str(&serde_json::to_string(log).expect("log serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Keeps exactly the logs with a success outcome, input order preserved.
pub fn filter_successful(logs: &[ExecutionLog]) -> Vec<ExecutionLog> {
    logs.iter()
        .filter(|l| l.outcome == Outcome::Success)
        .cloned()
        .collect()
}

fn action_run_key(event: &LogEvent) -> Option<(String, String, String)> {
    match event {
        LogEvent::Action {
            agent_name, action, ..
        } => {
            let app = action.get("app").and_then(Value::as_str).unwrap_or("?");
            let name = action.get("action").and_then(Value::as_str).unwrap_or("?");
            Some((agent_name.clone(), app.to_string(), name.to_string()))
        }
        _ => None,
    }
}

fn render_action(lines: &mut Vec<String>, event: &LogEvent) {
    if let LogEvent::Action {
        agent_name,
        think,
        action,
        observation,
        failed,
    } = event
    {
        if !think.is_empty() {
            lines.push(format!("[{agent_name} think] {think}"));
        }
        lines.push(format!(
            "[{agent_name} action] {}",
            serde_json::to_string(action).expect("action value serializes")
        ));
        let marker = if *failed { " (FAILED)" } else { "" };
        lines.push(format!("[observation{marker}] {observation}"));
    }
}

/// Serializes a log into the trajectory text fed to the curator. Runs of
/// more than [`ACTION_RUN_CAP`] consecutive similar actions (same agent,
/// app, and action) keep the first 8 and last 2 with an elision marker.
pub fn render_trajectory(log: &ExecutionLog) -> String {
    let mut lines = vec![format!("Task: {}", log.task_description)];
    let mut i = 0;
    while i < log.events.len() {
        let event = &log.events[i];
        match event {
            LogEvent::Plan { steps, revision } => {
                let label = if *revision == 0 { "plan" } else { "replanned" };
                lines.push(format!("[{label}] {}", steps.join(" | ")));
                i += 1;
            }
            LogEvent::Directive { agent_name, subtask } => {
                lines.push(format!("[orchestrator -> {agent_name}] {subtask}"));
                i += 1;
            }
            LogEvent::Action { .. } => {
                let key = action_run_key(event);
                let mut run_end = i + 1;
                while run_end < log.events.len() && action_run_key(&log.events[run_end]) == key {
                    run_end += 1;
                }
                let run_len = run_end - i;
                if run_len > ACTION_RUN_CAP {
                    for e in &log.events[i..i + RUN_KEEP_HEAD] {
                        render_action(&mut lines, e);
                    }
                    lines.push(format!(
                        "[... {} similar actions omitted ...]",
                        run_len - RUN_KEEP_HEAD - RUN_KEEP_TAIL
                    ));
                    for e in &log.events[run_end - RUN_KEEP_TAIL..run_end] {
                        render_action(&mut lines, e);
                    }
                } else {
                    for e in &log.events[i..run_end] {
                        render_action(&mut lines, e);
                    }
                }
                i = run_end;
            }
            LogEvent::Summary { agent_name, summary } => {
                lines.push(format!("[{agent_name} summary] {summary}"));
                i += 1;
            }
            LogEvent::FinalAnswer { text } => {
                lines.push(format!("[final answer] {text}"));
                i += 1;
            }
        }
    }
    lines.join("\n")
}

/// Distills one successful log into a memory unit via the curator model.
/// Retries once with a corrective instruction when the first reply does
/// not parse. The unit's task description, source log id, and content-hash
/// id are always set from the log, whatever the curator returned.
pub fn distill(
    log: &ExecutionLog,
    curator: &dyn ModelClient,
    tags: &MemoryTags,
) -> Result<MemoryUnit, CurationError> {
    if log.outcome != Outcome::Success {
        return Err(CurationError::NotSuccessful(log.log_id.clone()));
    }
    let prompt = curation_prompt(&render_trajectory(log), &tags.start, &tags.end);
    let first = curator.complete(&[ChatMessage::user(prompt.clone())])?;
    let parsed = match parse_memory_unit(&first, tags) {
        Ok(unit) => Ok(unit),
        Err(first_err) => {
            let retry_prompt = format!(
                "{prompt}{}",
                curation_retry_suffix(&first_err.to_string(), &tags.start, &tags.end)
            );
            let second = curator.complete(&[ChatMessage::user(retry_prompt)])?;
            parse_memory_unit(&second, tags).map_err(|e: MemoryError| {
                CurationError::CurationParseFailure {
                    log_id: log.log_id.clone(),
                    last_error: e.to_string(),
                    raw_text: second,
                }
            })
        }
    }?;
    let mut unit = parsed;
    unit.task_description = log.task_description.clone();
    unit.source_log_id = log.log_id.clone();
    unit.finalize_id();
    Ok(unit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
    pub location: String,
}

/// Validation outcome: `ok` iff no error-severity issue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

/// Checks a unit against the agent registry and structural rules. Errors:
/// unknown agent, empty subtasks, empty task description, step-tag
/// literals hiding in think text or action parameters. Warnings: subtasks
/// longer than [`STEPS_WARN_CAP`] steps.
pub fn validate(unit: &MemoryUnit, registry: &AgentRegistry) -> ValidationReport {
    let mut issues = Vec::new();
    fn error(issues: &mut Vec<Issue>, message: String, location: String) {
        issues.push(Issue {
            severity: Severity::Error,
            message,
            location,
        });
    }

    if unit.task_description.trim().is_empty() {
        error(&mut issues, "task description is empty".into(), "unit".into());
    }
    if unit.subtasks.is_empty() {
        error(&mut issues, "unit has no subtasks".into(), "subtasks".into());
    }
    for (i, subtask) in unit.subtasks.iter().enumerate() {
        let location = format!("subtasks[{i}]");
        if !registry.contains(&subtask.agent_name) {
            error(
                &mut issues,
                format!("unknown agent \"{}\"", subtask.agent_name),
                location.clone(),
            );
        }
        if subtask.description.trim().is_empty() {
            error(&mut issues, "subtask description is empty".into(), location.clone());
        }
        for (j, step) in subtask.steps.iter().enumerate() {
            let step_location = format!("{location}.steps[{j}]");
            for tag in ["<think>", "</think>", "<action>", "</action>"] {
                if step.think.contains(tag) || step.action.to_json().contains(tag) {
                    error(
                        &mut issues,
                        format!("step tag literal {tag} embedded in step content"),
                        step_location.clone(),
                    );
                }
            }
            if step.action.app.is_empty() || step.action.action.is_empty() {
                error(
                    &mut issues,
                    "action lacks app or action name".into(),
                    step_location.clone(),
                );
            }
        }
        if subtask.steps.len() > STEPS_WARN_CAP {
            issues.push(Issue {
                severity: Severity::Warning,
                message: format!(
                    "subtask has {} steps, above the cap of {STEPS_WARN_CAP}",
                    subtask.steps.len()
                ),
                location,
            });
        }
    }

    let ok = issues.iter().all(|i| i.severity != Severity::Error);
    ValidationReport { ok, issues }
}

/// Why a filtered-successful log produced no bank unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedLog {
    pub log_id: String,
    pub reason: String,
    /// Raw curator text preserved for audit when parsing failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_curator_text: Option<String>,
}

/// Corpus curation accounting: kept + dropped = filtered-successful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationSummary {
    pub total_logs: usize,
    pub filtered_successful: usize,
    pub kept: usize,
    pub dropped: Vec<DroppedLog>,
    pub bank_content_hash: String,
    pub prompt_version: String,
}

/// Hash identifying the curation prompt template in manifests.
pub fn prompt_version() -> String {
    let template = curation_prompt("", "{start}", "{end}");
    hex::encode(&Sha256::digest(template.as_bytes())[..8])
}

/// Runs the offline pipeline: filter -> distill -> validate -> build and
/// save banks. Logs are processed in log-id order so re-running over the
/// same inputs produces a bank with the same content hash. Per-log
/// failures are recorded in the summary, never raised.
pub fn curate_corpus(
    logs: &[ExecutionLog],
    curator: &dyn ModelClient,
    provider: &dyn EmbeddingProvider,
    registry: &AgentRegistry,
    tags: &MemoryTags,
    out_dir: &Path,
) -> Result<(CurationSummary, BankManifest), CurationError> {
    let mut successful = filter_successful(logs);
    successful.sort_by(|a, b| a.log_id.cmp(&b.log_id));

    let mut kept = Vec::new();
    let mut kept_ids = BTreeSet::new();
    let mut dropped = Vec::new();
    for log in &successful {
        let unit = match distill(log, curator, tags) {
            Ok(unit) => unit,
            Err(CurationError::CurationParseFailure {
                log_id,
                last_error,
                raw_text,
            }) => {
                dropped.push(DroppedLog {
                    log_id,
                    reason: format!("parse failure: {last_error}"),
                    raw_curator_text: Some(raw_text),
                });
                continue;
            }
            // A curator outage for one log is a per-log failure, not a
            // pipeline abort.
            Err(CurationError::Gateway(e)) => {
                dropped.push(DroppedLog {
                    log_id: log.log_id.clone(),
                    reason: format!("curator call failed: {e}"),
                    raw_curator_text: None,
                });
                continue;
            }
            Err(other) => return Err(other),
        };
        let report = validate(&unit, registry);
        if !report.ok {
            let reasons: Vec<String> = report
                .issues
                .iter()
                .filter(|i| i.severity == Severity::Error)
                .map(|i| format!("{} ({})", i.message, i.location))
                .collect();
            dropped.push(DroppedLog {
                log_id: log.log_id.clone(),
                reason: format!("validation: {}", reasons.join("; ")),
                raw_curator_text: None,
            });
            continue;
        }
        if !kept_ids.insert(unit.id.clone()) {
            dropped.push(DroppedLog {
                log_id: log.log_id.clone(),
                reason: format!("duplicate of unit {}", unit.id),
                raw_curator_text: None,
            });
            continue;
        }
        kept.push(unit);
    }

    let bank = build_banks(&kept, provider)?;
    let prompt_version = prompt_version();
    let summary = CurationSummary {
        total_logs: logs.len(),
        filtered_successful: successful.len(),
        kept: kept.len(),
        dropped,
        bank_content_hash: crate::bank::bank_content_hash(&bank),
        prompt_version: prompt_version.clone(),
    };
    let manifest = save_banks_with(
        &bank,
        out_dir,
        Some(prompt_version),
        Some(serde_json::to_value(&summary).expect("summary serializes")),
    )?;
    Ok((summary, manifest))
}
