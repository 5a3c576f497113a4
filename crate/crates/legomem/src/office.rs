//! Deterministic in-process office environment: calendar, email, document,
//! spreadsheet, and system apps behind a structured action API, plus
//! programmatic success checkers.
//!
//! All mutation goes through [`execute_action`]. A malformed or failing
//! action yields a failed observation, never a crash or a partial
//! mutation. Identical action sequences from [`reset`] produce identical
//! workspaces and observations.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::action::Action;

const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarEvent {
    pub summary: String,
    pub time_start: String,
    pub time_end: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailMessage {
    pub from: String,
    pub to: String,
    pub subject: String,
    pub body: String,
}

/// Sparse sheet: row -> col -> cell text (1-based indices by convention).
pub type Sheet = BTreeMap<u64, BTreeMap<u64, String>>;

/// The simulated workspace state. The clock is a fixed timestamp so runs
/// carry no wall-time nondeterminism.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Workspace {
    pub users: BTreeSet<String>,
    pub calendars: BTreeMap<String, Vec<CalendarEvent>>,
    pub mailboxes: BTreeMap<String, Vec<EmailMessage>>,
    pub documents: BTreeMap<String, String>,
    pub sheets: BTreeMap<String, Sheet>,
    pub clock: String,
}

impl Workspace {
    pub fn with_users<I, S>(users: I, clock: &str) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ws = Workspace {
            clock: clock.to_string(),
            ..Default::default()
        };
        for user in users {
            let user = user.into();
            ws.calendars.entry(user.clone()).or_default();
            ws.mailboxes.entry(user.clone()).or_default();
            ws.users.insert(user);
        }
        ws
    }

    /// Hash of the canonical JSON form; stable across platforms.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("workspace serialization cannot fail");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Result of one action: rendered text plus a failure flag. Failures carry
/// an `ERROR (<kind>)` prefix in the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    pub failed: bool,
}

impl Observation {
    fn ok(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            failed: false,
        }
    }

    fn error(kind: &str, message: impl std::fmt::Display) -> Self {
        Self {
            text: format!("ERROR ({kind}): {message}"),
            failed: true,
        }
    }
}

macro_rules! require_param {
    ($action:expr, $key:literal) => {
        match $action.param_text($key) {
            Some(v) => v,
            None => {
                return Observation::error("MissingParam", format!("missing parameter \"{}\"", $key))
            }
        }
    };
}

macro_rules! require_index {
    ($action:expr, $key:literal) => {
        match $action.param_index($key) {
            Some(v) => v,
            None => {
                return Observation::error(
                    "MissingParam",
                    format!("missing or non-numeric parameter \"{}\"", $key),
                )
            }
        }
    };
}

fn parse_time(value: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(value.trim(), TIME_FORMAT).ok()
}

fn user_param(action: &Action) -> Option<String> {
    // The curation example uses both "user" and "username"; accept either.
    action
        .param_text("user")
        .or_else(|| action.param_text("username"))
}

fn render_sheet(sheet: &Sheet) -> String {
    let mut lines = Vec::new();
    for (row, cols) in sheet {
        for (col, value) in cols {
            lines.push(format!("R{row}C{col}: {value}"));
        }
    }
    if lines.is_empty() {
        "(empty sheet)".to_string()
    } else {
        lines.join("\n")
    }
}

/// Creates a fresh workspace from a fixture seed.
pub fn reset(fixture: &TaskFixture) -> Workspace {
    fixture.initial_workspace.clone()
}

/// Dispatches one action against the workspace. Every failure mode comes
/// back as a failed observation with the mutation skipped.
pub fn execute_action(ws: &mut Workspace, action: &Action) -> Observation {
    match action.app.as_str() {
        "calendar" => calendar_action(ws, action),
        "email" => email_action(ws, action),
        "document" => document_action(ws, action),
        "sheet" => sheet_action(ws, action),
        "system" => system_action(ws, action),
        other => Observation::error("UnknownApp", format!("no app named \"{other}\"")),
    }
}

fn require_user(ws: &Workspace, user: &str) -> Option<Observation> {
    if ws.users.contains(user) {
        None
    } else {
        Some(Observation::error(
            "NotFound",
            format!("no user named \"{user}\""),
        ))
    }
}

fn calendar_action(ws: &mut Workspace, action: &Action) -> Observation {
    match action.action.as_str() {
        "create_event" => {
            let Some(user) = user_param(action) else {
                return Observation::error("MissingParam", "missing parameter \"user\"");
            };
            let summary = require_param!(action, "summary");
            let start_raw = require_param!(action, "time_start");
            let end_raw = require_param!(action, "time_end");
            if let Some(err) = require_user(ws, &user) {
                return err;
            }
            let (Some(start), Some(end)) = (parse_time(&start_raw), parse_time(&end_raw)) else {
                return Observation::error(
                    "InvalidParam",
                    format!("times must use the format {TIME_FORMAT}"),
                );
            };
            if start >= end {
                return Observation::error("InvalidParam", "time_start must precede time_end");
            }
            let event = CalendarEvent {
                summary: summary.clone(),
                time_start: start.format(TIME_FORMAT).to_string(),
                time_end: end.format(TIME_FORMAT).to_string(),
            };
            let text = format!(
                "Created event \"{}\" for {} from {} to {}",
                event.summary, user, event.time_start, event.time_end
            );
            ws.calendars.entry(user).or_default().push(event);
            Observation::ok(text)
        }
        "list_events" => {
            let Some(user) = user_param(action) else {
                return Observation::error("MissingParam", "missing parameter \"user\"");
            };
            if let Some(err) = require_user(ws, &user) {
                return err;
            }
            let events = ws.calendars.get(&user).map(Vec::as_slice).unwrap_or(&[]);
            if events.is_empty() {
                return Observation::ok(format!("No events found for {user}"));
            }
            let lines: Vec<String> = events
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    format!(
                        "{}. \"{}\" from {} to {}",
                        i + 1,
                        e.summary,
                        e.time_start,
                        e.time_end
                    )
                })
                .collect();
            Observation::ok(format!("Events for {user}:\n{}", lines.join("\n")))
        }
        "delete_event" => {
            let Some(user) = user_param(action) else {
                return Observation::error("MissingParam", "missing parameter \"user\"");
            };
            let summary = require_param!(action, "summary");
            if let Some(err) = require_user(ws, &user) {
                return err;
            }
            let events = ws.calendars.entry(user.clone()).or_default();
            let before = events.len();
            events.retain(|e| e.summary != summary);
            let removed = before - events.len();
            if removed == 0 {
                return Observation::error(
                    "NotFound",
                    format!("no event \"{summary}\" on {user}'s calendar"),
                );
            }
            Observation::ok(format!(
                "Deleted {removed} event(s) \"{summary}\" from {user}'s calendar"
            ))
        }
        other => Observation::error(
            "UnknownAction",
            format!("calendar has no action \"{other}\""),
        ),
    }
}

fn email_action(ws: &mut Workspace, action: &Action) -> Observation {
    match action.action.as_str() {
        "send_email" => {
            let from = require_param!(action, "from");
            let to = require_param!(action, "to");
            let subject = require_param!(action, "subject");
            let body = require_param!(action, "body");
            if let Some(err) = require_user(ws, &from).or_else(|| require_user(ws, &to)) {
                return err;
            }
            let text = format!("Email sent from {from} to {to} with subject \"{subject}\"");
            ws.mailboxes.entry(to.clone()).or_default().push(EmailMessage {
                from,
                to,
                subject,
                body,
            });
            Observation::ok(text)
        }
        "list_emails" => {
            let Some(user) = user_param(action) else {
                return Observation::error("MissingParam", "missing parameter \"user\"");
            };
            if let Some(err) = require_user(ws, &user) {
                return err;
            }
            let emails = ws.mailboxes.get(&user).map(Vec::as_slice).unwrap_or(&[]);
            if emails.is_empty() {
                return Observation::ok(format!("No emails for {user}"));
            }
            let lines: Vec<String> = emails
                .iter()
                .enumerate()
                .map(|(i, m)| format!("{}. from {}: \"{}\"", i + 1, m.from, m.subject))
                .collect();
            Observation::ok(format!("Emails for {user}:\n{}", lines.join("\n")))
        }
        "read_email" => {
            let Some(user) = user_param(action) else {
                return Observation::error("MissingParam", "missing parameter \"user\"");
            };
            let index = require_index!(action, "index");
            if let Some(err) = require_user(ws, &user) {
                return err;
            }
            let emails = ws.mailboxes.get(&user).map(Vec::as_slice).unwrap_or(&[]);
            if index == 0 || index as usize > emails.len() {
                return Observation::error(
                    "NotFound",
                    format!("{user} has no email at index {index}"),
                );
            }
            let m = &emails[index as usize - 1];
            Observation::ok(format!(
                "From: {}\nTo: {}\nSubject: {}\n\n{}",
                m.from, m.to, m.subject, m.body
            ))
        }
        other => Observation::error("UnknownAction", format!("email has no action \"{other}\"")),
    }
}

fn document_action(ws: &mut Workspace, action: &Action) -> Observation {
    match action.action.as_str() {
        "create_doc" => {
            let name = require_param!(action, "name");
            let content = action.param_text("content").unwrap_or_default();
            if ws.documents.contains_key(&name) {
                return Observation::error(
                    "InvalidParam",
                    format!("document \"{name}\" already exists"),
                );
            }
            ws.documents.insert(name.clone(), content);
            Observation::ok(format!("Created document \"{name}\""))
        }
        "append_text" => {
            let name = require_param!(action, "name");
            let text = require_param!(action, "text");
            match ws.documents.get_mut(&name) {
                Some(doc) => {
                    doc.push_str(&text);
                    Observation::ok(format!("Appended {} characters to \"{name}\"", text.len()))
                }
                None => Observation::error("NotFound", format!("no document named \"{name}\"")),
            }
        }
        "read_doc" => {
            let name = require_param!(action, "name");
            match ws.documents.get(&name) {
                Some(doc) => Observation::ok(format!("Contents of \"{name}\":\n{doc}")),
                None => Observation::error("NotFound", format!("no document named \"{name}\"")),
            }
        }
        other => Observation::error(
            "UnknownAction",
            format!("document has no action \"{other}\""),
        ),
    }
}

fn sheet_action(ws: &mut Workspace, action: &Action) -> Observation {
    match action.action.as_str() {
        "set_cell" => {
            let name = require_param!(action, "name");
            let row = require_index!(action, "row");
            let col = require_index!(action, "col");
            let value = require_param!(action, "value");
            ws.sheets
                .entry(name.clone())
                .or_default()
                .entry(row)
                .or_default()
                .insert(col, value.clone());
            Observation::ok(format!("Set {name}!R{row}C{col} = {value}"))
        }
        "get_cell" => {
            let name = require_param!(action, "name");
            let row = require_index!(action, "row");
            let col = require_index!(action, "col");
            let Some(sheet) = ws.sheets.get(&name) else {
                return Observation::error("NotFound", format!("no sheet named \"{name}\""));
            };
            match sheet.get(&row).and_then(|cols| cols.get(&col)) {
                Some(value) => Observation::ok(format!("{name}!R{row}C{col} = {value}")),
                None => Observation::ok(format!("{name}!R{row}C{col} is empty")),
            }
        }
        "read_sheet" => {
            let name = require_param!(action, "name");
            match ws.sheets.get(&name) {
                Some(sheet) => {
                    Observation::ok(format!("Sheet \"{name}\":\n{}", render_sheet(sheet)))
                }
                None => Observation::error("NotFound", format!("no sheet named \"{name}\"")),
            }
        }
        other => Observation::error("UnknownAction", format!("sheet has no action \"{other}\"")),
    }
}

fn system_action(ws: &mut Workspace, action: &Action) -> Observation {
    match action.action.as_str() {
        "list_files" => {
            let docs: Vec<&str> = ws.documents.keys().map(String::as_str).collect();
            let sheets: Vec<&str> = ws.sheets.keys().map(String::as_str).collect();
            let fmt = |items: Vec<&str>| {
                if items.is_empty() {
                    "(none)".to_string()
                } else {
                    items.join(", ")
                }
            };
            Observation::ok(format!(
                "Documents: {}\nSheets: {}",
                fmt(docs),
                fmt(sheets)
            ))
        }
        "copy" => {
            let source_app = require_param!(action, "source_app");
            let source_name = require_param!(action, "source_name");
            let target_app = require_param!(action, "target_app");
            let target_name = require_param!(action, "target_name");
            if target_app != "document" {
                return Observation::error(
                    "InvalidParam",
                    "copy currently targets the document app only",
                );
            }
            let content = match source_app.as_str() {
                "document" => match ws.documents.get(&source_name) {
                    Some(doc) => doc.clone(),
                    None => {
                        return Observation::error(
                            "NotFound",
                            format!("no document named \"{source_name}\""),
                        )
                    }
                },
                "sheet" => match ws.sheets.get(&source_name) {
                    Some(sheet) => render_sheet(sheet),
                    None => {
                        return Observation::error(
                            "NotFound",
                            format!("no sheet named \"{source_name}\""),
                        )
                    }
                },
                other => {
                    return Observation::error(
                        "InvalidParam",
                        format!("cannot copy from app \"{other}\""),
                    )
                }
            };
            let target = ws.documents.entry(target_name.clone()).or_default();
            if !target.is_empty() && !target.ends_with('\n') {
                target.push('\n');
            }
            target.push_str(&content);
            Observation::ok(format!(
                "Copied {source_app} \"{source_name}\" into document \"{target_name}\""
            ))
        }
        other => Observation::error("UnknownAction", format!("system has no action \"{other}\"")),
    }
}

/// Per-app action reference rendered into agent prompts.
pub fn action_table(app: &str) -> &'static str {
    match app {
        "calendar" => "create_event(user, summary, time_start, time_end) with times as YYYY-MM-DD HH:MM:SS; list_events(user); delete_event(user, summary)",
        "email" => "send_email(from, to, subject, body); list_emails(user); read_email(user, index) with 1-based index",
        "document" => "create_doc(name, content?); append_text(name, text); read_doc(name)",
        "sheet" => "set_cell(name, row, col, value); get_cell(name, row, col); read_sheet(name)",
        "system" => "list_files(); copy(source_app, source_name, target_app, target_name) where source_app is document or sheet and target_app is document",
        _ => "",
    }
}

// ---------------------------------------------------------------------------
// Success checkers
// ---------------------------------------------------------------------------

/// Exact assertions over the final workspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "assert", rename_all = "snake_case")]
pub enum StateExpectation {
    EventExists {
        user: String,
        summary: String,
        time_start: String,
        time_end: String,
    },
    EventAbsent {
        user: String,
        summary: String,
    },
    EmailExists {
        user: String,
        from: String,
        subject: String,
    },
    EmailCount {
        user: String,
        count: usize,
    },
    DocEquals {
        name: String,
        content: String,
    },
    CellEquals {
        sheet: String,
        row: u64,
        col: u64,
        value: String,
    },
}

/// Workspace text selected for fuzzy keyword matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum FuzzyTarget {
    Document { name: String },
    Sheet { name: String },
    LatestEmail { user: String },
}

/// Programmatic success predicate over the final workspace and/or answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Checker {
    /// Selected workspace fields must match verbatim.
    ExactState { expectations: Vec<StateExpectation> },
    /// All keywords must appear, case-insensitively, in the target text
    /// after whitespace normalization.
    KeywordFuzzy {
        #[serde(flatten)]
        target: FuzzyTarget,
        keywords: Vec<String>,
    },
    /// Keyword-fuzzy matching applied to the final answer.
    AnswerMatch { keywords: Vec<String> },
}

fn normalize(text: &str) -> String {
    text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn fuzzy_contains_all(target: &str, keywords: &[String]) -> bool {
    let haystack = normalize(target);
    keywords.iter().all(|k| haystack.contains(&normalize(k)))
}

fn expectation_holds(ws: &Workspace, expectation: &StateExpectation) -> bool {
    match expectation {
        StateExpectation::EventExists {
            user,
            summary,
            time_start,
            time_end,
        } => ws
            .calendars
            .get(user)
            .is_some_and(|events| {
                events.iter().any(|e| {
                    e.summary == *summary
                        && e.time_start == *time_start
                        && e.time_end == *time_end
                })
            }),
        StateExpectation::EventAbsent { user, summary } => ws
            .calendars
            .get(user)
            .is_none_or(|events| events.iter().all(|e| e.summary != *summary)),
        StateExpectation::EmailExists {
            user,
            from,
            subject,
        } => ws.mailboxes.get(user).is_some_and(|emails| {
            emails
                .iter()
                .any(|m| m.from == *from && m.subject == *subject)
        }),
        StateExpectation::EmailCount { user, count } => {
            ws.mailboxes.get(user).map_or(0, Vec::len) == *count
        }
        StateExpectation::DocEquals { name, content } => {
            ws.documents.get(name).is_some_and(|doc| doc == content)
        }
        StateExpectation::CellEquals {
            sheet,
            row,
            col,
            value,
        } => ws
            .sheets
            .get(sheet)
            .and_then(|s| s.get(row))
            .and_then(|cols| cols.get(col))
            .is_some_and(|v| v == value),
    }
}

/// Evaluates the checker against the final workspace and answer.
pub fn check_success(ws: &Workspace, final_answer: &str, checker: &Checker) -> bool {
    match checker {
        Checker::ExactState { expectations } => {
            !expectations.is_empty() && expectations.iter().all(|e| expectation_holds(ws, e))
        }
        Checker::KeywordFuzzy { target, keywords } => {
            if keywords.is_empty() {
                return false;
            }
            let text = match target {
                FuzzyTarget::Document { name } => ws.documents.get(name).cloned(),
                FuzzyTarget::Sheet { name } => ws.sheets.get(name).map(render_sheet),
                FuzzyTarget::LatestEmail { user } => ws
                    .mailboxes
                    .get(user)
                    .and_then(|emails| emails.last())
                    .map(|m| format!("{}\n{}", m.subject, m.body)),
            };
            text.is_some_and(|t| fuzzy_contains_all(&t, keywords))
        }
        Checker::AnswerMatch { keywords } => {
            !keywords.is_empty() && fuzzy_contains_all(final_answer, keywords)
        }
    }
}

// ---------------------------------------------------------------------------
// Task fixtures and the agent registry
// ---------------------------------------------------------------------------

/// One think/action pair of a reference solution step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceAction {
    pub think: String,
    pub action: Action,
}

/// One orchestration step of a reference solution: which agent, what
/// subtask, which actions, and the summary the agent reports back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStep {
    pub agent_name: String,
    pub subtask: String,
    pub actions: Vec<ReferenceAction>,
    pub summary: String,
}

/// A known-good solution bundled with each fixture, used for golden
/// scripted runs and for seeding memory banks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub steps: Vec<ReferenceStep>,
    pub final_answer: String,
}

/// A benchmark task: description, seeded environment, success checker,
/// and a reference solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFixture {
    pub task_id: String,
    pub level: u8,
    pub description: String,
    pub initial_workspace: Workspace,
    pub checker: Checker,
    pub reference: ReferenceSolution,
}

impl TaskFixture {
    /// Distinct apps touched by the reference solution.
    pub fn apps_touched(&self) -> BTreeSet<&str> {
        self.reference
            .steps
            .iter()
            .flat_map(|s| s.actions.iter().map(|a| a.action.app.as_str()))
            .collect()
    }
}

/// A task agent: its name, the app it drives, and a one-line description
/// used in orchestrator prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    pub app: String,
    pub description: String,
}

/// The ordered set of task agents available to the orchestrator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRegistry {
    pub agents: Vec<AgentSpec>,
}

impl AgentRegistry {
    /// The five standard office agents, one per app.
    pub fn standard() -> Self {
        let spec = |name: &str, app: &str, description: &str| AgentSpec {
            name: name.into(),
            app: app.into(),
            description: description.into(),
        };
        Self {
            agents: vec![
                spec(
                    "calendar_agent",
                    "calendar",
                    "manages calendar events (create, list, delete)",
                ),
                spec(
                    "email_agent",
                    "email",
                    "sends and reads email between users",
                ),
                spec(
                    "document_agent",
                    "document",
                    "creates, appends to, and reads text documents",
                ),
                spec(
                    "sheet_agent",
                    "sheet",
                    "reads and writes spreadsheet cells",
                ),
                spec(
                    "system_agent",
                    "system",
                    "lists files and copies content between apps",
                ),
            ],
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.agents.iter().any(|a| a.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.agents.iter().map(|a| a.name.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_user_ws() -> Workspace {
        Workspace::with_users(["Alice", "Bob"], "2024-05-17 08:00:00")
    }

    fn act(app: &str, action: &str, params: &[(&str, &str)]) -> Action {
        let mut a = Action::new(app, action);
        for (k, v) in params {
            a = a.with_param(*k, *v);
        }
        a
    }

    #[test]
    fn create_then_list_event() {
        let mut ws = two_user_ws();
        let obs = execute_action(
            &mut ws,
            &act(
                "calendar",
                "create_event",
                &[
                    ("user", "Bob"),
                    ("summary", "Meeting"),
                    ("time_start", "2024-05-17 10:30:00"),
                    ("time_end", "2024-05-17 11:00:00"),
                ],
            ),
        );
        assert!(!obs.failed, "{}", obs.text);
        let listed = execute_action(&mut ws, &act("calendar", "list_events", &[("user", "Bob")]));
        assert!(!listed.failed);
        assert!(listed.text.contains("\"Meeting\" from 2024-05-17 10:30:00 to 2024-05-17 11:00:00"));
    }

    #[test]
    fn username_alias_accepted() {
        let mut ws = two_user_ws();
        let obs = execute_action(
            &mut ws,
            &act("calendar", "list_events", &[("username", "Bob")]),
        );
        assert!(!obs.failed);
        assert_eq!(obs.text, "No events found for Bob");
    }

    #[test]
    fn invalid_times_fail_without_mutation() {
        let mut ws = two_user_ws();
        let before = ws.clone();
        let obs = execute_action(
            &mut ws,
            &act(
                "calendar",
                "create_event",
                &[
                    ("user", "Bob"),
                    ("summary", "X"),
                    ("time_start", "2024-05-17 11:00:00"),
                    ("time_end", "2024-05-17 10:00:00"),
                ],
            ),
        );
        assert!(obs.failed);
        assert!(obs.text.starts_with("ERROR (InvalidParam)"));
        assert_eq!(ws, before);
    }

    #[test]
    fn mailboxes_are_partitioned() {
        let mut ws = two_user_ws();
        let obs = execute_action(
            &mut ws,
            &act(
                "email",
                "send_email",
                &[
                    ("from", "Alice"),
                    ("to", "Bob"),
                    ("subject", "Hi"),
                    ("body", "Hello Bob"),
                ],
            ),
        );
        assert!(!obs.failed);
        let bob = execute_action(&mut ws, &act("email", "list_emails", &[("user", "Bob")]));
        assert!(bob.text.contains("from Alice: \"Hi\""));
        let alice = execute_action(&mut ws, &act("email", "list_emails", &[("user", "Alice")]));
        assert_eq!(alice.text, "No emails for Alice");
    }

    #[test]
    fn get_cell_on_absent_sheet_is_not_found() {
        let mut ws = two_user_ws();
        let obs = execute_action(
            &mut ws,
            &act("sheet", "get_cell", &[("name", "nope"), ("row", "1"), ("col", "1")]),
        );
        assert!(obs.failed);
        assert!(obs.text.starts_with("ERROR (NotFound)"));
    }

    #[test]
    fn unknown_app_action_and_missing_param() {
        let mut ws = two_user_ws();
        assert!(execute_action(&mut ws, &act("fax", "send", &[]))
            .text
            .starts_with("ERROR (UnknownApp)"));
        assert!(execute_action(&mut ws, &act("calendar", "spin", &[]))
            .text
            .starts_with("ERROR (UnknownAction)"));
        assert!(execute_action(&mut ws, &act("document", "read_doc", &[]))
            .text
            .starts_with("ERROR (MissingParam)"));
    }

    #[test]
    fn copy_sheet_into_document() {
        let mut ws = two_user_ws();
        execute_action(
            &mut ws,
            &act(
                "sheet",
                "set_cell",
                &[("name", "scores"), ("row", "1"), ("col", "1"), ("value", "91")],
            ),
        );
        let obs = execute_action(
            &mut ws,
            &act(
                "system",
                "copy",
                &[
                    ("source_app", "sheet"),
                    ("source_name", "scores"),
                    ("target_app", "document"),
                    ("target_name", "report"),
                ],
            ),
        );
        assert!(!obs.failed, "{}", obs.text);
        assert_eq!(ws.documents["report"], "R1C1: 91");
    }

    #[test]
    fn determinism_and_isolation() {
        let run = || {
            let mut ws = two_user_ws();
            let mut texts = Vec::new();
            for a in [
                act("document", "create_doc", &[("name", "d"), ("content", "x")]),
                act("document", "append_text", &[("name", "d"), ("text", "y")]),
                act("document", "read_doc", &[("name", "d")]),
            ] {
                texts.push(execute_action(&mut ws, &a).text);
            }
            (ws.content_hash(), texts)
        };
        assert_eq!(run(), run());

        let untouched = two_user_ws();
        assert_eq!(untouched, two_user_ws());
    }

    #[test]
    fn fuzzy_keyword_checker() {
        let checker = Checker::AnswerMatch {
            keywords: vec!["10:30".into()],
        };
        let ws = two_user_ws();
        assert!(check_success(
            &ws,
            "The meeting runs from  10:30 a.m. onward",
            &checker
        ));
        assert!(!check_success(&ws, "The meeting runs at 11:00", &checker));
    }

    #[test]
    fn exact_state_absent_expectation() {
        let mut ws = two_user_ws();
        execute_action(
            &mut ws,
            &act(
                "calendar",
                "create_event",
                &[
                    ("user", "Bob"),
                    ("summary", "Old sync"),
                    ("time_start", "2024-05-17 09:00:00"),
                    ("time_end", "2024-05-17 09:30:00"),
                ],
            ),
        );
        let checker = Checker::ExactState {
            expectations: vec![StateExpectation::EventAbsent {
                user: "Bob".into(),
                summary: "Old sync".into(),
            }],
        };
        assert!(!check_success(&ws, "", &checker));
    }

    #[test]
    fn registry_lookup() {
        let registry = AgentRegistry::standard();
        assert!(registry.contains("calendar_agent"));
        assert!(!registry.contains("fax_agent"));
        assert_eq!(registry.get("sheet_agent").unwrap().app, "sheet");
        assert_eq!(registry.agents.len(), 5);
    }
}
