//! The task execution engine: planning, per-step subtask generation and
//! agent selection, agent execution against the environment, state
//! updates, stall detection, and replanning — with memory injection
//! governed by the active [`MemoryAllocation`].
//!
//! One task's loop is strictly sequential; distinct tasks may run
//! concurrently with shared read-only banks. [`run_task`] is total: every
//! in-task failure surfaces as `success = false` with a recorded
//! termination reason, never a panic or error.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::action::{parse_action_object, Action};
use crate::bank::BankSet;
use crate::curation::{ExecutionLog, LogEvent, Outcome};
use crate::embedding::EmbeddingProvider;
use crate::gateway::{ChatMessage, GatewayError, ModelClient};
use crate::memory::{render_memory_units, render_subtask_memories, SubtaskMemory};
use crate::office::{
    action_table, check_success, execute_action, reset, AgentRegistry, TaskFixture, Workspace,
};
use crate::policy::{
    allocate_dynamic_init, allocate_query_rewrite, allocate_vanilla, retrieve_dynamic_step,
    MemoryAllocation, OrchestratorScope, PlacementMode, PolicyError, RetrievalVariant,
    DEFAULT_K_AGENT, DEFAULT_K_ORCH,
};
use crate::prompts::{
    parse_numbered_list, AGENT_ACT_MARKER, AGENT_SUMMARY_MARKER, MEMORY_BLOCK_HEADER,
    PLAN_PROMPT_MARKER, REPLAN_PROMPT_MARKER, STEP_PROMPT_MARKER,
};

pub const DEFAULT_BUDGET: usize = 30;
pub const DEFAULT_STALL_WINDOW: usize = 6;
pub const DEFAULT_STALL_REPEATS: usize = 3;
pub const DEFAULT_REPLAN_LIMIT: usize = 2;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("plan response had no numbered steps after retry")]
    PlanParseFailure,
    #[error("directive response could not be parsed after retry: {0}")]
    DirectiveParseFailure(String),
    #[error("directive names unknown agent \"{0}\" after retry")]
    UnknownAgent(String),
    #[error("agent produced no parsable action and no summary")]
    AgentParseFailure,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Run-shaping knobs; the defaults are the shipped configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorConfig {
    pub variant: RetrievalVariant,
    pub placement: PlacementMode,
    pub k_orch: usize,
    pub k_agent: usize,
    pub include_reasoning: bool,
    pub budget: usize,
    pub stall_window: usize,
    pub stall_repeats: usize,
    pub replan_limit: usize,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            variant: RetrievalVariant::Vanilla,
            placement: PlacementMode::OrchAndAgent,
            k_orch: DEFAULT_K_ORCH,
            k_agent: DEFAULT_K_AGENT,
            include_reasoning: true,
            budget: DEFAULT_BUDGET,
            stall_window: DEFAULT_STALL_WINDOW,
            stall_repeats: DEFAULT_STALL_REPEATS,
            replan_limit: DEFAULT_REPLAN_LIMIT,
        }
    }
}

/// Model clients for each role. All task agents share `agent` unless an
/// override names a specific client; the rewriter defaults to the
/// orchestrator's client.
#[derive(Clone)]
pub struct TeamClients {
    pub orchestrator: Arc<dyn ModelClient>,
    pub agent: Arc<dyn ModelClient>,
    pub agent_overrides: BTreeMap<String, Arc<dyn ModelClient>>,
    pub rewriter: Option<Arc<dyn ModelClient>>,
}

impl TeamClients {
    pub fn new(orchestrator: Arc<dyn ModelClient>, agent: Arc<dyn ModelClient>) -> Self {
        Self {
            orchestrator,
            agent,
            agent_overrides: BTreeMap::new(),
            rewriter: None,
        }
    }

    pub fn uniform(client: Arc<dyn ModelClient>) -> Self {
        Self::new(client.clone(), client)
    }

    pub fn agent_for(&self, agent_name: &str) -> &Arc<dyn ModelClient> {
        self.agent_overrides.get(agent_name).unwrap_or(&self.agent)
    }

    pub fn rewriter(&self) -> &Arc<dyn ModelClient> {
        self.rewriter.as_ref().unwrap_or(&self.orchestrator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanOrigin {
    Initial,
    Replanned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<String>,
    pub origin: PlanOrigin,
    pub revision: u32,
}

/// One orchestrator decision per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Directive {
    Delegate {
        agent_name: String,
        subtask_description: String,
    },
    Finish {
        final_answer: String,
    },
}

/// One completed step in the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub agent_name: String,
    pub subtask: String,
    pub summary: String,
    pub actions_ok: usize,
    pub actions_failed: usize,
}

/// The evolving task state the orchestrator conditions on.
#[derive(Debug, Clone, PartialEq)]
pub struct OrchestrationState {
    pub task_description: String,
    pub plan: Plan,
    pub step_ledger: Vec<LedgerEntry>,
    pub stall_window: VecDeque<String>,
    pub step_index: usize,
    pub budget: usize,
    pub stall_window_cap: usize,
    pub stall_repeats: usize,
}

impl OrchestrationState {
    pub fn new(task_description: &str, plan: Plan, config: &OrchestratorConfig) -> Self {
        Self {
            task_description: task_description.to_string(),
            plan,
            step_ledger: Vec::new(),
            stall_window: VecDeque::new(),
            step_index: 0,
            budget: config.budget,
            stall_window_cap: config.stall_window,
            stall_repeats: config.stall_repeats,
        }
    }

    fn record_step(&mut self, entry: LedgerEntry) {
        let fp = directive_fingerprint(&entry.agent_name, &entry.subtask);
        self.stall_window.push_back(fp);
        while self.stall_window.len() > self.stall_window_cap {
            self.stall_window.pop_front();
        }
        self.step_ledger.push(entry);
        self.step_index = self.step_ledger.len();
    }
}

/// Normalized fingerprint: case and whitespace variants of the same
/// delegation count as repeats.
pub fn directive_fingerprint(agent_name: &str, subtask: &str) -> String {
    let normalized = subtask
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    format!("{agent_name}|{normalized}")
}

/// True when any fingerprint in the recent window repeats at least the
/// configured number of times.
pub fn detect_stall(state: &OrchestrationState) -> bool {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for fp in &state.stall_window {
        let count = counts.entry(fp.as_str()).or_insert(0);
        *count += 1;
        if *count >= state.stall_repeats {
            return true;
        }
    }
    false
}

/// Which prompt a capture came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Planning,
    Replan,
    Step,
    AgentAct,
    AgentSummary,
    QueryRewrite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapturedPrompt {
    pub kind: PromptKind,
    pub agent_name: Option<String>,
    pub text: String,
}

/// Why a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Finished,
    BudgetExhausted,
    ReplanLimit,
    ProtocolError { message: String },
}

/// Everything a finished run reports. The transcript is a valid
/// [`ExecutionLog`], so successful runs can feed curation directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub success: bool,
    pub final_answer: String,
    pub steps_executed: usize,
    pub failed_action_count: usize,
    pub total_action_count: usize,
    pub replan_count: usize,
    pub dynamic_query_count: usize,
    pub termination: Termination,
    pub final_workspace_hash: String,
    pub allocation: MemoryAllocation,
    pub transcript: ExecutionLog,
    pub prompts: Vec<CapturedPrompt>,
}

// ---------------------------------------------------------------------------
// Prompt construction
// ---------------------------------------------------------------------------

fn memory_block_for_units(allocation: &MemoryAllocation, include_reasoning: bool) -> String {
    if allocation.orchestrator_memories.is_empty() {
        return String::new();
    }
    let rendered = render_memory_units(&allocation.orchestrator_memories, include_reasoning)
        .expect("non-empty unit list renders");
    format!("{MEMORY_BLOCK_HEADER}\n{rendered}\n")
}

fn agent_roster(registry: &AgentRegistry) -> String {
    registry
        .agents
        .iter()
        .map(|a| format!("- {}: {}", a.name, a.description))
        .collect::<Vec<_>>()
        .join("\n")
}

fn planning_prompt(
    task: &str,
    allocation: &MemoryAllocation,
    registry: &AgentRegistry,
    include_reasoning: bool,
) -> String {
    let memory = match allocation.orchestrator_scope {
        OrchestratorScope::Full | OrchestratorScope::PlanningOnly => {
            memory_block_for_units(allocation, include_reasoning)
        }
        OrchestratorScope::None => String::new(),
    };
    format!(
        "You are the orchestrator of a team of task agents working in a simulated office workspace.\n\n\
         Task: {task}\n\n\
         Available agents:\n{roster}\n\n\
         {memory}\
         {PLAN_PROMPT_MARKER} for completing the task, formatted as a numbered list with one subtask per line.",
        roster = agent_roster(registry),
    )
}

fn ledger_lines(entries: &[LedgerEntry]) -> String {
    if entries.is_empty() {
        return "(no steps taken yet)".to_string();
    }
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            format!(
                "Step {} -> {}: \"{}\" | summary: {} | actions: {} ok, {} failed",
                i + 1,
                e.agent_name,
                e.subtask,
                e.summary,
                e.actions_ok,
                e.actions_failed
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn step_prompt(
    state: &OrchestrationState,
    allocation: &MemoryAllocation,
    registry: &AgentRegistry,
    include_reasoning: bool,
) -> String {
    let memory = match allocation.orchestrator_scope {
        OrchestratorScope::Full => memory_block_for_units(allocation, include_reasoning),
        _ => String::new(),
    };
    let plan = state
        .plan
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "You are the orchestrator of a team of task agents working in a simulated office workspace.\n\n\
         Task: {task}\n\n\
         Current plan (revision {revision}):\n{plan}\n\n\
         Available agents:\n{roster}\n\n\
         Progress so far:\n{ledger}\n\n\
         {memory}\
         {STEP_PROMPT_MARKER} Respond with exactly one directive:\n\
         <directive>{{\"type\": \"delegate\", \"agent\": \"<agent_name>\", \"subtask\": \"<subtask description>\"}}</directive>\n\
         or, when the task is complete:\n\
         <directive>{{\"type\": \"finish\", \"answer\": \"<final answer>\"}}</directive>",
        task = state.task_description,
        revision = state.plan.revision,
        roster = agent_roster(registry),
        ledger = ledger_lines(&state.step_ledger),
    )
}

fn replan_prompt(
    state: &OrchestrationState,
    allocation: &MemoryAllocation,
    registry: &AgentRegistry,
    include_reasoning: bool,
) -> String {
    let memory = match allocation.orchestrator_scope {
        OrchestratorScope::Full | OrchestratorScope::PlanningOnly => {
            memory_block_for_units(allocation, include_reasoning)
        }
        OrchestratorScope::None => String::new(),
    };
    let tail_start = state.step_ledger.len().saturating_sub(state.stall_window_cap);
    format!(
        "You are the orchestrator of a team of task agents working in a simulated office workspace.\n\n\
         Task: {task}\n\n\
         The current plan (revision {revision}) has stalled on repeated steps. Recent steps:\n{tail}\n\n\
         Available agents:\n{roster}\n\n\
         {memory}\
         {REPLAN_PROMPT_MARKER} that avoids the repetition, formatted as a numbered list with one subtask per line.",
        task = state.task_description,
        revision = state.plan.revision,
        tail = ledger_lines(&state.step_ledger[tail_start..]),
        roster = agent_roster(registry),
    )
}

fn agent_act_prompt(
    agent_name: &str,
    app: &str,
    subtask: &str,
    memories: &[SubtaskMemory],
    prior_observations: &[String],
    include_reasoning: bool,
) -> String {
    let memory = if memories.is_empty() {
        String::new()
    } else {
        let rendered = render_subtask_memories(memories, include_reasoning)
            .expect("non-empty memory list renders");
        format!("{MEMORY_BLOCK_HEADER}\n{rendered}\n")
    };
    let prior = if prior_observations.is_empty() {
        "(none)".to_string()
    } else {
        prior_observations.join("\n")
    };
    format!(
        "You are {agent_name}, operating the {app} app in a simulated office workspace.\n\
         Available actions: {table}\n\n\
         Subtask: {subtask}\n\n\
         {memory}\
         Your previous observations in this task:\n{prior}\n\n\
         {AGENT_ACT_MARKER} in this exact format, repeating the pair for each action:\n\
         <think>why this action is appropriate</think>\n\
         <action>{{\"app\": \"{app}\", \"action\": \"<action_name>\", ...}}</action>",
        table = action_table(app),
    )
}

fn agent_summary_prompt(agent_name: &str, subtask: &str, executed: &[(String, String)]) -> String {
    let record = if executed.is_empty() {
        "You executed no actions.".to_string()
    } else {
        executed
            .iter()
            .map(|(action, obs)| format!("Action: {action} -> Observation: {obs}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    format!(
        "You are {agent_name}. For the subtask \"{subtask}\" this is your execution record:\n{record}\n\n\
         {AGENT_SUMMARY_MARKER} in one or two sentences for the orchestrator."
    )
}

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

fn parse_directive(text: &str, registry: &AgentRegistry) -> Result<Directive, String> {
    let start = text.find("<directive>").ok_or("no <directive> tag")?;
    let body_start = start + "<directive>".len();
    let end = text[body_start..].find("</directive>").ok_or("unterminated <directive>")?;
    let body = text[body_start..body_start + end].trim();
    let value: Value = serde_json::from_str(body).map_err(|e| format!("directive is not JSON: {e}"))?;
    let kind = value
        .get("type")
        .and_then(Value::as_str)
        .ok_or("directive lacks a \"type\"")?;
    match kind {
        "delegate" => {
            let agent = value
                .get("agent")
                .and_then(Value::as_str)
                .filter(|s| !s.is_empty())
                .ok_or("delegate lacks an \"agent\"")?;
            let subtask = value
                .get("subtask")
                .and_then(Value::as_str)
                .filter(|s| !s.is_empty())
                .ok_or("delegate lacks a \"subtask\"")?;
            if !registry.contains(agent) {
                return Err(format!("unknown agent: {agent}"));
            }
            Ok(Directive::Delegate {
                agent_name: agent.to_string(),
                subtask_description: subtask.to_string(),
            })
        }
        "finish" => {
            let answer = value.get("answer").and_then(Value::as_str).unwrap_or("");
            Ok(Directive::Finish {
                final_answer: answer.to_string(),
            })
        }
        other => Err(format!("unknown directive type \"{other}\"")),
    }
}

/// A scanned agent step: think text plus either the parsed action or the
/// raw body with its parse error.
type ScannedStep = (String, Result<Action, (String, String)>);

/// Lenient agent-output scan: every `<action>...</action>` region becomes
/// a step, paired with the nearest preceding `<think>` segment. Bodies
/// that fail to parse are kept with the raw text so they can be counted
/// and replayed as failed actions.
fn parse_agent_steps(text: &str) -> Vec<ScannedStep> {
    let mut steps = Vec::new();
    let mut cursor = 0;
    while let Some(rel) = text[cursor..].find("<action>") {
        let action_start = cursor + rel;
        let body_start = action_start + "<action>".len();
        let Some(end_rel) = text[body_start..].find("</action>") else {
            break;
        };
        let body = text[body_start..body_start + end_rel].trim().to_string();
        let preceding = &text[cursor..action_start];
        let think = preceding
            .rfind("<think>")
            .and_then(|t| {
                let t_body = &preceding[t + "<think>".len()..];
                t_body.find("</think>").map(|e| t_body[..e].to_string())
            })
            .unwrap_or_default();
        let parsed = parse_action_object(&body).map_err(|e| (body.clone(), e));
        steps.push((think, parsed));
        cursor = body_start + end_rel + "</action>".len();
    }
    steps
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

fn complete_user(client: &dyn ModelClient, prompt: &str) -> Result<String, GatewayError> {
    client.complete(&[ChatMessage::user(prompt.to_string())])
}

const PLAN_RETRY_SUFFIX: &str =
    "\n\nYour previous response had no numbered list. Reply with a numbered plan, one step per line.";

/// Asks the orchestrator for the initial plan. Memories appear in the
/// prompt when the orchestrator scope allows planning-time memory.
pub fn make_initial_plan(
    task: &str,
    allocation: &MemoryAllocation,
    client: &dyn ModelClient,
    registry: &AgentRegistry,
    include_reasoning: bool,
    capture: &mut Vec<CapturedPrompt>,
) -> Result<Plan, OrchestratorError> {
    let prompt = planning_prompt(task, allocation, registry, include_reasoning);
    capture.push(CapturedPrompt {
        kind: PromptKind::Planning,
        agent_name: None,
        text: prompt.clone(),
    });
    let mut steps = parse_numbered_list(&complete_user(client, &prompt)?);
    if steps.is_empty() {
        let retry = format!("{prompt}{PLAN_RETRY_SUFFIX}");
        capture.push(CapturedPrompt {
            kind: PromptKind::Planning,
            agent_name: None,
            text: retry.clone(),
        });
        steps = parse_numbered_list(&complete_user(client, &retry)?);
        if steps.is_empty() {
            return Err(OrchestratorError::PlanParseFailure);
        }
    }
    Ok(Plan {
        steps,
        origin: PlanOrigin::Initial,
        revision: 0,
    })
}

/// Asks the orchestrator for the next directive. Memories appear in the
/// per-step prompt only under full orchestrator scope. A malformed reply
/// or unknown agent gets one corrective retry.
pub fn next_directive(
    state: &OrchestrationState,
    allocation: &MemoryAllocation,
    client: &dyn ModelClient,
    registry: &AgentRegistry,
    include_reasoning: bool,
    capture: &mut Vec<CapturedPrompt>,
) -> Result<Directive, OrchestratorError> {
    let prompt = step_prompt(state, allocation, registry, include_reasoning);
    capture.push(CapturedPrompt {
        kind: PromptKind::Step,
        agent_name: None,
        text: prompt.clone(),
    });
    let first = complete_user(client, &prompt)?;
    match parse_directive(&first, registry) {
        Ok(directive) => Ok(directive),
        Err(first_err) => {
            let retry = format!(
                "{prompt}\n\nYour previous response was invalid: {first_err}. Agents available: {agents}. Respond with exactly one <directive> tag.",
                agents = registry.names().join(", ")
            );
            capture.push(CapturedPrompt {
                kind: PromptKind::Step,
                agent_name: None,
                text: retry.clone(),
            });
            let second = complete_user(client, &retry)?;
            parse_directive(&second, registry).map_err(|e| {
                if let Some(agent) = e.strip_prefix("unknown agent: ") {
                    OrchestratorError::UnknownAgent(agent.to_string())
                } else {
                    OrchestratorError::DirectiveParseFailure(e)
                }
            })
        }
    }
}

/// Asks the orchestrator for a revised plan after a stall. Memories
/// appear under full or planning-only scope.
pub fn replan(
    state: &OrchestrationState,
    allocation: &MemoryAllocation,
    client: &dyn ModelClient,
    registry: &AgentRegistry,
    include_reasoning: bool,
    capture: &mut Vec<CapturedPrompt>,
) -> Result<Plan, OrchestratorError> {
    let prompt = replan_prompt(state, allocation, registry, include_reasoning);
    capture.push(CapturedPrompt {
        kind: PromptKind::Replan,
        agent_name: None,
        text: prompt.clone(),
    });
    let mut steps = parse_numbered_list(&complete_user(client, &prompt)?);
    if steps.is_empty() {
        let retry = format!("{prompt}{PLAN_RETRY_SUFFIX}");
        capture.push(CapturedPrompt {
            kind: PromptKind::Replan,
            agent_name: None,
            text: retry.clone(),
        });
        steps = parse_numbered_list(&complete_user(client, &retry)?);
        if steps.is_empty() {
            return Err(OrchestratorError::PlanParseFailure);
        }
    }
    Ok(Plan {
        steps,
        origin: PlanOrigin::Replanned,
        revision: state.plan.revision + 1,
    })
}

/// What one delegated subtask produced.
pub struct SubtaskExecution {
    pub summary: String,
    pub actions_ok: usize,
    pub actions_failed: usize,
    pub events: Vec<LogEvent>,
    pub observations: Vec<String>,
}

/// Runs one delegated subtask: asks the agent for actions, executes them
/// in order against the workspace, then asks the agent to summarize. A
/// malformed or failing action is counted, its error text fed back as the
/// observation, and the run continues.
#[allow(clippy::too_many_arguments)]
pub fn execute_subtask(
    agent_name: &str,
    subtask: &str,
    memories: &[SubtaskMemory],
    prior_observations: &[String],
    client: &dyn ModelClient,
    registry: &AgentRegistry,
    ws: &mut Workspace,
    include_reasoning: bool,
    capture: &mut Vec<CapturedPrompt>,
) -> Result<SubtaskExecution, OrchestratorError> {
    let app = registry
        .get(agent_name)
        .map(|spec| spec.app.as_str())
        .unwrap_or("system");
    let act_prompt = agent_act_prompt(
        agent_name,
        app,
        subtask,
        memories,
        prior_observations,
        include_reasoning,
    );
    capture.push(CapturedPrompt {
        kind: PromptKind::AgentAct,
        agent_name: Some(agent_name.to_string()),
        text: act_prompt.clone(),
    });
    let act_response = complete_user(client, &act_prompt)?;

    let mut events = Vec::new();
    let mut observations = Vec::new();
    let mut executed = Vec::new();
    let mut actions_ok = 0;
    let mut actions_failed = 0;
    for (think, parsed) in parse_agent_steps(&act_response) {
        match parsed {
            Ok(action) => {
                let observation = execute_action(ws, &action);
                if observation.failed {
                    actions_failed += 1;
                } else {
                    actions_ok += 1;
                }
                executed.push((action.to_json(), observation.text.clone()));
                observations.push(observation.text.clone());
                events.push(LogEvent::Action {
                    agent_name: agent_name.to_string(),
                    think,
                    action: serde_json::to_value(&action).expect("action serializes"),
                    observation: observation.text,
                    failed: observation.failed,
                });
            }
            Err((raw, parse_error)) => {
                let observation = format!("ERROR (MalformedAction): {parse_error}");
                actions_failed += 1;
                executed.push((raw.clone(), observation.clone()));
                observations.push(observation.clone());
                events.push(LogEvent::Action {
                    agent_name: agent_name.to_string(),
                    think,
                    action: Value::String(raw),
                    observation,
                    failed: true,
                });
            }
        }
    }

    let summary_prompt = agent_summary_prompt(agent_name, subtask, &executed);
    capture.push(CapturedPrompt {
        kind: PromptKind::AgentSummary,
        agent_name: Some(agent_name.to_string()),
        text: summary_prompt.clone(),
    });
    let summary = complete_user(client, &summary_prompt)?.trim().to_string();
    if events.is_empty() && summary.is_empty() {
        return Err(OrchestratorError::AgentParseFailure);
    }
    events.push(LogEvent::Summary {
        agent_name: agent_name.to_string(),
        summary: summary.clone(),
    });

    Ok(SubtaskExecution {
        summary,
        actions_ok,
        actions_failed,
        events,
        observations,
    })
}

fn build_allocation(
    task: &str,
    banks: &BankSet,
    config: &OrchestratorConfig,
    clients: &TeamClients,
    provider: &dyn EmbeddingProvider,
    capture: &mut Vec<CapturedPrompt>,
) -> Result<MemoryAllocation, PolicyError> {
    match config.variant {
        RetrievalVariant::Vanilla => allocate_vanilla(
            task,
            banks,
            config.k_orch,
            config.k_agent,
            config.placement,
            provider,
        ),
        RetrievalVariant::Dynamic => {
            allocate_dynamic_init(task, banks, config.k_orch, config.placement, provider)
        }
        RetrievalVariant::QueryRewrite => {
            let mut rewrite_prompts = Vec::new();
            let result = allocate_query_rewrite(
                task,
                banks,
                clients.rewriter().as_ref(),
                config.k_orch,
                config.k_agent,
                config.placement,
                config.include_reasoning,
                provider,
                Some(&mut rewrite_prompts),
            );
            for text in rewrite_prompts {
                capture.push(CapturedPrompt {
                    kind: PromptKind::QueryRewrite,
                    agent_name: None,
                    text,
                });
            }
            match result {
                // The rewrite is an optimization; a rewriter that cannot
                // produce a draft plan degrades to vanilla allocation.
                Err(PolicyError::RewriteParseFailure(_)) => allocate_vanilla(
                    task,
                    banks,
                    config.k_orch,
                    config.k_agent,
                    config.placement,
                    provider,
                ),
                other => other,
            }
        }
    }
}

/// Executes one task end to end: allocate, plan, then loop directive ->
/// agent execution -> state update -> stall check until finish or budget.
/// Success requires both a finish directive and a passing checker.
pub fn run_task(
    fixture: &TaskFixture,
    banks: &BankSet,
    config: &OrchestratorConfig,
    clients: &TeamClients,
    registry: &AgentRegistry,
    provider: &dyn EmbeddingProvider,
) -> TaskResult {
    let mut prompts = Vec::new();
    let mut events = Vec::new();
    let mut ws = reset(fixture);
    let mut dynamic_query_count = 0;
    let mut replan_count = 0;
    let mut total_actions = 0;
    let mut failed_actions = 0;
    let mut prior_observations: BTreeMap<String, Vec<String>> = BTreeMap::new();

    let allocation = match build_allocation(
        &fixture.description,
        banks,
        config,
        clients,
        provider,
        &mut prompts,
    ) {
        Ok(allocation) => allocation,
        Err(e) => {
            return finish_run(
                fixture,
                ws,
                MemoryAllocation::empty(),
                events,
                prompts,
                String::new(),
                0,
                0,
                0,
                0,
                0,
                Termination::ProtocolError {
                    message: format!("allocation failed: {e}"),
                },
            )
        }
    };

    let plan = match make_initial_plan(
        &fixture.description,
        &allocation,
        clients.orchestrator.as_ref(),
        registry,
        config.include_reasoning,
        &mut prompts,
    ) {
        Ok(plan) => plan,
        Err(e) => {
            return finish_run(
                fixture,
                ws,
                allocation,
                events,
                prompts,
                String::new(),
                0,
                0,
                0,
                0,
                0,
                Termination::ProtocolError {
                    message: format!("planning failed: {e}"),
                },
            )
        }
    };
    events.push(LogEvent::Plan {
        steps: plan.steps.clone(),
        revision: plan.revision,
    });
    let mut state = OrchestrationState::new(&fixture.description, plan, config);

    let mut final_answer = String::new();
    let termination = loop {
        if state.step_index >= state.budget {
            break Termination::BudgetExhausted;
        }
        let directive = match next_directive(
            &state,
            &allocation,
            clients.orchestrator.as_ref(),
            registry,
            config.include_reasoning,
            &mut prompts,
        ) {
            Ok(directive) => directive,
            Err(e) => {
                break Termination::ProtocolError {
                    message: format!("directive failed: {e}"),
                }
            }
        };
        match directive {
            Directive::Finish { final_answer: answer } => {
                final_answer = answer;
                events.push(LogEvent::FinalAnswer {
                    text: final_answer.clone(),
                });
                break Termination::Finished;
            }
            Directive::Delegate {
                agent_name,
                subtask_description,
            } => {
                events.push(LogEvent::Directive {
                    agent_name: agent_name.clone(),
                    subtask: subtask_description.clone(),
                });
                let memories = if allocation.dynamic_enabled {
                    dynamic_query_count += 1;
                    match retrieve_dynamic_step(
                        &subtask_description,
                        &agent_name,
                        banks,
                        config.k_agent,
                        provider,
                    ) {
                        Ok(memories) => memories,
                        Err(e) => {
                            break Termination::ProtocolError {
                                message: format!("dynamic retrieval failed: {e}"),
                            }
                        }
                    }
                } else {
                    allocation.memories_for(&agent_name).to_vec()
                };
                let prior = prior_observations.entry(agent_name.clone()).or_default();
                let execution = match execute_subtask(
                    &agent_name,
                    &subtask_description,
                    &memories,
                    prior,
                    clients.agent_for(&agent_name).as_ref(),
                    registry,
                    &mut ws,
                    config.include_reasoning,
                    &mut prompts,
                ) {
                    Ok(execution) => execution,
                    Err(e) => {
                        break Termination::ProtocolError {
                            message: format!("agent execution failed: {e}"),
                        }
                    }
                };
                prior.extend(execution.observations.iter().cloned());
                total_actions += execution.actions_ok + execution.actions_failed;
                failed_actions += execution.actions_failed;
                events.extend(execution.events);
                state.record_step(LedgerEntry {
                    agent_name,
                    subtask: subtask_description,
                    summary: execution.summary,
                    actions_ok: execution.actions_ok,
                    actions_failed: execution.actions_failed,
                });

                if detect_stall(&state) {
                    if replan_count >= config.replan_limit {
                        break Termination::ReplanLimit;
                    }
                    let new_plan = match replan(
                        &state,
                        &allocation,
                        clients.orchestrator.as_ref(),
                        registry,
                        config.include_reasoning,
                        &mut prompts,
                    ) {
                        Ok(plan) => plan,
                        Err(e) => {
                            break Termination::ProtocolError {
                                message: format!("replanning failed: {e}"),
                            }
                        }
                    };
                    replan_count += 1;
                    events.push(LogEvent::Plan {
                        steps: new_plan.steps.clone(),
                        revision: new_plan.revision,
                    });
                    state.plan = new_plan;
                    state.stall_window.clear();
                }
            }
        }
    };

    finish_run(
        fixture,
        ws,
        allocation,
        events,
        prompts,
        final_answer,
        state.step_index,
        total_actions,
        failed_actions,
        replan_count,
        dynamic_query_count,
        termination,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish_run(
    fixture: &TaskFixture,
    ws: Workspace,
    allocation: MemoryAllocation,
    events: Vec<LogEvent>,
    prompts: Vec<CapturedPrompt>,
    final_answer: String,
    steps_executed: usize,
    total_action_count: usize,
    failed_action_count: usize,
    replan_count: usize,
    dynamic_query_count: usize,
    termination: Termination,
) -> TaskResult {
    let finished = termination == Termination::Finished;
    let success = finished && check_success(&ws, &final_answer, &fixture.checker);
    let transcript = ExecutionLog {
        log_id: fixture.task_id.clone(),
        task_description: fixture.description.clone(),
        events,
        outcome: if success {
            Outcome::Success
        } else {
            Outcome::Failure
        },
    };
    TaskResult {
        task_id: fixture.task_id.clone(),
        success,
        final_answer,
        steps_executed,
        failed_action_count,
        total_action_count,
        replan_count,
        dynamic_query_count,
        termination,
        final_workspace_hash: ws.content_hash(),
        allocation,
        transcript,
        prompts,
    }
}

/// Replays a transcript's actions against a fresh workspace seeded from
/// the fixture. Deterministic environments make this reproduce the
/// recorded final workspace exactly.
pub fn replay_transcript(fixture: &TaskFixture, transcript: &ExecutionLog) -> Workspace {
    let mut ws = reset(fixture);
    for event in &transcript.events {
        if let LogEvent::Action { action, .. } = event {
            if let Ok(parsed) = parse_action_object(
                &serde_json::to_string(action).expect("action value serializes"),
            ) {
                let _ = execute_action(&mut ws, &parsed);
            }
        }
    }
    ws
}
