//! Retrieval variants and placement modes: how memories are retrieved
//! from the banks and allocated to the orchestrator and task agents.
//!
//! The orchestrator side is identical across all three variants; they
//! differ only in how subtask memories reach the agents — statically from
//! the retrieved units (vanilla), just-in-time per step (dynamic), or
//! pre-execution via a rewritten draft plan (query rewrite).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::{BankError, BankSet};
use crate::embedding::EmbeddingProvider;
use crate::gateway::{ChatMessage, GatewayError, ModelClient};
use crate::memory::{
    extract_subtask_memories, render_memory_units, MemoryUnit, SubtaskMemory,
};
use crate::prompts::{parse_rewrite_response, query_rewrite_prompt, query_rewrite_retry_suffix};

pub const DEFAULT_K_ORCH: usize = 5;
pub const DEFAULT_K_AGENT: usize = 3;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("query rewriter output could not be parsed after retry: {0}")]
    RewriteParseFailure(String),
}

/// The three retrieval strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalVariant {
    Vanilla,
    Dynamic,
    QueryRewrite,
}

impl fmt::Display for RetrievalVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RetrievalVariant::Vanilla => "vanilla",
            RetrievalVariant::Dynamic => "dynamic",
            RetrievalVariant::QueryRewrite => "query_rewrite",
        };
        f.write_str(name)
    }
}

/// Which roles receive memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMode {
    OrchAndAgent,
    OrchPlanningAndAgent,
    OrchOnly,
    AgentOnly,
    None,
}

impl fmt::Display for PlacementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PlacementMode::OrchAndAgent => "orch_and_agent",
            PlacementMode::OrchPlanningAndAgent => "orch_planning_and_agent",
            PlacementMode::OrchOnly => "orch_only",
            PlacementMode::AgentOnly => "agent_only",
            PlacementMode::None => "none",
        };
        f.write_str(name)
    }
}

/// Where orchestrator memories may appear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrchestratorScope {
    /// Planning, replanning, and every per-step prompt.
    Full,
    /// Planning and replanning prompts only.
    PlanningOnly,
    /// No orchestrator memory at all.
    None,
}

/// The memories assigned to each role for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryAllocation {
    pub orchestrator_memories: Vec<MemoryUnit>,
    pub orchestrator_scope: OrchestratorScope,
    pub agent_memories: BTreeMap<String, Vec<SubtaskMemory>>,
    pub dynamic_enabled: bool,
    /// Rewritten plan steps, recorded when the query-rewrite variant ran.
    pub draft_plan: Option<Vec<String>>,
}

impl MemoryAllocation {
    pub fn empty() -> Self {
        Self {
            orchestrator_memories: Vec::new(),
            orchestrator_scope: OrchestratorScope::None,
            agent_memories: BTreeMap::new(),
            dynamic_enabled: false,
            draft_plan: None,
        }
    }

    /// Subtask memories for one agent (empty slice when none).
    pub fn memories_for(&self, agent_name: &str) -> &[SubtaskMemory] {
        self.agent_memories
            .get(agent_name)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Applies a placement mode, clearing whatever the mode withholds.
/// Idempotent: applying the same mode twice equals applying it once.
pub fn apply_placement(mut allocation: MemoryAllocation, mode: PlacementMode) -> MemoryAllocation {
    match mode {
        PlacementMode::OrchAndAgent => {
            allocation.orchestrator_scope = OrchestratorScope::Full;
        }
        PlacementMode::OrchPlanningAndAgent => {
            allocation.orchestrator_scope = OrchestratorScope::PlanningOnly;
        }
        PlacementMode::OrchOnly => {
            allocation.orchestrator_scope = OrchestratorScope::Full;
            allocation.agent_memories.clear();
            allocation.dynamic_enabled = false;
        }
        PlacementMode::AgentOnly => {
            allocation.orchestrator_memories.clear();
            allocation.orchestrator_scope = OrchestratorScope::None;
        }
        PlacementMode::None => {
            allocation.orchestrator_memories.clear();
            allocation.orchestrator_scope = OrchestratorScope::None;
            allocation.agent_memories.clear();
            allocation.dynamic_enabled = false;
        }
    }
    allocation
}

fn retrieve_orchestrator_memories(
    task_description: &str,
    banks: &BankSet,
    k_orch: usize,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<MemoryUnit>, PolicyError> {
    if banks.global.is_empty() {
        return Ok(Vec::new());
    }
    Ok(banks
        .retrieve_units(task_description, k_orch, provider)?
        .into_iter()
        .map(|scored| scored.payload)
        .collect())
}

/// Static allocation: top-k full-task memories to the orchestrator, and
/// the subtask memories extracted from those same units grouped by agent.
/// Higher-ranked parent units win when an agent's list hits `k_agent`.
pub fn allocate_vanilla(
    task_description: &str,
    banks: &BankSet,
    k_orch: usize,
    k_agent: usize,
    placement: PlacementMode,
    provider: &dyn EmbeddingProvider,
) -> Result<MemoryAllocation, PolicyError> {
    let units = retrieve_orchestrator_memories(task_description, banks, k_orch, provider)?;
    let mut agent_memories: BTreeMap<String, Vec<SubtaskMemory>> = BTreeMap::new();
    for unit in &units {
        for subtask in extract_subtask_memories(unit) {
            let list = agent_memories.entry(subtask.agent_name.clone()).or_default();
            if list.len() < k_agent {
                list.push(subtask);
            }
        }
    }
    let allocation = MemoryAllocation {
        orchestrator_memories: units,
        orchestrator_scope: OrchestratorScope::Full,
        agent_memories,
        dynamic_enabled: false,
        draft_plan: None,
    };
    Ok(apply_placement(allocation, placement))
}

/// Dynamic variant at task start: the orchestrator side matches vanilla,
/// agent memories stay empty, and per-step retrieval is switched on.
pub fn allocate_dynamic_init(
    task_description: &str,
    banks: &BankSet,
    k_orch: usize,
    placement: PlacementMode,
    provider: &dyn EmbeddingProvider,
) -> Result<MemoryAllocation, PolicyError> {
    let units = retrieve_orchestrator_memories(task_description, banks, k_orch, provider)?;
    let allocation = MemoryAllocation {
        orchestrator_memories: units,
        orchestrator_scope: OrchestratorScope::Full,
        agent_memories: BTreeMap::new(),
        dynamic_enabled: true,
        draft_plan: None,
    };
    Ok(apply_placement(allocation, placement))
}

/// Just-in-time retrieval for one orchestration step: top-k subtask
/// memories from the selected agent's bank, queried with the live subtask
/// description. An agent without a bank yields an empty result.
pub fn retrieve_dynamic_step(
    subtask_description: &str,
    agent_name: &str,
    banks: &BankSet,
    k_agent: usize,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<SubtaskMemory>, PolicyError> {
    Ok(banks
        .retrieve_subtasks(agent_name, subtask_description, k_agent, provider)?
        .into_iter()
        .map(|scored| scored.payload)
        .collect())
}

/// Query-rewrite variant: retrieve orchestrator memories as vanilla, ask
/// the rewriter for a draft plan grounded in them, map each draft step to
/// the agent whose bank scores it highest, and retrieve that agent's
/// top-k subtask memories per step — all before execution starts.
/// Per-agent lists are deduplicated by memory id and capped at `k_agent`.
#[allow(clippy::too_many_arguments)]
pub fn allocate_query_rewrite(
    task_description: &str,
    banks: &BankSet,
    rewriter: &dyn ModelClient,
    k_orch: usize,
    k_agent: usize,
    placement: PlacementMode,
    include_reasoning: bool,
    provider: &dyn EmbeddingProvider,
    mut prompt_capture: Option<&mut Vec<String>>,
) -> Result<MemoryAllocation, PolicyError> {
    let units = retrieve_orchestrator_memories(task_description, banks, k_orch, provider)?;
    let memory_context = if units.is_empty() {
        "(no similar task examples available)".to_string()
    } else {
        render_memory_units(&units, include_reasoning).expect("non-empty unit list renders")
    };
    let prompt = query_rewrite_prompt(&memory_context, task_description);
    if let Some(capture) = prompt_capture.as_mut() {
        capture.push(prompt.clone());
    }
    let first = rewriter.complete(&[ChatMessage::user(prompt.clone())])?;
    let draft_plan = match parse_rewrite_response(&first) {
        Ok(steps) => steps,
        Err(first_err) => {
            let retry_prompt = format!("{prompt}{}", query_rewrite_retry_suffix(&first_err));
            if let Some(capture) = prompt_capture.as_mut() {
                capture.push(retry_prompt.clone());
            }
            let second = rewriter.complete(&[ChatMessage::user(retry_prompt)])?;
            parse_rewrite_response(&second).map_err(PolicyError::RewriteParseFailure)?
        }
    };

    let mut agent_memories: BTreeMap<String, Vec<SubtaskMemory>> = BTreeMap::new();
    for step in &draft_plan {
        let Some(agent) = best_agent_for(step, banks, provider)? else {
            continue;
        };
        let retrieved = retrieve_dynamic_step(step, &agent, banks, k_agent, provider)?;
        let list = agent_memories.entry(agent).or_default();
        for memory in retrieved {
            if list.len() >= k_agent {
                break;
            }
            if list.iter().all(|m| m.id != memory.id) {
                list.push(memory);
            }
        }
    }
    agent_memories.retain(|_, list| !list.is_empty());

    let allocation = MemoryAllocation {
        orchestrator_memories: units,
        orchestrator_scope: OrchestratorScope::Full,
        agent_memories,
        dynamic_enabled: false,
        draft_plan: Some(draft_plan),
    };
    Ok(apply_placement(allocation, placement))
}

/// Maps a draft step to the agent whose bank yields the highest top-1
/// score; ties break by ascending agent name. `None` when every bank is
/// empty.
fn best_agent_for(
    step: &str,
    banks: &BankSet,
    provider: &dyn EmbeddingProvider,
) -> Result<Option<String>, PolicyError> {
    let mut best: Option<(f64, String)> = None;
    for agent in banks.agents.keys() {
        let top = banks.retrieve_subtasks(agent, step, 1, provider)?;
        let Some(hit) = top.first() else { continue };
        let better = match &best {
            None => true,
            Some((score, name)) => {
                hit.score > *score || (hit.score == *score && agent < name)
            }
        };
        if better {
            best = Some((hit.score, agent.clone()));
        }
    }
    Ok(best.map(|(_, name)| name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::build_banks;
    use crate::embedding::HashEmbedder;
    use crate::gateway::{ScriptEntry, ScriptedClient};
    use crate::scenario::fixture_memory_units;

    fn fixture_banks() -> BankSet {
        build_banks(&fixture_memory_units(), &HashEmbedder::new()).unwrap()
    }

    const TASK: &str = "Replace Bob's meeting on the calendar with a new one";

    #[test]
    fn vanilla_defaults_and_provenance() {
        let banks = fixture_banks();
        let provider = HashEmbedder::new();
        let allocation = allocate_vanilla(
            TASK,
            &banks,
            DEFAULT_K_ORCH,
            DEFAULT_K_AGENT,
            PlacementMode::OrchAndAgent,
            &provider,
        )
        .unwrap();
        assert_eq!(allocation.orchestrator_memories.len(), 5);
        assert_eq!(allocation.orchestrator_scope, OrchestratorScope::Full);
        assert!(!allocation.dynamic_enabled);

        // Every allocated subtask memory comes from a retrieved unit, and
        // the per-agent composition matches extraction from exactly those
        // units (first k_agent in rank order).
        let retrieved_ids: Vec<&str> = allocation
            .orchestrator_memories
            .iter()
            .map(|u| u.id.as_str())
            .collect();
        let mut expected: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for unit in &allocation.orchestrator_memories {
            for sub in extract_subtask_memories(unit) {
                let list = expected.entry(sub.agent_name.clone()).or_default();
                if list.len() < DEFAULT_K_AGENT {
                    list.push(sub.id.clone());
                }
            }
        }
        let got: BTreeMap<String, Vec<String>> = allocation
            .agent_memories
            .iter()
            .map(|(agent, list)| {
                (agent.clone(), list.iter().map(|m| m.id.clone()).collect())
            })
            .collect();
        assert_eq!(got, expected);
        for list in allocation.agent_memories.values() {
            assert!(list.len() <= DEFAULT_K_AGENT);
            for memory in list {
                assert!(retrieved_ids.contains(&memory.parent_unit_id.as_str()));
            }
        }
    }

    #[test]
    fn vanilla_absent_agent_gets_nothing() {
        let banks = fixture_banks();
        let allocation = allocate_vanilla(
            "Send an email announcement",
            &banks,
            2,
            3,
            PlacementMode::OrchAndAgent,
            &HashEmbedder::new(),
        )
        .unwrap();
        // Only agents present in the two retrieved units appear.
        for agent in allocation.agent_memories.keys() {
            assert!(allocation
                .orchestrator_memories
                .iter()
                .any(|u| u.subtasks.iter().any(|s| &s.agent_name == agent)));
        }
        assert!(allocation.memories_for("nonexistent_agent").is_empty());
    }

    #[test]
    fn dynamic_init_matches_vanilla_orchestrator_side() {
        let banks = fixture_banks();
        let provider = HashEmbedder::new();
        let vanilla = allocate_vanilla(TASK, &banks, 5, 3, PlacementMode::OrchAndAgent, &provider)
            .unwrap();
        let dynamic =
            allocate_dynamic_init(TASK, &banks, 5, PlacementMode::OrchAndAgent, &provider)
                .unwrap();
        assert_eq!(
            dynamic.orchestrator_memories,
            vanilla.orchestrator_memories
        );
        assert!(dynamic.agent_memories.is_empty());
        assert!(dynamic.dynamic_enabled);
    }

    #[test]
    fn dynamic_agent_only_placement_keeps_dynamic_on() {
        let banks = fixture_banks();
        let allocation = allocate_dynamic_init(
            TASK,
            &banks,
            5,
            PlacementMode::AgentOnly,
            &HashEmbedder::new(),
        )
        .unwrap();
        assert!(allocation.orchestrator_memories.is_empty());
        assert_eq!(allocation.orchestrator_scope, OrchestratorScope::None);
        assert!(allocation.dynamic_enabled);
    }

    #[test]
    fn dynamic_step_retrieval_matches_oracle() {
        let banks = fixture_banks();
        let provider = HashEmbedder::new();
        let query = "add the new meeting to the calendar";
        let got = retrieve_dynamic_step(query, "calendar_agent", &banks, 3, &provider).unwrap();
        let oracle = banks
            .retrieve_subtasks("calendar_agent", query, 3, &provider)
            .unwrap();
        assert_eq!(
            got.iter().map(|m| &m.id).collect::<Vec<_>>(),
            oracle.iter().map(|m| &m.payload.id).collect::<Vec<_>>()
        );
        assert!(!got.is_empty());

        let empty =
            retrieve_dynamic_step(query, "no_such_agent", &banks, 3, &provider).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn dynamic_phrasings_pick_different_memories() {
        // Three calendar subtasks with distinct wording; two phrasings of
        // a query retrieve different top-1 entries.
        let mut units = Vec::new();
        for (i, description) in [
            "delete the stale recurring sync event",
            "create a brand new project meeting",
            "list every calendar entry for auditing",
        ]
        .iter()
        .enumerate()
        {
            let text = format!(
                "<memory_start>{{
                    \"high_level_plan\": \"p\",
                    \"task_description\": \"task {i}\",
                    \"subtasks\": [{{
                        \"agent\": \"calendar_agent\",
                        \"description\": \"{description}\",
                        \"steps\": \"\",
                        \"observations\": \"done\"
                    }}],
                    \"final_answer\": \"a\",
                    \"reflections\": \"r\"
                }}<memory_end>"
            );
            units.push(
                crate::memory::parse_memory_unit(&text, &crate::memory::MemoryTags::default())
                    .unwrap(),
            );
        }
        let provider = HashEmbedder::new();
        let banks = build_banks(&units, &provider).unwrap();
        let a = retrieve_dynamic_step("delete the stale sync", "calendar_agent", &banks, 1, &provider)
            .unwrap();
        let b = retrieve_dynamic_step("create a new meeting", "calendar_agent", &banks, 1, &provider)
            .unwrap();
        assert_ne!(a[0].id, b[0].id);
    }

    #[test]
    fn query_rewrite_parses_draft_and_bounds_allocations() {
        let banks = fixture_banks();
        let provider = HashEmbedder::new();
        let rewriter = ScriptedClient::new(
            "rewriter",
            vec![ScriptEntry::new(
                vec!["## New Task"],
                "<start>\n1. Check the calendar for conflicts\n2. Send an email about the meeting\n<end>",
            )],
        );
        let allocation = allocate_query_rewrite(
            TASK,
            &banks,
            &rewriter,
            5,
            3,
            PlacementMode::OrchAndAgent,
            true,
            &provider,
            None,
        )
        .unwrap();
        assert_eq!(
            allocation.draft_plan.as_deref(),
            Some(
                &[
                    "Check the calendar for conflicts".to_string(),
                    "Send an email about the meeting".to_string()
                ][..]
            )
        );
        for (agent, list) in &allocation.agent_memories {
            assert!(list.len() <= 3);
            let bank_ids: Vec<&str> = banks.agents[agent]
                .subtasks()
                .map(|s| s.id.as_str())
                .collect();
            for memory in list {
                assert!(bank_ids.contains(&memory.id.as_str()), "{agent}");
            }
            // Deduplicated by id.
            let mut ids: Vec<&str> = list.iter().map(|m| m.id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            assert_eq!(ids.len(), list.len());
        }
    }

    #[test]
    fn query_rewrite_fails_after_untagged_retry() {
        let banks = fixture_banks();
        let rewriter = ScriptedClient::new(
            "prose",
            vec![ScriptEntry::new(vec![""], "just prose, no tags")],
        );
        let err = allocate_query_rewrite(
            TASK,
            &banks,
            &rewriter,
            5,
            3,
            PlacementMode::OrchAndAgent,
            true,
            &HashEmbedder::new(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, PolicyError::RewriteParseFailure(_)));
    }

    #[test]
    fn rewrite_orchestrator_side_equals_vanilla() {
        let banks = fixture_banks();
        let provider = HashEmbedder::new();
        let rewriter = ScriptedClient::new(
            "rewriter",
            vec![ScriptEntry::new(vec![""], "<start>\n1. Do the task\n<end>")],
        );
        let vanilla = allocate_vanilla(TASK, &banks, 5, 3, PlacementMode::OrchAndAgent, &provider)
            .unwrap();
        let rewrite = allocate_query_rewrite(
            TASK,
            &banks,
            &rewriter,
            5,
            3,
            PlacementMode::OrchAndAgent,
            true,
            &provider,
            None,
        )
        .unwrap();
        assert_eq!(
            rewrite.orchestrator_memories,
            vanilla.orchestrator_memories
        );
    }

    #[test]
    fn placement_modes_enforce_their_invariants() {
        let banks = fixture_banks();
        let provider = HashEmbedder::new();
        let base = allocate_vanilla(TASK, &banks, 5, 3, PlacementMode::OrchAndAgent, &provider)
            .unwrap();
        assert!(!base.agent_memories.is_empty());

        let none = apply_placement(base.clone(), PlacementMode::None);
        assert!(none.orchestrator_memories.is_empty());
        assert!(none.agent_memories.is_empty());
        assert!(!none.dynamic_enabled);
        assert_eq!(none.orchestrator_scope, OrchestratorScope::None);

        let planning = apply_placement(base.clone(), PlacementMode::OrchPlanningAndAgent);
        assert_eq!(planning.orchestrator_scope, OrchestratorScope::PlanningOnly);
        assert_eq!(planning.agent_memories, base.agent_memories);

        let orch_only = apply_placement(base.clone(), PlacementMode::OrchOnly);
        assert!(orch_only.agent_memories.is_empty());
        assert!(!orch_only.dynamic_enabled);
        assert_eq!(
            orch_only.orchestrator_memories,
            base.orchestrator_memories
        );

        let agent_only = apply_placement(base.clone(), PlacementMode::AgentOnly);
        assert!(agent_only.orchestrator_memories.is_empty());
        assert_eq!(agent_only.agent_memories, base.agent_memories);

        for mode in [
            PlacementMode::OrchAndAgent,
            PlacementMode::OrchPlanningAndAgent,
            PlacementMode::OrchOnly,
            PlacementMode::AgentOnly,
            PlacementMode::None,
        ] {
            let once = apply_placement(base.clone(), mode);
            let twice = apply_placement(once.clone(), mode);
            assert_eq!(once, twice, "{mode}");
        }
    }
}
