//! Deterministic scripted scenarios built from the bundled fixtures'
//! reference solutions: golden teams that solve their task, null teams
//! that do nothing, reference execution logs, and the fixture memory bank
//! those logs distill into. Offline end-to-end runs and the acceptance
//! suite are driven entirely from here.

use std::sync::Arc;

use serde_json::{json, Map};

use crate::curation::{ExecutionLog, LogEvent, Outcome};
use crate::gateway::{ScriptEntry, ScriptedClient};
use crate::memory::{MemoryTags, MemoryUnit, SubtaskRecord, ThinkActionPair};
use crate::office::{execute_action, reset, TaskFixture};
use crate::orchestrator::TeamClients;
use crate::prompts::{
    AGENT_ACT_MARKER, AGENT_SUMMARY_MARKER, PLAN_PROMPT_MARKER, REPLAN_PROMPT_MARKER,
    STEP_PROMPT_MARKER,
};
use crate::suite::builtin_suite;

/// The memory unit a fixture's reference solution distills into.
pub fn fixture_memory_unit(fixture: &TaskFixture) -> MemoryUnit {
    let high_level_plan = fixture
        .reference
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {} ({})", i + 1, s.subtask, s.agent_name))
        .collect::<Vec<_>>()
        .join(" ");
    let subtasks = fixture
        .reference
        .steps
        .iter()
        .map(|step| SubtaskRecord {
            agent_name: step.agent_name.clone(),
            description: step.subtask.clone(),
            steps: step
                .actions
                .iter()
                .map(|a| ThinkActionPair {
                    think: a.think.clone(),
                    action: a.action.clone(),
                })
                .collect(),
            observations: step.summary.clone(),
            extra: Map::new(),
        })
        .collect();
    let mut unit = MemoryUnit {
        id: String::new(),
        task_description: fixture.description.clone(),
        high_level_plan,
        subtasks,
        final_answer: fixture.reference.final_answer.clone(),
        reflections: "Every subtask succeeded on the first attempt; no failed actions to avoid."
            .into(),
        source_log_id: golden_log_id(fixture),
        extra: Map::new(),
    };
    unit.finalize_id();
    unit
}

/// The bundled 12-unit test bank source: one unit per builtin fixture.
pub fn fixture_memory_units() -> Vec<MemoryUnit> {
    builtin_suite().iter().map(fixture_memory_unit).collect()
}

fn golden_log_id(fixture: &TaskFixture) -> String {
    format!("golden-{}", fixture.task_id)
}

/// Builds the execution log of the reference solution by executing its
/// actions against a fresh workspace, so observations are real.
pub fn reference_log(fixture: &TaskFixture) -> ExecutionLog {
    let mut ws = reset(fixture);
    let mut events = vec![LogEvent::Plan {
        steps: fixture
            .reference
            .steps
            .iter()
            .map(|s| s.subtask.clone())
            .collect(),
        revision: 0,
    }];
    for step in &fixture.reference.steps {
        events.push(LogEvent::Directive {
            agent_name: step.agent_name.clone(),
            subtask: step.subtask.clone(),
        });
        for action in &step.actions {
            let observation = execute_action(&mut ws, &action.action);
            events.push(LogEvent::Action {
                agent_name: step.agent_name.clone(),
                think: action.think.clone(),
                action: serde_json::to_value(&action.action).expect("action serializes"),
                observation: observation.text,
                failed: observation.failed,
            });
        }
        events.push(LogEvent::Summary {
            agent_name: step.agent_name.clone(),
            summary: step.summary.clone(),
        });
    }
    events.push(LogEvent::FinalAnswer {
        text: fixture.reference.final_answer.clone(),
    });
    ExecutionLog {
        log_id: golden_log_id(fixture),
        task_description: fixture.description.clone(),
        events,
        outcome: Outcome::Success,
    }
}

/// Reference logs for every builtin fixture.
pub fn reference_logs() -> Vec<ExecutionLog> {
    builtin_suite().iter().map(reference_log).collect()
}

fn delegate_directive(agent: &str, subtask: &str) -> String {
    format!(
        "<directive>{}</directive>",
        json!({"type": "delegate", "agent": agent, "subtask": subtask})
    )
}

fn finish_directive(answer: &str) -> String {
    format!(
        "<directive>{}</directive>",
        json!({"type": "finish", "answer": answer})
    )
}

/// Orchestrator script that walks the fixture's reference steps in order
/// and then finishes with the reference answer. Step entries are
/// single-use so repeated step prompts consume them sequentially.
pub fn golden_orchestrator_script(fixture: &TaskFixture) -> Vec<ScriptEntry> {
    let plan = fixture
        .reference
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s.subtask))
        .collect::<Vec<_>>()
        .join("\n");
    let mut entries = vec![ScriptEntry::once(vec![PLAN_PROMPT_MARKER], plan)];
    for step in &fixture.reference.steps {
        entries.push(ScriptEntry::once(
            vec![STEP_PROMPT_MARKER],
            delegate_directive(&step.agent_name, &step.subtask),
        ));
    }
    entries.push(ScriptEntry::once(
        vec![STEP_PROMPT_MARKER],
        finish_directive(&fixture.reference.final_answer),
    ));
    entries
}

/// Agent script answering each reference step's action and summary
/// prompts in order.
pub fn golden_agent_script(fixture: &TaskFixture) -> Vec<ScriptEntry> {
    let mut entries = Vec::new();
    for step in &fixture.reference.steps {
        let acts = step
            .actions
            .iter()
            .map(|a| format!("<think>{}</think>\n<action>{}</action>", a.think, a.action.to_json()))
            .collect::<Vec<_>>()
            .join("\n");
        entries.push(ScriptEntry::once(
            vec![AGENT_ACT_MARKER.to_string(), step.subtask.clone()],
            acts,
        ));
        entries.push(ScriptEntry::once(
            vec![AGENT_SUMMARY_MARKER.to_string(), step.subtask.clone()],
            step.summary.clone(),
        ));
    }
    entries
}

/// Rewriter script producing the reference subtasks as the draft plan.
pub fn golden_rewriter_script(fixture: &TaskFixture) -> Vec<ScriptEntry> {
    let draft = fixture
        .reference
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s.subtask))
        .collect::<Vec<_>>()
        .join("\n");
    vec![ScriptEntry::new(
        vec!["## New Task".to_string(), fixture.description.clone()],
        format!("<start>\n{draft}\n<end>"),
    )]
}

/// A full scripted team that solves the fixture.
pub fn golden_team(fixture: &TaskFixture) -> TeamClients {
    let mut team = TeamClients::new(
        Arc::new(ScriptedClient::new(
            format!("golden-orch-{}", fixture.task_id),
            golden_orchestrator_script(fixture),
        )),
        Arc::new(ScriptedClient::new(
            format!("golden-agent-{}", fixture.task_id),
            golden_agent_script(fixture),
        )),
    );
    team.rewriter = Some(Arc::new(ScriptedClient::new(
        format!("golden-rewriter-{}", fixture.task_id),
        golden_rewriter_script(fixture),
    )));
    team
}

/// A team that plans nothing and finishes immediately with an empty
/// answer — the negative control.
pub fn null_team() -> TeamClients {
    let entries = vec![
        ScriptEntry::new(vec![PLAN_PROMPT_MARKER], "1. Nothing to do"),
        ScriptEntry::new(vec![REPLAN_PROMPT_MARKER], "1. Still nothing to do"),
        ScriptEntry::new(vec![STEP_PROMPT_MARKER], finish_directive("")),
        ScriptEntry::new(vec!["## New Task"], "<start>\n1. Nothing\n<end>"),
    ];
    TeamClients::uniform(Arc::new(ScriptedClient::new("null", entries)))
}

/// Curator script that answers each builtin fixture's trajectory with its
/// canonical memory unit wrapped in the given tags.
pub fn golden_curator(tags: &MemoryTags) -> ScriptedClient {
    let mut entries = Vec::new();
    for fixture in builtin_suite() {
        let unit = fixture_memory_unit(&fixture);
        entries.push(ScriptEntry::new(
            vec![fixture.description.clone()],
            format!("{}\n{}\n{}", tags.start, unit.to_json_line(), tags.end),
        ));
    }
    ScriptedClient::new("golden-curator", entries)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::curation::{curate_corpus, validate};
    use crate::embedding::HashEmbedder;
    use crate::memory::extract_subtask_memories;
    use crate::office::AgentRegistry;

    #[test]
    fn twelve_units_with_twenty_five_subtasks() {
        let units = fixture_memory_units();
        assert_eq!(units.len(), 12);
        let total: usize = units.iter().map(|u| u.subtasks.len()).sum();
        assert_eq!(total, 25);

        // Extraction conservation: descriptions concatenate identically.
        for unit in &units {
            let extracted = extract_subtask_memories(unit);
            let from_unit: Vec<&str> =
                unit.subtasks.iter().map(|s| s.description.as_str()).collect();
            let from_extracted: Vec<&str> =
                extracted.iter().map(|s| s.description.as_str()).collect();
            assert_eq!(from_unit, from_extracted);
        }
    }

    #[test]
    fn fixture_units_validate_against_standard_registry() {
        let registry = AgentRegistry::standard();
        for unit in fixture_memory_units() {
            let report = validate(&unit, &registry);
            assert!(report.ok, "{}: {:?}", unit.source_log_id, report.issues);
        }
    }

    #[test]
    fn reference_logs_are_well_formed_and_successful() {
        for log in reference_logs() {
            assert!(log.is_well_formed());
            assert_eq!(log.outcome, Outcome::Success);
            let failed = log.events.iter().any(|e| matches!(
                e,
                LogEvent::Action { failed: true, .. }
            ));
            assert!(!failed, "{} has failed actions", log.log_id);
        }
    }

    #[test]
    fn golden_curation_reproduces_fixture_units() {
        let tags = MemoryTags::default();
        let curator = golden_curator(&tags);
        let registry = AgentRegistry::standard();
        let provider = HashEmbedder::new();
        let dir = tempfile::tempdir().unwrap();
        let (summary, manifest) = curate_corpus(
            &reference_logs(),
            &curator,
            &provider,
            &registry,
            &tags,
            dir.path(),
        )
        .unwrap();
        assert_eq!(summary.kept, 12);
        assert!(summary.dropped.is_empty());
        assert_eq!(manifest.unit_count, 12);
        assert_eq!(manifest.subtask_count, 25);

        let curated = crate::bank::load_banks(dir.path()).unwrap();
        let curated_ids: BTreeSet<String> =
            curated.global.units().map(|u| u.id.clone()).collect();
        let expected_ids: BTreeSet<String> =
            fixture_memory_units().iter().map(|u| u.id.clone()).collect();
        assert_eq!(curated_ids, expected_ids);
    }
}
