//! Stall detection and replanning: an orchestrator that keeps issuing the
//! same delegation trips the stall detector, replans, and recovers —
//! while the same loop without stall detection burns its whole budget.
//!
//! ```bash
//! cargo run -p legomem --example stall_and_replan
//! ```

use std::sync::Arc;

use legomem::bank::empty_banks;
use legomem::embedding::HashEmbedder;
use legomem::gateway::{ScriptEntry, ScriptedClient};
use legomem::office::AgentRegistry;
use legomem::orchestrator::{run_task, OrchestratorConfig, TeamClients};
use legomem::policy::PlacementMode;
use legomem::prompts::{
    AGENT_ACT_MARKER, AGENT_SUMMARY_MARKER, PLAN_PROMPT_MARKER, REPLAN_PROMPT_MARKER,
    STEP_PROMPT_MARKER,
};
use legomem::suite::builtin_suite;

fn main() {
    let fixture = builtin_suite().remove(0);
    let provider = HashEmbedder::new();
    let banks = empty_banks(&provider);
    let registry = AgentRegistry::standard();

    let poke = r#"<directive>{"type": "delegate", "agent": "calendar_agent", "subtask": "poke the calendar"}</directive>"#;
    let fix = r#"<directive>{"type": "delegate", "agent": "calendar_agent", "subtask": "Remove the old sync and add the new meeting"}</directive>"#;
    let finish = r#"<directive>{"type": "finish", "answer": "Replaced the old sync with the new meeting."}</directive>"#;
    let agent_entries = vec![
        ScriptEntry::new(
            vec![AGENT_ACT_MARKER, "poke the calendar"],
            r#"<think>look again</think><action>{"app": "calendar", "action": "list_events", "user": "Bob"}</action>"#,
        ),
        ScriptEntry::new(
            vec![AGENT_ACT_MARKER, "Remove the old sync"],
            r#"<think>replace it</think><action>{"app": "calendar", "action": "delete_event", "user": "Bob", "summary": "Old sync"}</action><action>{"app": "calendar", "action": "create_event", "user": "Bob", "summary": "Meeting", "time_start": "2024-05-17 10:30:00", "time_end": "2024-05-17 11:00:00"}</action>"#,
        ),
        ScriptEntry::new(vec![AGENT_SUMMARY_MARKER], "Subtask handled."),
    ];

    // With stall detection: three identical delegations trigger a replan.
    let team = TeamClients::new(
        Arc::new(ScriptedClient::new(
            "orch",
            vec![
                ScriptEntry::once(vec![PLAN_PROMPT_MARKER], "1. Poke the calendar"),
                ScriptEntry::once(vec![STEP_PROMPT_MARKER], poke),
                ScriptEntry::once(vec![STEP_PROMPT_MARKER], poke),
                ScriptEntry::once(vec![STEP_PROMPT_MARKER], poke),
                ScriptEntry::once(
                    vec![REPLAN_PROMPT_MARKER],
                    "1. Remove the old sync and add the new meeting",
                ),
                ScriptEntry::once(vec![STEP_PROMPT_MARKER], fix),
                ScriptEntry::once(vec![STEP_PROMPT_MARKER], finish),
            ],
        )),
        Arc::new(ScriptedClient::new("agent", agent_entries.clone())),
    );
    let config = OrchestratorConfig {
        placement: PlacementMode::None,
        budget: 8,
        ..OrchestratorConfig::default()
    };
    let recovered = run_task(&fixture, &banks, &config, &team, &registry, &provider);
    println!(
        "with replanning:    success={} steps={} replans={} termination={:?}",
        recovered.success, recovered.steps_executed, recovered.replan_count, recovered.termination
    );

    // Without stall detection the loop repeats until the budget runs out.
    let stuck = TeamClients::new(
        Arc::new(ScriptedClient::new(
            "orch",
            vec![
                ScriptEntry::once(vec![PLAN_PROMPT_MARKER], "1. Poke the calendar"),
                ScriptEntry::new(vec![STEP_PROMPT_MARKER], poke),
            ],
        )),
        Arc::new(ScriptedClient::new("agent", agent_entries)),
    );
    let config = OrchestratorConfig {
        placement: PlacementMode::None,
        budget: 8,
        stall_repeats: usize::MAX,
        ..OrchestratorConfig::default()
    };
    let exhausted = run_task(&fixture, &banks, &config, &stuck, &registry, &provider);
    println!(
        "without replanning: success={} steps={} replans={} termination={:?}",
        exhausted.success, exhausted.steps_executed, exhausted.replan_count, exhausted.termination
    );
}
