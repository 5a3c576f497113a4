//! One end-to-end orchestrated task with scripted clients: allocation,
//! planning, per-step delegation, agent tool calls against the simulated
//! office, and the final checker verdict — with the transcript printed.
//!
//! ```bash
//! cargo run -p legomem --example golden_run
//! ```

use legomem::bank::build_banks;
use legomem::curation::LogEvent;
use legomem::embedding::HashEmbedder;
use legomem::office::AgentRegistry;
use legomem::orchestrator::{run_task, OrchestratorConfig};
use legomem::scenario::{fixture_memory_units, golden_team};
use legomem::suite::builtin_suite;

fn main() {
    let fixture = builtin_suite().remove(0);
    let provider = HashEmbedder::new();
    let banks = build_banks(&fixture_memory_units(), &provider).unwrap();
    let config = OrchestratorConfig::default();

    println!("task: {}\n", fixture.description);
    let result = run_task(
        &fixture,
        &banks,
        &config,
        &golden_team(&fixture),
        &AgentRegistry::standard(),
        &provider,
    );

    for event in &result.transcript.events {
        match event {
            LogEvent::Plan { steps, revision } => {
                println!("[plan r{revision}]");
                for (i, step) in steps.iter().enumerate() {
                    println!("  {}. {step}", i + 1);
                }
            }
            LogEvent::Directive { agent_name, subtask } => {
                println!("[orchestrator -> {agent_name}] {subtask}");
            }
            LogEvent::Action {
                agent_name,
                action,
                observation,
                failed,
                ..
            } => {
                println!("  [{agent_name}] {action}");
                println!("    -> {}{observation}", if *failed { "FAILED: " } else { "" });
            }
            LogEvent::Summary { agent_name, summary } => {
                println!("  [{agent_name} summary] {summary}");
            }
            LogEvent::FinalAnswer { text } => println!("[final answer] {text}"),
        }
    }

    println!();
    println!("success:          {}", result.success);
    println!("steps executed:   {}", result.steps_executed);
    println!(
        "actions:          {} total, {} failed",
        result.total_action_count, result.failed_action_count
    );
    println!("workspace hash:   {}", &result.final_workspace_hash[..16]);
}
