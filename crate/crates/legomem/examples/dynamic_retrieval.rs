//! The dynamic retrieval variant: the orchestrator side is allocated up
//! front while each agent's memories are fetched just-in-time, per step,
//! with the live subtask description as the query.
//!
//! ```bash
//! cargo run -p legomem --example dynamic_retrieval
//! ```

use legomem::bank::build_banks;
use legomem::curation::LogEvent;
use legomem::embedding::HashEmbedder;
use legomem::office::AgentRegistry;
use legomem::orchestrator::{run_task, OrchestratorConfig};
use legomem::policy::{retrieve_dynamic_step, RetrievalVariant};
use legomem::scenario::{fixture_memory_units, golden_team};
use legomem::suite::builtin_suite;

fn main() {
    let fixture = builtin_suite().remove(0);
    let provider = HashEmbedder::new();
    let banks = build_banks(&fixture_memory_units(), &provider).unwrap();
    let config = OrchestratorConfig {
        variant: RetrievalVariant::Dynamic,
        ..OrchestratorConfig::default()
    };

    println!("task: {}\n", fixture.description);
    let result = run_task(
        &fixture,
        &banks,
        &config,
        &golden_team(&fixture),
        &AgentRegistry::standard(),
        &provider,
    );
    println!(
        "steps executed: {}, subtask-bank queries: {}\n",
        result.steps_executed, result.dynamic_query_count
    );

    // Reproduce each step's just-in-time retrieval.
    for event in &result.transcript.events {
        if let LogEvent::Directive { agent_name, subtask } = event {
            println!("step query [{agent_name}]: {subtask}");
            let memories =
                retrieve_dynamic_step(subtask, agent_name, &banks, config.k_agent, &provider)
                    .unwrap();
            for memory in memories {
                println!("  retrieved: {}", memory.description);
            }
        }
    }
    println!("\nsuccess: {}", result.success);
}
