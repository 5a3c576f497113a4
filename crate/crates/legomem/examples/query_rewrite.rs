//! The query-rewrite variant: a rewriter model drafts plan steps from the
//! retrieved full-task memories, each draft step is matched to an agent
//! bank, and subtask memories are retrieved per step before execution.
//!
//! ```bash
//! cargo run -p legomem --example query_rewrite
//! ```

use legomem::bank::build_banks;
use legomem::embedding::HashEmbedder;
use legomem::gateway::{ScriptEntry, ScriptedClient};
use legomem::policy::{allocate_query_rewrite, PlacementMode};
use legomem::scenario::fixture_memory_units;

fn main() {
    let provider = HashEmbedder::new();
    let banks = build_banks(&fixture_memory_units(), &provider).unwrap();
    let task = "Check Bob's calendar and email Alice about his next meeting";

    let rewriter = ScriptedClient::new(
        "rewriter",
        vec![ScriptEntry::new(
            vec!["## New Task"],
            "<start>\n1. Look up Bob's next scheduled meeting\n2. Send Alice an email with the meeting details\n<end>",
        )],
    );

    let allocation = allocate_query_rewrite(
        task,
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

    println!("task: {task}\n");
    println!("draft plan from the rewriter:");
    for (i, step) in allocation.draft_plan.as_deref().unwrap_or(&[]).iter().enumerate() {
        println!("  {}. {step}", i + 1);
    }
    println!(
        "\norchestrator memories: {}",
        allocation.orchestrator_memories.len()
    );
    println!("pre-execution agent allocations:");
    for (agent, memories) in &allocation.agent_memories {
        println!("  {agent}:");
        for memory in memories {
            println!("    {}", memory.description);
        }
    }
}
