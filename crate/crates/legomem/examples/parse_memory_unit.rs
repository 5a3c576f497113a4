//! Parse curator output into a structured memory unit, round-trip it, and
//! extract the per-agent subtask memories.
//!
//! ```bash
//! cargo run -p legomem --example parse_memory_unit
//! ```

use legomem::memory::{
    extract_subtask_memories, parse_memory_unit, serialize_memory_unit, MemoryTags,
};
use legomem::prompts::CURATION_EXAMPLE_JSON;

fn main() {
    let tags = MemoryTags::default();
    let curator_output = format!(
        "Some preamble the model wrote.\n{}\n{}\n{}\nTrailing chatter.",
        tags.start, CURATION_EXAMPLE_JSON, tags.end
    );

    let unit = parse_memory_unit(&curator_output, &tags).expect("example parses");
    println!("id:        {}", unit.id);
    println!("plan:      {}", unit.high_level_plan);
    println!("subtasks:  {}", unit.subtasks.len());
    for (i, subtask) in unit.subtasks.iter().enumerate() {
        println!(
            "  {} [{}] {} ({} steps)",
            i + 1,
            subtask.agent_name,
            subtask.description,
            subtask.steps.len()
        );
    }

    // Serialization wraps the unit back in the tags; parsing it again
    // yields an equal value.
    let round_tripped = parse_memory_unit(&serialize_memory_unit(&unit, &tags), &tags).unwrap();
    assert_eq!(unit, round_tripped);
    println!("round-trip: equal");

    let extracted = extract_subtask_memories(&unit);
    println!("extracted {} subtask memories:", extracted.len());
    for memory in &extracted {
        println!("  {} <- parent {}", memory.id, memory.parent_unit_id);
    }
}
