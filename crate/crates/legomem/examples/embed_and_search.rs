//! Embed text with the deterministic offline embedder and run exact top-k
//! retrieval over the bundled memory bank.
//!
//! ```bash
//! cargo run -p legomem --example embed_and_search
//! ```

use legomem::bank::build_banks;
use legomem::embedding::{cosine_similarity, embed, HashEmbedder};
use legomem::scenario::fixture_memory_units;

fn main() {
    let provider = HashEmbedder::new();

    let base = embed(&provider, "calendar event").unwrap();
    for text in ["calendar events", "send email", "spreadsheet cell"] {
        let other = embed(&provider, text).unwrap();
        println!(
            "cosine(\"calendar event\", {text:?}) = {:.4}",
            cosine_similarity(&base, &other).unwrap()
        );
    }

    let banks = build_banks(&fixture_memory_units(), &provider).unwrap();
    println!(
        "\nbank: {} full-task units, {} subtask memories",
        banks.global.len(),
        banks.subtask_count()
    );

    let query = "put a new meeting on the calendar";
    println!("\ntop 3 full-task memories for {query:?}:");
    for hit in banks.retrieve_units(query, 3, &provider).unwrap() {
        println!("  {:.4}  {}", hit.score, hit.payload.task_description);
    }

    println!("\ntop 3 calendar_agent subtask memories for {query:?}:");
    for hit in banks
        .retrieve_subtasks("calendar_agent", query, 3, &provider)
        .unwrap()
    {
        println!("  {:.4}  {}", hit.score, hit.payload.description);
    }
}
