//! Build embedding-indexed banks from memory units, persist them to a
//! bank directory, and load them back bit-for-bit.
//!
//! ```bash
//! cargo run -p legomem --example build_banks
//! ```

use legomem::bank::{bank_content_hash, build_banks, load_banks, save_banks};
use legomem::embedding::HashEmbedder;
use legomem::scenario::fixture_memory_units;

fn main() {
    let provider = HashEmbedder::new();
    let banks = build_banks(&fixture_memory_units(), &provider).unwrap();

    let dir = std::env::temp_dir().join("legomem-example-bank");
    let _ = std::fs::remove_dir_all(&dir);
    let manifest = save_banks(&banks, &dir).unwrap();
    println!("bank directory: {}", dir.display());
    println!(
        "manifest: provider {} (dim {}), {} units, {} subtask memories",
        manifest.provider, manifest.dim, manifest.unit_count, manifest.subtask_count
    );
    for (agent, count) in &manifest.agent_counts {
        println!("  {agent}: {count}");
    }

    let loaded = load_banks(&dir).unwrap();
    assert_eq!(loaded, banks);
    assert_eq!(bank_content_hash(&loaded), manifest.content_hash);
    println!("reloaded bank equals the built bank (hash {})", &manifest.content_hash[..16]);
}
