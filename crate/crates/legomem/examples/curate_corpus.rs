//! The offline curation pipeline: filter successful execution logs,
//! distill each through a (scripted) curator model, validate, and emit a
//! bank directory with a manifest accounting for every log.
//!
//! ```bash
//! cargo run -p legomem --example curate_corpus
//! ```

use legomem::curation::{curate_corpus, Outcome};
use legomem::embedding::HashEmbedder;
use legomem::memory::MemoryTags;
use legomem::office::AgentRegistry;
use legomem::scenario::{golden_curator, reference_logs};

fn main() {
    let tags = MemoryTags::default();
    let curator = golden_curator(&tags);
    let provider = HashEmbedder::new();
    let registry = AgentRegistry::standard();

    // Take the bundled reference logs and flip one to a failure so the
    // filter has something to drop.
    let mut logs = reference_logs();
    logs[5].outcome = Outcome::Failure;

    let out = std::env::temp_dir().join("legomem-example-curated");
    let _ = std::fs::remove_dir_all(&out);
    let (summary, manifest) =
        curate_corpus(&logs, &curator, &provider, &registry, &tags, &out).unwrap();

    println!("logs:                {}", summary.total_logs);
    println!("successful:          {}", summary.filtered_successful);
    println!("kept:                {}", summary.kept);
    println!("dropped:             {}", summary.dropped.len());
    println!("prompt version:      {}", summary.prompt_version);
    println!("bank content hash:   {}", &summary.bank_content_hash[..16]);
    println!(
        "bank written to {} ({} units, {} subtask memories)",
        out.display(),
        manifest.unit_count,
        manifest.subtask_count
    );
}
