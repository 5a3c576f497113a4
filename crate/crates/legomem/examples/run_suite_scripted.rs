//! Run the whole bundled 12-task suite with scripted golden teams and
//! print the per-level metrics grid, writing a self-describing run
//! directory along the way.
//!
//! ```bash
//! cargo run -p legomem --example run_suite_scripted
//! ```

use legomem::bank::build_banks;
use legomem::harness::{
    render_csv, render_grid, run_suite, EmbeddingCfg, ModelCfg, RunConfig, SplitUse, StallCfg,
    TeamCfg,
};
use legomem::office::AgentRegistry;
use legomem::policy::{PlacementMode, RetrievalVariant};
use legomem::scenario::fixture_memory_units;
use legomem::suite::builtin_suite;

fn main() {
    let provider = legomem::embedding::HashEmbedder::new();
    let banks = build_banks(&fixture_memory_units(), &provider).unwrap();
    let out = std::env::temp_dir().join("legomem-example-run");
    let _ = std::fs::remove_dir_all(&out);

    let config = RunConfig {
        suite: "builtin".into(),
        bank: None,
        split_seed: 0,
        use_split: SplitUse::All,
        variant: RetrievalVariant::Vanilla,
        placement: PlacementMode::OrchAndAgent,
        include_reasoning: true,
        k_orch: 5,
        k_agent: 3,
        budget: 30,
        repetitions: 1,
        workers: 4,
        output_dir: out.clone(),
        stall: StallCfg::default(),
        embedding: EmbeddingCfg::Hash,
        team: TeamCfg {
            orchestrator: ModelCfg::Golden,
            agent: ModelCfg::Golden,
            rewriter: None,
        },
        cassette: None,
    };

    let report = run_suite(
        &config,
        &builtin_suite(),
        &banks,
        &AgentRegistry::standard(),
        &provider,
    )
    .unwrap();

    print!("{}", render_grid(std::slice::from_ref(&report)));
    println!();
    print!("{}", render_csv(std::slice::from_ref(&report)));
    println!("\nrun directory: {}", out.display());
    for file in ["config.snapshot.toml", "rows.jsonl", "transcripts.jsonl", "report.csv"] {
        println!("  {}", out.join(file).display());
    }
}
