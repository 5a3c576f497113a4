//! Modular procedural memory for orchestrator/worker agent teams.
//!
//! The engine distills successful execution logs into structured memory
//! units — a high-level plan, per-agent subtask traces, the final answer,
//! and a reflection — stores them in embedding-indexed banks (one global
//! full-task bank plus one subtask bank per agent), retrieves and
//! allocates them at inference time under three retrieval variants and
//! five placement modes, and measures their effect on task success and
//! execution efficiency in a deterministic simulated office environment.
//!
//! # Module map
//!
//! - [`memory`] — the memory-unit schema, parsing, serialization, subtask
//!   extraction, and prompt rendering with a reasoning toggle
//! - [`embedding`] — the embedding provider abstraction, the offline
//!   hashing embedder, the remote embedder, and similarity math
//! - [`bank`] — embedding-indexed banks with exact top-k retrieval and a
//!   manifest-carrying on-disk layout
//! - [`curation`] — the offline pipeline from execution logs to banks
//! - [`policy`] — retrieval variants (vanilla, dynamic, query rewrite)
//!   and the five placement modes
//! - [`orchestrator`] — the execution loop: planning, delegation, agent
//!   tool calls, stall detection, replanning
//! - [`office`] — the simulated calendar/email/document/sheet/system
//!   environment with programmatic success checkers
//! - [`gateway`] — chat model clients: remote HTTP, deterministic
//!   scripted, and record/replay cassettes
//! - [`harness`] — dataset splitting, batch runs, metrics, reports
//! - [`suite`] — the bundled 12-task mini suite (4 per difficulty level)
//! - [`scenario`] — golden scripted teams and reference logs derived from
//!   the bundled fixtures, for offline end-to-end runs
//!
//! # Examples
//!
//! Each major capability has a runnable walkthrough:
//!
//! ```bash
//! cargo run -p legomem --example parse_memory_unit   # memory schema + round-trip
//! cargo run -p legomem --example embed_and_search    # embeddings + top-k retrieval
//! cargo run -p legomem --example build_banks         # bank build/save/load
//! cargo run -p legomem --example curate_corpus       # logs -> curated bank
//! cargo run -p legomem --example golden_run          # one orchestrated task, verbose
//! cargo run -p legomem --example run_suite_scripted  # the full 12-task suite
//! cargo run -p legomem --example placement_modes     # the five placement modes
//! cargo run -p legomem --example dynamic_retrieval   # per-step subtask retrieval
//! cargo run -p legomem --example query_rewrite       # draft-plan retrieval
//! cargo run -p legomem --example stall_and_replan    # stall detection + replanning
//! cargo run -p legomem --example office_env_tour     # the simulated environment
//! cargo run -p legomem --example reasoning_toggle    # memory with/without reasoning
//! cargo run -p legomem --example record_replay       # cassette record/replay
//! cargo run -p legomem --example split_and_metrics   # splits + metrics arithmetic
//! ```
//!
//! The `legomem` binary drives the batch workflow (`curate`, `run`,
//! `report`, `split`, `validate-bank`); see the README for the config
//! file formats.

pub mod action;
pub mod bank;
pub mod curation;
pub mod embedding;
pub mod gateway;
pub mod harness;
pub mod memory;
pub mod office;
pub mod orchestrator;
pub mod policy;
pub mod prompts;
pub mod scenario;
pub mod suite;

pub use action::Action;
pub use bank::{build_banks, load_banks, save_banks, BankSet, ScoredMemory};
pub use embedding::{
    cosine_similarity, embed, EmbeddingProvider, EmbeddingVector, HashEmbedder,
};
pub use memory::{
    extract_subtask_memories, parse_memory_unit, render_memory_units, render_subtask_memories,
    serialize_memory_unit, MemoryTags, MemoryUnit, SubtaskMemory, SubtaskRecord, ThinkActionPair,
};
pub use orchestrator::{run_task, OrchestratorConfig, TaskResult, TeamClients};
pub use policy::{MemoryAllocation, PlacementMode, RetrievalVariant};
