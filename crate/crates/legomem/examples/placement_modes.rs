//! The five memory placement modes, shown as which prompts actually carry
//! a memory block when the same task runs under each mode.
//!
//! ```bash
//! cargo run -p legomem --example placement_modes
//! ```

use legomem::bank::build_banks;
use legomem::embedding::HashEmbedder;
use legomem::office::AgentRegistry;
use legomem::orchestrator::{run_task, OrchestratorConfig, PromptKind};
use legomem::policy::PlacementMode;
use legomem::prompts::MEMORY_BLOCK_HEADER;
use legomem::scenario::{fixture_memory_units, golden_team};
use legomem::suite::builtin_suite;

fn main() {
    let fixture = builtin_suite().remove(0);
    let provider = HashEmbedder::new();
    let banks = build_banks(&fixture_memory_units(), &provider).unwrap();
    let registry = AgentRegistry::standard();

    println!("task: {}\n", fixture.description);
    println!(
        "{:<26}{:>10}{:>8}{:>8}{:>10}",
        "placement", "planning", "step", "agent", "success"
    );
    for placement in [
        PlacementMode::OrchAndAgent,
        PlacementMode::OrchPlanningAndAgent,
        PlacementMode::OrchOnly,
        PlacementMode::AgentOnly,
        PlacementMode::None,
    ] {
        let config = OrchestratorConfig {
            placement,
            ..OrchestratorConfig::default()
        };
        let result = run_task(
            &fixture,
            &banks,
            &config,
            &golden_team(&fixture),
            &registry,
            &provider,
        );
        let has = |kind: PromptKind| {
            result
                .prompts
                .iter()
                .filter(|p| p.kind == kind)
                .any(|p| p.text.contains(MEMORY_BLOCK_HEADER))
        };
        println!(
            "{:<26}{:>10}{:>8}{:>8}{:>10}",
            placement.to_string(),
            has(PromptKind::Planning),
            has(PromptKind::Step),
            has(PromptKind::AgentAct),
            result.success
        );
    }
}
