//! Dataset splitting and metrics arithmetic: a seeded level-stratified
//! train/test split, and a report computed from hand-built task results.
//!
//! ```bash
//! cargo run -p legomem --example split_and_metrics
//! ```

use legomem::harness::{metrics_from_rows, render_grid, split_suite, TaskRow};
use legomem::orchestrator::Termination;
use legomem::policy::{PlacementMode, RetrievalVariant};
use legomem::suite::builtin_suite;

fn main() {
    let suite = builtin_suite();
    for seed in [0u64, 7, 42] {
        let (train, test) = split_suite(&suite, seed).unwrap();
        println!(
            "seed {seed}: train [{}] / test [{}]",
            train.iter().map(|f| f.task_id.as_str()).collect::<Vec<_>>().join(", "),
            test.iter().map(|f| f.task_id.as_str()).collect::<Vec<_>>().join(", "),
        );
    }

    // Hand-built rows: 4 successes of 6 tasks across two levels.
    let rows: Vec<TaskRow> = [
        ("a", 1u8, true, 2usize, 0usize, 4usize),
        ("b", 1, true, 3, 1, 5),
        ("c", 1, false, 6, 2, 4),
        ("d", 2, true, 4, 0, 6),
        ("e", 2, true, 5, 1, 8),
        ("f", 2, false, 8, 4, 7),
    ]
    .into_iter()
    .map(|(id, level, success, steps, failed, total)| TaskRow {
        task_id: id.into(),
        level,
        repetition: 0,
        success,
        steps_executed: steps,
        failed_action_count: failed,
        total_action_count: total,
        replan_count: 0,
        termination: Termination::Finished,
    })
    .collect();
    let report = metrics_from_rows(rows, RetrievalVariant::Vanilla, PlacementMode::OrchAndAgent);
    println!();
    print!("{}", render_grid(std::slice::from_ref(&report)));
    println!(
        "\noverall: {}/{} tasks succeeded, {:.2} avg steps, {:.4} step failure rate",
        report.overall.successes,
        report.overall.tasks,
        report.overall.avg_execution_steps,
        report.overall.step_failure_rate
    );
}
