//! End-to-end tests of the `legomem` binary: exit codes, the full
//! curate -> run -> report flow, and bank validation.

use std::path::Path;
use std::process::{Command, Output};

use legomem::curation::save_logs;
use legomem::scenario::reference_logs;

fn legomem(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_legomem"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn missing_config_exits_2_with_usage_message() {
    let dir = tempfile::tempdir().unwrap();
    let output = legomem(&["run", "--config", "missing.toml"], dir.path());
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("usage error"), "stderr: {stderr}");
}

#[test]
fn unknown_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let output = legomem(&["run", "--nonsense"], dir.path());
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn split_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = legomem(&["split", "--suite", "builtin", "--seed", "7"], dir.path());
    let b = legomem(&["split", "--suite", "builtin", "--seed", "7"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("6 train / 6 test"));
}

#[test]
fn curate_run_report_validate_flow() {
    let dir = tempfile::tempdir().unwrap();
    let logs_path = dir.path().join("logs.jsonl");
    save_logs(&reference_logs(), &logs_path).unwrap();
    std::fs::write(
        dir.path().join("model.toml"),
        "[curator]\nkind = \"golden\"\n\n[embedding]\nkind = \"hash\"\n",
    )
    .unwrap();

    let curate = legomem(
        &[
            "curate",
            "--logs",
            "logs.jsonl",
            "--out",
            "bank",
            "--model",
            "model.toml",
        ],
        dir.path(),
    );
    assert_eq!(curate.status.code(), Some(0), "{}", stdout(&curate));
    assert!(stdout(&curate).contains("12 kept"));

    let validate = legomem(&["validate-bank", "bank"], dir.path());
    assert_eq!(validate.status.code(), Some(0), "{}", stdout(&validate));
    assert!(stdout(&validate).contains("manifest matches files"));

    std::fs::write(
        dir.path().join("run.toml"),
        r#"suite = "builtin"
bank = "bank"
variant = "vanilla"
placement = "orch_and_agent"
output_dir = "run1"

[team.orchestrator]
kind = "golden"

[team.agent]
kind = "golden"
"#,
    )
    .unwrap();
    let run = legomem(&["run", "--config", "run.toml"], dir.path());
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout(&run).contains("100.00"));

    let report = legomem(&["report", "run1"], dir.path());
    assert_eq!(report.status.code(), Some(0));
    let text = stdout(&report);
    assert!(
        text.contains("variant,placement,level,success_rate,avg_steps,step_failure_rate"),
        "{text}"
    );
    assert!(text.contains("vanilla,orch_and_agent,overall,100.00"));
    assert!(dir.path().join("run1/report.csv").is_file());
}

#[test]
fn corrupted_bank_fails_validation_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let logs_path = dir.path().join("logs.jsonl");
    save_logs(&reference_logs()[..2], &logs_path).unwrap();
    std::fs::write(
        dir.path().join("model.toml"),
        "[curator]\nkind = \"golden\"\n\n[embedding]\nkind = \"hash\"\n",
    )
    .unwrap();
    let curate = legomem(
        &[
            "curate",
            "--logs",
            "logs.jsonl",
            "--out",
            "bank",
            "--model",
            "model.toml",
        ],
        dir.path(),
    );
    assert_eq!(curate.status.code(), Some(0));

    // Drop a line from an agent file; validation must notice.
    let agents_dir = dir.path().join("bank/agents");
    let agent_file = std::fs::read_dir(&agents_dir)
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let content = std::fs::read_to_string(&agent_file).unwrap();
    let truncated: Vec<&str> = content.lines().skip(1).collect();
    std::fs::write(&agent_file, truncated.join("\n")).unwrap();

    let validate = legomem(&["validate-bank", "bank"], dir.path());
    assert_eq!(validate.status.code(), Some(1));
}
