//! Batch workflow CLI: curate banks from logs, run suites, render
//! reports, split datasets, and validate bank directories.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use legomem::bank::{bank_content_hash, load_banks, load_manifest};
use legomem::curation::{curate_corpus, load_logs};
use legomem::gateway::{ModelClient, RemoteClient, ScriptedClient};
use legomem::harness::{
    build_provider, collect_run_reports, load_configured_banks, load_configured_suite, render_csv,
    render_grid, run_suite, split_suite, EmbeddingCfg, ModelCfg, RunConfig, SplitUse,
};
use legomem::memory::MemoryTags;
use legomem::office::AgentRegistry;
use legomem::scenario::golden_curator;

#[derive(Parser)]
#[command(name = "legomem", version, about = "Procedural memory for orchestrator/worker agent teams")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Distill execution logs into an embedding-indexed bank directory.
    Curate {
        /// JSON Lines file of execution logs.
        #[arg(long)]
        logs: PathBuf,
        /// Output bank directory.
        #[arg(long)]
        out: PathBuf,
        /// TOML file naming the curator model and embedding provider.
        #[arg(long)]
        model: PathBuf,
        /// Start tag delimiting the curator's memory object.
        #[arg(long, default_value = "<memory_start>")]
        start_tag: String,
        /// End tag delimiting the curator's memory object.
        #[arg(long, default_value = "<memory_end>")]
        end_tag: String,
    },
    /// Run a suite under a run configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the bank directory named in the config.
        #[arg(long)]
        bank: Option<PathBuf>,
    },
    /// Render reports for a run directory (or a directory of run dirs).
    Report { dir: PathBuf },
    /// Split a suite into train and test halves, stratified by level.
    Split {
        /// Suite directory, or "builtin".
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the split as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a bank directory against its manifest.
    ValidateBank { dir: PathBuf },
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Curate-time model configuration file.
#[derive(Deserialize)]
struct CurateModelCfg {
    curator: ModelCfg,
    #[serde(default)]
    embedding: EmbeddingCfg,
}

fn build_curator(cfg: &ModelCfg, tags: &MemoryTags) -> Result<Box<dyn ModelClient>, CliError> {
    Ok(match cfg {
        ModelCfg::Golden => Box::new(golden_curator(tags)),
        ModelCfg::Null => {
            return Err(CliError::usage(
                "a null curator cannot produce memories; use golden, scripted, or remote",
            ))
        }
        ModelCfg::Scripted { script } => {
            let raw = std::fs::read_to_string(script).map_err(CliError::usage)?;
            let entries = serde_json::from_str(&raw).map_err(CliError::usage)?;
            Box::new(ScriptedClient::new("curator", entries))
        }
        ModelCfg::Remote(remote) => Box::new(RemoteClient::new(remote.clone())),
    })
}

fn cmd_curate(
    logs: PathBuf,
    out: PathBuf,
    model: PathBuf,
    start_tag: String,
    end_tag: String,
) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(&model)
        .map_err(|e| CliError::usage(format!("{}: {e}", model.display())))?;
    let model_cfg: CurateModelCfg = toml::from_str(&raw)
        .map_err(|e| CliError::usage(format!("{}: {e}", model.display())))?;
    let tags = MemoryTags {
        start: start_tag,
        end: end_tag,
    };
    let curator = build_curator(&model_cfg.curator, &tags)?;
    let provider = build_provider(&model_cfg.embedding);
    let logs = load_logs(&logs).map_err(CliError::runtime)?;
    let registry = AgentRegistry::standard();
    let (summary, manifest) = curate_corpus(
        &logs,
        curator.as_ref(),
        provider.as_ref(),
        &registry,
        &tags,
        &out,
    )
    .map_err(CliError::runtime)?;
    println!(
        "curated {} logs: {} successful, {} kept, {} dropped",
        summary.total_logs,
        summary.filtered_successful,
        summary.kept,
        summary.dropped.len()
    );
    for dropped in &summary.dropped {
        println!("  dropped {}: {}", dropped.log_id, dropped.reason);
    }
    println!(
        "bank written to {} ({} units, {} subtask memories, hash {})",
        out.display(),
        manifest.unit_count,
        manifest.subtask_count,
        &manifest.content_hash[..16]
    );
    Ok(())
}

fn cmd_run(config_path: PathBuf, bank_override: Option<PathBuf>) -> Result<(), CliError> {
    let mut config = RunConfig::from_toml_file(&config_path).map_err(CliError::usage)?;
    if let Some(bank) = bank_override {
        config.bank = Some(bank);
    }
    let provider = build_provider(&config.embedding);
    let banks = load_configured_banks(&config, provider.as_ref()).map_err(CliError::runtime)?;
    let fixtures = load_configured_suite(&config.suite).map_err(CliError::runtime)?;
    let fixtures = match config.use_split {
        SplitUse::All => fixtures,
        SplitUse::Train => {
            split_suite(&fixtures, config.split_seed)
                .map_err(CliError::runtime)?
                .0
        }
        SplitUse::Test => {
            split_suite(&fixtures, config.split_seed)
                .map_err(CliError::runtime)?
                .1
        }
    };
    let report = run_suite(
        &config,
        &fixtures,
        &banks,
        &AgentRegistry::standard(),
        provider.as_ref(),
    )
    .map_err(CliError::runtime)?;
    print!("{}", render_grid(std::slice::from_ref(&report)));
    println!("run directory: {}", config.output_dir.display());
    Ok(())
}

fn cmd_report(dir: PathBuf) -> Result<(), CliError> {
    let reports = collect_run_reports(&dir).map_err(CliError::runtime)?;
    print!("{}", render_grid(&reports));
    println!();
    let csv = render_csv(&reports);
    print!("{csv}");
    let out = dir.join("report.csv");
    std::fs::write(&out, csv).map_err(CliError::runtime)?;
    println!("csv written to {}", out.display());
    Ok(())
}

fn cmd_split(suite: String, seed: u64, out: Option<PathBuf>) -> Result<(), CliError> {
    let fixtures = load_configured_suite(&suite).map_err(CliError::runtime)?;
    let (train, test) = split_suite(&fixtures, seed).map_err(CliError::runtime)?;
    let ids = |fixtures: &[legomem::office::TaskFixture]| -> Vec<String> {
        fixtures.iter().map(|f| f.task_id.clone()).collect()
    };
    let (train_ids, test_ids) = (ids(&train), ids(&test));
    println!("seed {seed}: {} train / {} test", train_ids.len(), test_ids.len());
    println!("train: {}", train_ids.join(", "));
    println!("test:  {}", test_ids.join(", "));
    if let Some(path) = out {
        let body = serde_json::json!({"seed": seed, "train": train_ids, "test": test_ids});
        std::fs::write(&path, serde_json::to_string_pretty(&body).expect("split serializes"))
            .map_err(CliError::runtime)?;
        println!("split written to {}", path.display());
    }
    Ok(())
}

fn cmd_validate_bank(dir: PathBuf) -> Result<(), CliError> {
    let manifest = load_manifest(&dir).map_err(CliError::runtime)?;
    let banks = load_banks(&dir).map_err(CliError::runtime)?;
    let mut problems = Vec::new();
    if banks.global.len() != manifest.unit_count {
        problems.push(format!(
            "unit count: manifest {} vs files {}",
            manifest.unit_count,
            banks.global.len()
        ));
    }
    if banks.subtask_count() != manifest.subtask_count {
        problems.push(format!(
            "subtask count: manifest {} vs files {}",
            manifest.subtask_count,
            banks.subtask_count()
        ));
    }
    for (agent, bank) in &banks.agents {
        if manifest.agent_counts.get(agent) != Some(&bank.len()) {
            problems.push(format!("agent {agent}: count mismatch"));
        }
    }
    let actual_hash = bank_content_hash(&banks);
    if actual_hash != manifest.content_hash {
        problems.push(format!(
            "content hash: manifest {} vs files {}",
            &manifest.content_hash[..16],
            &actual_hash[..16]
        ));
    }
    println!(
        "bank {}: provider {} (dim {}), {} units, {} subtask memories across {} agents",
        dir.display(),
        manifest.provider,
        manifest.dim,
        manifest.unit_count,
        manifest.subtask_count,
        manifest.agent_counts.len()
    );
    for (agent, count) in &manifest.agent_counts {
        println!("  {agent}: {count}");
    }
    if problems.is_empty() {
        println!("manifest matches files (hash {})", &manifest.content_hash[..16]);
        Ok(())
    } else {
        Err(CliError::runtime(format!(
            "bank does not match manifest: {}",
            problems.join("; ")
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Commands::Curate {
            logs,
            out,
            model,
            start_tag,
            end_tag,
        } => cmd_curate(logs, out, model, start_tag, end_tag),
        Commands::Run { config, bank } => cmd_run(config, bank),
        Commands::Report { dir } => cmd_report(dir),
        Commands::Split { suite, seed, out } => cmd_split(suite, seed, out),
        Commands::ValidateBank { dir } => cmd_validate_bank(dir),
    };
    match result {
        Ok(()) => ExitCode::from(0),
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            ExitCode::from(2)
        }
    }
}
