//! Experiment driver: dataset splitting, batch runs across variants and
//! placements, metrics, and report emission.
//!
//! Every run directory is self-describing: effective config snapshot,
//! per-task rows, transcripts, and reports. Report arithmetic is exactly
//! recomputable from the persisted rows.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::{bank_content_hash, empty_banks, load_banks, BankError, BankSet};
use crate::embedding::{
    CachedProvider, EmbeddingProvider, HashEmbedder, RemoteEmbedder, RemoteEmbedderConfig,
};
use crate::gateway::{CassetteClient, ModelClient, RemoteClient, RemoteClientConfig, ScriptEntry, ScriptedClient};
use crate::office::{AgentRegistry, TaskFixture};
use crate::orchestrator::{
    run_task, OrchestratorConfig, TaskResult, TeamClients, Termination, DEFAULT_BUDGET,
    DEFAULT_REPLAN_LIMIT, DEFAULT_STALL_REPEATS, DEFAULT_STALL_WINDOW,
};
use crate::policy::{PlacementMode, RetrievalVariant, DEFAULT_K_AGENT, DEFAULT_K_ORCH};
use crate::suite::{builtin_suite, load_suite};

pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need at least 2 fixtures to split, got {0}")]
    TooFewFixtures(usize),
    #[error("no result for fixture {0}")]
    MissingResult(String),
    #[error("result for unknown task {0}")]
    UnknownTask(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Suite(#[from] crate::suite::SuiteError),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingCfg {
    /// Deterministic offline hashing embedder.
    #[default]
    Hash,
    /// Remote embeddings endpoint.
    Remote(RemoteEmbedderConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelCfg {
    /// Scripted from the fixture's reference solution — solves the task.
    Golden,
    /// Scripted to finish immediately with an empty answer.
    Null,
    /// Scripted from a JSON file holding an array of script entries.
    Scripted { script: PathBuf },
    /// Remote chat endpoint.
    Remote(RemoteClientConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TeamCfg {
    pub orchestrator: ModelCfg,
    pub agent: ModelCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewriter: Option<ModelCfg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CassetteModeCfg {
    Record,
    Replay,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CassetteCfg {
    pub mode: CassetteModeCfg,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StallCfg {
    #[serde(default = "default_stall_window")]
    pub window: usize,
    #[serde(default = "default_stall_repeats")]
    pub repeats: usize,
    #[serde(default = "default_replan_limit")]
    pub replan_limit: usize,
}

impl Default for StallCfg {
    fn default() -> Self {
        Self {
            window: DEFAULT_STALL_WINDOW,
            repeats: DEFAULT_STALL_REPEATS,
            replan_limit: DEFAULT_REPLAN_LIMIT,
        }
    }
}

fn default_stall_window() -> usize {
    DEFAULT_STALL_WINDOW
}
fn default_stall_repeats() -> usize {
    DEFAULT_STALL_REPEATS
}
fn default_replan_limit() -> usize {
    DEFAULT_REPLAN_LIMIT
}
fn default_k_orch() -> usize {
    DEFAULT_K_ORCH
}
fn default_k_agent() -> usize {
    DEFAULT_K_AGENT
}
fn default_budget() -> usize {
    DEFAULT_BUDGET
}
fn default_repetitions() -> usize {
    1
}
fn default_workers() -> usize {
    DEFAULT_WORKERS
}
fn default_include_reasoning() -> bool {
    true
}
fn default_split_use() -> SplitUse {
    SplitUse::All
}

/// Which half of the seeded split a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitUse {
    All,
    Train,
    Test,
}

/// The run configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Suite directory, or the literal "builtin" for the bundled tasks.
    pub suite: String,
    /// Bank directory; omit for memory-less runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bank: Option<PathBuf>,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_split_use")]
    pub use_split: SplitUse,
    pub variant: RetrievalVariant,
    pub placement: PlacementMode,
    #[serde(default = "default_include_reasoning")]
    pub include_reasoning: bool,
    #[serde(default = "default_k_orch")]
    pub k_orch: usize,
    #[serde(default = "default_k_agent")]
    pub k_agent: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub stall: StallCfg,
    #[serde(default)]
    pub embedding: EmbeddingCfg,
    pub team: TeamCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cassette: Option<CassetteCfg>,
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, HarnessError> {
        let raw = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&raw)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        if config.repetitions < 1 {
            return Err(HarnessError::Config("repetitions must be >= 1".into()));
        }
        Ok(config)
    }

    pub fn orchestrator_config(&self) -> OrchestratorConfig {
        OrchestratorConfig {
            variant: self.variant,
            placement: self.placement,
            k_orch: self.k_orch,
            k_agent: self.k_agent,
            include_reasoning: self.include_reasoning,
            budget: self.budget,
            stall_window: self.stall.window,
            stall_repeats: self.stall.repeats,
            replan_limit: self.stall.replan_limit,
        }
    }
}

/// Builds the embedding provider a config names, wrapped in a cache.
pub fn build_provider(cfg: &EmbeddingCfg) -> Arc<dyn EmbeddingProvider> {
    match cfg {
        EmbeddingCfg::Hash => Arc::new(CachedProvider::new(HashEmbedder::new())),
        EmbeddingCfg::Remote(remote) => {
            Arc::new(CachedProvider::new(RemoteEmbedder::new(remote.clone())))
        }
    }
}

/// Loads the suite a config names.
pub fn load_configured_suite(suite: &str) -> Result<Vec<TaskFixture>, HarnessError> {
    if suite == "builtin" {
        Ok(builtin_suite())
    } else {
        Ok(load_suite(Path::new(suite))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TeamRole {
    Orchestrator,
    Agent,
    Rewriter,
}

enum ClientSource {
    Shared(Arc<dyn ModelClient>),
    Golden(TeamRole),
    Null,
    ScriptFile(PathBuf),
}

impl ClientSource {
    fn build(cfg: &ModelCfg, role: TeamRole, cassette: Option<&CassetteCfg>) -> Result<Self, HarnessError> {
        Ok(match cfg {
            ModelCfg::Golden => ClientSource::Golden(role),
            ModelCfg::Null => ClientSource::Null,
            ModelCfg::Scripted { script } => ClientSource::ScriptFile(script.clone()),
            ModelCfg::Remote(remote) => {
                let base: Arc<dyn ModelClient> = Arc::new(RemoteClient::new(remote.clone()));
                let client: Arc<dyn ModelClient> = match cassette {
                    Some(CassetteCfg {
                        mode: CassetteModeCfg::Record,
                        path,
                    }) => Arc::new(CassetteClient::record(base, path)),
                    Some(CassetteCfg {
                        mode: CassetteModeCfg::Replay,
                        path,
                    }) => Arc::new(
                        CassetteClient::replay(path)
                            .map_err(|e| HarnessError::Config(e.to_string()))?,
                    ),
                    None => base,
                };
                ClientSource::Shared(client)
            }
        })
    }

    fn resolve(&self, fixture: &TaskFixture) -> Result<Arc<dyn ModelClient>, HarnessError> {
        Ok(match self {
            ClientSource::Shared(client) => client.clone(),
            ClientSource::Golden(TeamRole::Orchestrator) => Arc::new(ScriptedClient::new(
                format!("golden-orch-{}", fixture.task_id),
                crate::scenario::golden_orchestrator_script(fixture),
            )),
            ClientSource::Golden(TeamRole::Agent) => Arc::new(ScriptedClient::new(
                format!("golden-agent-{}", fixture.task_id),
                crate::scenario::golden_agent_script(fixture),
            )),
            ClientSource::Golden(TeamRole::Rewriter) => Arc::new(ScriptedClient::new(
                format!("golden-rewriter-{}", fixture.task_id),
                crate::scenario::golden_rewriter_script(fixture),
            )),
            ClientSource::Null => crate::scenario::null_team().orchestrator,
            ClientSource::ScriptFile(path) => {
                let raw = fs::read_to_string(path)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                let entries: Vec<ScriptEntry> = serde_json::from_str(&raw)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                Arc::new(ScriptedClient::new(
                    format!("scripted-{}", fixture.task_id),
                    entries,
                ))
            }
        })
    }
}

/// Per-task client factory derived from the team config. Scripted and
/// golden clients are rebuilt per task so use counters never leak across
/// tasks or repetitions.
pub struct TeamBuilder {
    orchestrator: ClientSource,
    agent: ClientSource,
    rewriter: Option<ClientSource>,
}

impl TeamBuilder {
    pub fn from_config(team: &TeamCfg, cassette: Option<&CassetteCfg>) -> Result<Self, HarnessError> {
        Ok(Self {
            orchestrator: ClientSource::build(&team.orchestrator, TeamRole::Orchestrator, cassette)?,
            agent: ClientSource::build(&team.agent, TeamRole::Agent, cassette)?,
            rewriter: team
                .rewriter
                .as_ref()
                .map(|cfg| ClientSource::build(cfg, TeamRole::Rewriter, cassette))
                .transpose()?,
        })
    }

    pub fn team_for(&self, fixture: &TaskFixture) -> Result<TeamClients, HarnessError> {
        let mut team = TeamClients::new(
            self.orchestrator.resolve(fixture)?,
            self.agent.resolve(fixture)?,
        );
        if let Some(rewriter) = &self.rewriter {
            team.rewriter = Some(rewriter.resolve(fixture)?);
        }
        Ok(team)
    }
}

// ---------------------------------------------------------------------------
// Dataset splitting
// ---------------------------------------------------------------------------

/// Deterministic seeded split, stratified by level; the train side takes
/// the ceiling on odd per-level counts.
pub fn split_suite(
    fixtures: &[TaskFixture],
    seed: u64,
) -> Result<(Vec<TaskFixture>, Vec<TaskFixture>), HarnessError> {
    if fixtures.len() < 2 {
        return Err(HarnessError::TooFewFixtures(fixtures.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_level: BTreeMap<u8, Vec<&TaskFixture>> = BTreeMap::new();
    for fixture in fixtures {
        by_level.entry(fixture.level).or_default().push(fixture);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for fixtures in by_level.values_mut() {
        fixtures.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        fixtures.shuffle(&mut rng);
        let take = fixtures.len().div_ceil(2);
        for (i, fixture) in fixtures.iter().enumerate() {
            if i < take {
                train.push((*fixture).clone());
            } else {
                test.push((*fixture).clone());
            }
        }
    }
    Ok((train, test))
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// One persisted per-task row; reports are recomputed from these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    pub level: u8,
    pub repetition: usize,
    pub success: bool,
    pub steps_executed: usize,
    pub failed_action_count: usize,
    pub total_action_count: usize,
    pub replan_count: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub tasks: usize,
    pub successes: usize,
    /// successes / tasks * 100, exactly.
    pub success_rate: f64,
    pub avg_execution_steps: f64,
    /// total failed actions / total actions; 0 when no actions ran.
    pub step_failure_rate: f64,
    pub replan_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: RetrievalVariant,
    pub placement: PlacementMode,
    pub overall: LevelMetrics,
    pub per_level: BTreeMap<u8, LevelMetrics>,
    pub rows: Vec<TaskRow>,
}

fn metrics_over(rows: &[&TaskRow]) -> LevelMetrics {
    let tasks = rows.len();
    let successes = rows.iter().filter(|r| r.success).count();
    let steps: usize = rows.iter().map(|r| r.steps_executed).sum();
    let failed: usize = rows.iter().map(|r| r.failed_action_count).sum();
    let total: usize = rows.iter().map(|r| r.total_action_count).sum();
    LevelMetrics {
        tasks,
        successes,
        success_rate: if tasks == 0 {
            0.0
        } else {
            successes as f64 / tasks as f64 * 100.0
        },
        avg_execution_steps: if tasks == 0 {
            0.0
        } else {
            steps as f64 / tasks as f64
        },
        step_failure_rate: if total == 0 {
            0.0
        } else {
            failed as f64 / total as f64
        },
        replan_total: rows.iter().map(|r| r.replan_count).sum(),
    }
}

/// Aggregates rows into per-level and overall metrics.
pub fn metrics_from_rows(
    rows: Vec<TaskRow>,
    variant: RetrievalVariant,
    placement: PlacementMode,
) -> MetricsReport {
    let refs: Vec<&TaskRow> = rows.iter().collect();
    let overall = metrics_over(&refs);
    let mut per_level = BTreeMap::new();
    for level in rows.iter().map(|r| r.level).collect::<std::collections::BTreeSet<_>>() {
        let level_rows: Vec<&TaskRow> = rows.iter().filter(|r| r.level == level).collect();
        per_level.insert(level, metrics_over(&level_rows));
    }
    MetricsReport {
        variant,
        placement,
        overall,
        per_level,
        rows,
    }
}

/// Turns task results into rows and aggregates them. Results must align
/// with the fixtures by task id; repetition indices count occurrences per
/// task in input order.
pub fn compute_metrics(
    results: &[TaskResult],
    fixtures: &[TaskFixture],
    variant: RetrievalVariant,
    placement: PlacementMode,
) -> Result<MetricsReport, HarnessError> {
    let levels: BTreeMap<&str, u8> = fixtures
        .iter()
        .map(|f| (f.task_id.as_str(), f.level))
        .collect();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut rows = Vec::with_capacity(results.len());
    for result in results {
        let level = *levels
            .get(result.task_id.as_str())
            .ok_or_else(|| HarnessError::UnknownTask(result.task_id.clone()))?;
        let repetition = {
            let counter = seen.entry(result.task_id.as_str()).or_insert(0);
            let rep = *counter;
            *counter += 1;
            rep
        };
        rows.push(TaskRow {
            task_id: result.task_id.clone(),
            level,
            repetition,
            success: result.success,
            steps_executed: result.steps_executed,
            failed_action_count: result.failed_action_count,
            total_action_count: result.total_action_count,
            replan_count: result.replan_count,
            termination: result.termination.clone(),
        });
    }
    for fixture in fixtures {
        if !seen.contains_key(fixture.task_id.as_str()) {
            return Err(HarnessError::MissingResult(fixture.task_id.clone()));
        }
    }
    Ok(metrics_from_rows(rows, variant, placement))
}

// ---------------------------------------------------------------------------
// Suite execution
// ---------------------------------------------------------------------------

/// Runs every fixture times `repetitions` with a bounded worker pool,
/// writes the run directory, and returns the aggregated report. Task
/// failures are data, never aborts; only config and IO errors abort.
pub fn run_suite(
    config: &RunConfig,
    fixtures: &[TaskFixture],
    banks: &BankSet,
    registry: &AgentRegistry,
    provider: &dyn EmbeddingProvider,
) -> Result<MetricsReport, HarnessError> {
    let builder = TeamBuilder::from_config(&config.team, config.cassette.as_ref())?;
    let orch_config = config.orchestrator_config();

    let mut ordered: Vec<&TaskFixture> = fixtures.iter().collect();
    ordered.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    let jobs: Vec<(usize, &TaskFixture, usize)> = ordered
        .iter()
        .enumerate()
        .flat_map(|(i, fixture)| {
            (0..config.repetitions).map(move |rep| (i * config.repetitions + rep, *fixture, rep))
        })
        .collect();

    let slots: Mutex<Vec<Option<TaskResult>>> = Mutex::new(vec![None; jobs.len()]);
    let next_job = Mutex::new(0usize);
    let failure: Mutex<Option<HarnessError>> = Mutex::new(None);

    let workers = config.workers.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = {
                    let mut cursor = next_job.lock().expect("job cursor poisoned");
                    if *cursor >= jobs.len() {
                        break;
                    }
                    let index = *cursor;
                    *cursor += 1;
                    index
                };
                let (slot, fixture, _rep) = jobs[index];
                match builder.team_for(fixture) {
                    Ok(team) => {
                        let result =
                            run_task(fixture, banks, &orch_config, &team, registry, provider);
                        slots.lock().expect("slots poisoned")[slot] = Some(result);
                    }
                    Err(e) => {
                        *failure.lock().expect("failure slot poisoned") = Some(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("failure slot poisoned") {
        return Err(e);
    }

    let mut results: Vec<TaskResult> = slots
        .into_inner()
        .expect("slots poisoned")
        .into_iter()
        .map(|slot| slot.expect("every job ran"))
        .collect();
    // Suffix log ids per repetition so transcript lines stay unique.
    if config.repetitions > 1 {
        for (i, result) in results.iter_mut().enumerate() {
            let rep = jobs[i].2;
            result.transcript.log_id = format!("{}-r{rep}", result.task_id);
        }
    }

    let sorted_fixtures: Vec<TaskFixture> = ordered.iter().map(|f| (*f).clone()).collect();
    let report = compute_metrics(&results, &sorted_fixtures, config.variant, config.placement)?;
    write_run_dir(config, banks, &results, &report)?;
    Ok(report)
}

#[derive(Debug, Serialize, Deserialize)]
struct RunInfo {
    provider: String,
    dim: usize,
    bank_hash: Option<String>,
    suite_size: usize,
    repetitions: usize,
}

fn write_run_dir(
    config: &RunConfig,
    banks: &BankSet,
    results: &[TaskResult],
    report: &MetricsReport,
) -> Result<(), HarnessError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("config.snapshot.toml"),
        toml::to_string_pretty(config).map_err(|e| HarnessError::Config(e.to_string()))?,
    )?;
    let mut rows_out = String::new();
    for row in &report.rows {
        rows_out.push_str(&serde_json::to_string(row).expect("row serializes"));
        rows_out.push('\n');
    }
    fs::write(dir.join("rows.jsonl"), rows_out)?;
    let mut transcripts = String::new();
    for result in results {
        transcripts.push_str(&serde_json::to_string(&result.transcript).expect("log serializes"));
        transcripts.push('\n');
    }
    fs::write(dir.join("transcripts.jsonl"), transcripts)?;
    let info = RunInfo {
        provider: banks.provider_name.clone(),
        dim: banks.dim,
        bank_hash: if banks.global.is_empty() && banks.agents.is_empty() {
            None
        } else {
            Some(bank_content_hash(banks))
        },
        suite_size: report.rows.iter().map(|r| r.task_id.as_str()).collect::<std::collections::BTreeSet<_>>().len(),
        repetitions: config.repetitions,
    };
    fs::write(
        dir.join("run.json"),
        serde_json::to_string_pretty(&info).expect("info serializes"),
    )?;
    fs::write(dir.join("report.csv"), render_csv(std::slice::from_ref(report)))?;
    fs::write(dir.join("report.txt"), render_grid(std::slice::from_ref(report)))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

pub const CSV_HEADER: &str = "variant,placement,level,success_rate,avg_steps,step_failure_rate";

fn level_label(level: Option<u8>) -> String {
    match level {
        Some(l) => format!("level{l}"),
        None => "overall".to_string(),
    }
}

/// Renders reports as CSV, one row per level plus overall per report.
pub fn render_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for report in reports {
        for (level, metrics) in report
            .per_level
            .iter()
            .map(|(l, m)| (Some(*l), m))
            .chain(std::iter::once((None, &report.overall)))
        {
            out.push_str(&format!(
                "{},{},{},{:.2},{:.2},{:.4}\n",
                report.variant,
                report.placement,
                level_label(level),
                metrics.success_rate,
                metrics.avg_execution_steps,
                metrics.step_failure_rate,
            ));
        }
    }
    out
}

/// Renders reports as an aligned text grid: one row per variant and
/// placement, success-rate columns per level plus overall.
pub fn render_grid(reports: &[MetricsReport]) -> String {
    let mut levels: std::collections::BTreeSet<u8> = std::collections::BTreeSet::new();
    for report in reports {
        levels.extend(report.per_level.keys().copied());
    }
    let mut header = format!("{:<16}{:<26}", "variant", "placement");
    for level in &levels {
        header.push_str(&format!("{:>10}", format!("level {level}")));
    }
    header.push_str(&format!("{:>10}{:>12}{:>14}", "overall", "avg steps", "step fail"));
    let mut out = header.clone();
    out.push('\n');
    out.push_str(&"-".repeat(header.len()));
    out.push('\n');
    for report in reports {
        out.push_str(&format!(
            "{:<16}{:<26}",
            report.variant.to_string(),
            report.placement.to_string()
        ));
        for level in &levels {
            match report.per_level.get(level) {
                Some(m) => out.push_str(&format!("{:>10.2}", m.success_rate)),
                None => out.push_str(&format!("{:>10}", "-")),
            }
        }
        out.push_str(&format!(
            "{:>10.2}{:>12.2}{:>14.4}\n",
            report.overall.success_rate,
            report.overall.avg_execution_steps,
            report.overall.step_failure_rate,
        ));
    }
    out
}

/// Loads one run directory's persisted rows and recomputes its report.
pub fn load_run_report(dir: &Path) -> Result<MetricsReport, HarnessError> {
    let config_raw = fs::read_to_string(dir.join("config.snapshot.toml"))?;
    let config: RunConfig =
        toml::from_str(&config_raw).map_err(|e| HarnessError::Config(e.to_string()))?;
    let rows_raw = fs::read_to_string(dir.join("rows.jsonl"))?;
    let mut rows = Vec::new();
    for line in rows_raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(line).map_err(|e| HarnessError::Io(format!("bad row: {e}")))?,
        );
    }
    Ok(metrics_from_rows(rows, config.variant, config.placement))
}

/// Collects run reports from a directory: the directory itself when it is
/// a run dir, otherwise each immediate subdirectory that is one.
pub fn collect_run_reports(dir: &Path) -> Result<Vec<MetricsReport>, HarnessError> {
    if dir.join("rows.jsonl").is_file() {
        return Ok(vec![load_run_report(dir)?]);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.join("rows.jsonl").is_file())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(HarnessError::Io(format!(
            "{} contains no run directories (rows.jsonl not found)",
            dir.display()
        )));
    }
    subdirs.iter().map(|p| load_run_report(p)).collect()
}

/// Prepares banks for a run: loads and provider-checks the configured
/// bank directory, or supplies empty banks for memory-less runs.
pub fn load_configured_banks(
    config: &RunConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<BankSet, HarnessError> {
    match &config.bank {
        Some(dir) => {
            let banks = load_banks(dir)?;
            banks.check_provider(provider)?;
            Ok(banks)
        }
        None => Ok(empty_banks(provider)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::build_banks;
    use crate::scenario::fixture_memory_units;

    fn results_of(pattern: &[bool]) -> (Vec<TaskResult>, Vec<TaskFixture>) {
        let fixtures: Vec<TaskFixture> = builtin_suite().into_iter().take(pattern.len()).collect();
        let results = fixtures
            .iter()
            .zip(pattern)
            .map(|(fixture, success)| TaskResult {
                task_id: fixture.task_id.clone(),
                success: *success,
                final_answer: String::new(),
                steps_executed: 2,
                failed_action_count: 0,
                total_action_count: 4,
                replan_count: 0,
                dynamic_query_count: 0,
                termination: Termination::Finished,
                final_workspace_hash: String::new(),
                allocation: crate::policy::MemoryAllocation::empty(),
                transcript: crate::curation::ExecutionLog {
                    log_id: fixture.task_id.clone(),
                    task_description: fixture.description.clone(),
                    events: vec![],
                    outcome: crate::curation::Outcome::Failure,
                },
                prompts: vec![],
            })
            .collect();
        (results, fixtures)
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let suite = builtin_suite();
        let (train, test) = split_suite(&suite, 7).unwrap();
        assert_eq!(train.len(), 6);
        assert_eq!(test.len(), 6);
        for level in 1..=3u8 {
            assert_eq!(train.iter().filter(|f| f.level == level).count(), 2);
            assert_eq!(test.iter().filter(|f| f.level == level).count(), 2);
        }
        let (train2, test2) = split_suite(&suite, 7).unwrap();
        let ids = |fixtures: &[TaskFixture]| -> Vec<String> {
            fixtures.iter().map(|f| f.task_id.clone()).collect()
        };
        assert_eq!(ids(&train), ids(&train2));
        assert_eq!(ids(&test), ids(&test2));

        // Different seeds eventually differ.
        let different = (0..20u64).any(|seed| {
            let (t, _) = split_suite(&suite, seed).unwrap();
            ids(&t) != ids(&train)
        });
        assert!(different);

        assert!(matches!(
            split_suite(&suite[..1], 0),
            Err(HarnessError::TooFewFixtures(1))
        ));
    }

    #[test]
    fn odd_level_counts_give_train_the_ceiling() {
        let suite: Vec<TaskFixture> = builtin_suite().into_iter().take(3).collect();
        // Three level-1 fixtures: train 2, test 1.
        let (train, test) = split_suite(&suite, 3).unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(test.len(), 1);
    }

    #[test]
    fn success_rate_arithmetic() {
        let (results, fixtures) = results_of(&[true, false, true]);
        let report = compute_metrics(
            &results,
            &fixtures,
            RetrievalVariant::Vanilla,
            PlacementMode::OrchAndAgent,
        )
        .unwrap();
        assert!((report.overall.success_rate - 66.67).abs() < 0.01);
        assert_eq!(report.overall.tasks, 3);
        assert_eq!(report.overall.successes, 2);
    }

    #[test]
    fn step_failure_rate_arithmetic() {
        let (mut results, fixtures) = results_of(&[true]);
        results[0].failed_action_count = 2;
        results[0].total_action_count = 8;
        let report = compute_metrics(
            &results,
            &fixtures,
            RetrievalVariant::Vanilla,
            PlacementMode::OrchAndAgent,
        )
        .unwrap();
        assert_eq!(report.overall.step_failure_rate, 0.25);
        let level1 = &report.per_level[&1];
        assert_eq!(level1.step_failure_rate, 0.25);
    }

    #[test]
    fn missing_and_unknown_results_error() {
        let (results, fixtures) = results_of(&[true, true]);
        let err = compute_metrics(
            &results[..1],
            &fixtures,
            RetrievalVariant::Vanilla,
            PlacementMode::OrchAndAgent,
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::MissingResult(_)));

        let (results, _) = results_of(&[true]);
        let err = compute_metrics(
            &results,
            &builtin_suite()[1..2],
            RetrievalVariant::Vanilla,
            PlacementMode::OrchAndAgent,
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::UnknownTask(_)));
    }

    #[test]
    fn golden_suite_run_scores_100() {
        let dir = tempfile::tempdir().unwrap();
        let provider = build_provider(&EmbeddingCfg::Hash);
        let banks = build_banks(&fixture_memory_units(), provider.as_ref()).unwrap();
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
            output_dir: dir.path().join("run"),
            stall: StallCfg::default(),
            embedding: EmbeddingCfg::Hash,
            team: TeamCfg {
                orchestrator: ModelCfg::Golden,
                agent: ModelCfg::Golden,
                rewriter: Some(ModelCfg::Golden),
            },
            cassette: None,
        };
        let report = run_suite(
            &config,
            &builtin_suite(),
            &banks,
            &AgentRegistry::standard(),
            provider.as_ref(),
        )
        .unwrap();
        assert_eq!(report.overall.success_rate, 100.0);
        assert_eq!(report.rows.len(), 12);
        assert!(dir.path().join("run/rows.jsonl").is_file());
        assert!(dir.path().join("run/transcripts.jsonl").is_file());

        let recomputed = load_run_report(&dir.path().join("run")).unwrap();
        assert_eq!(recomputed.overall, report.overall);
        assert_eq!(recomputed.per_level, report.per_level);

        let csv = render_csv(std::slice::from_ref(&report));
        assert!(csv.starts_with(CSV_HEADER));
        assert!(csv.contains("vanilla,orch_and_agent,overall,100.00"));
    }

    #[test]
    fn null_team_scores_zero_under_placement_none() {
        let dir = tempfile::tempdir().unwrap();
        let provider = build_provider(&EmbeddingCfg::Hash);
        let banks = empty_banks(provider.as_ref());
        let config = RunConfig {
            suite: "builtin".into(),
            bank: None,
            split_seed: 0,
            use_split: SplitUse::All,
            variant: RetrievalVariant::Vanilla,
            placement: PlacementMode::None,
            include_reasoning: true,
            k_orch: 5,
            k_agent: 3,
            budget: 30,
            repetitions: 1,
            workers: 2,
            output_dir: dir.path().join("run"),
            stall: StallCfg::default(),
            embedding: EmbeddingCfg::Hash,
            team: TeamCfg {
                orchestrator: ModelCfg::Null,
                agent: ModelCfg::Null,
                rewriter: None,
            },
            cassette: None,
        };
        let report = run_suite(
            &config,
            &builtin_suite(),
            &banks,
            &AgentRegistry::standard(),
            provider.as_ref(),
        )
        .unwrap();
        assert_eq!(report.overall.success_rate, 0.0);
    }

    #[test]
    fn repetitions_have_zero_variance_with_scripted_clients() {
        let dir = tempfile::tempdir().unwrap();
        let provider = build_provider(&EmbeddingCfg::Hash);
        let banks = build_banks(&fixture_memory_units(), provider.as_ref()).unwrap();
        let fixtures: Vec<TaskFixture> = builtin_suite().into_iter().take(2).collect();
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
            repetitions: 3,
            workers: 4,
            output_dir: dir.path().join("run"),
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
            &fixtures,
            &banks,
            &AgentRegistry::standard(),
            provider.as_ref(),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 6);
        for task_id in ["l1-calendar-reschedule", "l1-email-announce"] {
            let reps: Vec<&TaskRow> =
                report.rows.iter().filter(|r| r.task_id == task_id).collect();
            assert_eq!(reps.len(), 3);
            for row in &reps {
                assert_eq!(row.success, reps[0].success);
                assert_eq!(row.steps_executed, reps[0].steps_executed);
            }
        }
    }
}
