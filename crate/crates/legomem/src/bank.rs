//! Embedding-indexed memory banks: one global full-task bank plus one
//! subtask bank per agent, with exact top-k retrieval.
//!
//! Retrieval is a full scan — correct and fast at these sizes (tens to low
//! thousands). Swapping in an index later only has to preserve the
//! contract of [`top_k`]: descending score, ties broken by ascending
//! memory id, exactly the brute-force top-k. Banks are immutable after
//! build; re-curation produces a new bank directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::{cosine_similarity, embed, EmbedError, EmbeddingProvider, EmbeddingVector};
use crate::memory::{extract_subtask_memories, MemoryUnit, SubtaskMemory};

pub const BANK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BankError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("query dimension {query} does not match bank dimension {bank}")]
    DimensionMismatch { query: usize, bank: usize },
    #[error("query text is empty")]
    EmptyQuery,
    #[error("duplicate unit id {0}")]
    DuplicateUnitId(String),
    #[error("bank io failure: {0}")]
    IoFailure(String),
    #[error("bank schema version {found} is not the supported {expected}")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("bank was built with {bank_provider} (dim {bank_dim}) but {expected_provider} (dim {expected_dim}) is configured")]
    DimMismatchOnLoad {
        bank_provider: String,
        bank_dim: usize,
        expected_provider: String,
        expected_dim: usize,
    },
}

impl From<std::io::Error> for BankError {
    fn from(e: std::io::Error) -> Self {
        BankError::IoFailure(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankKind {
    FullTask,
    Subtask,
}

/// Index record: what text was embedded for which memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub memory_id: String,
    pub kind: BankKind,
    pub agent_name: Option<String>,
    pub index_text: String,
    pub embedding: EmbeddingVector,
}

/// One retrieval hit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMemory<T> {
    pub memory_id: String,
    pub score: f64,
    pub payload: T,
}

fn top_k<'a, T>(
    entries: impl Iterator<Item = (&'a BankEntry, &'a T)>,
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<ScoredMemory<T>>, BankError>
where
    T: Clone + 'a,
{
    let mut scored = Vec::new();
    for (entry, payload) in entries {
        let score = cosine_similarity(query, &entry.embedding)?;
        scored.push(ScoredMemory {
            memory_id: entry.memory_id.clone(),
            score,
            payload: payload.clone(),
        });
    }
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("cosine scores are never NaN")
            .then_with(|| a.memory_id.cmp(&b.memory_id))
    });
    scored.truncate(k);
    Ok(scored)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GlobalRecord {
    #[serde(flatten)]
    entry: BankEntry,
    unit: MemoryUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SubtaskRecordLine {
    #[serde(flatten)]
    entry: BankEntry,
    subtask: SubtaskMemory,
}

/// The global full-task bank.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GlobalBank {
    records: Vec<GlobalRecord>,
}

impl GlobalBank {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &BankEntry> {
        self.records.iter().map(|r| &r.entry)
    }

    pub fn units(&self) -> impl Iterator<Item = &MemoryUnit> {
        self.records.iter().map(|r| &r.unit)
    }
}

/// One agent's subtask bank.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentBank {
    records: Vec<SubtaskRecordLine>,
}

impl AgentBank {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &BankEntry> {
        self.records.iter().map(|r| &r.entry)
    }

    pub fn subtasks(&self) -> impl Iterator<Item = &SubtaskMemory> {
        self.records.iter().map(|r| &r.subtask)
    }
}

/// The full bank set: provider identity, global bank, per-agent banks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BankSet {
    pub provider_name: String,
    pub dim: usize,
    pub global: GlobalBank,
    pub agents: BTreeMap<String, AgentBank>,
}

/// Sidecar metadata persisted next to the bank files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub schema_version: u32,
    pub provider: String,
    pub dim: usize,
    pub unit_count: usize,
    pub subtask_count: usize,
    pub agent_counts: BTreeMap<String, usize>,
    pub content_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curation: Option<serde_json::Value>,
}

impl BankSet {
    /// Total subtask entries across all agent banks.
    pub fn subtask_count(&self) -> usize {
        self.agents.values().map(AgentBank::len).sum()
    }

    /// Errors unless the given provider matches what the bank was built with.
    pub fn check_provider(&self, provider: &dyn EmbeddingProvider) -> Result<(), BankError> {
        if provider.dim() != self.dim || provider.name() != self.provider_name {
            return Err(BankError::DimMismatchOnLoad {
                bank_provider: self.provider_name.clone(),
                bank_dim: self.dim,
                expected_provider: provider.name().to_string(),
                expected_dim: provider.dim(),
            });
        }
        Ok(())
    }

    /// Top-k full-task memories for a query, by cosine over task
    /// descriptions. Exactly the brute-force top-k.
    pub fn retrieve_units(
        &self,
        query_text: &str,
        k: usize,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Vec<ScoredMemory<MemoryUnit>>, BankError> {
        let query = self.embed_query(query_text, provider)?;
        top_k(
            self.global.records.iter().map(|r| (&r.entry, &r.unit)),
            &query,
            k,
        )
    }

    /// Top-k subtask memories from one agent's bank. An agent without a
    /// bank yields an empty result.
    pub fn retrieve_subtasks(
        &self,
        agent_name: &str,
        query_text: &str,
        k: usize,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Vec<ScoredMemory<SubtaskMemory>>, BankError> {
        let Some(bank) = self.agents.get(agent_name) else {
            return Ok(Vec::new());
        };
        let query = self.embed_query(query_text, provider)?;
        top_k(
            bank.records.iter().map(|r| (&r.entry, &r.subtask)),
            &query,
            k,
        )
    }

    fn embed_query(
        &self,
        query_text: &str,
        provider: &dyn EmbeddingProvider,
    ) -> Result<EmbeddingVector, BankError> {
        if query_text.trim().is_empty() {
            return Err(BankError::EmptyQuery);
        }
        if provider.dim() != self.dim {
            return Err(BankError::DimensionMismatch {
                query: provider.dim(),
                bank: self.dim,
            });
        }
        Ok(embed(provider, query_text)?)
    }
}

/// Builds the global bank and per-agent subtask banks from validated,
/// id-deduplicated units. Full-task entries are indexed by the task
/// description; subtask entries by the subtask description alone.
pub fn build_banks(
    units: &[MemoryUnit],
    provider: &dyn EmbeddingProvider,
) -> Result<BankSet, BankError> {
    let mut seen = std::collections::BTreeSet::new();
    for unit in units {
        if !seen.insert(unit.id.as_str()) {
            return Err(BankError::DuplicateUnitId(unit.id.clone()));
        }
    }

    let mut bank = BankSet {
        provider_name: provider.name().to_string(),
        dim: provider.dim(),
        ..Default::default()
    };
    for unit in units {
        let embedding = embed(provider, &unit.task_description)?;
        bank.global.records.push(GlobalRecord {
            entry: BankEntry {
                memory_id: unit.id.clone(),
                kind: BankKind::FullTask,
                agent_name: None,
                index_text: unit.task_description.clone(),
                embedding,
            },
            unit: unit.clone(),
        });
        for subtask in extract_subtask_memories(unit) {
            let embedding = embed(provider, &subtask.description)?;
            bank.agents
                .entry(subtask.agent_name.clone())
                .or_default()
                .records
                .push(SubtaskRecordLine {
                    entry: BankEntry {
                        memory_id: subtask.id.clone(),
                        kind: BankKind::Subtask,
                        agent_name: Some(subtask.agent_name.clone()),
                        index_text: subtask.description.clone(),
                        embedding,
                    },
                    subtask,
                });
        }
    }
    Ok(bank)
}

fn jsonl<T: Serialize>(items: impl Iterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("bank records serialize"));
        out.push('\n');
    }
    out
}

/// Content hash over the serialized bank files, agent files in name order.
pub fn bank_content_hash(bank: &BankSet) -> String {
    let mut hasher = Sha256::new();
    hasher.update(jsonl(bank.global.records.iter()).as_bytes());
    for (agent, agent_bank) in &bank.agents {
        hasher.update(agent.as_bytes());
        hasher.update(b"\n");
        hasher.update(jsonl(agent_bank.records.iter()).as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Recomputes the content hash of a bank directory from its files.
pub fn bank_dir_hash(dir: &Path) -> Result<String, BankError> {
    let bank = load_banks(dir)?;
    Ok(bank_content_hash(&bank))
}

/// Persists the bank directory: `global.jsonl`, `agents/<name>.jsonl`,
/// `manifest.json`. Returns the written manifest.
pub fn save_banks(bank: &BankSet, dir: &Path) -> Result<BankManifest, BankError> {
    save_banks_with(bank, dir, None, None)
}

/// As [`save_banks`], attaching a prompt version and curation summary to
/// the manifest.
pub fn save_banks_with(
    bank: &BankSet,
    dir: &Path,
    prompt_version: Option<String>,
    curation: Option<serde_json::Value>,
) -> Result<BankManifest, BankError> {
    fs::create_dir_all(dir.join("agents"))?;
    let mut global = fs::File::create(dir.join("global.jsonl"))?;
    global.write_all(jsonl(bank.global.records.iter()).as_bytes())?;
    for (agent, agent_bank) in &bank.agents {
        let mut file = fs::File::create(dir.join("agents").join(format!("{agent}.jsonl")))?;
        file.write_all(jsonl(agent_bank.records.iter()).as_bytes())?;
    }
    let manifest = BankManifest {
        schema_version: BANK_SCHEMA_VERSION,
        provider: bank.provider_name.clone(),
        dim: bank.dim,
        unit_count: bank.global.len(),
        subtask_count: bank.subtask_count(),
        agent_counts: bank
            .agents
            .iter()
            .map(|(name, b)| (name.clone(), b.len()))
            .collect(),
        content_hash: bank_content_hash(bank),
        prompt_version,
        curation,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(manifest)
}

/// Loads a bank directory written by [`save_banks`].
pub fn load_banks(dir: &Path) -> Result<BankSet, BankError> {
    let manifest = load_manifest(dir)?;
    if manifest.schema_version != BANK_SCHEMA_VERSION {
        return Err(BankError::SchemaVersionMismatch {
            found: manifest.schema_version,
            expected: BANK_SCHEMA_VERSION,
        });
    }
    let mut bank = BankSet {
        provider_name: manifest.provider.clone(),
        dim: manifest.dim,
        ..Default::default()
    };
    let global_raw = fs::read_to_string(dir.join("global.jsonl"))?;
    for line in global_raw.lines() {
        let record: GlobalRecord =
            serde_json::from_str(line).map_err(|e| BankError::IoFailure(e.to_string()))?;
        bank.global.records.push(record);
    }
    let agents_dir = dir.join("agents");
    if agents_dir.is_dir() {
        let mut paths: Vec<_> = fs::read_dir(&agents_dir)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let agent = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let raw = fs::read_to_string(&path)?;
            let mut agent_bank = AgentBank::default();
            for line in raw.lines() {
                let record: SubtaskRecordLine =
                    serde_json::from_str(line).map_err(|e| BankError::IoFailure(e.to_string()))?;
                agent_bank.records.push(record);
            }
            bank.agents.insert(agent, agent_bank);
        }
    }
    Ok(bank)
}

/// Reads just the manifest of a bank directory.
pub fn load_manifest(dir: &Path) -> Result<BankManifest, BankError> {
    let raw = fs::read_to_string(dir.join("manifest.json"))?;
    serde_json::from_str(&raw).map_err(|e| BankError::IoFailure(e.to_string()))
}

/// An empty bank set bound to a provider; memory-less runs use this.
pub fn empty_banks(provider: &dyn EmbeddingProvider) -> BankSet {
    BankSet {
        provider_name: provider.name().to_string(),
        dim: provider.dim(),
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;
    use crate::scenario::fixture_memory_units;

    fn fixture_bank() -> BankSet {
        build_banks(&fixture_memory_units(), &HashEmbedder::new()).unwrap()
    }

    #[test]
    fn fixture_bank_counts() {
        let units = fixture_memory_units();
        let expected_subtasks: usize = units.iter().map(|u| u.subtasks.len()).sum();
        let bank = fixture_bank();
        assert_eq!(bank.global.len(), 12);
        assert_eq!(bank.subtask_count(), expected_subtasks);
        assert_eq!(bank.subtask_count(), 25);
    }

    #[test]
    fn empty_build_yields_empty_banks() {
        let bank = build_banks(&[], &HashEmbedder::new()).unwrap();
        assert!(bank.global.is_empty());
        assert!(bank.agents.is_empty());
        assert_eq!(bank.dim, 256);
    }

    #[test]
    fn subtask_entries_partition_across_agents() {
        let bank = fixture_bank();
        let mut all_ids = std::collections::BTreeSet::new();
        for (agent, agent_bank) in &bank.agents {
            for entry in agent_bank.entries() {
                assert_eq!(entry.agent_name.as_deref(), Some(agent.as_str()));
                assert_eq!(entry.kind, BankKind::Subtask);
                assert!(all_ids.insert(entry.memory_id.clone()), "duplicate entry");
            }
        }
        assert_eq!(all_ids.len(), bank.subtask_count());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let units = fixture_memory_units();
        let doubled = vec![units[0].clone(), units[0].clone()];
        assert!(matches!(
            build_banks(&doubled, &HashEmbedder::new()),
            Err(BankError::DuplicateUnitId(_))
        ));
    }

    #[test]
    fn retrieval_boundaries() {
        let bank = fixture_bank();
        let provider = HashEmbedder::new();
        let empty = empty_banks(&provider);
        assert!(empty
            .retrieve_units("anything at all", 5, &provider)
            .unwrap()
            .is_empty());

        let all = bank.retrieve_units("calendar meeting", 1000, &provider).unwrap();
        assert_eq!(all.len(), bank.global.len());
        for pair in all.windows(2) {
            assert!(pair[0].score >= pair[1].score);
        }
        assert!(matches!(
            bank.retrieve_units("   ", 3, &provider),
            Err(BankError::EmptyQuery)
        ));
    }

    #[test]
    fn retrieval_matches_brute_force_oracle() {
        let bank = fixture_bank();
        let provider = HashEmbedder::new();
        let query = "add a meeting to the calendar";
        let k = 4;

        let got = bank.retrieve_units(query, k, &provider).unwrap();

        // Independent oracle: score every entry, full sort, take k.
        let qv = embed(&provider, query).unwrap();
        let mut oracle: Vec<(f64, String)> = bank
            .global
            .entries()
            .map(|e| {
                (
                    cosine_similarity(&qv, &e.embedding).unwrap(),
                    e.memory_id.clone(),
                )
            })
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        oracle.truncate(k);

        assert_eq!(
            got.iter().map(|s| (s.score, s.memory_id.clone())).collect::<Vec<_>>(),
            oracle
        );
    }

    #[test]
    fn retrieval_is_deterministic() {
        let bank = fixture_bank();
        let provider = HashEmbedder::new();
        let a = bank.retrieve_units("send an email", 5, &provider).unwrap();
        let b = bank.retrieve_units("send an email", 5, &provider).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_detected() {
        struct Tiny;
        impl EmbeddingProvider for Tiny {
            fn name(&self) -> &str {
                "tiny"
            }
            fn dim(&self) -> usize {
                4
            }
            fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
                Ok(texts
                    .iter()
                    .map(|_| EmbeddingVector(vec![0.5, 0.5, 0.5, 0.5]))
                    .collect())
            }
        }
        let bank = fixture_bank();
        assert!(matches!(
            bank.retrieve_units("query", 3, &Tiny),
            Err(BankError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let bank = fixture_bank();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_banks(&bank, dir.path()).unwrap();
        assert_eq!(manifest.unit_count, 12);
        assert_eq!(manifest.subtask_count, 25);

        let loaded = load_banks(dir.path()).unwrap();
        assert_eq!(loaded, bank);
        assert_eq!(bank_content_hash(&loaded), manifest.content_hash);
    }

    #[test]
    fn load_from_empty_dir_is_io_failure() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_banks(dir.path()),
            Err(BankError::IoFailure(_))
        ));
    }

    #[test]
    fn provider_mismatch_on_load_is_detected() {
        let bank = fixture_bank();
        let dir = tempfile::tempdir().unwrap();
        save_banks(&bank, dir.path()).unwrap();
        let loaded = load_banks(dir.path()).unwrap();

        struct BigDim;
        impl EmbeddingProvider for BigDim {
            fn name(&self) -> &str {
                "remote-1536"
            }
            fn dim(&self) -> usize {
                1536
            }
            fn embed_batch(&self, _: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
                unreachable!("never called in this test")
            }
        }
        assert!(matches!(
            loaded.check_provider(&BigDim),
            Err(BankError::DimMismatchOnLoad { .. })
        ));
        loaded.check_provider(&HashEmbedder::new()).unwrap();
    }

    #[test]
    fn schema_version_guard() {
        let bank = fixture_bank();
        let dir = tempfile::tempdir().unwrap();
        save_banks(&bank, dir.path()).unwrap();
        let manifest_path = dir.path().join("manifest.json");
        let mut manifest: BankManifest =
            serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
        manifest.schema_version = 99;
        std::fs::write(&manifest_path, serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(matches!(
            load_banks(dir.path()),
            Err(BankError::SchemaVersionMismatch { found: 99, .. })
        ));
    }
}
