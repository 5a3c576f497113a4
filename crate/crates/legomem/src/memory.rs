//! Structured procedural memory units: parsing, serialization, subtask
//! extraction, and prompt rendering.
//!
//! A full-task memory records an entire solved task — plan, per-agent
//! subtask traces, final answer, reflection. Subtask memories are the
//! per-agent slices of a full-task memory, independently indexable.
//!
//! Wire format notes:
//! - The canonical on-disk form is one JSON object per line (JSON Lines).
//! - A subtask's `steps` field travels as a single string of
//!   `<think>...</think><action>{...}</action>` pairs, matching the format
//!   agents use live, so stored traces and live behavior share one syntax.
//! - Think text and action parameters must not contain the literal step
//!   tags; such units are rejected rather than repaired.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::action::{parse_action_object, Action};

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ACTION_OPEN: &str = "<action>";
const ACTION_CLOSE: &str = "</action>";

/// Delimiters around the JSON object in curator output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryTags {
    pub start: String,
    pub end: String,
}

impl Default for MemoryTags {
    fn default() -> Self {
        Self {
            start: "<memory_start>".into(),
            end: "<memory_end>".into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("no tag-delimited memory region found")]
    MissingTags,
    #[error("malformed memory schema: {0}")]
    MalformedSchema(String),
    #[error("malformed action in subtask {subtask}, step {step}: {reason}")]
    MalformedAction {
        subtask: usize,
        step: usize,
        reason: String,
    },
    #[error("cannot render an empty memory sequence")]
    EmptyInput,
}

/// One reasoning/tool-call pair inside a subtask trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinkActionPair {
    pub think: String,
    pub action: Action,
}

/// One agent's localized trace inside a full-task memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskRecord {
    #[serde(rename = "agent")]
    pub agent_name: String,
    pub description: String,
    #[serde(with = "steps_wire")]
    pub steps: Vec<ThinkActionPair>,
    pub observations: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// A full-task procedural memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryUnit {
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub task_description: String,
    pub high_level_plan: String,
    pub subtasks: Vec<SubtaskRecord>,
    pub final_answer: String,
    pub reflections: String,
    #[serde(default)]
    pub source_log_id: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// A subtask trace extracted from a full-task memory, indexable on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskMemory {
    pub id: String,
    pub parent_unit_id: String,
    #[serde(rename = "agent")]
    pub agent_name: String,
    pub description: String,
    #[serde(with = "steps_wire")]
    pub steps: Vec<ThinkActionPair>,
    pub observations: String,
}

mod steps_wire {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{parse_steps, render_steps, ThinkActionPair};

    pub fn serialize<S: Serializer>(
        steps: &[ThinkActionPair],
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&render_steps(steps))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<Vec<ThinkActionPair>, D::Error> {
        let raw = String::deserialize(de)?;
        parse_steps(&raw).map_err(serde::de::Error::custom)
    }
}

/// Renders think/action pairs into the single-string wire form.
pub fn render_steps(steps: &[ThinkActionPair]) -> String {
    let mut out = String::new();
    for pair in steps {
        out.push_str(THINK_OPEN);
        out.push_str(&pair.think);
        out.push_str(THINK_CLOSE);
        out.push_str(ACTION_OPEN);
        out.push_str(&pair.action.to_json());
        out.push_str(ACTION_CLOSE);
    }
    out
}

/// Splits a steps string into think/action pairs.
///
/// The scanner is strict: pairs must alternate think-then-action with
/// nothing but whitespace between tags. Improper interleaving is an
/// error, not something to repair.
pub fn parse_steps(raw: &str) -> Result<Vec<ThinkActionPair>, String> {
    let mut pairs = Vec::new();
    let mut rest = raw;
    loop {
        let trimmed = rest.trim_start();
        if trimmed.is_empty() {
            break;
        }
        let after_think_open = trimmed
            .strip_prefix(THINK_OPEN)
            .ok_or_else(|| format!("expected {THINK_OPEN} at step {}", pairs.len()))?;
        let think_end = after_think_open
            .find(THINK_CLOSE)
            .ok_or_else(|| format!("unterminated {THINK_OPEN} at step {}", pairs.len()))?;
        let think = &after_think_open[..think_end];
        let after_think = after_think_open[think_end + THINK_CLOSE.len()..].trim_start();
        let after_action_open = after_think
            .strip_prefix(ACTION_OPEN)
            .ok_or_else(|| format!("expected {ACTION_OPEN} at step {}", pairs.len()))?;
        let action_end = after_action_open
            .find(ACTION_CLOSE)
            .ok_or_else(|| format!("unterminated {ACTION_OPEN} at step {}", pairs.len()))?;
        let action_src = &after_action_open[..action_end];
        let action = parse_action_object(action_src)
            .map_err(|e| format!("step {}: {e}", pairs.len()))?;
        pairs.push(ThinkActionPair {
            think: think.to_string(),
            action,
        });
        rest = &after_action_open[action_end + ACTION_CLOSE.len()..];
    }
    Ok(pairs)
}

impl MemoryUnit {
    /// Content hash over every field except `id`; used as the unit id so
    /// identical units dedup deterministically.
    pub fn content_id(&self) -> String {
        let mut value = serde_json::to_value(self).expect("unit serialization cannot fail");
        value
            .as_object_mut()
            .expect("unit serializes to an object")
            .remove("id");
        let canonical = serde_json::to_string(&value).expect("canonical form cannot fail");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..16])
    }

    /// Sets `id` to the content hash of the current field values.
    pub fn finalize_id(&mut self) {
        self.id = self.content_id();
    }

    /// Copy with every think field cleared.
    pub fn without_reasoning(&self) -> MemoryUnit {
        let mut unit = self.clone();
        for subtask in &mut unit.subtasks {
            for step in &mut subtask.steps {
                step.think.clear();
            }
        }
        unit
    }

    /// Single-line canonical JSON, the JSON Lines record form.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("unit serialization cannot fail")
    }
}

/// Wraps a unit's JSON in the delimiter tags, the inverse of
/// [`parse_memory_unit`].
pub fn serialize_memory_unit(unit: &MemoryUnit, tags: &MemoryTags) -> String {
    format!("{}\n{}\n{}", tags.start, unit.to_json_line(), tags.end)
}

/// Parses curator output: locates the single tag-delimited region and
/// decodes the memory object inside it.
pub fn parse_memory_unit(text: &str, tags: &MemoryTags) -> Result<MemoryUnit, MemoryError> {
    let start = text.find(&tags.start).ok_or(MemoryError::MissingTags)?;
    let body_start = start + tags.start.len();
    let end_rel = text[body_start..]
        .find(&tags.end)
        .ok_or(MemoryError::MissingTags)?;
    let region = &text[body_start..body_start + end_rel];
    let after_region = &text[body_start + end_rel + tags.end.len()..];
    if after_region.contains(&tags.start) {
        return Err(MemoryError::MalformedSchema(
            "more than one delimited memory region".into(),
        ));
    }

    let value: Value = serde_json::from_str(region.trim())
        .map_err(|e| MemoryError::MalformedSchema(format!("region is not valid JSON: {e}")))?;
    let mut obj = match value {
        Value::Object(map) => map,
        _ => {
            return Err(MemoryError::MalformedSchema(
                "memory region is not a JSON object".into(),
            ))
        }
    };

    let take_string = |obj: &mut Map<String, Value>, key: &str| -> Result<String, MemoryError> {
        match obj.remove(key) {
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(MemoryError::MalformedSchema(format!(
                "key \"{key}\" is not a string"
            ))),
            None => Err(MemoryError::MalformedSchema(format!(
                "required key \"{key}\" is missing"
            ))),
        }
    };
    let take_optional = |obj: &mut Map<String, Value>, key: &str| -> Result<String, MemoryError> {
        match obj.remove(key) {
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(MemoryError::MalformedSchema(format!(
                "key \"{key}\" is not a string"
            ))),
            None => Ok(String::new()),
        }
    };

    let high_level_plan = take_string(&mut obj, "high_level_plan")?;
    let final_answer = take_string(&mut obj, "final_answer")?;
    let reflections = take_string(&mut obj, "reflections")?;
    let id = take_optional(&mut obj, "id")?;
    let task_description = take_optional(&mut obj, "task_description")?;
    let source_log_id = take_optional(&mut obj, "source_log_id")?;

    let subtask_values = match obj.remove("subtasks") {
        Some(Value::Array(items)) => items,
        Some(_) => {
            return Err(MemoryError::MalformedSchema(
                "key \"subtasks\" is not an array".into(),
            ))
        }
        None => {
            return Err(MemoryError::MalformedSchema(
                "required key \"subtasks\" is missing".into(),
            ))
        }
    };
    if subtask_values.is_empty() {
        return Err(MemoryError::MalformedSchema("subtasks is empty".into()));
    }

    let mut subtasks = Vec::with_capacity(subtask_values.len());
    for (idx, item) in subtask_values.into_iter().enumerate() {
        let mut sub = match item {
            Value::Object(map) => map,
            _ => {
                return Err(MemoryError::MalformedSchema(format!(
                    "subtask {idx} is not an object"
                )))
            }
        };
        let agent_name = take_string(&mut sub, "agent")
            .map_err(|_| MemoryError::MalformedSchema(format!("subtask {idx} lacks \"agent\"")))?;
        let description = take_string(&mut sub, "description").map_err(|_| {
            MemoryError::MalformedSchema(format!("subtask {idx} lacks \"description\""))
        })?;
        let observations = take_string(&mut sub, "observations").map_err(|_| {
            MemoryError::MalformedSchema(format!("subtask {idx} lacks \"observations\""))
        })?;
        let steps_raw = take_string(&mut sub, "steps").map_err(|_| {
            MemoryError::MalformedSchema(format!("subtask {idx} lacks a \"steps\" string"))
        })?;
        let steps = parse_steps_indexed(&steps_raw, idx)?;
        if steps.is_empty() && observations.trim().is_empty() {
            return Err(MemoryError::MalformedSchema(format!(
                "subtask {idx} has no steps and no observations"
            )));
        }
        subtasks.push(SubtaskRecord {
            agent_name,
            description,
            steps,
            observations,
            extra: sub,
        });
    }

    let mut unit = MemoryUnit {
        id,
        task_description,
        high_level_plan,
        subtasks,
        final_answer,
        reflections,
        source_log_id,
        extra: obj,
    };
    if unit.id.is_empty() {
        unit.finalize_id();
    }
    Ok(unit)
}

fn parse_steps_indexed(raw: &str, subtask: usize) -> Result<Vec<ThinkActionPair>, MemoryError> {
    // Re-scan to attribute failures: tag errors are schema problems, bad
    // action bodies get the typed MalformedAction with step index.
    match parse_steps(raw) {
        Ok(pairs) => Ok(pairs),
        Err(msg) => {
            if let Some(step) = msg.strip_prefix("step ") {
                if let Some((num, reason)) = step.split_once(": ") {
                    if let Ok(step) = num.parse::<usize>() {
                        return Err(MemoryError::MalformedAction {
                            subtask,
                            step,
                            reason: reason.to_string(),
                        });
                    }
                }
            }
            Err(MemoryError::MalformedSchema(format!(
                "subtask {subtask} steps: {msg}"
            )))
        }
    }
}

/// Projects a unit into one [`SubtaskMemory`] per subtask, order preserved.
pub fn extract_subtask_memories(unit: &MemoryUnit) -> Vec<SubtaskMemory> {
    unit.subtasks
        .iter()
        .enumerate()
        .map(|(i, record)| SubtaskMemory {
            id: format!("{}-s{i}", unit.id),
            parent_unit_id: unit.id.clone(),
            agent_name: record.agent_name.clone(),
            description: record.description.clone(),
            steps: record.steps.clone(),
            observations: record.observations.clone(),
        })
        .collect()
}

fn push_steps(out: &mut String, steps: &[ThinkActionPair], include_reasoning: bool) {
    for pair in steps {
        if include_reasoning && !pair.think.is_empty() {
            out.push_str("  Think: ");
            out.push_str(&pair.think);
            out.push('\n');
        }
        out.push_str("  Action: ");
        out.push_str(&pair.action.to_json());
        out.push('\n');
    }
}

/// Renders full-task memories into a deterministic prompt block.
///
/// With `include_reasoning` off, think segments are omitted entirely;
/// everything else is preserved verbatim.
pub fn render_memory_units(
    units: &[MemoryUnit],
    include_reasoning: bool,
) -> Result<String, MemoryError> {
    if units.is_empty() {
        return Err(MemoryError::EmptyInput);
    }
    let mut out = String::new();
    for (i, unit) in units.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("Memory {}\n", i + 1));
        out.push_str(&format!("Task: {}\n", unit.task_description));
        out.push_str(&format!("Plan: {}\n", unit.high_level_plan));
        for (j, sub) in unit.subtasks.iter().enumerate() {
            out.push_str(&format!(
                "Subtask {} [{}]: {}\n",
                j + 1,
                sub.agent_name,
                sub.description
            ));
            push_steps(&mut out, &sub.steps, include_reasoning);
            out.push_str(&format!("  Observations: {}\n", sub.observations));
        }
        out.push_str(&format!("Final answer: {}\n", unit.final_answer));
        out.push_str(&format!("Reflections: {}\n", unit.reflections));
    }
    Ok(out)
}

/// Renders subtask memories into a deterministic prompt block.
pub fn render_subtask_memories(
    memories: &[SubtaskMemory],
    include_reasoning: bool,
) -> Result<String, MemoryError> {
    if memories.is_empty() {
        return Err(MemoryError::EmptyInput);
    }
    let mut out = String::new();
    for (i, mem) in memories.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!(
            "Example {} [{}]: {}\n",
            i + 1,
            mem.agent_name,
            mem.description
        ));
        push_steps(&mut out, &mem.steps, include_reasoning);
        out.push_str(&format!("  Observations: {}\n", mem.observations));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::CURATION_EXAMPLE_JSON;

    fn bob_unit() -> MemoryUnit {
        let text = format!("<memory_start>\n{CURATION_EXAMPLE_JSON}\n<memory_end>");
        parse_memory_unit(&text, &MemoryTags::default()).unwrap()
    }

    #[test]
    fn parses_calendar_example() {
        let unit = bob_unit();
        assert_eq!(unit.subtasks.len(), 2);
        assert!(unit
            .subtasks
            .iter()
            .all(|s| s.agent_name == "calendar_agent"));
        assert_eq!(unit.subtasks[0].steps.len(), 1);
        assert_eq!(unit.subtasks[0].steps[0].action.action, "list_events");
        assert_eq!(unit.subtasks[1].steps[0].action.action, "create_event");
        assert_eq!(
            unit.subtasks[1].steps[0].action.param_str("time_start"),
            Some("2024-05-17 10:30:00")
        );
        assert!(!unit.id.is_empty());
    }

    #[test]
    fn missing_start_tag_is_missing_tags() {
        let err = parse_memory_unit("{}", &MemoryTags::default()).unwrap_err();
        assert!(matches!(err, MemoryError::MissingTags));
        let err =
            parse_memory_unit("<memory_start>{}", &MemoryTags::default()).unwrap_err();
        assert!(matches!(err, MemoryError::MissingTags));
    }

    #[test]
    fn duplicate_regions_rejected() {
        let body = format!(
            "<memory_start>\n{CURATION_EXAMPLE_JSON}\n<memory_end>\n<memory_start>x<memory_end>"
        );
        let err = parse_memory_unit(&body, &MemoryTags::default()).unwrap_err();
        assert!(matches!(err, MemoryError::MalformedSchema(_)));
    }

    #[test]
    fn missing_required_key_is_malformed_schema() {
        let text = r#"<memory_start>{"subtasks": [], "final_answer": "", "reflections": ""}<memory_end>"#;
        let err = parse_memory_unit(text, &MemoryTags::default()).unwrap_err();
        assert!(matches!(err, MemoryError::MalformedSchema(_)));
    }

    #[test]
    fn malformed_action_reports_indices() {
        let text = r#"<memory_start>{
            "high_level_plan": "p",
            "subtasks": [{
                "agent": "calendar_agent",
                "description": "d",
                "steps": "<think>t</think><action>{\"app\": \"calendar\"}</action>",
                "observations": "o"
            }],
            "final_answer": "a",
            "reflections": "r"
        }<memory_end>"#;
        match parse_memory_unit(text, &MemoryTags::default()).unwrap_err() {
            MemoryError::MalformedAction { subtask, step, .. } => {
                assert_eq!((subtask, step), (0, 0));
            }
            other => panic!("expected MalformedAction, got {other:?}"),
        }
    }

    #[test]
    fn interleaved_tags_rejected() {
        assert!(parse_steps("<action>{}</action><think>t</think>").is_err());
        assert!(parse_steps("<think>t</think>stray<action>{\"app\":\"a\",\"action\":\"b\"}</action>").is_err());
        assert!(parse_steps("<think>t</think>").is_err());
    }

    #[test]
    fn serialize_parse_round_trip() {
        let unit = bob_unit();
        let tags = MemoryTags::default();
        let back = parse_memory_unit(&serialize_memory_unit(&unit, &tags), &tags).unwrap();
        assert_eq!(unit, back);
    }

    #[test]
    fn unknown_keys_survive_round_trip() {
        let text = r#"<memory_start>{
            "high_level_plan": "p",
            "confidence": 0.9,
            "subtasks": [{
                "agent": "calendar_agent",
                "description": "d",
                "steps": "",
                "observations": "all good",
                "note": "extra"
            }],
            "final_answer": "a",
            "reflections": "r"
        }<memory_end>"#;
        let tags = MemoryTags::default();
        let unit = parse_memory_unit(text, &tags).unwrap();
        assert_eq!(unit.extra.get("confidence"), Some(&Value::from(0.9)));
        assert_eq!(
            unit.subtasks[0].extra.get("note"),
            Some(&Value::from("extra"))
        );
        let back = parse_memory_unit(&serialize_memory_unit(&unit, &tags), &tags).unwrap();
        assert_eq!(unit, back);
    }

    #[test]
    fn empty_steps_require_observations() {
        let text = r#"<memory_start>{
            "high_level_plan": "p",
            "subtasks": [{"agent": "a", "description": "d", "steps": "", "observations": ""}],
            "final_answer": "a",
            "reflections": "r"
        }<memory_end>"#;
        assert!(parse_memory_unit(text, &MemoryTags::default()).is_err());
    }

    #[test]
    fn extraction_preserves_order_and_parent() {
        let unit = bob_unit();
        let memories = extract_subtask_memories(&unit);
        assert_eq!(memories.len(), 2);
        for (i, mem) in memories.iter().enumerate() {
            assert_eq!(mem.parent_unit_id, unit.id);
            assert_eq!(mem.description, unit.subtasks[i].description);
            assert_eq!(mem.id, format!("{}-s{i}", unit.id));
        }
    }

    #[test]
    fn render_without_reasoning_strips_think_content() {
        let unit = bob_unit();
        let with = render_memory_units(std::slice::from_ref(&unit), true).unwrap();
        let without = render_memory_units(std::slice::from_ref(&unit), false).unwrap();
        assert!(with.contains("I need to check Bob's existing calendar events"));
        assert!(!without.contains("I need to check"));
        assert!(!without.contains("Think:"));
        assert!(without.contains("\"action\":\"create_event\""));
        // Determinism.
        assert_eq!(
            without,
            render_memory_units(std::slice::from_ref(&unit), false).unwrap()
        );
    }

    #[test]
    fn render_tokens_without_reasoning_are_contained() {
        let unit = bob_unit();
        let with = render_memory_units(std::slice::from_ref(&unit), true).unwrap();
        let without = render_memory_units(std::slice::from_ref(&unit), false).unwrap();
        let mut pool: Vec<&str> = with.split_whitespace().collect();
        for token in without.split_whitespace() {
            let pos = pool
                .iter()
                .position(|t| *t == token)
                .unwrap_or_else(|| panic!("token {token:?} missing from reasoning render"));
            pool.swap_remove(pos);
        }
    }

    #[test]
    fn reasoning_strip_is_idempotent() {
        let unit = bob_unit();
        let once = unit.without_reasoning();
        assert_eq!(once, once.without_reasoning());
        assert_eq!(
            render_memory_units(std::slice::from_ref(&once), true).unwrap(),
            render_memory_units(std::slice::from_ref(&unit), false).unwrap()
        );
    }

    #[test]
    fn render_empty_input_errors() {
        assert!(matches!(
            render_memory_units(&[], true),
            Err(MemoryError::EmptyInput)
        ));
        assert!(matches!(
            render_subtask_memories(&[], false),
            Err(MemoryError::EmptyInput)
        ));
    }

    #[test]
    fn content_id_ignores_id_field() {
        let mut unit = bob_unit();
        let original = unit.content_id();
        unit.id = "something-else".into();
        assert_eq!(unit.content_id(), original);
        unit.final_answer.push('!');
        assert_ne!(unit.content_id(), original);
    }
}
