//! Structured tool-call actions, the one syntax shared by memories, live
//! agent output, and execution transcripts.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A single tool call: target app, action name, and flat parameters.
///
/// Serializes to a flat JSON object, e.g.
/// `{"app": "calendar", "action": "create_event", "user": "Bob", ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub app: String,
    pub action: String,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

impl Action {
    pub fn new(app: impl Into<String>, action: impl Into<String>) -> Self {
        Self {
            app: app.into(),
            action: action.into(),
            params: Map::new(),
        }
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    /// String parameter, or `None` when absent or not a string.
    pub fn param_str(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(Value::as_str)
    }

    /// Integer parameter; accepts a JSON number or a numeric string.
    pub fn param_index(&self, key: &str) -> Option<u64> {
        match self.params.get(key)? {
            Value::Number(n) => n.as_u64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
    }

    /// String parameter rendering: strings pass through, numbers and bools
    /// render to their JSON text.
    pub fn param_text(&self, key: &str) -> Option<String> {
        match self.params.get(key)? {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            Value::Bool(b) => Some(b.to_string()),
            _ => None,
        }
    }

    /// Compact canonical JSON (keys of `params` sorted by the map itself).
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("action serialization cannot fail")
    }
}

/// Parses a JSON fragment into an [`Action`], requiring an object with
/// non-empty string values under "app" and "action".
pub fn parse_action_object(src: &str) -> Result<Action, String> {
    let value: Value =
        serde_json::from_str(src.trim()).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = match value {
        Value::Object(map) => map,
        other => return Err(format!("expected a JSON object, got {other}")),
    };
    let app = match obj.get("app").and_then(Value::as_str) {
        Some(s) if !s.is_empty() => s.to_string(),
        _ => return Err("missing or empty \"app\" key".into()),
    };
    let action = match obj.get("action").and_then(Value::as_str) {
        Some(s) if !s.is_empty() => s.to_string(),
        _ => return Err("missing or empty \"action\" key".into()),
    };
    let mut params = obj;
    params.remove("app");
    params.remove("action");
    Ok(Action {
        app,
        action,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_object() {
        let a = parse_action_object(r#"{"app": "calendar", "action": "list_events", "username": "Bob"}"#)
            .unwrap();
        assert_eq!(a.app, "calendar");
        assert_eq!(a.action, "list_events");
        assert_eq!(a.param_str("username"), Some("Bob"));
    }

    #[test]
    fn rejects_missing_keys() {
        assert!(parse_action_object(r#"{"app": "calendar"}"#).is_err());
        assert!(parse_action_object(r#"{"action": "x"}"#).is_err());
        assert!(parse_action_object(r#"{"app": "", "action": "x"}"#).is_err());
        assert!(parse_action_object("[1, 2]").is_err());
        assert!(parse_action_object("not json").is_err());
    }

    #[test]
    fn json_round_trip_is_flat() {
        let a = Action::new("sheet", "set_cell")
            .with_param("name", "budget")
            .with_param("row", 1)
            .with_param("col", 2)
            .with_param("value", "120");
        let text = a.to_json();
        let back = parse_action_object(&text).unwrap();
        assert_eq!(a, back);
        assert!(text.starts_with(r#"{"app":"sheet","action":"set_cell""#));
    }

    #[test]
    fn param_index_accepts_numeric_strings() {
        let a = Action::new("sheet", "get_cell").with_param("row", "3");
        assert_eq!(a.param_index("row"), Some(3));
    }
}
