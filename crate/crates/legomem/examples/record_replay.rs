//! Cassette record/replay around a model client: record a run's
//! completions to JSON Lines, then serve the same run offline from the
//! cassette alone.
//!
//! ```bash
//! cargo run -p legomem --example record_replay
//! ```

use std::sync::Arc;

use legomem::gateway::{
    CassetteClient, ChatMessage, ModelClient, ScriptEntry, ScriptedClient,
};

fn main() {
    let path = std::env::temp_dir().join("legomem-example-cassette.jsonl");
    let _ = std::fs::remove_file(&path);

    // Stand-in for a remote model; any ModelClient can be wrapped.
    let inner: Arc<dyn ModelClient> = Arc::new(ScriptedClient::new(
        "inner",
        vec![
            ScriptEntry::new(vec!["plan"], "1. Check calendar\n2. Send email"),
            ScriptEntry::new(vec!["summarize"], "Both steps completed."),
        ],
    ));

    let recorder = CassetteClient::record(inner, &path);
    let prompts = [
        "Please plan the task.",
        "Please summarize the execution.",
        "Please plan the task.",
    ];
    println!("recording:");
    for prompt in &prompts {
        let reply = recorder.complete(&[ChatMessage::user(*prompt)]).unwrap();
        println!("  {prompt:?} -> {:?}", reply.lines().next().unwrap_or(""));
    }

    println!("\ncassette {} holds:", path.display());
    for line in std::fs::read_to_string(&path).unwrap().lines() {
        println!("  {line}");
    }

    let replayer = CassetteClient::replay(&path).unwrap();
    println!("\nreplaying (no inner client involved):");
    for prompt in &prompts {
        let reply = replayer.complete(&[ChatMessage::user(*prompt)]).unwrap();
        println!("  {prompt:?} -> {:?}", reply.lines().next().unwrap_or(""));
    }

    // A prompt that was never recorded misses loudly.
    let miss = replayer.complete(&[ChatMessage::user("something new")]);
    println!("\nunrecorded prompt -> {:?}", miss.unwrap_err().to_string());
}
