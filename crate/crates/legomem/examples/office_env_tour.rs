//! Drive the simulated office environment directly: every app in the
//! dispatch table, failure observations, and a success checker.
//!
//! ```bash
//! cargo run -p legomem --example office_env_tour
//! ```

use legomem::office::{check_success, execute_action, Checker, StateExpectation, Workspace};
use legomem::Action;

fn act(app: &str, action: &str, params: &[(&str, &str)]) -> Action {
    let mut a = Action::new(app, action);
    for (key, value) in params {
        a = a.with_param(*key, *value);
    }
    a
}

fn main() {
    let mut ws = Workspace::with_users(["Alice", "Bob"], "2024-05-17 08:00:00");

    let script = [
        act("calendar", "create_event", &[
            ("user", "Bob"),
            ("summary", "Meeting"),
            ("time_start", "2024-05-17 10:30:00"),
            ("time_end", "2024-05-17 11:00:00"),
        ]),
        act("calendar", "list_events", &[("user", "Bob")]),
        act("email", "send_email", &[
            ("from", "Alice"),
            ("to", "Bob"),
            ("subject", "Agenda"),
            ("body", "See the meeting at 10:30."),
        ]),
        act("email", "read_email", &[("user", "Bob"), ("index", "1")]),
        act("document", "create_doc", &[("name", "notes"), ("content", "Meeting notes.")]),
        act("document", "append_text", &[("name", "notes"), ("text", " Attendees: Alice, Bob.")]),
        act("sheet", "set_cell", &[("name", "tracker"), ("row", "1"), ("col", "1"), ("value", "booked")]),
        act("sheet", "read_sheet", &[("name", "tracker")]),
        act("system", "list_files", &[]),
        act("system", "copy", &[
            ("source_app", "sheet"),
            ("source_name", "tracker"),
            ("target_app", "document"),
            ("target_name", "notes"),
        ]),
        // Failures come back as observations, never panics.
        act("fax", "send", &[]),
        act("sheet", "get_cell", &[("name", "missing"), ("row", "1"), ("col", "1")]),
    ];
    for action in &script {
        let obs = execute_action(&mut ws, action);
        let marker = if obs.failed { "FAIL" } else { " ok " };
        println!("[{marker}] {} -> {}", action.to_json(), obs.text.replace('\n', " | "));
    }

    let checker = Checker::ExactState {
        expectations: vec![StateExpectation::EventExists {
            user: "Bob".into(),
            summary: "Meeting".into(),
            time_start: "2024-05-17 10:30:00".into(),
            time_end: "2024-05-17 11:00:00".into(),
        }],
    };
    println!("\nchecker satisfied: {}", check_success(&ws, "", &checker));
    println!("workspace hash:    {}", &ws.content_hash()[..16]);
}
