//! The bundled mini task suite: 12 fixtures, 4 per level, exercising every
//! action in the environment dispatch table at least once.
//!
//! Level counts the apps touched by the reference solution: level 1 is a
//! single app, level 2 two apps, level 3 three or more. Every fixture
//! pairs a passing reference script with a failing null script (doing
//! nothing and answering nothing must not satisfy any checker).

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::action::Action;
use crate::office::{
    Checker, FuzzyTarget, ReferenceAction, ReferenceSolution, ReferenceStep, StateExpectation,
    TaskFixture, Workspace,
};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("suite io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture {path} is invalid: {reason}")]
    BadFixture { path: String, reason: String },
    #[error("suite directory {0} contains no fixture files")]
    Empty(String),
}

fn step(
    agent: &str,
    subtask: &str,
    actions: Vec<(&str, Action)>,
    summary: &str,
) -> ReferenceStep {
    ReferenceStep {
        agent_name: agent.into(),
        subtask: subtask.into(),
        actions: actions
            .into_iter()
            .map(|(think, action)| ReferenceAction {
                think: think.into(),
                action,
            })
            .collect(),
        summary: summary.into(),
    }
}

fn act(app: &str, action: &str, params: &[(&str, &str)]) -> Action {
    let mut a = Action::new(app, action);
    for (k, v) in params {
        a = a.with_param(*k, *v);
    }
    a
}

fn act_rc(app: &str, action: &str, name: &str, row: u64, col: u64, value: Option<&str>) -> Action {
    let mut a = Action::new(app, action)
        .with_param("name", name)
        .with_param("row", row)
        .with_param("col", col);
    if let Some(v) = value {
        a = a.with_param("value", v);
    }
    a
}

fn fixture(
    task_id: &str,
    level: u8,
    description: &str,
    workspace: Workspace,
    checker: Checker,
    steps: Vec<ReferenceStep>,
    final_answer: &str,
) -> TaskFixture {
    TaskFixture {
        task_id: task_id.into(),
        level,
        description: description.into(),
        initial_workspace: workspace,
        checker,
        reference: ReferenceSolution {
            steps,
            final_answer: final_answer.into(),
        },
    }
}

fn level1_calendar_reschedule() -> TaskFixture {
    let mut ws = Workspace::with_users(["Bob"], "2024-05-17 08:00:00");
    ws.calendars.get_mut("Bob").unwrap().push(crate::office::CalendarEvent {
        summary: "Old sync".into(),
        time_start: "2024-05-17 09:00:00".into(),
        time_end: "2024-05-17 09:30:00".into(),
    });
    fixture(
        "l1-calendar-reschedule",
        1,
        "Replace Bob's \"Old sync\" on 5/17/2024 with a \"Meeting\" from 10:30 a.m. to 11:00 a.m.",
        ws,
        Checker::ExactState {
            expectations: vec![
                StateExpectation::EventExists {
                    user: "Bob".into(),
                    summary: "Meeting".into(),
                    time_start: "2024-05-17 10:30:00".into(),
                    time_end: "2024-05-17 11:00:00".into(),
                },
                StateExpectation::EventAbsent {
                    user: "Bob".into(),
                    summary: "Old sync".into(),
                },
            ],
        },
        vec![
            step(
                "calendar_agent",
                "Check Bob's schedule on 5/17/2024 for existing meetings",
                vec![(
                    "I need to see Bob's current events before changing anything",
                    act("calendar", "list_events", &[("user", "Bob")]),
                )],
                "Bob has one event, \"Old sync\" from 09:00 to 09:30",
            ),
            step(
                "calendar_agent",
                "Remove the old sync and add the new meeting from 10:30 to 11:00",
                vec![
                    (
                        "The old sync must go before the replacement is added",
                        act("calendar", "delete_event", &[("user", "Bob"), ("summary", "Old sync")]),
                    ),
                    (
                        "Now I can create the replacement meeting in the requested slot",
                        act(
                            "calendar",
                            "create_event",
                            &[
                                ("user", "Bob"),
                                ("summary", "Meeting"),
                                ("time_start", "2024-05-17 10:30:00"),
                                ("time_end", "2024-05-17 11:00:00"),
                            ],
                        ),
                    ),
                ],
                "Deleted \"Old sync\" and created \"Meeting\" from 10:30 to 11:00",
            ),
        ],
        "Bob's \"Old sync\" was replaced with \"Meeting\" on 5/17/2024 from 10:30 a.m. to 11:00 a.m.",
    )
}

fn level1_email_announce() -> TaskFixture {
    fixture(
        "l1-email-announce",
        1,
        "Send an email from Alice to Bob with subject \"Quarterly report\" telling him the report is ready for review.",
        Workspace::with_users(["Alice", "Bob"], "2024-05-20 09:00:00"),
        Checker::ExactState {
            expectations: vec![StateExpectation::EmailExists {
                user: "Bob".into(),
                from: "Alice".into(),
                subject: "Quarterly report".into(),
            }],
        },
        vec![step(
            "email_agent",
            "Send Bob the quarterly report announcement from Alice",
            vec![(
                "A single email with the requested subject covers the task",
                act(
                    "email",
                    "send_email",
                    &[
                        ("from", "Alice"),
                        ("to", "Bob"),
                        ("subject", "Quarterly report"),
                        ("body", "Hi Bob, the quarterly report is ready for review."),
                    ],
                ),
            )],
            "Sent the announcement email from Alice to Bob",
        )],
        "Alice's email with subject \"Quarterly report\" was sent to Bob.",
    )
}

fn level1_doc_kickoff_notes() -> TaskFixture {
    fixture(
        "l1-doc-kickoff-notes",
        1,
        "Create a document named \"notes\" recording that the project kickoff is on Tuesday at 10:00 with attendees Alice and Bob.",
        Workspace::with_users(["Alice", "Bob"], "2024-05-21 09:00:00"),
        Checker::KeywordFuzzy {
            target: FuzzyTarget::Document { name: "notes".into() },
            keywords: vec![
                "kickoff".into(),
                "tuesday".into(),
                "10:00".into(),
                "alice".into(),
                "bob".into(),
            ],
        },
        vec![step(
            "document_agent",
            "Write the kickoff details into a new document named \"notes\"",
            vec![
                (
                    "Start the notes document with the kickoff time",
                    act(
                        "document",
                        "create_doc",
                        &[("name", "notes"), ("content", "Project kickoff on Tuesday at 10:00.")],
                    ),
                ),
                (
                    "Add the attendee list on the next line",
                    act(
                        "document",
                        "append_text",
                        &[("name", "notes"), ("text", " Attendees: Alice, Bob.")],
                    ),
                ),
            ],
            "Created \"notes\" with the kickoff time and attendees",
        )],
        "The \"notes\" document records the Tuesday 10:00 kickoff with Alice and Bob attending.",
    )
}

fn level1_sheet_budget() -> TaskFixture {
    fixture(
        "l1-sheet-budget",
        1,
        "In a spreadsheet named \"budget\", set R1C1 to Item, R1C2 to Cost, R2C1 to Desk, and R2C2 to 120.",
        Workspace::with_users(["Alice"], "2024-05-22 09:00:00"),
        Checker::ExactState {
            expectations: vec![
                StateExpectation::CellEquals {
                    sheet: "budget".into(),
                    row: 1,
                    col: 1,
                    value: "Item".into(),
                },
                StateExpectation::CellEquals {
                    sheet: "budget".into(),
                    row: 2,
                    col: 2,
                    value: "120".into(),
                },
            ],
        },
        vec![step(
            "sheet_agent",
            "Fill the budget sheet header row and the desk row",
            vec![
                (
                    "Write the header cells first",
                    act_rc("sheet", "set_cell", "budget", 1, 1, Some("Item")),
                ),
                (
                    "Finish the header with the cost column",
                    act_rc("sheet", "set_cell", "budget", 1, 2, Some("Cost")),
                ),
                (
                    "Record the desk item",
                    act_rc("sheet", "set_cell", "budget", 2, 1, Some("Desk")),
                ),
                (
                    "Record the desk cost",
                    act_rc("sheet", "set_cell", "budget", 2, 2, Some("120")),
                ),
            ],
            "Filled budget rows 1 and 2 with the item and cost values",
        )],
        "The budget sheet now lists Desk at 120.",
    )
}

fn level2_calendar_to_email() -> TaskFixture {
    let mut ws = Workspace::with_users(["Alice", "Bob"], "2024-06-01 09:00:00");
    ws.calendars.get_mut("Bob").unwrap().push(crate::office::CalendarEvent {
        summary: "Budget review".into(),
        time_start: "2024-06-03 14:00:00".into(),
        time_end: "2024-06-03 15:00:00".into(),
    });
    fixture(
        "l2-calendar-to-email",
        2,
        "Check Bob's calendar and email Alice, from Bob, the name and start time of his next meeting.",
        ws,
        Checker::KeywordFuzzy {
            target: FuzzyTarget::LatestEmail { user: "Alice".into() },
            keywords: vec!["budget review".into(), "14:00".into()],
        },
        vec![
            step(
                "calendar_agent",
                "Look up Bob's next scheduled meeting",
                vec![(
                    "Listing Bob's events reveals the next meeting",
                    act("calendar", "list_events", &[("user", "Bob")]),
                )],
                "Bob's next meeting is \"Budget review\" starting 2024-06-03 14:00:00",
            ),
            step(
                "email_agent",
                "Email Alice the meeting name and start time from Bob",
                vec![(
                    "Alice needs the meeting name and start time in one message",
                    act(
                        "email",
                        "send_email",
                        &[
                            ("from", "Bob"),
                            ("to", "Alice"),
                            ("subject", "Bob's next meeting"),
                            ("body", "Budget review on 2024-06-03 starting at 14:00."),
                        ],
                    ),
                )],
                "Sent Alice the Budget review details",
            ),
        ],
        "Alice was emailed that Bob's next meeting is \"Budget review\" starting at 14:00 on 2024-06-03.",
    )
}

fn level2_email_to_doc() -> TaskFixture {
    let mut ws = Workspace::with_users(["Alice"], "2024-06-10 09:00:00");
    ws.mailboxes.get_mut("Alice").unwrap().push(crate::office::EmailMessage {
        from: "Carol".into(),
        to: "Alice".into(),
        subject: "Site visit".into(),
        body: "The site visit is confirmed for July 2 at 9 a.m.".into(),
    });
    fixture(
        "l2-email-to-doc",
        2,
        "Read Alice's email about the site visit and save the confirmed date into a document named \"visit\".",
        ws,
        Checker::KeywordFuzzy {
            target: FuzzyTarget::Document { name: "visit".into() },
            keywords: vec!["july 2".into(), "9 a.m".into()],
        },
        vec![
            step(
                "email_agent",
                "Find and read the site visit email in Alice's inbox",
                vec![
                    (
                        "List the inbox to locate the site visit message",
                        act("email", "list_emails", &[("user", "Alice")]),
                    ),
                    (
                        "Read the first email for the confirmed date",
                        act("email", "read_email", &[("user", "Alice"), ("index", "1")]),
                    ),
                ],
                "The site visit is confirmed for July 2 at 9 a.m.",
            ),
            step(
                "document_agent",
                "Save the confirmed visit date into a document named \"visit\"",
                vec![(
                    "Store the confirmed date so it is easy to find later",
                    act(
                        "document",
                        "create_doc",
                        &[("name", "visit"), ("content", "Site visit confirmed for July 2 at 9 a.m.")],
                    ),
                )],
                "Created \"visit\" with the confirmed date",
            ),
        ],
        "The site visit date, July 2 at 9 a.m., is saved in the \"visit\" document.",
    )
}

fn level2_sheet_to_doc() -> TaskFixture {
    let mut ws = Workspace::with_users(["Alice"], "2024-06-12 09:00:00");
    let mut sheet = crate::office::Sheet::new();
    sheet.entry(1).or_default().insert(1, "Laptops".into());
    sheet.entry(1).or_default().insert(2, "14".into());
    ws.sheets.insert("inventory".into(), sheet);
    fixture(
        "l2-sheet-to-doc",
        2,
        "Look up how many laptops the inventory sheet lists and write \"Laptops: <count>\" into a document named \"stock\".",
        ws,
        Checker::KeywordFuzzy {
            target: FuzzyTarget::Document { name: "stock".into() },
            keywords: vec!["laptops: 14".into()],
        },
        vec![
            step(
                "sheet_agent",
                "Read the laptop count from the inventory sheet",
                vec![
                    (
                        "Check the label cell to confirm the row",
                        act_rc("sheet", "get_cell", "inventory", 1, 1, None),
                    ),
                    (
                        "The count sits next to the label",
                        act_rc("sheet", "get_cell", "inventory", 1, 2, None),
                    ),
                ],
                "The inventory sheet lists 14 laptops",
            ),
            step(
                "document_agent",
                "Write the laptop count into a document named \"stock\"",
                vec![(
                    "Record the count in the requested format",
                    act(
                        "document",
                        "create_doc",
                        &[("name", "stock"), ("content", "Laptops: 14")],
                    ),
                )],
                "Created \"stock\" recording 14 laptops",
            ),
        ],
        "The stock document records Laptops: 14.",
    )
}

fn level2_doc_to_calendar() -> TaskFixture {
    let mut ws = Workspace::with_users(["Carol"], "2024-08-01 09:00:00");
    ws.documents.insert(
        "agenda".into(),
        "Team retro on 2024-08-09 from 15:00 to 16:00 in room 4.".into(),
    );
    fixture(
        "l2-doc-to-calendar",
        2,
        "Read the agenda document and add the team retro it describes to Carol's calendar.",
        ws,
        Checker::ExactState {
            expectations: vec![StateExpectation::EventExists {
                user: "Carol".into(),
                summary: "Team retro".into(),
                time_start: "2024-08-09 15:00:00".into(),
                time_end: "2024-08-09 16:00:00".into(),
            }],
        },
        vec![
            step(
                "document_agent",
                "Read the agenda document for the retro details",
                vec![(
                    "The agenda holds the retro date and time",
                    act("document", "read_doc", &[("name", "agenda")]),
                )],
                "The retro is on 2024-08-09 from 15:00 to 16:00",
            ),
            step(
                "calendar_agent",
                "Add the team retro to Carol's calendar for 2024-08-09 15:00-16:00",
                vec![(
                    "Create the event exactly as the agenda describes",
                    act(
                        "calendar",
                        "create_event",
                        &[
                            ("user", "Carol"),
                            ("summary", "Team retro"),
                            ("time_start", "2024-08-09 15:00:00"),
                            ("time_end", "2024-08-09 16:00:00"),
                        ],
                    ),
                )],
                "Added \"Team retro\" to Carol's calendar",
            ),
        ],
        "The team retro on 2024-08-09 from 15:00 to 16:00 is on Carol's calendar.",
    )
}

fn level3_calendar_email_doc() -> TaskFixture {
    let mut ws = Workspace::with_users(["Alice", "Bob"], "2024-07-08 09:00:00");
    ws.calendars.get_mut("Bob").unwrap().push(crate::office::CalendarEvent {
        summary: "Design demo".into(),
        time_start: "2024-07-10 11:00:00".into(),
        time_end: "2024-07-10 12:00:00".into(),
    });
    fixture(
        "l3-invite-and-log",
        3,
        "Find Bob's next meeting, email Alice from Bob inviting her to it, and log the invitation in a document named \"log\".",
        ws,
        Checker::ExactState {
            expectations: vec![
                StateExpectation::EmailExists {
                    user: "Alice".into(),
                    from: "Bob".into(),
                    subject: "Invitation: Design demo".into(),
                },
                StateExpectation::DocEquals {
                    name: "log".into(),
                    content: "Invited Alice to Design demo on 2024-07-10 at 11:00.".into(),
                },
            ],
        },
        vec![
            step(
                "calendar_agent",
                "Find Bob's next meeting on his calendar",
                vec![(
                    "List Bob's events to find the next one",
                    act("calendar", "list_events", &[("user", "Bob")]),
                )],
                "Bob's next meeting is \"Design demo\" on 2024-07-10 at 11:00",
            ),
            step(
                "email_agent",
                "Invite Alice to the design demo by email from Bob",
                vec![(
                    "Send the invitation naming the meeting",
                    act(
                        "email",
                        "send_email",
                        &[
                            ("from", "Bob"),
                            ("to", "Alice"),
                            ("subject", "Invitation: Design demo"),
                            ("body", "Join the design demo on 2024-07-10 at 11:00."),
                        ],
                    ),
                )],
                "Invited Alice to the design demo",
            ),
            step(
                "document_agent",
                "Log the invitation in a document named \"log\"",
                vec![(
                    "Keep a record of the invitation that was sent",
                    act(
                        "document",
                        "create_doc",
                        &[("name", "log"), ("content", "Invited Alice to Design demo on 2024-07-10 at 11:00.")],
                    ),
                )],
                "Logged the invitation in \"log\"",
            ),
        ],
        "Alice was invited to Bob's \"Design demo\" on 2024-07-10 at 11:00 and the invitation was logged.",
    )
}

fn level3_scoreboard() -> TaskFixture {
    let mut ws = Workspace::with_users(["Alice"], "2024-07-15 09:00:00");
    let mut sheet = crate::office::Sheet::new();
    sheet.entry(1).or_default().insert(1, "Team A".into());
    sheet.entry(1).or_default().insert(2, "91".into());
    sheet.entry(2).or_default().insert(1, "Team B".into());
    sheet.entry(2).or_default().insert(2, "87".into());
    ws.sheets.insert("scores".into(), sheet);
    fixture(
        "l3-scoreboard",
        3,
        "Copy the scores sheet into a document named \"scoreboard\" and append the closing line \"End of report.\"",
        ws,
        Checker::KeywordFuzzy {
            target: FuzzyTarget::Document { name: "scoreboard".into() },
            keywords: vec![
                "team a".into(),
                "91".into(),
                "team b".into(),
                "87".into(),
                "end of report".into(),
            ],
        },
        vec![
            step(
                "sheet_agent",
                "Review the scores sheet contents",
                vec![(
                    "Read the whole sheet to know what will be copied",
                    act("sheet", "read_sheet", &[("name", "scores")]),
                )],
                "The sheet lists Team A at 91 and Team B at 87",
            ),
            step(
                "system_agent",
                "Copy the scores sheet into a document named \"scoreboard\"",
                vec![(
                    "The system copy renders the sheet into the target document",
                    act(
                        "system",
                        "copy",
                        &[
                            ("source_app", "sheet"),
                            ("source_name", "scores"),
                            ("target_app", "document"),
                            ("target_name", "scoreboard"),
                        ],
                    ),
                )],
                "Copied the scores sheet into \"scoreboard\"",
            ),
            step(
                "document_agent",
                "Append the closing line to the scoreboard document",
                vec![(
                    "Finish the report with the requested closing line",
                    act(
                        "document",
                        "append_text",
                        &[("name", "scoreboard"), ("text", "\nEnd of report.")],
                    ),
                )],
                "Appended the closing line",
            ),
        ],
        "The scoreboard document contains both team scores and ends with \"End of report.\"",
    )
}

fn level3_sync_request() -> TaskFixture {
    let mut ws = Workspace::with_users(["Bob"], "2024-09-01 09:00:00");
    ws.mailboxes.get_mut("Bob").unwrap().push(crate::office::EmailMessage {
        from: "Dana".into(),
        to: "Bob".into(),
        subject: "Sync request".into(),
        body: "Can we sync on 2024-09-05 from 13:00 to 13:30?".into(),
    });
    fixture(
        "l3-sync-request",
        3,
        "Read Bob's sync request email, put the requested sync on his calendar, and record \"booked\" in R1C1 of a sheet named \"tracker\".",
        ws,
        Checker::ExactState {
            expectations: vec![
                StateExpectation::EventExists {
                    user: "Bob".into(),
                    summary: "Sync".into(),
                    time_start: "2024-09-05 13:00:00".into(),
                    time_end: "2024-09-05 13:30:00".into(),
                },
                StateExpectation::CellEquals {
                    sheet: "tracker".into(),
                    row: 1,
                    col: 1,
                    value: "booked".into(),
                },
            ],
        },
        vec![
            step(
                "email_agent",
                "Read the sync request in Bob's inbox",
                vec![(
                    "The request holds the proposed date and time",
                    act("email", "read_email", &[("user", "Bob"), ("index", "1")]),
                )],
                "Dana asks to sync on 2024-09-05 from 13:00 to 13:30",
            ),
            step(
                "calendar_agent",
                "Book the sync on Bob's calendar for 2024-09-05 13:00-13:30",
                vec![(
                    "Create the event for the requested slot",
                    act(
                        "calendar",
                        "create_event",
                        &[
                            ("user", "Bob"),
                            ("summary", "Sync"),
                            ("time_start", "2024-09-05 13:00:00"),
                            ("time_end", "2024-09-05 13:30:00"),
                        ],
                    ),
                )],
                "Booked the sync for 2024-09-05 13:00",
            ),
            step(
                "sheet_agent",
                "Record \"booked\" in R1C1 of the tracker sheet",
                vec![(
                    "Mark the request handled in the tracker",
                    act_rc("sheet", "set_cell", "tracker", 1, 1, Some("booked")),
                )],
                "Marked the tracker cell as booked",
            ),
        ],
        "The sync on 2024-09-05 from 13:00 to 13:30 is booked and the tracker records it.",
    )
}

fn level3_decision_relay() -> TaskFixture {
    let mut ws = Workspace::with_users(["Alice", "Bob"], "2024-09-10 09:00:00");
    ws.documents.insert(
        "minutes".into(),
        "Decision: ship v2 on Friday. Owner: Bob.".into(),
    );
    ws.documents.insert("draft".into(), "old text".into());
    fixture(
        "l3-decision-relay",
        3,
        "List the files, read the minutes document, email Bob from Alice about the decision, and report the decision as your final answer.",
        ws,
        Checker::AnswerMatch {
            keywords: vec!["ship v2".into(), "friday".into()],
        },
        vec![
            step(
                "system_agent",
                "List the available files to locate the minutes",
                vec![(
                    "A file listing shows which documents exist",
                    act("system", "list_files", &[]),
                )],
                "Found documents \"draft\" and \"minutes\"",
            ),
            step(
                "document_agent",
                "Read the minutes document for the recorded decision",
                vec![(
                    "The decision text lives in the minutes",
                    act("document", "read_doc", &[("name", "minutes")]),
                )],
                "The decision is to ship v2 on Friday, owned by Bob",
            ),
            step(
                "email_agent",
                "Email Bob from Alice summarizing the decision",
                vec![(
                    "Bob owns the decision and should get the summary",
                    act(
                        "email",
                        "send_email",
                        &[
                            ("from", "Alice"),
                            ("to", "Bob"),
                            ("subject", "Decision"),
                            ("body", "Ship v2 on Friday."),
                        ],
                    ),
                )],
                "Emailed Bob the decision summary",
            ),
        ],
        "The decision is to ship v2 on Friday (owner: Bob).",
    )
}

/// All 12 bundled fixtures in suite order.
pub fn builtin_suite() -> Vec<TaskFixture> {
    vec![
        level1_calendar_reschedule(),
        level1_email_announce(),
        level1_doc_kickoff_notes(),
        level1_sheet_budget(),
        level2_calendar_to_email(),
        level2_email_to_doc(),
        level2_sheet_to_doc(),
        level2_doc_to_calendar(),
        level3_calendar_email_doc(),
        level3_scoreboard(),
        level3_sync_request(),
        level3_decision_relay(),
    ]
}

/// Writes one JSON fixture file per task into `dir`.
pub fn save_suite(fixtures: &[TaskFixture], dir: &Path) -> Result<(), SuiteError> {
    fs::create_dir_all(dir)?;
    for fixture in fixtures {
        let path = dir.join(format!("{}.json", fixture.task_id));
        fs::write(&path, serde_json::to_string_pretty(fixture).expect("fixture serializes"))?;
    }
    Ok(())
}

/// Loads every `*.json` fixture in `dir`, sorted by file name.
pub fn load_suite(dir: &Path) -> Result<Vec<TaskFixture>, SuiteError> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(SuiteError::Empty(dir.display().to_string()));
    }
    let mut fixtures = Vec::with_capacity(paths.len());
    for path in paths {
        let raw = fs::read_to_string(&path)?;
        let fixture: TaskFixture =
            serde_json::from_str(&raw).map_err(|e| SuiteError::BadFixture {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        fixtures.push(fixture);
    }
    Ok(fixtures)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::office::{check_success, execute_action, reset};

    #[test]
    fn twelve_fixtures_four_per_level() {
        let suite = builtin_suite();
        assert_eq!(suite.len(), 12);
        for level in 1..=3u8 {
            assert_eq!(
                suite.iter().filter(|f| f.level == level).count(),
                4,
                "level {level}"
            );
        }
        let ids: BTreeSet<_> = suite.iter().map(|f| f.task_id.clone()).collect();
        assert_eq!(ids.len(), 12);
    }

    #[test]
    fn level_counts_apps_touched() {
        for fixture in builtin_suite() {
            let apps = fixture.apps_touched().len();
            match fixture.level {
                1 => assert_eq!(apps, 1, "{}", fixture.task_id),
                2 => assert_eq!(apps, 2, "{}", fixture.task_id),
                3 => assert!(apps >= 3, "{}", fixture.task_id),
                other => panic!("unexpected level {other}"),
            }
        }
    }

    #[test]
    fn every_dispatch_action_is_exercised() {
        let mut seen = BTreeSet::new();
        for fixture in builtin_suite() {
            for step in &fixture.reference.steps {
                for action in &step.actions {
                    seen.insert(format!("{}.{}", action.action.app, action.action.action));
                }
            }
        }
        for required in [
            "calendar.create_event",
            "calendar.list_events",
            "calendar.delete_event",
            "email.send_email",
            "email.list_emails",
            "email.read_email",
            "document.create_doc",
            "document.append_text",
            "document.read_doc",
            "sheet.set_cell",
            "sheet.get_cell",
            "sheet.read_sheet",
            "system.list_files",
            "system.copy",
        ] {
            assert!(seen.contains(required), "missing {required}");
        }
    }

    #[test]
    fn reference_scripts_pass_and_null_scripts_fail() {
        for fixture in builtin_suite() {
            let mut ws = reset(&fixture);
            for step in &fixture.reference.steps {
                for action in &step.actions {
                    let obs = execute_action(&mut ws, &action.action);
                    assert!(
                        !obs.failed,
                        "{}: action failed: {}",
                        fixture.task_id, obs.text
                    );
                }
            }
            assert!(
                check_success(&ws, &fixture.reference.final_answer, &fixture.checker),
                "{}: reference script does not satisfy checker",
                fixture.task_id
            );

            let null_ws = reset(&fixture);
            assert!(
                !check_success(&null_ws, "", &fixture.checker),
                "{}: null script satisfies checker",
                fixture.task_id
            );
        }
    }

    #[test]
    fn suite_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let suite = builtin_suite();
        save_suite(&suite, dir.path()).unwrap();
        let loaded = load_suite(dir.path()).unwrap();
        assert_eq!(loaded.len(), suite.len());
        let by_id = |fixtures: &[TaskFixture]| -> BTreeSet<String> {
            fixtures.iter().map(|f| f.task_id.clone()).collect()
        };
        assert_eq!(by_id(&loaded), by_id(&suite));
        let reloaded = loaded
            .iter()
            .find(|f| f.task_id == "l1-calendar-reschedule")
            .unwrap();
        let original = suite
            .iter()
            .find(|f| f.task_id == "l1-calendar-reschedule")
            .unwrap();
        assert_eq!(reloaded, original);
    }

    #[test]
    fn load_from_empty_dir_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_suite(dir.path()),
            Err(SuiteError::Empty(_))
        ));
    }
}
