//! Prompt templates for the curator, the query rewriter, the orchestrator,
//! and the task agents.
//!
//! Memory blocks are injected under [`MEMORY_BLOCK_HEADER`] so tests and
//! callers can detect their presence in any rendered prompt.

/// Header line that precedes every injected memory block.
pub const MEMORY_BLOCK_HEADER: &str = "## Relevant memories from past tasks";

/// Marker line in the per-step orchestrator prompt (scripted clients key on it).
pub const STEP_PROMPT_MARKER: &str = "Decide the next step.";

/// Marker line in the planning prompt.
pub const PLAN_PROMPT_MARKER: &str = "Write a short numbered plan";

/// Marker line in the replanning prompt.
pub const REPLAN_PROMPT_MARKER: &str = "Write a revised numbered plan";

/// Marker line in the agent action prompt.
pub const AGENT_ACT_MARKER: &str = "Respond with one or more steps";

/// Marker line in the agent summary prompt.
pub const AGENT_SUMMARY_MARKER: &str = "Summarize the outcome";

/// Worked example embedded in the curation prompt; also the reference
/// object for parser tests.
pub const CURATION_EXAMPLE_JSON: &str = r#"{
    "high_level_plan": "1. Check Bob's calendar availability for the specified time slot. 2. Add the meeting to Bob's calendar for 5/17/2024 from 10:30 a.m. to 11:00 a.m.",
    "subtasks": [
        {
            "agent": "calendar_agent",
            "description": "Check Bob's schedule on 5/17/2024 from 10:30 a.m. to 11:00 a.m to ensure there are no conflicts",
            "steps": "<think>I need to check Bob's existing calendar events to ensure no scheduling conflicts</think><action>{\"app\": \"calendar\", \"action\": \"list_events\", \"username\": \"Bob\"}</action>",
            "observations": "No events found for Bob - calendar is available for the requested time slot"
        },
        {
            "agent": "calendar_agent",
            "description": "Add a meeting to Bob's calendar on 5/17/2024 from 10:30 a.m. to 11:00 a.m",
            "steps": "<think>Since no conflicts were found, I can now create the new calendar event for Bob</think><action>{\"app\": \"calendar\", \"action\": \"create_event\", \"user\": \"Bob\", \"summary\": \"Meeting\", \"time_start\": \"2024-05-17 10:30:00\", \"time_end\": \"2024-05-17 11:00:00\"}</action>",
            "observations": "Successfully created a new event in Bob's calendar for the specified date and time"
        }
    ],
    "final_answer": "The meeting has been successfully added to Bob's calendar on 5/17/2024 from 10:30 a.m. to 11:00 a.m.",
    "reflections": "Task completed successfully without any conflicts or errors. The calendar check confirmed availability, and the meeting was created with proper date/time formatting."
}"#;

/// Renders the memory-curation prompt for one serialized trajectory.
pub fn curation_prompt(full_trajectory: &str, start_tag: &str, end_tag: &str) -> String {
    format!(
        r#"From the following agent trajectory, generate memory that can be useful for future LLM agents' reference.

# Trajectory:
{full_trajectory}

# Example:
{start_tag}
{CURATION_EXAMPLE_JSON}
{end_tag}

# Instructions:
Please analyze the trajectory and extract structured memory with clear thinking and well-formed actions. Use the following format for each subtask step:
<think>reasoning about what needs to be done and why this action is appropriate</think>
<action>{{precise tool call command in structured format}}</action>

The memory object should be formatted as follows:
{{
    "high_level_plan": "<a string that lists the high-level steps taken and which agent performs each subtask>",
    "subtasks": [
        {{
            "agent": "<copy the exact name of agent that performed the subtask>",
            "description": "<description of the subtask given by the orchestrator>",
            "steps": "<Copy the precise actions taken with think-action structure: <think>reasoning</think><action>{{tool_call}}</action>, repeat for each action. Omit some actions if there are too many similar commands (>10). Remove actions that yielded errors or were malformed.>",
            "observations": "<a very brief summary of the key observations from the function execution results>"
        }},
        ...
    ],
    "final_answer": "<The final answer given by the orchestrator or answer agent>",
    "reflections": "<a concise summary that lists what was successful, what were specific failures, root cause of which action and how to avoid, if any>"
}}

# Rules to follow:
1. Group together actions into subtasks if they are related and can be done together.
2. For each action in the steps field, use the think-action format with clear reasoning followed by structured tool calls.
3. When copying actions, remove function call IDs but keep the essential tool call structure.
4. Only include successful actions; omit actions that resulted in errors. If there are too many repeated similar actions, truncate and omit some, and if the action parameters (such as contents to write to a word document) are too long, you can summarize it.
5. Keep observations very concise but informative.
6. Do not include orchestrator coordination steps in the subtasks.
7. For the subtask steps field, use a string format with think-action pairs, not a list.

Follow the JSON format exactly to ensure it can be parsed automatically, and put the json object between the tags {start_tag}
# your json here
{end_tag} and do not use markdown."#
    )
}

/// Appended when the curator's first reply could not be parsed.
pub fn curation_retry_suffix(error: &str, start_tag: &str, end_tag: &str) -> String {
    format!(
        "\n\nYour previous response could not be parsed: {error}. Reply again with exactly one JSON object placed between {start_tag} and {end_tag}, and no other tagged regions."
    )
}

/// Renders the query-rewriting prompt: similar task examples plus the new
/// task, asking for a numbered draft plan between `<start>`/`<end>` tags.
pub fn query_rewrite_prompt(memory_context: &str, task_description: &str) -> String {
    format!(
        r#"Based on the following similar task examples, break down the new task into a step-by-step plan.

## Similar Task Examples:
{memory_context}

## New Task:
{task_description}

Please provide a numbered list of 3-5 high-level steps that would be needed to complete this task.
Focus on the main phases/subtasks, not detailed actions.

Format your response as a simple numbered list enclosed within <start> and <end> tags:

<start>
1. [First step]
2. [Second step]
3. [Third step]
...
<end>

Steps:"#
    )
}

/// Appended when the rewriter's first reply could not be parsed.
pub fn query_rewrite_retry_suffix(error: &str) -> String {
    format!(
        "\n\nYour previous response could not be parsed: {error}. Reply again with only a numbered list enclosed within <start> and <end> tags."
    )
}

/// Parses lines of the form `1. step text` (or `1) step text`), in order.
pub fn parse_numbered_list(text: &str) -> Vec<String> {
    let mut steps = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        let Some(first_non_digit) = line.find(|c: char| !c.is_ascii_digit()) else {
            continue;
        };
        if first_non_digit == 0 {
            continue;
        }
        let rest = &line[first_non_digit..];
        let Some(body) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) else {
            continue;
        };
        let body = body.trim();
        if !body.is_empty() {
            steps.push(body.to_string());
        }
    }
    steps
}

/// Extracts the numbered draft plan between literal `<start>`/`<end>` tags.
pub fn parse_rewrite_response(text: &str) -> Result<Vec<String>, String> {
    let start = text.find("<start>").ok_or("no <start> tag")?;
    let body = &text[start + "<start>".len()..];
    let end = body.find("<end>").ok_or("no <end> tag")?;
    let steps = parse_numbered_list(&body[..end]);
    if steps.is_empty() {
        return Err("no numbered items between <start> and <end>".into());
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbered_list_parsing() {
        let steps = parse_numbered_list("intro\n1. Check calendar\n 2) Send email\nnot a step\n3.   \n");
        assert_eq!(steps, vec!["Check calendar", "Send email"]);
    }

    #[test]
    fn rewrite_response_needs_tags_and_items() {
        let ok = parse_rewrite_response("<start>\n1. Check calendar\n2. Send email\n<end>").unwrap();
        assert_eq!(ok.len(), 2);
        assert!(parse_rewrite_response("1. Check calendar").is_err());
        assert!(parse_rewrite_response("<start>\nprose only\n<end>").is_err());
    }

    #[test]
    fn curation_prompt_embeds_trajectory_and_tags() {
        let p = curation_prompt("TRAJ-BODY", "<memory_start>", "<memory_end>");
        assert!(p.contains("TRAJ-BODY"));
        assert!(p.contains("<memory_start>"));
        assert!(p.contains("calendar_agent"));
    }
}
