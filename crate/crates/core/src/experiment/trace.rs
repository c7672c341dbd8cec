//! Per-instance ladder traces.

use super::{ProbeRecord, Status};

pub const SKIPPED_TOO_LONG: &str = "input too long";

fn rank(r: Option<usize>) -> String {
    r.map_or_else(|| "?".to_string(), |r| r.to_string())
}

/// One line per ladder step:
///
/// ```text
/// Prompt → target rank: 25
/// S1 + Prompt → target rank: 0 new symptom (correct) rank: 0
/// S2 S1 + Prompt → SKIPPED (input too long)
/// ```
pub fn emit_trace(record: &ProbeRecord) -> String {
    let mut lines = Vec::new();
    match &record.no_context {
        Some(_) => lines.push(format!("Prompt → target rank: {}", rank(record.target_rank(0)))),
        None => match &record.status {
            Status::Skipped { reason, .. } => lines.push(format!("Prompt → SKIPPED ({reason})")),
            Status::Failed { error } => lines.push(format!("Prompt → FAILED ({error})")),
            Status::Ok => {}
        },
    }
    for w in &record.windows {
        let added = w.step.ranks.get(&w.added).copied();
        lines.push(format!(
            "{} + Prompt → target rank: {} new symptom ({}) rank: {}",
            w.labels.join(" "),
            rank(record.target_rank(w.k)),
            if w.added_is_correct { "correct" } else { "incorrect" },
            rank(added),
        ));
    }
    match &record.status {
        Status::Skipped { at_k, labels, reason } if *at_k > 0 => {
            lines.push(format!("{} + Prompt → SKIPPED ({reason})", labels.join(" ")));
        }
        Status::Failed { error } if record.no_context.is_some() => {
            lines.push(format!("FAILED ({error})"));
        }
        _ => {}
    }
    lines.join("\n") + "\n"
}
