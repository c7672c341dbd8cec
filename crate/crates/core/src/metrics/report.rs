//! TSV, Markdown and JSON renderings of the three result tables.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Aggregates, Comparison, Condition, Exact, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Md,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(ReportFormat::Tsv),
            "md" | "markdown" => Ok(ReportFormat::Md),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?} (expected tsv, md or json)")),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Tsv => "tsv",
            ReportFormat::Md => "md",
            ReportFormat::Json => "json",
        }
    }
}

/// One table row per scorer model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub aggregates: Aggregates,
}

pub const TRANSITION_GROUPS: [&str; 4] = [
    "not acc@1 → acc@1",
    "acc@1 → not acc@1",
    "not acc@5 → acc@5",
    "acc@5 → not acc@5",
];

pub const RANK_CHANGE_COLUMNS: [&str; 6] = ["target S", "added S", "COR Sx", "INCOR Sx", "added S", "exist Sx"];

fn num(e: Exact) -> String {
    format!("{:.3}", e.to_f64())
}

fn cell(s: &Split) -> String {
    let side = |v: Option<Exact>| v.map(num).unwrap_or_else(|| "-".to_string());
    format!("{}/{}", side(s.correct), side(s.incorrect))
}

fn condition_cells(a: &Aggregates) -> Vec<String> {
    Condition::ALL
        .iter()
        .flat_map(|&c| {
            let row = a.condition(c);
            [num(row.acc1), num(row.acc5)]
        })
        .collect()
}

fn transition_cells(a: &Aggregates) -> Vec<String> {
    let pick: [fn(&super::TransitionStats) -> Exact; 4] = [
        |t| t.gained_acc1,
        |t| t.lost_acc1,
        |t| t.gained_acc5,
        |t| t.lost_acc5,
    ];
    pick.iter()
        .flat_map(|f| Comparison::ALL.iter().map(move |&c| num(f(a.transition(c)))))
        .collect()
}

fn rank_change_cells(a: &Aggregates) -> Vec<String> {
    let t = &a.rank_change;
    [&t.target, &t.added, &t.correct_existing, &t.incorrect_existing, &t.rank_added, &t.rank_existing]
        .into_iter()
        .map(cell)
        .collect()
}

/// The conditions table header with the acc@k columns grouped per condition.
pub fn conditions_header() -> String {
    Condition::ALL
        .iter()
        .map(|c| format!("{} acc@1 acc@5", c.label()))
        .collect::<Vec<_>>()
        .join(" | ")
}

fn tsv_conditions(rows: &[ModelRow]) -> String {
    let mut out = String::new();
    out.push('\t');
    for c in Condition::ALL {
        out.push_str(&format!("{}\t\t", c.label()));
    }
    out.pop();
    out.push('\n');
    out.push_str(&format!("\t{}\n", ["acc@1", "acc@5"].repeat(3).join("\t")));
    for r in rows {
        out.push_str(&format!("{}\t{}\n", r.model, condition_cells(&r.aggregates).join("\t")));
    }
    out
}

fn tsv_transitions(rows: &[ModelRow]) -> String {
    let mut out = String::new();
    out.push('\t');
    out.push_str(&TRANSITION_GROUPS.iter().map(|g| format!("{g}\t\t")).collect::<String>());
    out.pop();
    out.push('\n');
    let comps: Vec<&str> = Comparison::ALL.iter().map(|c| c.label()).collect();
    out.push_str(&format!("\t{}\n", vec![comps.join("\t"); 4].join("\t")));
    for r in rows {
        out.push_str(&format!("{}\t{}\n", r.model, transition_cells(&r.aggregates).join("\t")));
    }
    out
}

fn tsv_rank_change(rows: &[ModelRow]) -> String {
    let mut out = String::from("\tRank Change (-ranking improve, +ranking decrease)\t\t\t\tRank (smaller ranks higher)\t\n");
    out.push_str(&format!("\t{}\n", RANK_CHANGE_COLUMNS.join("\t")));
    for r in rows {
        out.push_str(&format!("{}\t{}\n", r.model, rank_change_cells(&r.aggregates).join("\t")));
    }
    out
}

fn md_table(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = format!("| {} |\n", header.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
    for r in rows {
        out.push_str(&format!("| {} |\n", r.join(" | ")));
    }
    out
}

fn with_model(model: &str, cells: Vec<String>) -> Vec<String> {
    std::iter::once(model.to_string()).chain(cells).collect()
}

fn markdown(rows: &[ModelRow]) -> String {
    let mut header: Vec<String> = vec!["model".into()];
    for c in Condition::ALL {
        header.push(format!("{} acc@1", c.label()));
        header.push(format!("{} acc@5", c.label()));
    }
    let mut out = String::from("## Accuracy by context condition\n\n");
    out.push_str(&md_table(
        &header,
        rows.iter().map(|r| with_model(&r.model, condition_cells(&r.aggregates))),
    ));

    let mut header: Vec<String> = vec!["model".into()];
    for g in TRANSITION_GROUPS {
        for c in Comparison::ALL {
            header.push(format!("{g} ({})", c.label()));
        }
    }
    out.push_str("\n## Accuracy transitions\n\n");
    out.push_str(&md_table(
        &header,
        rows.iter().map(|r| with_model(&r.model, transition_cells(&r.aggregates))),
    ));

    let mut header: Vec<String> = vec!["model".into()];
    for (i, c) in RANK_CHANGE_COLUMNS.iter().enumerate() {
        let group = if i < 4 { "rank change" } else { "rank" };
        header.push(format!("{group}: {c}"));
    }
    out.push_str("\n## Rank change (correct/incorrect; negative = improved)\n\n");
    out.push_str(&md_table(
        &header,
        rows.iter().map(|r| with_model(&r.model, rank_change_cells(&r.aggregates))),
    ));
    out
}

/// Files making up a report: three TSV tables, one Markdown document, or
/// one JSON document.
pub fn report_files(rows: &[ModelRow], format: ReportFormat) -> Vec<(String, String)> {
    match format {
        ReportFormat::Tsv => vec![
            ("conditions.tsv".into(), tsv_conditions(rows)),
            ("transitions.tsv".into(), tsv_transitions(rows)),
            ("rank_change.tsv".into(), tsv_rank_change(rows)),
        ],
        ReportFormat::Md => vec![("report.md".into(), markdown(rows))],
        ReportFormat::Json => vec![(
            "report.json".into(),
            serde_json::to_string_pretty(rows).expect("aggregates serialize") + "\n",
        )],
    }
}

/// All tables as one string.
pub fn render_report(rows: &[ModelRow], format: ReportFormat) -> String {
    report_files(rows, format)
        .into_iter()
        .map(|(_, body)| body)
        .collect::<Vec<_>>()
        .join("\n")
}
