//! SOAP note parsing and dictionary-based mention detection.

pub mod corpus;
pub mod lexicon;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corpus::{ingest_corpus, ingest_raw_notes, ingest_sectioned, AnnotatedNote, Corpus, CorpusError, IngestReport, Rejection};
pub use lexicon::{find_mentions, first_mentions, Lexicon, Mention};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionKind {
    Subjective,
    Objective,
    Assessment,
    Plan,
}

impl SectionKind {
    pub const ALL: [SectionKind; 4] = [
        SectionKind::Subjective,
        SectionKind::Objective,
        SectionKind::Assessment,
        SectionKind::Plan,
    ];
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SectionKind::Subjective => "subjective",
            SectionKind::Objective => "objective",
            SectionKind::Assessment => "assessment",
            SectionKind::Plan => "plan",
        })
    }
}

/// Why a note was rejected at ingest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "kebab-case")]
pub enum RejectReason {
    EmptyNote,
    MissingSubjective,
    MissingAssessment,
    DuplicateSection { section: SectionKind },
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::EmptyNote => "empty-note",
            RejectReason::MissingSubjective => "missing-subjective",
            RejectReason::MissingAssessment => "missing-assessment",
            RejectReason::DuplicateSection { .. } => "duplicate-section",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::DuplicateSection { section } => write!(f, "duplicate-section ({section})"),
            other => f.write_str(other.code()),
        }
    }
}

#[derive(Debug, Error)]
pub enum HeaderConfigError {
    #[error("cannot read header config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("header config is not a JSON map of section -> [aliases]: {0}")]
    Json(#[from] serde_json::Error),
    #[error("section {0} has an empty alias")]
    EmptyAlias(SectionKind),
}

/// Ordered `(section, aliases)` list used to recognize header lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HeaderConfig(BTreeMap<SectionKind, Vec<String>>);

impl Default for HeaderConfig {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert(
            SectionKind::Subjective,
            vec!["subjective".into(), "history of present illness".into()],
        );
        m.insert(
            SectionKind::Objective,
            vec![
                "objective".into(),
                "physical exam".into(),
                "physical examination".into(),
            ],
        );
        m.insert(SectionKind::Assessment, vec!["assessment".into(), "impression".into()]);
        m.insert(SectionKind::Plan, vec!["plan".into()]);
        HeaderConfig(m)
    }
}

impl HeaderConfig {
    pub fn new(map: BTreeMap<SectionKind, Vec<String>>) -> Result<Self, HeaderConfigError> {
        for (section, aliases) in &map {
            if aliases.iter().any(|a| a.trim().is_empty()) {
                return Err(HeaderConfigError::EmptyAlias(*section));
            }
        }
        Ok(HeaderConfig(map))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HeaderConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HeaderConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        HeaderConfig::new(serde_json::from_str(&text)?)
    }

    /// All aliases, longest first so "assessment and plan" beats "assessment".
    fn patterns(&self) -> Vec<(String, SectionKind)> {
        let mut v: Vec<(String, SectionKind)> = self
            .0
            .iter()
            .flat_map(|(k, aliases)| aliases.iter().map(move |a| (a.trim().to_lowercase(), *k)))
            .collect();
        v.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
        v
    }
}

/// Where a section sits inside the raw note text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionSpan {
    pub header: Range<usize>,
    pub body: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoapNote {
    pub note_id: String,
    pub subjective: String,
    #[serde(default)]
    pub objective: String,
    pub assessment: String,
    #[serde(default)]
    pub plan: String,
    pub raw: String,
    /// Section layout inside `raw`; empty for pre-sectioned input.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub spans: BTreeMap<SectionKind, SectionSpan>,
}

impl SoapNote {
    pub fn section(&self, kind: SectionKind) -> &str {
        match kind {
            SectionKind::Subjective => &self.subjective,
            SectionKind::Objective => &self.objective,
            SectionKind::Assessment => &self.assessment,
            SectionKind::Plan => &self.plan,
        }
    }

    /// Builds a note from already separated sections.
    pub fn from_sections(
        note_id: impl Into<String>,
        subjective: &str,
        objective: &str,
        assessment: &str,
        plan: &str,
    ) -> Result<Self, RejectReason> {
        let subjective = subjective.trim();
        let assessment = assessment.trim();
        if subjective.is_empty() {
            return Err(RejectReason::MissingSubjective);
        }
        if assessment.is_empty() {
            return Err(RejectReason::MissingAssessment);
        }
        let objective = objective.trim();
        let plan = plan.trim();
        let raw = [
            ("Subjective", subjective),
            ("Objective", objective),
            ("Assessment", assessment),
            ("Plan", plan),
        ]
        .iter()
        .filter(|(_, body)| !body.is_empty())
        .map(|(h, body)| format!("{h}: {body}"))
        .collect::<Vec<_>>()
        .join("\n");
        Ok(SoapNote {
            note_id: note_id.into(),
            subjective: subjective.to_string(),
            objective: objective.to_string(),
            assessment: assessment.to_string(),
            plan: plan.to_string(),
            raw,
            spans: BTreeMap::new(),
        })
    }
}

/// Returns `(header_end, section)` if the line starting at `line` is a header.
fn match_header(line: &str, patterns: &[(String, SectionKind)]) -> Option<(usize, SectionKind)> {
    let indent = line.len() - line.trim_start_matches([' ', '\t']).len();
    let rest = &line[indent..];
    for (alias, kind) in patterns {
        let Some(candidate) = rest.get(..alias.len()) else {
            continue;
        };
        if candidate.to_lowercase() != *alias {
            continue;
        }
        let after = &rest[alias.len()..];
        let pad = after.len() - after.trim_start_matches([' ', '\t']).len();
        let tail = &after[pad..];
        if let Some(body) = tail.strip_prefix(':') {
            let gap = body.len() - body.trim_start_matches([' ', '\t']).len();
            return Some((indent + alias.len() + pad + 1 + gap, *kind));
        }
        if tail.trim().is_empty() {
            // header alone on its line; the line break belongs to the header
            return Some((line.len(), *kind));
        }
    }
    None
}

/// Splits a raw note into SOAP sections by header lines.
///
/// A header is a line that starts (after optional indentation) with a
/// configured alias, case-insensitively, followed by a colon or by the end of
/// the line. Each body runs to the next header or the end of the text.
pub fn parse_soap(note_id: &str, raw: &str, headers: &HeaderConfig) -> Result<SoapNote, RejectReason> {
    if raw.trim().is_empty() {
        return Err(RejectReason::EmptyNote);
    }
    let patterns = headers.patterns();
    let mut found: Vec<(Range<usize>, SectionKind)> = Vec::new();
    let mut offset = 0;
    for line in raw.split_inclusive('\n') {
        if let Some((end, kind)) = match_header(line, &patterns) {
            if found.iter().any(|(_, k)| *k == kind) {
                return Err(RejectReason::DuplicateSection { section: kind });
            }
            found.push((offset..offset + end, kind));
        }
        offset += line.len();
    }

    let mut spans = BTreeMap::new();
    for (i, (header, kind)) in found.iter().enumerate() {
        let body_end = found.get(i + 1).map_or(raw.len(), |(h, _)| h.start);
        spans.insert(
            *kind,
            SectionSpan {
                header: header.clone(),
                body: header.end..body_end,
            },
        );
    }
    let text = |kind: SectionKind| -> String {
        spans
            .get(&kind)
            .map(|s| raw[s.body.clone()].trim().to_string())
            .unwrap_or_default()
    };
    let subjective = text(SectionKind::Subjective);
    let assessment = text(SectionKind::Assessment);
    if subjective.is_empty() {
        return Err(RejectReason::MissingSubjective);
    }
    if assessment.is_empty() {
        return Err(RejectReason::MissingAssessment);
    }
    Ok(SoapNote {
        note_id: note_id.to_string(),
        objective: text(SectionKind::Objective),
        plan: text(SectionKind::Plan),
        subjective,
        assessment,
        raw: raw.to_string(),
        spans,
    })
}
