//! Corpus ingestion from JSONL files or directories of raw notes.
//!
//! Accepted line formats:
//! - `{"id": ..., "text": ...}`: raw note text, sectioned by header lines;
//! - `{"id": ..., "subjective": ..., "objective": ..., "assessment": ..., "plan": ...}`.
//!
//! A directory is read in file-name order: `*.jsonl` files contribute one
//! note per line, `*.txt` files one raw note each (id = file stem).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexicon::{find_mentions, Mention};
use super::{parse_soap, HeaderConfig, RejectReason, SectionKind, SoapNote};
use crate::kb::{EntityKind, KnowledgeBase};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed note record: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("duplicate note id {0:?}")]
    DuplicateId(String),
    #[error("no notes accepted ({rejected} rejected)")]
    Empty { rejected: usize },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NoteRecord {
    Raw {
        id: String,
        text: String,
    },
    Sectioned {
        id: String,
        subjective: Option<String>,
        #[serde(default)]
        objective: Option<String>,
        assessment: Option<String>,
        #[serde(default)]
        plan: Option<String>,
    },
}

/// A note plus its subjective symptom mentions and assessment disease mentions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedNote {
    pub note: SoapNote,
    pub symptoms: Vec<Mention>,
    pub diseases: Vec<Mention>,
}

impl AnnotatedNote {
    pub fn annotate(note: SoapNote, kb: &KnowledgeBase) -> Self {
        let symptoms = find_mentions(
            &note.subjective,
            kb.lexicon(EntityKind::Symptom),
            SectionKind::Subjective,
        );
        let diseases = find_mentions(
            &note.assessment,
            kb.lexicon(EntityKind::Disease),
            SectionKind::Assessment,
        );
        AnnotatedNote {
            note,
            symptoms,
            diseases,
        }
    }
}

pub type Corpus = BTreeMap<String, AnnotatedNote>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub note_id: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub corpus: Corpus,
    pub rejections: Vec<Rejection>,
}

enum Source {
    Raw(String),
    Sections(Result<SoapNote, RejectReason>),
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_jsonl(path: &Path, out: &mut Vec<(String, Source)>) -> Result<(), CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: NoteRecord = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(match record {
            NoteRecord::Raw { id, text } => (id, Source::Raw(text)),
            NoteRecord::Sectioned {
                id,
                subjective,
                objective,
                assessment,
                plan,
            } => {
                let note = SoapNote::from_sections(
                    id.clone(),
                    subjective.as_deref().unwrap_or(""),
                    objective.as_deref().unwrap_or(""),
                    assessment.as_deref().unwrap_or(""),
                    plan.as_deref().unwrap_or(""),
                );
                (id, Source::Sections(note))
            }
        });
    }
    Ok(())
}

fn collect_sources(path: &Path) -> Result<Vec<(String, Source)>, CorpusError> {
    let mut out = Vec::new();
    let meta = std::fs::metadata(path).map_err(|e| io_err(path, e))?;
    if meta.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| io_err(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for file in files {
            match file.extension().and_then(|e| e.to_str()) {
                Some("jsonl") => read_jsonl(&file, &mut out)?,
                Some("txt") => {
                    let id = file
                        .file_stem()
                        .and_then(|s| s.to_str())
                        .unwrap_or_default()
                        .to_string();
                    let text = std::fs::read_to_string(&file).map_err(|e| io_err(&file, e))?;
                    out.push((id, Source::Raw(text)));
                }
                _ => log::debug!("skipping {}", file.display()),
            }
        }
    } else {
        read_jsonl(path, &mut out)?;
    }
    Ok(out)
}

/// Parses every note, attaches mentions, and keys the result by note id.
pub fn ingest_corpus(
    path: impl AsRef<Path>,
    kb: &KnowledgeBase,
    headers: &HeaderConfig,
) -> Result<IngestReport, CorpusError> {
    let sources = collect_sources(path.as_ref())?;
    assemble(sources, kb, headers)
}

fn assemble(
    sources: Vec<(String, Source)>,
    kb: &KnowledgeBase,
    headers: &HeaderConfig,
) -> Result<IngestReport, CorpusError> {
    let mut seen = std::collections::BTreeSet::new();
    let mut corpus = Corpus::new();
    let mut rejections = Vec::new();
    for (id, source) in sources {
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId(id));
        }
        let parsed = match source {
            Source::Raw(text) => parse_soap(&id, &text, headers),
            Source::Sections(note) => note,
        };
        match parsed {
            Ok(note) => {
                corpus.insert(id, AnnotatedNote::annotate(note, kb));
            }
            Err(reason) => {
                log::warn!("rejected note {id}: {reason}");
                rejections.push(Rejection { note_id: id, reason });
            }
        }
    }
    rejections.sort_by(|a, b| a.note_id.cmp(&b.note_id));
    if corpus.is_empty() {
        return Err(CorpusError::Empty {
            rejected: rejections.len(),
        });
    }
    Ok(IngestReport { corpus, rejections })
}

/// Builds a corpus from in-memory `(id, raw text)` pairs.
pub fn ingest_raw_notes<'a, I>(notes: I, kb: &KnowledgeBase, headers: &HeaderConfig) -> Result<IngestReport, CorpusError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let sources = notes
        .into_iter()
        .map(|(id, text)| (id.to_string(), Source::Raw(text.to_string())))
        .collect();
    assemble(sources, kb, headers)
}

/// Builds a corpus from notes that are already split into sections.
pub fn ingest_sectioned<I>(notes: I, kb: &KnowledgeBase, headers: &HeaderConfig) -> Result<IngestReport, CorpusError>
where
    I: IntoIterator<Item = (String, Result<SoapNote, RejectReason>)>,
{
    let sources = notes.into_iter().map(|(id, note)| (id, Source::Sections(note))).collect();
    assemble(sources, kb, headers)
}
