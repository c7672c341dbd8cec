//! Run orchestration: ingest, retrieve, probe every instance over its window
//! ladder, persist records, aggregate.

mod artifact;
mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decode::{confidence_decode, DecodeConfig, DecodeError, RankedList};
use crate::kb::{Entity, EntityId, KbError, KnowledgeBase};
use crate::metrics::{acc_flags, record_rank_change, AccFlags, InstanceOutcome, MetricsError, RankChangeEvent};
use crate::prompt::{PromptTemplate, TemplateError};
use crate::retrieval::{InstanceKey, ProbeInstance, RetrievalManifest};
use crate::scorer::{Concurrency, HttpScorer, Scorer, ScorerError, ScorerInfo};
use crate::soap::{Corpus, CorpusError};
use crate::synth::{OracleError, OracleScorer};
use crate::windowing::segment_subjective;

pub use artifact::{
    emit_report, load_manifest, load_records, records_jsonl, replay_trace, retrieve, run_experiment, Counts, Digests,
    Manifest, RunArtifact, MANIFEST_FILE, RECORDS_FILE, RETRIEVAL_FILE,
};
pub use trace::{emit_trace, SKIPPED_TOO_LONG};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("no (triple, note) instance survived retrieval ({triples} triples, {notes} notes)")]
    EmptyRetrieval {
        triples: usize,
        notes: usize,
        manifest: Box<RetrievalManifest>,
    },
    #[error("every instance failed ({failed} failures)")]
    NoSuccess { failed: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("no record for instance {0}")]
    UnknownInstance(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ExperimentError {
    /// Process exit code for the CLI: 2 config, 3 empty retrieval, 4 scorer
    /// unreachable, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_)
            | ExperimentError::Kb(_)
            | ExperimentError::Corpus(_)
            | ExperimentError::Template(_)
            | ExperimentError::Oracle(_) => 2,
            ExperimentError::EmptyRetrieval { .. } => 3,
            ExperimentError::Scorer(e) if e.is_unreachable() || matches!(e, ScorerError::Loading { .. }) => 4,
            _ => 1,
        }
    }
}

/// `http(s)://...` for a scorer service, `oracle:PATH` for the planted oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScorerSpec {
    Http(String),
    Oracle(PathBuf),
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("oracle:") {
            if path.is_empty() {
                return Err("oracle scorer needs a planted knowledge path".into());
            }
            Ok(ScorerSpec::Oracle(PathBuf::from(path)))
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(ScorerSpec::Http(s.trim_end_matches('/').to_string()))
        } else {
            Err(format!("scorer must be an http(s) URL or oracle:PATH, got {s:?}"))
        }
    }
}

impl fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerSpec::Http(url) => f.write_str(url),
            ScorerSpec::Oracle(path) => write!(f, "oracle:{}", path.display()),
        }
    }
}

impl TryFrom<String> for ScorerSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ScorerSpec> for String {
    fn from(s: ScorerSpec) -> Self {
        s.to_string()
    }
}

pub fn open_scorer(spec: &ScorerSpec) -> Result<Box<dyn Scorer>, ExperimentError> {
    Ok(match spec {
        ScorerSpec::Http(url) => Box::new(HttpScorer::new(url)?),
        ScorerSpec::Oracle(path) => Box::new(OracleScorer::from_path(path)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub kb: PathBuf,
    pub corpus: PathBuf,
    /// JSON map relation -> pattern; the built-in pattern when absent.
    pub templates: Option<PathBuf>,
    pub scorer: ScorerSpec,
    /// 0 means every segment.
    pub max_windows: usize,
    /// Notes per triple, lowest ids first; 0 means no cap.
    pub note_cap: usize,
    pub decode: DecodeConfig,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
    /// Worker threads; 0 means one per core. Never affects output.
    #[serde(skip)]
    pub parallel: usize,
}

impl RunConfig {
    pub fn new(kb: impl Into<PathBuf>, corpus: impl Into<PathBuf>, scorer: ScorerSpec, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            kb: kb.into(),
            corpus: corpus.into(),
            templates: None,
            scorer,
            max_windows: 0,
            note_cap: 3,
            decode: DecodeConfig::default(),
            seed: 0,
            out: out.into(),
            parallel: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.decode
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))
    }
}

/// Ranking produced by one query plus the ranks of every plan symptom in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub ranked: RankedList,
    pub ranks: BTreeMap<EntityId, usize>,
    pub acc: AccFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStep {
    pub k: usize,
    /// Addition labels in document order, e.g. `["S2", "S1"]`.
    pub labels: Vec<String>,
    pub symptoms: Vec<EntityId>,
    pub added: EntityId,
    pub added_is_correct: bool,
    #[serde(flatten)]
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Windows from `at_k` on exceeded the scorer's input limit; `at_k = 0`
    /// means even the bare prompt did.
    Skipped {
        at_k: usize,
        labels: Vec<String>,
        reason: String,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub symptom: EntityId,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub instance: InstanceKey,
    pub disease_name: String,
    pub segments: Vec<SegmentInfo>,
    /// Segment indices in addition order.
    pub order: Vec<usize>,
    #[serde(flatten)]
    pub status: Status,
    pub no_context: Option<Step>,
    pub windows: Vec<WindowStep>,
    pub events: Vec<RankChangeEvent>,
}

impl ProbeRecord {
    /// Metric inputs; `None` for failed records.
    pub fn outcome(&self) -> Option<InstanceOutcome> {
        if matches!(self.status, Status::Failed { .. }) {
            return None;
        }
        Some(InstanceOutcome {
            no_context: self.no_context.as_ref().map(|s| s.acc).unwrap_or_default(),
            windows: self.windows.iter().map(|w| w.step.acc).collect(),
            events: self.events.clone(),
        })
    }

    /// Rank of the probed symptom at window `k` (0 = no context).
    pub fn target_rank(&self, k: usize) -> Option<usize> {
        let step = if k == 0 {
            self.no_context.as_ref()
        } else {
            self.windows.get(k - 1).map(|w| &w.step)
        };
        step.and_then(|s| s.ranks.get(&self.instance.symptom).copied())
    }
}

/// Everything `run_probe` needs besides the instance.
pub struct ProbeContext<'a> {
    pub kb: &'a KnowledgeBase,
    pub corpus: &'a Corpus,
    pub template: &'a PromptTemplate,
    pub scorer: &'a dyn Scorer,
    pub info: &'a ScorerInfo,
    pub max_windows: usize,
    pub decode: DecodeConfig,
}

enum Attempt {
    Done(Step),
    TooLong,
    Failed(String),
}

impl ProbeContext<'_> {
    fn step(&self, disease: &Entity, context: &str, plan_symptoms: &[&Entity], gold: &[&Entity]) -> Attempt {
        match confidence_decode(self.scorer, self.info, self.template, &disease.name, context, &self.decode) {
            Ok(ranked) => Attempt::Done(Step {
                ranks: plan_symptoms.iter().map(|e| (e.id.clone(), ranked.rank_of(e))).collect(),
                acc: acc_flags(&ranked, gold.iter().copied()),
                ranked,
            }),
            Err(DecodeError::TooLong { len, max }) => {
                log::debug!("input of {len} tokens over limit {max}");
                Attempt::TooLong
            }
            Err(e) => Attempt::Failed(e.to_string()),
        }
    }
}

/// Probes one instance: the bare prompt, then windows `k = 1..=K`.
pub fn run_probe(instance: &ProbeInstance, ctx: &ProbeContext) -> ProbeRecord {
    let key = instance.key();
    let mut record = ProbeRecord {
        instance: key.clone(),
        disease_name: String::new(),
        segments: Vec::new(),
        order: Vec::new(),
        status: Status::Ok,
        no_context: None,
        windows: Vec::new(),
        events: Vec::new(),
    };
    let fail = |mut r: ProbeRecord, error: String| {
        log::warn!("instance {key} failed: {error}");
        r.status = Status::Failed { error };
        r
    };
    let Some(disease) = ctx.kb.entity(&key.disease) else {
        return fail(record, format!("unknown disease {}", key.disease));
    };
    record.disease_name = disease.name.clone();
    let Some(note) = ctx.corpus.get(&key.note_id) else {
        return fail(record, format!("note {} not in corpus", key.note_id));
    };
    let subjective = &note.note.subjective;
    let plan = match segment_subjective(subjective, &note.symptoms, &instance.target_mention) {
        Ok(p) => p,
        Err(e) => return fail(record, e.to_string()),
    };
    record.segments = plan
        .segments
        .iter()
        .map(|s| SegmentInfo {
            symptom: s.symptom.clone(),
            start: s.start,
            end: s.end,
        })
        .collect();
    record.order = plan.order.clone();

    let gold_ids: &BTreeSet<EntityId> = ctx.kb.gold(&key.disease);
    let gold: Vec<&Entity> = gold_ids.iter().filter_map(|id| ctx.kb.entity(id)).collect();
    let plan_symptoms: Vec<&Entity> = match plan
        .segments
        .iter()
        .map(|s| ctx.kb.entity(&s.symptom).ok_or(&s.symptom))
        .collect()
    {
        Ok(v) => v,
        Err(id) => return fail(record, format!("unknown symptom {id}")),
    };

    match ctx.step(disease, "", &plan_symptoms, &gold) {
        Attempt::Done(step) => record.no_context = Some(step),
        Attempt::TooLong => {
            record.status = Status::Skipped {
                at_k: 0,
                labels: vec![],
                reason: SKIPPED_TOO_LONG.into(),
            };
            return record;
        }
        Attempt::Failed(e) => return fail(record, e),
    }

    let k_max = if ctx.max_windows == 0 {
        plan.len()
    } else {
        ctx.max_windows.min(plan.len())
    };
    for k in 1..=k_max {
        let window = match plan.window(subjective, k) {
            Ok(w) => w,
            Err(e) => return fail(record, e.to_string()),
        };
        let labels = plan.labels(k);
        let step = match ctx.step(disease, &window.text, &plan_symptoms, &gold) {
            Attempt::Done(step) => step,
            Attempt::TooLong => {
                record.status = Status::Skipped {
                    at_k: k,
                    labels,
                    reason: SKIPPED_TOO_LONG.into(),
                };
                break;
            }
            Attempt::Failed(e) => return fail(record, e),
        };
        let prev = match record.windows.last() {
            Some(w) => &w.step.ranks,
            None => &record.no_context.as_ref().expect("no-context step present").ranks,
        };
        let event = match record_rank_change(prev, &step.ranks, &window, gold_ids) {
            Ok(e) => e,
            Err(e) => return fail(record, e.to_string()),
        };
        record.windows.push(WindowStep {
            k,
            labels,
            added_is_correct: event.added_is_correct,
            symptoms: window.symptoms,
            added: window.added_symptom,
            step,
        });
        record.events.push(event);
    }
    record
}

/// Worker count honoring the scorer's concurrency mode.
pub fn worker_threads(requested: usize, scorer: &dyn Scorer) -> usize {
    if scorer.concurrency() == Concurrency::Serial {
        return 1;
    }
    if requested == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        requested
    }
}

/// Probes every instance on `threads` workers; output order follows
/// `instances`.
pub fn probe_all(instances: &[ProbeInstance], ctx: &ProbeContext, threads: usize) -> Result<Vec<ProbeRecord>, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| ExperimentError::Config(format!("cannot start workers: {e}")))?;
    Ok(pool.install(|| instances.par_iter().map(|i| run_probe(i, ctx)).collect()))
}
