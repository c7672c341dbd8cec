//! Run directory layout: records, manifest, retrieval audit and reports.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    emit_trace, open_scorer, probe_all, worker_threads, ExperimentError, ProbeContext, ProbeRecord, RunConfig, Status,
};
use crate::kb::{load_kb, KnowledgeBase};
use crate::metrics::report::{report_files, ModelRow, ReportFormat};
use crate::metrics::{aggregate, Aggregates};
use crate::prompt::{load_template, PromptTemplate};
use crate::retrieval::{build_instances, InstanceKey, RetrievalManifest};
use crate::kb::Triple;
use crate::soap::{ingest_corpus, HeaderConfig, IngestReport};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RETRIEVAL_FILE: &str = "retrieval.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digests {
    pub kb: String,
    pub corpus: String,
    pub templates: Option<String>,
    /// Covers the serialized config and the three input digests.
    pub config: String,
    pub records: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub notes: usize,
    pub rejected_notes: usize,
    pub instances: usize,
    pub ok: usize,
    pub skipped: usize,
    pub failed: usize,
    pub windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config: RunConfig,
    pub scorer_model_id: String,
    pub seed: u64,
    pub counts: Counts,
    pub digests: Digests,
}

#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub records: Vec<ProbeRecord>,
    pub aggregates: Aggregates,
}

fn io_err(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a file, or of a directory's files (names and contents) in
/// name order.
fn digest_path(path: &Path) -> Result<String, ExperimentError> {
    let meta = std::fs::metadata(path).map_err(|e| io_err(path, e))?;
    if !meta.is_dir() {
        return Ok(sha256_hex(&std::fs::read(path).map_err(|e| io_err(path, e))?));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| io_err(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut hasher = Sha256::new();
    for f in files {
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        hasher.update(name.as_bytes());
        hasher.update([0]);
        hasher.update(std::fs::read(&f).map_err(|e| io_err(&f, e))?);
        hasher.update([0]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn write(path: &Path, body: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, body).map_err(|e| io_err(path, e))
}

fn load_inputs(config: &RunConfig) -> Result<(KnowledgeBase, IngestReport, PromptTemplate), ExperimentError> {
    let kb = load_kb(&config.kb)?;
    let ingest = ingest_corpus(&config.corpus, &kb, &HeaderConfig::default())?;
    let template = match &config.templates {
        Some(path) => load_template(path, Triple::RELATION)?,
        None => PromptTemplate::has_symptom(),
    };
    Ok((kb, ingest, template))
}

/// Dry run: D1/D2 sizes per triple without touching a scorer.
pub fn retrieve(config: &RunConfig) -> Result<RetrievalManifest, ExperimentError> {
    let (kb, ingest, _) = load_inputs(config)?;
    Ok(build_instances(&kb, &ingest.corpus, config.note_cap).1)
}

pub fn records_jsonl(records: &[ProbeRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<ProbeRecord>, ExperimentError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ExperimentError::Malformed {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_manifest(run_dir: impl AsRef<Path>) -> Result<Manifest, ExperimentError> {
    let path = run_dir.as_ref().join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::Malformed {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn aggregate_records(records: &[ProbeRecord]) -> Result<Aggregates, ExperimentError> {
    let outcomes: Vec<_> = records.iter().filter_map(ProbeRecord::outcome).collect();
    Ok(aggregate(&outcomes)?)
}

/// Ingest, retrieve, probe, aggregate, and write the run directory.
pub fn run_experiment(config: &RunConfig) -> Result<RunArtifact, ExperimentError> {
    config.validate()?;
    let (kb, ingest, template) = load_inputs(config)?;
    let (instances, retrieval) = build_instances(&kb, &ingest.corpus, config.note_cap);
    std::fs::create_dir_all(&config.out).map_err(|e| io_err(&config.out, e))?;
    write(
        &config.out.join(RETRIEVAL_FILE),
        &(serde_json::to_string_pretty(&retrieval).expect("manifest serializes") + "\n"),
    )?;
    if instances.is_empty() {
        return Err(ExperimentError::EmptyRetrieval {
            triples: retrieval.triples.len(),
            notes: retrieval.corpus_size,
            manifest: Box::new(retrieval),
        });
    }

    let scorer = open_scorer(&config.scorer)?;
    let info = scorer.info()?;
    let ctx = ProbeContext {
        kb: &kb,
        corpus: &ingest.corpus,
        template: &template,
        scorer: scorer.as_ref(),
        info: &info,
        max_windows: config.max_windows,
        decode: config.decode,
    };
    let threads = worker_threads(config.parallel, scorer.as_ref());
    log::info!("probing {} instances on {threads} threads", instances.len());
    let records = probe_all(&instances, &ctx, threads)?;

    let body = records_jsonl(&records);
    write(&config.out.join(RECORDS_FILE), &body)?;

    let counts = Counts {
        notes: ingest.corpus.len(),
        rejected_notes: ingest.rejections.len(),
        instances: records.len(),
        ok: records.iter().filter(|r| r.status == Status::Ok).count(),
        skipped: records.iter().filter(|r| matches!(r.status, Status::Skipped { .. })).count(),
        failed: records.iter().filter(|r| matches!(r.status, Status::Failed { .. })).count(),
        windows: records.iter().map(|r| r.windows.len()).sum(),
    };
    let kb_digest = digest_path(&config.kb)?;
    let corpus_digest = digest_path(&config.corpus)?;
    let templates_digest = config.templates.as_deref().map(digest_path).transpose()?;
    let config_digest = sha256_hex(
        serde_json::to_string(&(config, &kb_digest, &corpus_digest, &templates_digest))
            .expect("config serializes")
            .as_bytes(),
    );
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        scorer_model_id: info.model_id.clone(),
        seed: config.seed,
        counts,
        digests: Digests {
            kb: kb_digest,
            corpus: corpus_digest,
            templates: templates_digest,
            config: config_digest,
            records: sha256_hex(body.as_bytes()),
        },
    };
    write(
        &config.out.join(MANIFEST_FILE),
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )?;

    let aggregates = match aggregate_records(&records) {
        Ok(a) => a,
        Err(_) => {
            return Err(ExperimentError::NoSuccess {
                failed: manifest.counts.failed,
            })
        }
    };
    let rows = [ModelRow {
        model: info.model_id,
        aggregates: aggregates.clone(),
    }];
    for format in [ReportFormat::Tsv, ReportFormat::Md, ReportFormat::Json] {
        for (name, body) in report_files(&rows, format) {
            write(&config.out.join(name), &body)?;
        }
    }
    Ok(RunArtifact {
        dir: config.out.clone(),
        manifest,
        records,
        aggregates,
    })
}

/// Recomputes the tables from a run directory's records and writes them in
/// `format`. Returns the written paths.
pub fn emit_report(run_dir: impl AsRef<Path>, format: ReportFormat) -> Result<Vec<PathBuf>, ExperimentError> {
    let dir = run_dir.as_ref();
    let manifest = load_manifest(dir)?;
    let records = load_records(dir.join(RECORDS_FILE))?;
    let rows = [ModelRow {
        model: manifest.scorer_model_id,
        aggregates: aggregate_records(&records)?,
    }];
    let mut written = Vec::new();
    for (name, body) in report_files(&rows, format) {
        let path = dir.join(name);
        write(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

/// The case trace of one stored record.
pub fn replay_trace(run_dir: impl AsRef<Path>, instance: &InstanceKey) -> Result<String, ExperimentError> {
    let records = load_records(run_dir.as_ref().join(RECORDS_FILE))?;
    records
        .iter()
        .find(|r| &r.instance == instance)
        .map(emit_trace)
        .ok_or_else(|| ExperimentError::UnknownInstance(instance.to_string()))
}
