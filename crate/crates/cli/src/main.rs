use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ctxprobe_core::decode::DecodeConfig;
use ctxprobe_core::experiment::{
    emit_report, replay_trace, retrieve, run_experiment, ExperimentError, RunConfig, ScorerSpec,
};
use ctxprobe_core::metrics::report::ReportFormat;
use ctxprobe_core::retrieval::InstanceKey;
use ctxprobe_core::synth::{generate_synthetic, SynthError, SynthSpec};

#[derive(Parser)]
#[command(name = "ctxprobe", version, about = "Probe masked language models with clinical note context")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probe every retrieved instance and write a run directory.
    Run(RunArgs),
    /// Recompute the result tables from a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "tsv")]
        format: ReportFormat,
    },
    /// Print the window ladder of one instance (DISEASE|SYMPTOM|NOTE).
    Trace {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        instance: InstanceKey,
    },
    /// Generate a synthetic KB, corpus and planted oracle knowledge.
    Synth {
        /// JSON generator spec; built-in defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dry run of note retrieval: per-triple D1/D2 sizes as JSON.
    Retrieve {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        note_cap: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// JSON map from relation to prompt pattern.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Scorer service URL or oracle:PLANTED.json.
    #[arg(long, env = "CTXPROBE_SCORER_URL")]
    scorer: ScorerSpec,
    #[arg(long)]
    out: PathBuf,
    /// Largest window size; 0 evaluates every segment.
    #[arg(long, default_value_t = 0)]
    max_windows: usize,
    /// Notes per triple; 0 means no cap.
    #[arg(long, default_value_t = 3)]
    note_cap: usize,
    #[arg(long, default_value_t = 5)]
    max_masks: usize,
    #[arg(long, default_value_t = 5)]
    beam_width: usize,
    #[arg(long, default_value_t = 50)]
    top_v: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
}

impl RunArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            kb: self.kb,
            corpus: self.corpus,
            templates: self.templates,
            scorer: self.scorer,
            max_windows: self.max_windows,
            note_cap: self.note_cap,
            decode: DecodeConfig {
                max_masks: self.max_masks,
                beam_width: self.beam_width,
                top_v: self.top_v,
            },
            seed: self.seed,
            out: self.out,
            parallel: self.parallel,
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = args.into_config();
            let artifact = match run_experiment(&config) {
                Err(ExperimentError::EmptyRetrieval { manifest, .. }) => {
                    eprintln!("{}", serde_json::to_string_pretty(&manifest)?);
                    return Err(ExperimentError::EmptyRetrieval {
                        triples: manifest.triples.len(),
                        notes: manifest.corpus_size,
                        manifest,
                    }
                    .into());
                }
                other => other?,
            };
            let c = &artifact.manifest.counts;
            println!(
                "{} instances ({} ok, {} skipped, {} failed), {} windows -> {}",
                c.instances,
                c.ok,
                c.skipped,
                c.failed,
                c.windows,
                artifact.dir.display()
            );
        }
        Command::Report { run, format } => {
            for path in emit_report(&run, format)? {
                let body = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                print!("{body}");
            }
        }
        Command::Trace { run, instance } => print!("{}", replay_trace(&run, &instance)?),
        Command::Synth { spec, seed, out } => {
            let mut spec = match spec {
                Some(path) => SynthSpec::load(path)?,
                None => SynthSpec::default(),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            generate_synthetic(&spec)?.write_to(&out)?;
            println!("wrote kb.json, notes.jsonl, planted.json to {}", out.display());
        }
        Command::Retrieve { kb, corpus, note_cap } => {
            // the scorer is never opened on this path
            let mut config = RunConfig::new(kb, corpus, ScorerSpec::Http("http://localhost".into()), PathBuf::new());
            config.note_cap = note_cap;
            let manifest = retrieve(&config)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            if manifest.total_instances == 0 {
                return Err(ExperimentError::EmptyRetrieval {
                    triples: manifest.triples.len(),
                    notes: manifest.corpus_size,
                    manifest: Box::new(manifest),
                }
                .into());
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<ExperimentError>() {
        return e.exit_code() as u8;
    }
    if let Some(e) = err.downcast_ref::<SynthError>() {
        return if matches!(e, SynthError::Io { .. }) { 1 } else { 2 };
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
