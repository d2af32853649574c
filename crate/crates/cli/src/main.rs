//! `vircis`: headless driver for synthesis, training, recognition, indexing,
//! search, scripted sessions and the HTTP service.
//!
//! Exit status: 0 on success, 1 when a checked assertion fails
//! (`session replay` expectations), 2 on bad input of any kind.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use vircis_core::audio::{load_wav, save_wav};
use vircis_core::cis::{RelevanceFilterConfig, Session, DEFAULT_TOP_K};
use vircis_core::ir::{default_stopwords, index_documents, load_corpus, InvertedIndex};
use vircis_core::mfcc::FeatureMatrix;
use vircis_core::recognizer::{
    evaluate, load_labeled_clips, load_manifest, recognize, render_manifest, FrontendConfig, ManifestEntry,
    Transcriber, Vocabulary,
};
use vircis_core::script::{parse_script, replay};
use vircis_core::synth::{parse_vocabulary, SynthConfig, Synthesizer};
use vircis_core::train::{train_with_trace, TrainConfig};
use vircis_service::{load_index_or_corpus, ServiceConfig};

#[derive(Parser)]
#[command(
    name = "vircis",
    version,
    about = "Voice-driven collaborative search pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render labeled synthetic tone-word clips plus a manifest.
    Synth {
        /// Vocabulary spec: one `label freq_hz...` line per word.
        #[arg(long)]
        vocab: PathBuf,
        /// Output directory for WAVs and `manifest.tsv`.
        #[arg(long)]
        out: PathBuf,
        /// Clips per word.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Compute MFCC features for one WAV file.
    Extract {
        wav: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one word model per manifest label.
    Train {
        /// `label<TAB>wav-path` manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// Directory receiving `<label>.hmm` files.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        states: usize,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        /// Recorded for reproducibility; training itself is deterministic.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Transcribe a WAV file and print every model's score.
    Recognize {
        wav: PathBuf,
        /// Directory of `*.hmm` word models.
        #[arg(long)]
        models: PathBuf,
    },
    /// Score a labeled test manifest against a model directory.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        models: PathBuf,
        /// Also print the confusion table.
        #[arg(long)]
        table: bool,
    },
    /// Build an inverted index from a corpus directory or manifest.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank documents for a text query.
    Search {
        /// Saved index, corpus directory, or corpus manifest.
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[arg(required = true, num_args = 1..)]
        query: Vec<String>,
    },
    /// Scripted collaborative sessions.
    Session {
        #[command(subcommand)]
        action: SessionAction,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "VIRCIS_PORT", default_value_t = vircis_service::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Corpus directory, corpus manifest, or saved index.
        #[arg(long, env = "VIRCIS_CORPUS")]
        corpus: Option<PathBuf>,
        /// Directory of `*.hmm` word models.
        #[arg(long, env = "VIRCIS_MODELS")]
        models: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SessionAction {
    /// Replay a session script and print the final merged ranking.
    Replay {
        script: PathBuf,
        /// Saved index, corpus directory, or corpus manifest.
        #[arg(long)]
        index: PathBuf,
        /// Word models; required when the script has QUERY_WAV lines.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        /// Minimum normalized score a doc needs in some list.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        /// Score multiplier for docs judged relevant.
        #[arg(long, default_value_t = 2.0)]
        boost: f64,
    },
}

enum Failure {
    Input(String),
    Assertion(String),
}

impl From<vircis_core::Error> for Failure {
    fn from(e: vircis_core::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("vircis: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("vircis: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> CmdResult {
    let mut out = io::stdout().lock();
    match command {
        Command::Synth {
            vocab,
            out: dir,
            count,
            seed,
        } => synth(&vocab, &dir, count, seed, &mut out),
        Command::Extract { wav, out: target } => {
            let clip = load_wav(&wav)?;
            let text = FrontendConfig::default().extract(&clip)?.to_text();
            match target {
                Some(p) => fs::write(p, text)?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(())
        }
        Command::Train {
            manifest,
            out: dir,
            states,
            iterations,
            seed,
        } => {
            let config = TrainConfig {
                num_states: states,
                iterations,
                seed,
            };
            train(&manifest, &dir, &config, &mut out)
        }
        Command::Recognize { wav, models } => {
            let clip = load_wav(&wav)?;
            let vocab = Vocabulary::load_dir(&models)?;
            let frontend = FrontendConfig::default();
            let transcriber = Transcriber::new(vocab);
            writeln!(out, "transcript: {}", transcriber.transcribe(&clip)?)?;
            for (label, score) in recognize(&clip, &transcriber.vocabulary, &frontend)?.ranked {
                writeln!(out, "{label}\t{score:?}")?;
            }
            Ok(())
        }
        Command::Eval {
            manifest,
            models,
            table,
        } => {
            let clips = load_labeled_clips(&load_manifest(&manifest)?)?;
            let vocab = Vocabulary::load_dir(&models)?;
            let report = evaluate(&clips, &vocab, &FrontendConfig::default())?;
            if table {
                write!(out, "{}", report.render_table())?;
            }
            write!(out, "{}", report.render_summary())?;
            Ok(())
        }
        Command::Index { corpus, out: target } => {
            let docs = load_corpus(&corpus)?;
            let index = index_documents(&docs, &default_stopwords())?;
            index.save(&target)?;
            writeln!(
                out,
                "indexed {} documents, {} terms",
                index.doc_count(),
                index.terms().count()
            )?;
            Ok(())
        }
        Command::Search { index, top_k, query } => {
            let index = load_index_or_corpus(&index)?;
            for e in index.search(&query.join(" "), top_k).entries {
                writeln!(out, "{}\t{:?}", e.doc_id, e.score)?;
            }
            Ok(())
        }
        Command::Session {
            action:
                SessionAction::Replay {
                    script,
                    index,
                    models,
                    top_k,
                    threshold,
                    boost,
                },
        } => {
            let filter = RelevanceFilterConfig { threshold, boost };
            session_replay(&script, &index, models.as_deref(), top_k, filter, &mut out)
        }
        Command::Serve {
            port,
            host,
            corpus,
            models,
        } => {
            drop(out);
            serve(&host, ServiceConfig { port, corpus, models })
        }
    }
}

fn synth(vocab: &Path, dir: &Path, count: usize, seed: u64, out: &mut impl Write) -> CmdResult {
    let words = parse_vocabulary(&fs::read_to_string(vocab)?)?;
    fs::create_dir_all(dir)?;
    let mut synth = Synthesizer::new(SynthConfig::default(), seed);
    let mut entries = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for clip in synth.render_set(&words, count)? {
        let label = clip.label.clone().expect("synthesizer labels its clips");
        let n = seen.entry(label.clone()).or_default();
        let name = format!("{label}-{n:03}.wav");
        *n += 1;
        save_wav(&clip, dir.join(&name))?;
        entries.push(ManifestEntry {
            label,
            path: PathBuf::from(name),
        });
    }
    fs::write(dir.join("manifest.tsv"), render_manifest(&entries))?;
    writeln!(out, "wrote {} clips to {}", entries.len(), dir.display())?;
    Ok(())
}

fn train(manifest: &Path, dir: &Path, config: &TrainConfig, out: &mut impl Write) -> CmdResult {
    let clips = load_labeled_clips(&load_manifest(manifest)?)?;
    let frontend = FrontendConfig::default();
    let mut by_label: BTreeMap<String, Vec<FeatureMatrix>> = BTreeMap::new();
    for clip in &clips {
        let label = clip.label.clone().expect("manifest clips are labeled");
        by_label.entry(label).or_default().push(frontend.extract(clip)?);
    }
    if by_label.is_empty() {
        return Err(Failure::Input("manifest lists no clips".into()));
    }
    fs::create_dir_all(dir)?;
    for (label, feats) in &by_label {
        let run = train_with_trace(label, feats, config)?;
        run.model
            .save(dir.join(format!("{label}.{}", vircis_core::recognizer::MODEL_EXTENSION)))?;
        let ll = run.log_likelihoods.last().copied().unwrap_or(f64::NAN);
        writeln!(out, "{label}\t{} clips\tlog-likelihood {ll:.6}", feats.len())?;
    }
    Ok(())
}

fn session_replay(
    script: &Path,
    index: &Path,
    models: Option<&Path>,
    top_k: usize,
    filter: RelevanceFilterConfig,
    out: &mut impl Write,
) -> CmdResult {
    let lines = parse_script(&fs::read_to_string(script)?)?;
    let index: InvertedIndex = load_index_or_corpus(index)?;
    let transcriber = match models {
        Some(dir) => Some(Transcriber::new(Vocabulary::load_dir(dir)?)),
        None => None,
    };
    let name = script
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "replay".into());
    let mut session = Session::with_config(name, filter, top_k)?;
    let base = script.parent().unwrap_or_else(|| Path::new("."));
    let report = replay(&lines, &mut session, &index, transcriber.as_ref(), base)?;
    for (line, text) in &report.transcripts {
        writeln!(out, "# line {line} transcript: {text}")?;
    }
    for e in &report.merged.entries {
        writeln!(out, "{}\t{:?}\t{}", e.doc_id, e.score, e.contributors)?;
    }
    if report.passed() {
        writeln!(out, "# {} expectation(s) passed", report.expectations_checked)?;
        return Ok(());
    }
    let detail: Vec<String> = report
        .failures
        .iter()
        .map(|f| {
            format!(
                "line {}: expected top {}, got {}",
                f.line,
                f.expected,
                f.actual.as_deref().unwrap_or("nothing")
            )
        })
        .collect();
    Err(Failure::Assertion(detail.join("; ")))
}

fn serve(host: &str, config: ServiceConfig) -> CmdResult {
    let state = Arc::new(config.build_state()?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, config.port)).await?;
        println!("listening on http://{}", listener.local_addr()?);
        vircis_service::serve(listener, state).await
    })?;
    Ok(())
}
