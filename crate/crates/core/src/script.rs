//! Scripted collaborative sessions.
//!
//! ```text
//! JOIN alice
//! QUERY alice speech recognition
//! QUERY_WAV bob clips/query.wav
//! JUDGE bob doc-7 irrel
//! EXPECT_TOP doc-3
//! ```

use std::path::{Path, PathBuf};

use crate::audio::load_wav;
use crate::cis::{MergedResult, Session};
use crate::ir::InvertedIndex;
use crate::recognizer::Transcriber;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptEvent {
    Join {
        collaborator: String,
    },
    Query {
        collaborator: String,
        text: String,
    },
    QueryWav {
        collaborator: String,
        path: PathBuf,
    },
    Judge {
        collaborator: String,
        doc_id: String,
        relevant: bool,
    },
    ExpectTop {
        doc_id: String,
    },
}

/// An event tagged with its 1-based source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptLine {
    pub line: usize,
    pub event: ScriptEvent,
}

fn split_word(s: &str) -> Option<(&str, &str)> {
    let s = s.trim_start();
    match s.split_once(char::is_whitespace) {
        Some((a, b)) => Some((a, b.trim())),
        None if !s.is_empty() => Some((s, "")),
        None => None,
    }
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptLine>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (keyword, rest) = split_word(trimmed).expect("non-empty line");
        let err = |msg: &str| Error::parse(line, format!("{keyword}: {msg}"));
        let event = match keyword {
            "JOIN" => {
                if rest.is_empty() || rest.contains(char::is_whitespace) {
                    return Err(err("expected `JOIN <collaborator>`"));
                }
                ScriptEvent::Join {
                    collaborator: rest.to_string(),
                }
            }
            "QUERY" | "QUERY_WAV" => {
                let Some((who, arg)) = split_word(rest).filter(|(_, a)| !a.is_empty()) else {
                    return Err(err("expected a collaborator and an argument"));
                };
                if keyword == "QUERY" {
                    ScriptEvent::Query {
                        collaborator: who.to_string(),
                        text: arg.to_string(),
                    }
                } else {
                    ScriptEvent::QueryWav {
                        collaborator: who.to_string(),
                        path: PathBuf::from(arg),
                    }
                }
            }
            "JUDGE" => {
                let parsed = split_word(rest).and_then(|(who, tail)| {
                    let (doc, flag) = tail.rsplit_once(char::is_whitespace)?;
                    Some((who, doc.trim(), flag))
                });
                let Some((who, doc, flag)) = parsed.filter(|(_, d, _)| !d.is_empty()) else {
                    return Err(err("expected `JUDGE <collaborator> <doc_id> <rel|irrel>`"));
                };
                let relevant = match flag {
                    "rel" => true,
                    "irrel" => false,
                    _ => return Err(err("judgment must be `rel` or `irrel`")),
                };
                ScriptEvent::Judge {
                    collaborator: who.to_string(),
                    doc_id: doc.to_string(),
                    relevant,
                }
            }
            "EXPECT_TOP" => {
                if rest.is_empty() {
                    return Err(err("expected a doc id"));
                }
                ScriptEvent::ExpectTop {
                    doc_id: rest.to_string(),
                }
            }
            other => return Err(Error::parse(line, format!("unknown command {other:?}"))),
        };
        out.push(ScriptLine { line, event });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectationFailure {
    pub line: usize,
    pub expected: String,
    pub actual: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub merged: MergedResult,
    /// `(line, transcript)` for each `QUERY_WAV`.
    pub transcripts: Vec<(usize, String)>,
    pub expectations_checked: usize,
    pub failures: Vec<ExpectationFailure>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `script` against `session`. `QUERY_WAV` paths resolve against
/// `base_dir` and need a transcriber. Expectation failures are collected,
/// not raised; any other error aborts the replay.
pub fn replay(
    script: &[ScriptLine],
    session: &mut Session,
    index: &InvertedIndex,
    transcriber: Option<&Transcriber>,
    base_dir: &Path,
) -> Result<ReplayReport> {
    let mut transcripts = Vec::new();
    let mut failures = Vec::new();
    let mut checked = 0;
    for ScriptLine { line, event } in script {
        let at_line = |e: Error| Error::parse(*line, e.to_string());
        match event {
            ScriptEvent::Join { collaborator } => {
                session.join(collaborator.clone()).map_err(at_line)?;
            }
            ScriptEvent::Query { collaborator, text } => {
                session.submit_query(collaborator, text, index).map_err(at_line)?;
            }
            ScriptEvent::QueryWav { collaborator, path } => {
                let transcriber =
                    transcriber.ok_or_else(|| Error::parse(*line, "QUERY_WAV needs a model directory"))?;
                let clip = load_wav(base_dir.join(path)).map_err(at_line)?;
                let text = transcriber.transcribe(&clip).map_err(at_line)?;
                session
                    .submit_query(collaborator, &text, index)
                    .map_err(at_line)?;
                transcripts.push((*line, text));
            }
            ScriptEvent::Judge {
                collaborator,
                doc_id,
                relevant,
            } => {
                session.judge(collaborator, doc_id, *relevant).map_err(at_line)?;
            }
            ScriptEvent::ExpectTop { doc_id } => {
                checked += 1;
                let actual = session.merged().top().map(|e| e.doc_id.clone());
                if actual.as_deref() != Some(doc_id.as_str()) {
                    failures.push(ExpectationFailure {
                        line: *line,
                        expected: doc_id.clone(),
                        actual,
                    });
                }
            }
        }
    }
    Ok(ReplayReport {
        merged: session.merged().clone(),
        transcripts,
        expectations_checked: checked,
        failures,
    })
}
