use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// The file is not a well-formed RIFF/WAVE container.
    #[error("malformed WAV data: {0}")]
    Format(String),

    /// Well-formed WAV, but not PCM-16.
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("input too short: {0}")]
    InputTooShort(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("empty observation sequence")]
    EmptyObservation,

    #[error("training data error: {0}")]
    TrainingData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("indexing error: {0}")]
    Indexing(String),

    #[error("collaborator {collaborator:?} is not a member of session {session:?}")]
    Membership { session: String, collaborator: String },

    #[error("invalid judgment: {0}")]
    Judgment(String),

    /// A text file (model, index, manifest, script) failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

impl From<hound::Error> for Error {
    fn from(err: hound::Error) -> Self {
        match err {
            // hound reports short reads as `Other`
            hound::Error::IoError(e)
                if matches!(e.kind(), io::ErrorKind::UnexpectedEof | io::ErrorKind::Other) =>
            {
                Error::Format(format!("truncated WAV data: {e}"))
            }
            hound::Error::IoError(e) => Error::Io(e),
            hound::Error::FormatError(msg) => Error::Format(msg.into()),
            hound::Error::Unsupported => Error::UnsupportedFormat("unsupported WAV encoding".into()),
            other => Error::Format(other.to_string()),
        }
    }
}
