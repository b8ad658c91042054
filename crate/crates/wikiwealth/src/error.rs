use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] wikiwealth_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    /// Malformed binary file. `offset` is the byte position of the problem.
    #[error("{}: byte {offset}: {reason}", path.display())]
    Format { code: &'static str, path: PathBuf, offset: u64, reason: String },
    /// Malformed text file at a 1-based line.
    #[error("{}: line {line}: {reason}", path.display())]
    Parse { code: &'static str, path: PathBuf, line: u64, reason: String },
    #[error("{0}")]
    Config(String),
}

impl Error {
    /// `module.kind` identifier printed ahead of the message.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Core(e) => e.code(),
            Error::Io { .. } => "io.unreadable",
            Error::Format { code, .. } | Error::Parse { code, .. } => code,
            Error::Config(_) => "cli.config",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
