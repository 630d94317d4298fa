use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// A bad configuration value. `line` is `None` for command-line overrides
    /// and for checks that involve several fields.
    #[error("{}field `{field}`: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        field: String,
        message: String,
    },

    #[error("{}: line {line}: {message}", path.display())]
    AnchorFile { path: PathBuf, line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] geoaccel::error::Error),

    #[error("rate fit: {0}")]
    Fit(String),

    #[error("property suite: {0}")]
    Verify(String),
}

impl BenchError {
    pub(crate) fn config(line: Option<usize>, field: impl Into<String>, message: impl Into<String>) -> Self {
        BenchError::Config {
            line,
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::Config { .. } => "config",
            BenchError::AnchorFile { .. } => "anchor_file",
            BenchError::Io { .. } => "io",
            BenchError::Solver(_) => "solver",
            BenchError::Fit(_) => "fit",
            BenchError::Verify(_) => "verify",
        }
    }

    /// Single-line `key=value` rendering for scripts, e.g.
    /// `error kind=config line=3 field=epsilon message="..."`.
    pub fn machine_line(&self) -> String {
        let mut out = format!("error kind={}", self.kind());
        match self {
            BenchError::Config { line, field, message } => {
                if let Some(l) = line {
                    out.push_str(&format!(" line={l}"));
                }
                out.push_str(&format!(" field={field} message={}", quote(message)));
            }
            BenchError::AnchorFile { path, line, message } => {
                out.push_str(&format!(
                    " path={} line={line} message={}",
                    quote(&path.display().to_string()),
                    quote(message)
                ));
            }
            BenchError::Io { path, source } => {
                out.push_str(&format!(
                    " path={} message={}",
                    quote(&path.display().to_string()),
                    quote(&source.to_string())
                ));
            }
            BenchError::Solver(e) => out.push_str(&format!(" message={}", quote(&e.to_string()))),
            BenchError::Fit(m) | BenchError::Verify(m) => out.push_str(&format!(" message={}", quote(m))),
        }
        out
    }
}

fn quote(s: &str) -> String {
    format!("{s:?}")
}

pub type Result<T> = std::result::Result<T, BenchError>;
