use std::fmt;
use std::path::Path;

/// Failure reported as one JSON line on stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

impl CliError {
    pub fn usage(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn runtime(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_RUNTIME,
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn missing_input(path: &Path) -> Self {
        Self::usage("missing_input", format!("input not found: {}", path.display()))
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::runtime("io", format!("{}: {err}", path.display()))
    }

    /// Prefixes the message, e.g. with the failing pipeline stage.
    pub fn context(mut self, prefix: &str) -> Self {
        self.message = format!("{prefix}: {}", self.message);
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind, "message": self.message } }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<dentmesh::Error> for CliError {
    fn from(err: dentmesh::Error) -> Self {
        use dentmesh::Error::*;
        let code = match err {
            Parse { .. }
            | LabelMismatch { .. }
            | InvalidMesh(_)
            | DegenerateMesh(_)
            | LengthMismatch { .. }
            | InvalidClass(_)
            | MissingLabels
            | InvalidConfig(_)
            | InvalidGrid { .. }
            | ShapeMismatch { .. } => EXIT_USAGE,
            Io { .. } | TooFewBoundaryPoints { .. } | TargetUnreachable { .. } | NoVisiblePoints => EXIT_RUNTIME,
        };
        CliError {
            code,
            kind: err.kind().into(),
            message: err.to_string(),
        }
    }
}
