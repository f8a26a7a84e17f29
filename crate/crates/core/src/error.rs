use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    #[error("label count {labels} does not match vertex count {vertices}")]
    LabelMismatch { labels: usize, vertices: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(&'static str),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("class id {0} outside 0..=16")]
    InvalidClass(u32),

    #[error("point cloud has no labels")]
    MissingLabels,

    #[error("need more than {needed} boundary points, found {found}")]
    TooFewBoundaryPoints { needed: usize, found: usize },

    #[error("simplification stopped at {reached} vertices before reaching target {target}")]
    TargetUnreachable { target: usize, reached: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid camera grid: n_lat={n_lat}, n_lon={n_lon}")]
    InvalidGrid { n_lat: usize, n_lon: usize },

    #[error("score map shape {actual:?} does not match view resolution {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("no point is visible in any view")]
    NoVisiblePoints,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: impl Into<Option<usize>>, message: impl Into<String>) -> Self {
        Error::Parse {
            line: line.into(),
            message: message.into(),
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::LabelMismatch { .. } => "label_mismatch",
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::DegenerateMesh(_) => "degenerate_mesh",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InvalidClass(_) => "invalid_class",
            Error::MissingLabels => "missing_labels",
            Error::TooFewBoundaryPoints { .. } => "too_few_boundary_points",
            Error::TargetUnreachable { .. } => "target_unreachable",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidGrid { .. } => "invalid_grid",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NoVisiblePoints => "no_visible_points",
        }
    }
}
