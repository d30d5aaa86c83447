use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed mesh: {0}")]
    MalformedMesh(String),
    #[error("mesh is not watertight: {0}")]
    NonWatertight(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("no stable pose found")]
    NoStablePose,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("mesh file referenced by `{object}` is missing: {path}")]
    MissingMeshFile { object: String, path: PathBuf },
    #[error("unknown object id `{0}`")]
    UnknownObjectId(String),
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("unknown scene instance {0}")]
    UnknownInstance(usize),
    #[error("no records carry both a simulated and a real label")]
    NoPairedRecords,
    #[error("metric `{0}` is undefined: zero denominator")]
    UndefinedMetric(&'static str),
    #[error("scene has no objects")]
    EmptyScene,
    #[error("marker id {0} is not in the dictionary")]
    UnknownMarkerId(u32),
    #[error("marker board overflow: {0}")]
    BoardOverflow(String),
    #[error("page {width_mm}x{height_mm} mm is smaller than the 100x100 mm minimum")]
    PageTooSmall { width_mm: f64, height_mm: f64 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("png encoding error: {0}")]
    Png(#[from] png::EncodingError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::SchemaViolation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
