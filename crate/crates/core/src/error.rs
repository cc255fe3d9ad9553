use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown scenario template `{0}`")]
    UnknownTemplate(String),

    #[error("invalid scene {scene}: {reason}")]
    InvalidScene { scene: u64, reason: String },

    #[error("line {line}: {reason}")]
    Ingest { line: u64, reason: String },

    #[error("scene {scene} (line {line}): {reason}")]
    IngestScene { scene: u64, line: u64, reason: String },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("degenerate trajectory: no two distinct consecutive waypoints")]
    DegenerateTrajectory,

    #[error("empty input")]
    EmptyInput,

    #[error("{group} input has width {found}, expected {expected}")]
    WidthMismatch {
        group: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("scenes differ structurally: {0}")]
    StructuralMismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
