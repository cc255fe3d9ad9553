//! Experiment orchestration behind the command line: configuration, training
//! runs, results matrices, attack metrics files and plots.

pub mod attack_report;
pub mod config;
pub mod matrix;
pub mod plot;
pub mod run;

pub use attack_report::attack_metrics_csv;
pub use config::{parse_pairs, DatasetSpec, ExperimentSpec, Method};
pub use matrix::{evaluate_model, evaluate_run, MatrixCell, ModelEval, ResultsMatrix, RunEval};
pub use plot::overlay_svg;
pub use run::{run_training, RunDir, TrainRun};

use crate::error::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ARTIFACT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Process exit code for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite(_) => EXIT_NUMERICAL,
        Error::Checkpoint(_)
        | Error::SchemaVersion { .. }
        | Error::StructuralMismatch(_)
        | Error::Ingest { .. }
        | Error::IngestScene { .. }
        | Error::WidthMismatch { .. }
        | Error::Csv(_) => EXIT_ARTIFACT,
        _ => EXIT_USAGE,
    }
}
