//! Driving scenes: types, synthetic generation, flat-file I/O and semantic
//! labels.

pub mod generate;
pub mod io;
pub mod labels;
mod types;

pub use generate::{generate_dataset, generate_scene, generate_synthetic_scene, Template, TemplateMix};
pub use io::{export_scenes, ingest_scenes, map_path_for};
pub use labels::{compute_time_headway, label_lateral_intention, semantic_labels, LabelConfig};
pub use types::*;
