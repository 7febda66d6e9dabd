//! File formats: pose sequences, pipeline configuration, point sets, and
//! metric reports. Everything is JSON with numbers printed at full
//! round-trip precision (the shortest decimal that parses back to the same
//! binary float), so files stay human-inspectable without losing accuracy.
//!
//! Positions in all files are meters; reports convert to millimeters.

mod config;
mod report;
mod sequence;

pub use config::{PipelineConfig, StageToggles};
pub use report::{write_traces_csv, GroupJitter, MetricsReport, Timing};
pub use sequence::{
    load_points, load_sequence, save_points, save_sequence, FrameBundle, PointsFile, Sequence,
};
