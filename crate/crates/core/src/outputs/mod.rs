//! Bit-stable writers: legacy VTK fields and surfaces, and the metrics JSON.

mod metrics;
mod vtk;

use std::path::PathBuf;

pub use metrics::{write_json, write_metrics, HourSummary, Peak, Probe, RunInfo, RunMetrics, METRICS_SCHEMA_VERSION};
pub use vtk::{
    fmt_e, parse_vtk_structured, vtk_polydata_string, vtk_structured_string, write_vtk_polydata, write_vtk_structured,
    CellArray, FieldGrid,
};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("array '{name}' has {found} values, expected {expected}")]
    LengthMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("VTK parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
