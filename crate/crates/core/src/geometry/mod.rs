//! Building geometry: STL ingestion, cleaning, per-building statistics,
//! ground plane, obstacle rasters and the plan-view index map.

mod footprint;
mod index;
mod mesh;
mod stl;
mod svg;
mod vec3;

use std::path::PathBuf;

use thiserror::Error;

pub use footprint::{rasterize_footprints, rasterize_on, Footprint, Grid2, HeightRaster, ObstacleMask};
pub use index::{
    build_index, generate_ground_plane, write_building_index, write_combined_stl, Building, BuildingSet,
    GeometryConfig, IdScheme, IndexEntry,
};
pub use mesh::{box_mesh, clean_mesh, subdivide_mesh, CleanReport, TriangleMesh};
pub use stl::{load_stl, parse_stl, write_ascii_stl, write_binary_stl, StlError};
pub use svg::{render_index_map, render_index_svg};
pub use vec3::Vec3;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("{}: {source}", path.display())]
    Load { path: PathBuf, source: StlError },
    #[error("{} STL file(s) failed to load: {}", .0.len(), summarize(.0))]
    LoadFailures(Vec<(PathBuf, String)>),
    #[error("no STL files found in {}", .0.display())]
    EmptyDirectory(PathBuf),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh degenerate after cleaning")]
    Degenerate,
    #[error("degenerate plan extents")]
    DegeneratePlan,
    #[error("invalid geometry config: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

fn summarize(failures: &[(PathBuf, String)]) -> String {
    failures
        .iter()
        .map(|(p, e)| format!("{}: {e}", p.display()))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Surface role of a building face, used for material assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceKind {
    Roof,
    Wall,
    /// Downward face resting on the ground; no exchange with the outdoors.
    Floor,
}

/// Normals steeper than this (|n_z|) count as horizontal faces.
pub const HORIZONTAL_NZ: f64 = 0.7;
/// Downward faces whose centroid sits below this height are ground contact.
pub const GROUND_CONTACT_Z: f64 = 0.1;

pub fn classify_face(normal: Vec3, centroid_z: f64) -> FaceKind {
    if normal.z > HORIZONTAL_NZ {
        FaceKind::Roof
    } else if normal.z < -HORIZONTAL_NZ && centroid_z < GROUND_CONTACT_Z {
        FaceKind::Floor
    } else {
        FaceKind::Wall
    }
}
