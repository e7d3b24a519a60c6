//! Building index: per-file loading, IDs, statistics and the combined scene.

use std::collections::HashSet;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    classify_face, clean_mesh, load_stl, write_binary_stl, CleanReport, FaceKind, Footprint, GeometryError,
    TriangleMesh, Vec3,
};

/// How building IDs are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdScheme {
    /// Lowercased filename stem with non-alphanumerics replaced by `_`.
    #[default]
    FileStem,
    /// `b001`, `b002`, … in sorted filename order.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    pub weld_tolerance: f64,
    pub cell_size: f64,
    pub buffer_factor: f64,
    pub id_scheme: IdScheme,
    /// Skip files that fail to load instead of aborting.
    pub permissive: bool,
    /// Translate meshes whose lowest point is off the ground onto z = 0.
    pub auto_shift_ground: bool,
    /// Explicit plan domain `[minx, miny, maxx, maxy]`; overrides the buffered bbox.
    pub domain: Option<[f64; 4]>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            weld_tolerance: 1e-6,
            cell_size: 2.0,
            buffer_factor: 1.2,
            id_scheme: IdScheme::FileStem,
            permissive: false,
            auto_shift_ground: false,
            domain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: String,
    /// Source file name (no directory).
    pub file: String,
    pub mesh: TriangleMesh,
    /// `[minx, miny, maxx, maxy]` in metres.
    pub bbox_xy: [f64; 4],
    pub height: f64,
    pub footprint_area: f64,
    pub volume: f64,
    /// Set when the mesh has boundary edges, so the volume is only indicative.
    pub volume_approximate: bool,
    /// Area of all faces exposed to outdoor air (ground-contact floors excluded).
    pub envelope_area: f64,
    pub footprint: Footprint,
    pub clean_report: CleanReport,
}

impl Building {
    /// Computes statistics for an already cleaned mesh. Inward-wound closed
    /// meshes are flipped so normals point outdoors.
    pub fn from_mesh(
        id: impl Into<String>,
        file: impl Into<String>,
        mut mesh: TriangleMesh,
        cell_size: f64,
    ) -> Result<Building, GeometryError> {
        mesh.validate()?;
        let (lo, hi) = mesh.bounds().ok_or(GeometryError::Degenerate)?;
        let signed: f64 = (0..mesh.triangles.len())
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                a.dot(b.cross(c))
            })
            .sum();
        if signed < 0.0 {
            for t in &mut mesh.triangles {
                t.swap(1, 2);
            }
        }
        let height = hi.z;
        if height < 0.0 {
            return Err(GeometryError::InvalidMesh(format!(
                "mesh lies below ground (max z {})",
                hi.z
            )));
        }
        let footprint = Footprint::from_mesh(&mesh, cell_size);
        if !(footprint.area > 0.0) {
            return Err(GeometryError::InvalidMesh(
                "no upward-facing faces, footprint is empty".into(),
            ));
        }
        let envelope_area = (0..mesh.triangles.len())
            .filter(|&t| {
                let n = mesh.triangle_normal(t).unwrap_or(Vec3::ZERO);
                classify_face(n, mesh.centroid(t).z) != FaceKind::Floor
            })
            .map(|t| mesh.triangle_area(t))
            .sum();
        Ok(Building {
            id: id.into(),
            file: file.into(),
            bbox_xy: [lo.x, lo.y, hi.x, hi.y],
            height,
            footprint_area: footprint.area,
            volume: mesh.enclosed_volume(),
            volume_approximate: !mesh.is_watertight(),
            envelope_area,
            footprint,
            clean_report: CleanReport::default(),
            mesh,
        })
    }

    pub fn index_entry(&self) -> IndexEntry {
        IndexEntry {
            id: self.id.clone(),
            file: self.file.clone(),
            bbox_xy: self.bbox_xy,
            height_m: self.height,
            footprint_area_m2: self.footprint_area,
            volume_m3: self.volume,
            envelope_area_m2: self.envelope_area,
            volume_approximate: self.volume_approximate,
        }
    }
}

/// One row of `building_index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub file: String,
    pub bbox_xy: [f64; 4],
    pub height_m: f64,
    pub footprint_area_m2: f64,
    pub volume_m3: f64,
    pub envelope_area_m2: f64,
    pub volume_approximate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingSet {
    pub buildings: Vec<Building>,
    pub combined_mesh: TriangleMesh,
    pub ground: TriangleMesh,
    /// Plan extent of the simulation domain (the ground plane).
    pub domain_bbox: [f64; 4],
    pub cell_size: f64,
    /// Files skipped under the permissive flag, with their errors.
    pub skipped: Vec<(String, String)>,
}

impl BuildingSet {
    /// Assembles a set from prepared buildings. The domain is the configured
    /// override, or the buildings' plan bbox scaled by the buffer factor.
    pub fn from_buildings(buildings: Vec<Building>, config: &GeometryConfig) -> Result<BuildingSet, GeometryError> {
        let ids: HashSet<&str> = buildings.iter().map(|b| b.id.as_str()).collect();
        if ids.len() != buildings.len() {
            return Err(GeometryError::Config("duplicate building ids".into()));
        }
        if !(config.cell_size > 0.0) {
            return Err(GeometryError::Config(format!(
                "cell_size must be > 0, got {}",
                config.cell_size
            )));
        }
        let mut combined_mesh = TriangleMesh::default();
        for b in &buildings {
            combined_mesh.append(&b.mesh);
        }
        let mut set = BuildingSet {
            buildings,
            combined_mesh,
            ground: TriangleMesh::default(),
            domain_bbox: [0.0; 4],
            cell_size: config.cell_size,
            skipped: Vec::new(),
        };
        let domain = match config.domain {
            Some(d) => {
                if !(d[2] > d[0] && d[3] > d[1]) {
                    return Err(GeometryError::DegeneratePlan);
                }
                d
            }
            None => buffered_bbox(
                set.plan_bbox().ok_or(GeometryError::DegeneratePlan)?,
                config.buffer_factor,
            )?,
        };
        set.domain_bbox = domain;
        set.ground = triangulate_rect(domain, config.cell_size)?;
        Ok(set)
    }

    /// Combined plan bbox of all buildings.
    pub fn plan_bbox(&self) -> Option<[f64; 4]> {
        self.buildings
            .iter()
            .map(|b| b.bbox_xy)
            .reduce(|a, b| [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])])
    }

    pub fn get(&self, id: &str) -> Option<&Building> {
        self.buildings.iter().find(|b| b.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.buildings.iter().map(|b| b.id.as_str()).collect()
    }

    pub fn index_entries(&self) -> Vec<IndexEntry> {
        self.buildings.iter().map(Building::index_entry).collect()
    }
}

fn buffered_bbox(bb: [f64; 4], factor: f64) -> Result<[f64; 4], GeometryError> {
    if !(factor >= 1.0) {
        return Err(GeometryError::Config(format!(
            "buffer factor must be >= 1, got {factor}"
        )));
    }
    let (w, h) = (bb[2] - bb[0], bb[3] - bb[1]);
    if !(w > 0.0 && h > 0.0) {
        return Err(GeometryError::DegeneratePlan);
    }
    let (cx, cy) = (0.5 * (bb[0] + bb[2]), 0.5 * (bb[1] + bb[3]));
    let (hw, hh) = (0.5 * w * factor, 0.5 * h * factor);
    Ok([cx - hw, cy - hh, cx + hw, cy + hh])
}

/// Upward-facing z = 0 rectangle split into near-square cells no larger
/// than `cell_size`, two triangles each.
fn triangulate_rect(r: [f64; 4], cell_size: f64) -> Result<TriangleMesh, GeometryError> {
    let (w, h) = (r[2] - r[0], r[3] - r[1]);
    if !(w > 0.0 && h > 0.0) {
        return Err(GeometryError::DegeneratePlan);
    }
    let nx = ((w / cell_size) - 1e-9).ceil().max(1.0) as usize;
    let ny = ((h / cell_size) - 1e-9).ceil().max(1.0) as usize;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // Hit the far edge exactly rather than accumulating round-off.
        let y = if j == ny { r[3] } else { r[1] + h * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { r[2] } else { r[0] + w * i as f64 / nx as f64 };
            vertices.push(Vec3::new(x, y, 0.0));
        }
    }
    let v = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
            triangles.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
        }
    }
    Ok(TriangleMesh {
        vertices,
        triangles,
        normals: None,
    })
}

/// Ground plane at z = 0 covering the buildings' plan bbox scaled about its
/// centre, triangulated at the set's cell size.
pub fn generate_ground_plane(set: &BuildingSet, buffer_factor: f64) -> Result<TriangleMesh, GeometryError> {
    let bb = set.plan_bbox().ok_or(GeometryError::DegeneratePlan)?;
    triangulate_rect(buffered_bbox(bb, buffer_factor)?, set.cell_size)
}

fn stem_id(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let id: String = stem
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if id.is_empty() {
        "building".into()
    } else {
        id
    }
}

/// Assigns IDs to files in the given (sorted) order.
fn assign_ids(files: &[PathBuf], scheme: IdScheme) -> Vec<String> {
    match scheme {
        IdScheme::Sequential => {
            let width = files.len().to_string().len().max(3);
            (1..=files.len()).map(|k| format!("b{k:0width$}")).collect()
        }
        IdScheme::FileStem => {
            let mut taken = HashSet::new();
            let mut out = Vec::with_capacity(files.len());
            for f in files {
                let base = stem_id(f);
                let mut id = base.clone();
                let mut k = 1;
                while taken.contains(&id) {
                    id = format!("{base}_{k}");
                    k += 1;
                }
                taken.insert(id.clone());
                out.push(id);
            }
            out
        }
    }
}

fn list_stl(dir: &Path) -> Result<Vec<PathBuf>, GeometryError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.to_string_lossy().eq_ignore_ascii_case("stl"))
        })
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn load_building(path: &Path, id: &str, config: &GeometryConfig) -> Result<Building, GeometryError> {
    let raw = load_stl(path).map_err(|source| GeometryError::Load {
        path: path.to_path_buf(),
        source,
    })?;
    let (mut mesh, report) = clean_mesh(&raw, config.weld_tolerance)?;
    let (lo, _) = mesh.bounds().ok_or(GeometryError::Degenerate)?;
    if lo.z.abs() > 1e-6 {
        if config.auto_shift_ground {
            warn!(
                "{}: min z = {:.4} m, shifting onto the ground plane",
                path.display(),
                lo.z
            );
            mesh.translate(Vec3::new(0.0, 0.0, -lo.z));
        } else {
            warn!("{}: min z = {:.4} m, ground is fixed at z = 0", path.display(), lo.z);
        }
    }
    let file = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut b = Building::from_mesh(id, file, mesh, config.cell_size)?;
    b.clean_report = report;
    Ok(b)
}

/// Loads every `.stl` in `dir` (sorted by name) into a [`BuildingSet`].
pub fn build_index(dir: impl AsRef<Path>, config: &GeometryConfig) -> Result<BuildingSet, GeometryError> {
    let dir = dir.as_ref();
    let files = list_stl(dir)?;
    if files.is_empty() {
        return Err(GeometryError::EmptyDirectory(dir.to_path_buf()));
    }
    let ids = assign_ids(&files, config.id_scheme);
    let results: Vec<Result<Building, GeometryError>> = files
        .par_iter()
        .zip(ids.par_iter())
        .map(|(f, id)| load_building(f, id, config))
        .collect();

    let mut buildings = Vec::new();
    let mut failures = Vec::new();
    for (f, r) in files.iter().zip(results) {
        match r {
            Ok(b) => buildings.push(b),
            Err(e) => failures.push((f.clone(), e.to_string())),
        }
    }
    if !failures.is_empty() && !config.permissive {
        return Err(GeometryError::LoadFailures(failures));
    }
    for (f, e) in &failures {
        warn!("skipping {}: {e}", f.display());
    }
    if buildings.is_empty() {
        return Err(GeometryError::LoadFailures(failures));
    }
    let mut set = BuildingSet::from_buildings(buildings, config)?;
    set.skipped = failures
        .into_iter()
        .map(|(f, e)| (f.display().to_string(), e))
        .collect();
    Ok(set)
}

pub fn write_building_index(set: &BuildingSet, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    let json = serde_json::to_string_pretty(&set.index_entries()).expect("index entries serialize");
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn write_combined_stl(set: &BuildingSet, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    let f = BufWriter::new(fs::File::create(path)?);
    write_binary_stl(&set.combined_mesh, "microclimate combined buildings", f)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_mesh, write_ascii_stl};

    fn write_box(dir: &Path, name: &str, min: Vec3, max: Vec3) {
        let f = fs::File::create(dir.join(name)).unwrap();
        write_ascii_stl(&box_mesh(min, max), "b", f).unwrap();
    }

    #[test]
    fn two_unit_cubes() {
        let d = tempfile::tempdir().unwrap();
        write_box(
            d.path(),
            "b002.stl",
            Vec3::new(10.0, 0.0, 0.0),
            Vec3::new(11.0, 1.0, 1.0),
        );
        write_box(d.path(), "b001.stl", Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0));
        let set = build_index(d.path(), &GeometryConfig::default()).unwrap();
        assert_eq!(set.ids(), ["b001", "b002"]);
        for b in &set.buildings {
            assert!((b.height - 1.0).abs() < 1e-12);
            assert!(!b.volume_approximate);
        }
        assert_eq!(set.combined_mesh.triangles.len(), 24);
    }

    #[test]
    fn stem_collision_suffixes() {
        let files = [
            PathBuf::from("Tower.stl"),
            PathBuf::from("tower.STL"),
            PathBuf::from("to wer.stl"),
        ];
        assert_eq!(assign_ids(&files, IdScheme::FileStem), ["tower", "tower_1", "to_wer"]);
        assert_eq!(assign_ids(&files, IdScheme::Sequential), ["b001", "b002", "b003"]);
    }

    #[test]
    fn prism_statistics() {
        let m = box_mesh(Vec3::ZERO, Vec3::new(20.0, 20.0, 30.0));
        let b = Building::from_mesh("t", "t.stl", m, 2.0).unwrap();
        assert!((b.height - 30.0).abs() < 1e-12);
        assert!((b.footprint_area - 400.0).abs() < 1e-9);
        assert!((b.volume - 12000.0).abs() < 1e-9 * 12000.0);
        assert!((b.envelope_area - (400.0 + 4.0 * 600.0)).abs() < 1e-9);
    }

    #[test]
    fn inward_winding_is_flipped() {
        let mut m = box_mesh(Vec3::ZERO, Vec3::new(2.0, 2.0, 2.0));
        for t in &mut m.triangles {
            t.swap(1, 2);
        }
        let b = Building::from_mesh("x", "x.stl", m, 1.0).unwrap();
        assert!((b.footprint_area - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ground_plane_buffer() {
        let a = Building::from_mesh("a", "a", box_mesh(Vec3::ZERO, Vec3::new(10.0, 10.0, 5.0)), 2.0).unwrap();
        let b = Building::from_mesh(
            "b",
            "b",
            box_mesh(Vec3::new(990.0, 990.0, 0.0), Vec3::new(1000.0, 1000.0, 5.0)),
            2.0,
        )
        .unwrap();
        let set = BuildingSet::from_buildings(
            vec![a, b],
            &GeometryConfig {
                cell_size: 50.0,
                ..Default::default()
            },
        )
        .unwrap();
        let g = generate_ground_plane(&set, 1.2).unwrap();
        let (lo, hi) = g.bounds().unwrap();
        assert_eq!((lo.x, hi.x), (-100.0, 1100.0));
        assert_eq!(set.domain_bbox, [-100.0, -100.0, 1100.0, 1100.0]);
        let g1 = generate_ground_plane(&set, 1.0).unwrap();
        let (lo, hi) = g1.bounds().unwrap();
        assert_eq!((lo.x, lo.y, hi.x, hi.y), (0.0, 0.0, 1000.0, 1000.0));
        assert!((g.surface_area() - 1200.0 * 1200.0).abs() < 1e-6);
        assert!((0..g.triangles.len()).all(|t| g.triangle_normal(t).unwrap().z > 0.999));
    }

    #[test]
    fn point_like_building_has_degenerate_plan() {
        let set = BuildingSet {
            buildings: vec![],
            combined_mesh: TriangleMesh::default(),
            ground: TriangleMesh::default(),
            domain_bbox: [0.0; 4],
            cell_size: 2.0,
            skipped: vec![],
        };
        assert!(matches!(
            generate_ground_plane(&set, 1.2),
            Err(GeometryError::DegeneratePlan)
        ));
        assert_eq!(
            buffered_bbox([5.0, 5.0, 5.0, 5.0], 1.2).unwrap_err().to_string(),
            "degenerate plan extents"
        );
    }

    #[test]
    fn bad_file_aborts_or_is_skipped() {
        let d = tempfile::tempdir().unwrap();
        write_box(d.path(), "good.stl", Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0));
        fs::write(d.path().join("bad.stl"), b"not an stl").unwrap();
        assert!(matches!(
            build_index(d.path(), &GeometryConfig::default()),
            Err(GeometryError::LoadFailures(f)) if f.len() == 1
        ));
        let set = build_index(
            d.path(),
            &GeometryConfig {
                permissive: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(set.ids(), ["good"]);
        assert_eq!(set.skipped.len(), 1);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(
            build_index(d.path(), &GeometryConfig::default()),
            Err(GeometryError::EmptyDirectory(_))
        ));
    }
}
