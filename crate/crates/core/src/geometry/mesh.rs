use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Indexed triangle mesh in metres, z up.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Facet normals as read from the file, if any. Dropped by cleaning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<Vec<Vec3>>,
}

/// Counts reported by [`clean_mesh`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CleanReport {
    pub vertices_merged: usize,
    pub degenerate_removed: usize,
    pub duplicates_removed: usize,
}

impl TriangleMesh {
    /// Builds an unwelded mesh from a triangle soup.
    pub fn from_triangles(tris: &[[Vec3; 3]]) -> Self {
        let mut vertices = Vec::with_capacity(tris.len() * 3);
        let mut triangles = Vec::with_capacity(tris.len());
        for t in tris {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(t);
            triangles.push([base, base + 1, base + 2]);
        }
        TriangleMesh {
            vertices,
            triangles,
            normals: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn corners(&self, tri: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[tri];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Twice-area vector (unnormalized normal) of a triangle.
    #[inline]
    pub fn area_vector(&self, tri: usize) -> Vec3 {
        let [a, b, c] = self.corners(tri);
        (b - a).cross(c - a)
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        0.5 * self.area_vector(tri).norm()
    }

    pub fn triangle_normal(&self, tri: usize) -> Option<Vec3> {
        self.area_vector(tri).normalized()
    }

    pub fn centroid(&self, tri: usize) -> Vec3 {
        let [a, b, c] = self.corners(tri);
        (a + b + c) / 3.0
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Axis-aligned bounds `(min, max)`, or `None` for a mesh without triangles.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.triangles.iter().flatten();
        let first = self.vertices[*it.next()? as usize];
        let (mut lo, mut hi) = (first, first);
        for &i in it {
            let v = self.vertices[i as usize];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Some((lo, hi))
    }

    /// Signed-tetrahedron volume (absolute value). Exact for closed,
    /// consistently oriented meshes.
    pub fn enclosed_volume(&self) -> f64 {
        let mut six_v = 0.0;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            six_v += a.dot(b.cross(c));
        }
        (six_v / 6.0).abs()
    }

    /// True when every undirected edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges.values().all(|&n| n == 2)
    }

    pub fn translate(&mut self, offset: Vec3) {
        for v in &mut self.vertices {
            *v += offset;
        }
    }

    /// Appends `other`, re-indexing its triangles.
    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        self.normals = None;
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len() as u32;
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(GeometryError::InvalidMesh(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }
        if let Some(i) = self.vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidMesh(format!("vertex {i} is not finite")));
        }
        Ok(())
    }
}

/// Welds vertices closer than `weld_tolerance`, then drops zero-area and
/// duplicate triangles and unreferenced vertices.
pub fn clean_mesh(mesh: &TriangleMesh, weld_tolerance: f64) -> Result<(TriangleMesh, CleanReport), GeometryError> {
    mesh.validate()?;
    let tol = weld_tolerance.max(0.0);
    let mut report = CleanReport::default();

    // Vertex welding on a hash grid with cell = tolerance; neighbours in the
    // 27 surrounding cells are checked so nothing within `tol` slips through.
    let cell = if tol > 0.0 { tol } else { 1.0 };
    let key = |v: Vec3| -> (i64, i64, i64) {
        if tol > 0.0 {
            (
                (v.x / cell).floor() as i64,
                (v.y / cell).floor() as i64,
                (v.z / cell).floor() as i64,
            )
        } else {
            (v.x.to_bits() as i64, v.y.to_bits() as i64, v.z.to_bits() as i64)
        }
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    let mut remap = vec![0u32; mesh.vertices.len()];
    let mut welded: Vec<Vec3> = Vec::new();
    let mut used = vec![false; mesh.vertices.len()];
    for t in &mesh.triangles {
        for &i in t {
            used[i as usize] = true;
        }
    }
    for (i, &v) in mesh.vertices.iter().enumerate() {
        if !used[i] {
            continue;
        }
        let k = key(v);
        let mut found = None;
        if tol > 0.0 {
            'outer: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        // Keys saturate for huge coordinates; the exact distance check
                        // below still decides, so wrapping neighbours is harmless.
                        let n = (k.0.wrapping_add(dx), k.1.wrapping_add(dy), k.2.wrapping_add(dz));
                        if let Some(bucket) = grid.get(&n) {
                            for &w in bucket {
                                if (welded[w as usize] - v).norm() <= tol {
                                    found = Some(w);
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
            }
        } else if let Some(bucket) = grid.get(&k) {
            found = bucket.iter().copied().find(|&w| welded[w as usize] == v);
        }
        remap[i] = match found {
            Some(w) => {
                report.vertices_merged += 1;
                w
            }
            None => {
                let w = welded.len() as u32;
                welded.push(v);
                grid.entry(k).or_default().push(w);
                w
            }
        };
    }

    let area_floor = (0.5 * tol * tol).max(1e-14);
    let mut seen: HashSet<[u32; 3]> = HashSet::new();
    let mut triangles = Vec::with_capacity(mesh.triangles.len());
    for t in &mesh.triangles {
        let r = [remap[t[0] as usize], remap[t[1] as usize], remap[t[2] as usize]];
        if r[0] == r[1] || r[1] == r[2] || r[0] == r[2] {
            report.degenerate_removed += 1;
            continue;
        }
        let (a, b, c) = (welded[r[0] as usize], welded[r[1] as usize], welded[r[2] as usize]);
        if 0.5 * (b - a).cross(c - a).norm() <= area_floor {
            report.degenerate_removed += 1;
            continue;
        }
        let mut sorted = r;
        sorted.sort_unstable();
        if !seen.insert(sorted) {
            report.duplicates_removed += 1;
            continue;
        }
        triangles.push(r);
    }
    if triangles.is_empty() {
        return Err(GeometryError::Degenerate);
    }

    // Compact: drop vertices that only belonged to removed triangles.
    let mut keep = vec![u32::MAX; welded.len()];
    let mut vertices = Vec::new();
    for t in &mut triangles {
        for i in t.iter_mut() {
            if keep[*i as usize] == u32::MAX {
                keep[*i as usize] = vertices.len() as u32;
                vertices.push(welded[*i as usize]);
            }
            *i = keep[*i as usize];
        }
    }
    Ok((
        TriangleMesh {
            vertices,
            triangles,
            normals: None,
        },
        report,
    ))
}

/// Splits triangles by longest-edge bisection until no edge exceeds
/// `max_edge`. Returns the refined soup mesh and, per new triangle, the index
/// of the source triangle. Winding is preserved.
pub fn subdivide_mesh(mesh: &TriangleMesh, max_edge: f64) -> (TriangleMesh, Vec<usize>) {
    let mut soup = Vec::with_capacity(mesh.triangles.len());
    let mut parent = Vec::with_capacity(mesh.triangles.len());
    let mut stack = Vec::new();
    for t in 0..mesh.triangles.len() {
        stack.push(mesh.corners(t));
        while let Some([a, b, c]) = stack.pop() {
            let edges = [(b - a).norm(), (c - b).norm(), (a - c).norm()];
            let (k, longest) = edges
                .iter()
                .copied()
                .enumerate()
                .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
            if !(max_edge > 0.0) || longest <= max_edge {
                soup.push([a, b, c]);
                parent.push(t);
                continue;
            }
            // Rotate so the longest edge is p0-p1, then split it.
            let [p0, p1, p2] = match k {
                0 => [a, b, c],
                1 => [b, c, a],
                _ => [c, a, b],
            };
            let m = (p0 + p1) * 0.5;
            stack.push([m, p1, p2]);
            stack.push([p0, m, p2]);
        }
    }
    (TriangleMesh::from_triangles(&soup), parent)
}

/// Closed axis-aligned box as 12 outward-facing triangles.
pub fn box_mesh(min: Vec3, max: Vec3) -> TriangleMesh {
    let v = |x: bool, y: bool, z: bool| {
        Vec3::new(
            if x { max.x } else { min.x },
            if y { max.y } else { min.y },
            if z { max.z } else { min.z },
        )
    };
    let vertices = vec![
        v(false, false, false),
        v(true, false, false),
        v(true, true, false),
        v(false, true, false),
        v(false, false, true),
        v(true, false, true),
        v(true, true, true),
        v(false, true, true),
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2], // bottom
        [4, 5, 6],
        [4, 6, 7], // top
        [0, 1, 5],
        [0, 5, 4], // south
        [2, 3, 7],
        [2, 7, 6], // north
        [1, 2, 6],
        [1, 6, 5], // east
        [3, 0, 4],
        [3, 4, 7], // west
    ];
    TriangleMesh {
        vertices,
        triangles,
        normals: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unwelded_cube() -> TriangleMesh {
        let b = box_mesh(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0));
        let soup: Vec<[Vec3; 3]> = (0..b.triangles.len()).map(|t| b.corners(t)).collect();
        TriangleMesh::from_triangles(&soup)
    }

    #[test]
    fn welds_duplicated_cube_vertices() {
        let m = unwelded_cube();
        assert_eq!(m.vertices.len(), 36);
        let (c, rep) = clean_mesh(&m, 1e-6).unwrap();
        assert_eq!(c.vertices.len(), 8);
        assert_eq!(c.triangles.len(), 12);
        assert_eq!(rep.vertices_merged, 28);
        assert!(c.is_watertight());
    }

    #[test]
    fn huge_coordinates_do_not_overflow_weld_grid() {
        let b = box_mesh(Vec3::new(1e300, -1e300, 0.0), Vec3::new(2e300, -0.5e300, 1e300));
        let soup: Vec<[Vec3; 3]> = (0..b.triangles.len()).map(|t| b.corners(t)).collect();
        let (c, _) = clean_mesh(&TriangleMesh::from_triangles(&soup), 1e-6).unwrap();
        assert_eq!(c.vertices.len(), 8);
    }

    #[test]
    fn drops_zero_area_triangle() {
        let mut m = unwelded_cube();
        let base = m.vertices.len() as u32;
        m.vertices.extend([
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.5, 0.5, 0.5),
            Vec3::new(1.0, 1.0, 1.0),
        ]);
        m.triangles.push([base, base + 1, base + 2]);
        let (c, rep) = clean_mesh(&m, 1e-6).unwrap();
        assert_eq!(c.triangles.len(), 12);
        assert_eq!(rep.degenerate_removed, 1);
    }

    #[test]
    fn only_degenerate_triangles_is_an_error() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let m = TriangleMesh::from_triangles(&[[p, p, p], [p, p + Vec3::new(1e-9, 0.0, 0.0), p]]);
        assert!(matches!(clean_mesh(&m, 1e-6), Err(GeometryError::Degenerate)));
    }

    #[test]
    fn duplicate_triangles_removed_regardless_of_winding() {
        let mut m = box_mesh(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0));
        let t = m.triangles[0];
        m.triangles.push([t[2], t[1], t[0]]);
        let (c, rep) = clean_mesh(&m, 1e-6).unwrap();
        assert_eq!(c.triangles.len(), 12);
        assert_eq!(rep.duplicates_removed, 1);
    }

    #[test]
    fn box_volume_and_area() {
        let m = box_mesh(Vec3::new(1.0, 2.0, 0.0), Vec3::new(4.0, 7.0, 10.0));
        let v = m.enclosed_volume();
        assert!((v - 150.0).abs() <= 1e-9 * 150.0);
        assert!((m.surface_area() - 2.0 * (15.0 + 30.0 + 50.0)).abs() < 1e-9);
        assert!(m.is_watertight());
    }

    #[test]
    fn subdivision_preserves_area_and_orientation() {
        let m = box_mesh(Vec3::ZERO, Vec3::new(20.0, 10.0, 30.0));
        let (s, parent) = subdivide_mesh(&m, 5.0);
        assert_eq!(s.triangles.len(), parent.len());
        assert!((s.surface_area() - m.surface_area()).abs() < 1e-6);
        for t in 0..s.triangles.len() {
            let [a, b, c] = s.corners(t);
            for e in [(b - a).norm(), (c - b).norm(), (a - c).norm()] {
                assert!(e <= 5.0 + 1e-9);
            }
            let n = s.triangle_normal(t).unwrap();
            assert!(n.dot(m.triangle_normal(parent[t]).unwrap()) > 0.999);
        }
    }

    #[test]
    fn out_of_range_index_rejected() {
        let m = TriangleMesh {
            vertices: vec![Vec3::ZERO; 2],
            triangles: vec![[0, 1, 2]],
            normals: None,
        };
        assert!(m.validate().is_err());
    }
}
