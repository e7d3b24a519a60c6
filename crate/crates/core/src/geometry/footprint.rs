//! Plan-view rasters: column-top heights, obstacle masks and footprint outlines.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Building, BuildingSet, TriangleMesh};

/// Uniform cell-centred plan grid. Cell `(i, j)` has its centre at
/// `origin + ((i + 0.5)·h, (j + 0.5)·h)`; storage is row-major in `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    /// Smallest grid with the given cell size whose extent covers `[minx, miny, maxx, maxy]`.
    pub fn covering(bbox: [f64; 4], cell_size: f64) -> Grid2 {
        let nx = (((bbox[2] - bbox[0]) / cell_size) - 1e-9).ceil().max(1.0) as usize;
        let ny = (((bbox[3] - bbox[1]) / cell_size) - 1e-9).ceil().max(1.0) as usize;
        Grid2 {
            origin: [bbox[0], bbox[1]],
            cell_size,
            nx,
            ny,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn centre(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.cell_size,
            self.origin[1] + (j as f64 + 0.5) * self.cell_size,
        ]
    }

    pub fn extent(&self) -> [f64; 4] {
        [
            self.origin[0],
            self.origin[1],
            self.origin[0] + self.nx as f64 * self.cell_size,
            self.origin[1] + self.ny as f64 * self.cell_size,
        ]
    }

    /// Cell containing `(x, y)`, if inside the grid extent.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.origin[0]) / self.cell_size;
        let fy = (y - self.origin[1]) / self.cell_size;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (i, j) = (fx as usize, fy as usize);
        // The far edge belongs to the last cell.
        let i = if i == self.nx && fx <= self.nx as f64 { i - 1 } else { i };
        let j = if j == self.ny && fy <= self.ny as f64 { j - 1 } else { j };
        (i < self.nx && j < self.ny).then_some((i, j))
    }

    /// Inclusive index range of cells whose centres may fall in `[lo, hi]` along an axis.
    fn centre_range(&self, axis: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let n = if axis == 0 { self.nx } else { self.ny };
        let o = self.origin[axis];
        let a = ((lo - o) / self.cell_size - 0.5 - 1e-9).ceil().max(0.0);
        let b = ((hi - o) / self.cell_size - 0.5 + 1e-9).floor();
        if n == 0 || b < 0.0 || a > (n - 1) as f64 || a > b {
            return None;
        }
        Some((a as usize, (b as usize).min(n - 1)))
    }
}

/// Barycentric coordinates of `p` in the XY projection of a triangle, with
/// edges treated as inside. `None` for points outside or a degenerate projection.
fn barycentric_xy(p: [f64; 2], t: [[f64; 2]; 3]) -> Option<[f64; 3]> {
    let [a, b, c] = t;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    if det.abs() < 1e-12 {
        return None;
    }
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    let l0 = 1.0 - l1 - l2;
    let eps = -1e-9;
    (l0 >= eps && l1 >= eps && l2 >= eps).then_some([l0, l1, l2])
}

/// Column-top height per cell: the highest mesh surface above the cell centre.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightRaster {
    pub grid: Grid2,
    /// `NEG_INFINITY` where no building covers the cell centre.
    pub top: Vec<f64>,
    /// Index (into the building list) of the building owning the top surface.
    pub owner: Vec<Option<u32>>,
}

impl HeightRaster {
    pub fn new(grid: Grid2) -> Self {
        HeightRaster {
            grid,
            top: vec![f64::NEG_INFINITY; grid.len()],
            owner: vec![None; grid.len()],
        }
    }

    pub fn from_buildings(grid: Grid2, buildings: &[Building]) -> Self {
        let mut r = HeightRaster::new(grid);
        for (b, building) in buildings.iter().enumerate() {
            r.add_mesh(&building.mesh, b as u32);
        }
        r
    }

    /// Raises column tops with every triangle of `mesh` whose plan projection
    /// covers a cell centre.
    pub fn add_mesh(&mut self, mesh: &TriangleMesh, owner: u32) {
        let g = self.grid;
        for t in 0..mesh.triangles.len() {
            let c = mesh.corners(t);
            let xy = [[c[0].x, c[0].y], [c[1].x, c[1].y], [c[2].x, c[2].y]];
            let (lox, hix) = (c[0].x.min(c[1].x).min(c[2].x), c[0].x.max(c[1].x).max(c[2].x));
            let (loy, hiy) = (c[0].y.min(c[1].y).min(c[2].y), c[0].y.max(c[1].y).max(c[2].y));
            let (Some((i0, i1)), Some((j0, j1))) = (g.centre_range(0, lox, hix), g.centre_range(1, loy, hiy)) else {
                continue;
            };
            for j in j0..=j1 {
                for i in i0..=i1 {
                    if let Some(l) = barycentric_xy(g.centre(i, j), xy) {
                        let z = l[0] * c[0].z + l[1] * c[1].z + l[2] * c[2].z;
                        let k = g.idx(i, j);
                        if z > self.top[k] {
                            self.top[k] = z;
                            self.owner[k] = Some(owner);
                        }
                    }
                }
            }
        }
    }

    pub fn mask_at(&self, slice_height: f64) -> ObstacleMask {
        ObstacleMask {
            origin: self.grid.origin,
            cell_size: self.grid.cell_size,
            nx: self.grid.nx,
            ny: self.grid.ny,
            cells: self.top.iter().map(|&z| z >= slice_height).collect(),
        }
    }
}

/// Boolean plan raster; `true` marks a building at the slice height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleMask {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<bool>,
}

impl ObstacleMask {
    pub fn empty(grid: Grid2) -> Self {
        ObstacleMask {
            origin: grid.origin,
            cell_size: grid.cell_size,
            nx: grid.nx,
            ny: grid.ny,
            cells: vec![false; grid.len()],
        }
    }

    pub fn grid(&self) -> Grid2 {
        Grid2 {
            origin: self.origin,
            cell_size: self.cell_size,
            nx: self.nx,
            ny: self.ny,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.nx + i]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// Obstacle mask over the set's domain grid.
pub fn rasterize_footprints(set: &BuildingSet, cell_size: f64, slice_height: f64) -> ObstacleMask {
    rasterize_on(
        Grid2::covering(set.domain_bbox, cell_size),
        &set.buildings,
        slice_height,
    )
}

/// A cell is an obstacle when the column top above its centre reaches
/// `slice_height`; this makes the mask monotone in slice height.
pub fn rasterize_on(grid: Grid2, buildings: &[Building], slice_height: f64) -> ObstacleMask {
    if buildings.is_empty() {
        return ObstacleMask::empty(grid);
    }
    HeightRaster::from_buildings(grid, buildings).mask_at(slice_height)
}

/// Plan footprint of one building, derived from its upward-facing faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    /// Summed plan projection of upward faces (m²).
    pub area: f64,
    /// Area-weighted centroid of the projected upward faces.
    pub centroid: [f64; 2],
    /// Outer outline of the raster union, counter-clockwise.
    pub outline: Vec<[f64; 2]>,
    /// Projected upward triangles; used for exact distance queries.
    pub triangles: Vec<[[f64; 2]; 3]>,
}

impl Footprint {
    pub fn from_mesh(mesh: &TriangleMesh, cell_size: f64) -> Footprint {
        let mut triangles = Vec::new();
        let mut area = 0.0;
        let (mut cx, mut cy) = (0.0, 0.0);
        for t in 0..mesh.triangles.len() {
            let av = mesh.area_vector(t);
            if av.z <= 1e-12 {
                continue;
            }
            let c = mesh.corners(t);
            let a = 0.5 * av.z;
            let tri = [[c[0].x, c[0].y], [c[1].x, c[1].y], [c[2].x, c[2].y]];
            area += a;
            cx += a * (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0;
            cy += a * (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0;
            triangles.push(tri);
        }
        let centroid = if area > 0.0 {
            [cx / area, cy / area]
        } else {
            [f64::NAN; 2]
        };
        let outline = trace_outline(&triangles, cell_size);
        Footprint {
            area,
            centroid,
            outline,
            triangles,
        }
    }

    /// Plan distance from `(x, y)` to the footprint (0 inside).
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        self.triangles
            .iter()
            .map(|&t| point_triangle_distance([x, y], t))
            .fold(f64::INFINITY, f64::min)
    }
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p[0] - a[0] - t * dx).powi(2) + (p[1] - a[1] - t * dy).powi(2)).sqrt()
}

fn point_triangle_distance(p: [f64; 2], t: [[f64; 2]; 3]) -> f64 {
    if barycentric_xy(p, t).is_some() {
        return 0.0;
    }
    point_segment_distance(p, t[0], t[1])
        .min(point_segment_distance(p, t[1], t[2]))
        .min(point_segment_distance(p, t[2], t[0]))
}

/// Rasterizes the projected triangles on a grid aligned to multiples of
/// `cell_size`, then traces the boundary of the covered cells. Returns the
/// largest counter-clockwise loop; a footprint smaller than one cell falls
/// back to its bounding rectangle.
fn trace_outline(triangles: &[[[f64; 2]; 3]], cell_size: f64) -> Vec<[f64; 2]> {
    if triangles.is_empty() {
        return Vec::new();
    }
    let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for t in triangles {
        for p in t {
            bb = [bb[0].min(p[0]), bb[1].min(p[1]), bb[2].max(p[0]), bb[3].max(p[1])];
        }
    }
    let rect = vec![[bb[0], bb[1]], [bb[2], bb[1]], [bb[2], bb[3]], [bb[0], bb[3]]];
    if !(cell_size > 0.0) {
        return rect;
    }
    let x0 = (bb[0] / cell_size).floor() * cell_size;
    let y0 = (bb[1] / cell_size).floor() * cell_size;
    let grid = Grid2::covering([x0, y0, bb[2], bb[3]], cell_size);
    let mut cells = vec![false; grid.len()];
    for t in triangles {
        let lox = t[0][0].min(t[1][0]).min(t[2][0]);
        let hix = t[0][0].max(t[1][0]).max(t[2][0]);
        let loy = t[0][1].min(t[1][1]).min(t[2][1]);
        let hiy = t[0][1].max(t[1][1]).max(t[2][1]);
        let (Some((i0, i1)), Some((j0, j1))) = (grid.centre_range(0, lox, hix), grid.centre_range(1, loy, hiy)) else {
            continue;
        };
        for j in j0..=j1 {
            for i in i0..=i1 {
                if barycentric_xy(grid.centre(i, j), *t).is_some() {
                    cells[grid.idx(i, j)] = true;
                }
            }
        }
    }
    let on = |i: isize, j: isize| {
        i >= 0 && j >= 0 && (i as usize) < grid.nx && (j as usize) < grid.ny && cells[grid.idx(i as usize, j as usize)]
    };

    // Directed boundary edges with the covered cell on the left.
    let mut out: HashMap<(isize, isize), Vec<(isize, isize)>> = HashMap::new();
    let mut edge_count = 0;
    for j in 0..grid.ny as isize {
        for i in 0..grid.nx as isize {
            if !on(i, j) {
                continue;
            }
            let mut push = |a: (isize, isize), b: (isize, isize)| {
                out.entry(a).or_default().push(b);
                edge_count += 1;
            };
            if !on(i, j - 1) {
                push((i, j), (i + 1, j));
            }
            if !on(i + 1, j) {
                push((i + 1, j), (i + 1, j + 1));
            }
            if !on(i, j + 1) {
                push((i + 1, j + 1), (i, j + 1));
            }
            if !on(i - 1, j) {
                push((i, j + 1), (i, j));
            }
        }
    }
    if edge_count == 0 {
        return rect;
    }

    let mut starts: Vec<(isize, isize)> = out.keys().copied().collect();
    starts.sort_unstable();
    let mut best: Option<(f64, Vec<(isize, isize)>)> = None;
    for s in starts {
        while out.get(&s).is_some_and(|v| !v.is_empty()) {
            let mut lp = vec![s];
            let mut cur = s;
            while let Some(next) = out.get_mut(&cur).and_then(|v| v.pop()) {
                if next == s {
                    break;
                }
                lp.push(next);
                cur = next;
            }
            let area2: f64 = (0..lp.len())
                .map(|k| {
                    let (a, b) = (lp[k], lp[(k + 1) % lp.len()]);
                    (a.0 * b.1 - b.0 * a.1) as f64
                })
                .sum();
            if best.as_ref().is_none_or(|(ba, _)| area2 > *ba) {
                best = Some((area2, lp));
            }
        }
    }
    let Some((_, lp)) = best else { return rect };
    // Drop collinear corners.
    let n = lp.len();
    let mut poly = Vec::with_capacity(n);
    for k in 0..n {
        let (p, c, q) = (lp[(k + n - 1) % n], lp[k], lp[(k + 1) % n]);
        let cross = (c.0 - p.0) * (q.1 - c.1) - (c.1 - p.1) * (q.0 - c.0);
        if cross != 0 {
            poly.push([x0 + c.0 as f64 * cell_size, y0 + c.1 as f64 * cell_size]);
        }
    }
    poly
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_mesh, Vec3};

    #[test]
    fn grid_covering_and_locate() {
        let g = Grid2::covering([0.0, 0.0, 200.0, 100.0], 2.0);
        assert_eq!((g.nx, g.ny), (100, 50));
        assert_eq!(g.locate(0.0, 0.0), Some((0, 0)));
        assert_eq!(g.locate(200.0, 100.0), Some((99, 49)));
        assert_eq!(g.locate(-0.1, 5.0), None);
        assert_eq!(g.centre(0, 0), [1.0, 1.0]);
    }

    #[test]
    fn box_outline_is_exact_rectangle() {
        let m = box_mesh(Vec3::new(10.0, 20.0, 0.0), Vec3::new(30.0, 40.0, 30.0));
        let f = Footprint::from_mesh(&m, 2.0);
        assert!((f.area - 400.0).abs() < 1e-9);
        assert_eq!(f.centroid, [20.0, 30.0]);
        assert_eq!(f.outline.len(), 4);
        let xs: Vec<f64> = f.outline.iter().map(|p| p[0]).collect();
        assert!(xs.contains(&10.0) && xs.contains(&30.0));
        assert_eq!(f.distance(20.0, 30.0), 0.0);
        assert!((f.distance(35.0, 30.0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn l_shaped_outline_has_six_corners() {
        let mut m = box_mesh(Vec3::ZERO, Vec3::new(20.0, 10.0, 5.0));
        m.append(&box_mesh(Vec3::new(0.0, 10.0, 0.0), Vec3::new(10.0, 20.0, 5.0)));
        let f = Footprint::from_mesh(&m, 2.0);
        assert_eq!(f.outline.len(), 6);
        assert!((f.area - 300.0).abs() < 1e-9);
    }
}
