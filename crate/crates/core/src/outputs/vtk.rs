//! Legacy ASCII VTK writers (and a reader for structured points).

use std::fmt::Write as _;
use std::path::Path;

use super::OutputError;
use crate::geometry::TriangleMesh;

/// Formats like C's `%.6e`: six fraction digits, signed two-digit exponent.
pub fn fmt_e(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{v:.6e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

/// A single-layer grid of point data.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub origin: [f64; 3],
    pub spacing: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub scalars: Vec<(String, Vec<f64>)>,
    pub vectors: Vec<(String, Vec<[f64; 3]>)>,
}

impl FieldGrid {
    pub fn new(origin: [f64; 3], spacing: [f64; 2], nx: usize, ny: usize) -> Self {
        FieldGrid {
            origin,
            spacing,
            nx,
            ny,
            scalars: Vec::new(),
            vectors: Vec::new(),
        }
    }

    pub fn with_scalar(mut self, name: &str, values: Vec<f64>) -> Self {
        self.scalars.push((name.to_string(), values));
        self
    }

    pub fn with_vector(mut self, name: &str, values: Vec<[f64; 3]>) -> Self {
        self.vectors.push((name.to_string(), values));
        self
    }

    pub fn check(&self) -> Result<(), OutputError> {
        let n = self.nx * self.ny;
        if n == 0 {
            return Err(OutputError::Invalid("empty grid".into()));
        }
        let mut names = std::collections::HashSet::new();
        for (name, len) in self
            .scalars
            .iter()
            .map(|(k, v)| (k, v.len()))
            .chain(self.vectors.iter().map(|(k, v)| (k, v.len())))
        {
            if len != n {
                return Err(OutputError::LengthMismatch {
                    name: name.clone(),
                    expected: n,
                    found: len,
                });
            }
            check_name(name)?;
            if !names.insert(name) {
                return Err(OutputError::Invalid(format!("duplicate array name '{name}'")));
            }
        }
        Ok(())
    }
}

fn check_name(name: &str) -> Result<(), OutputError> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace()) {
        return Err(OutputError::Invalid(format!(
            "array name '{name}' must be non-empty without spaces"
        )));
    }
    Ok(())
}

pub fn vtk_structured_string(grid: &FieldGrid, title: &str) -> Result<String, OutputError> {
    grid.check()?;
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or(""));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", grid.nx, grid.ny);
    let _ = writeln!(
        s,
        "ORIGIN {} {} {}",
        fmt_e(grid.origin[0]),
        fmt_e(grid.origin[1]),
        fmt_e(grid.origin[2])
    );
    let _ = writeln!(
        s,
        "SPACING {} {} {}",
        fmt_e(grid.spacing[0]),
        fmt_e(grid.spacing[1]),
        fmt_e(1.0)
    );
    let _ = writeln!(s, "POINT_DATA {}", grid.nx * grid.ny);
    for (name, vals) in &grid.scalars {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for v in vals {
            let _ = writeln!(s, "{}", fmt_e(*v));
        }
    }
    for (name, vals) in &grid.vectors {
        let _ = writeln!(s, "VECTORS {name} double");
        for v in vals {
            let _ = writeln!(s, "{} {} {}", fmt_e(v[0]), fmt_e(v[1]), fmt_e(v[2]));
        }
    }
    Ok(s)
}

pub fn write_vtk_structured(grid: &FieldGrid, title: &str, path: &Path) -> Result<(), OutputError> {
    let text = vtk_structured_string(grid, title)?;
    write_file(path, &text)
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), OutputError> {
    std::fs::write(path, text).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-cell array for polydata output.
#[derive(Debug, Clone, PartialEq)]
pub enum CellArray<'a> {
    Float(&'a str, &'a [f64]),
    Int(&'a str, &'a [i64]),
}

impl CellArray<'_> {
    fn name(&self) -> &str {
        match self {
            CellArray::Float(n, _) | CellArray::Int(n, _) => n,
        }
    }

    fn len(&self) -> usize {
        match self {
            CellArray::Float(_, v) => v.len(),
            CellArray::Int(_, v) => v.len(),
        }
    }
}

pub fn vtk_polydata_string(mesh: &TriangleMesh, arrays: &[CellArray<'_>], title: &str) -> Result<String, OutputError> {
    let nt = mesh.triangles.len();
    let mut names = std::collections::HashSet::new();
    for a in arrays {
        if a.len() != nt {
            return Err(OutputError::LengthMismatch {
                name: a.name().to_string(),
                expected: nt,
                found: a.len(),
            });
        }
        check_name(a.name())?;
        if !names.insert(a.name()) {
            return Err(OutputError::Invalid(format!("duplicate array name '{}'", a.name())));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or(""));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET POLYDATA");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} {}", fmt_e(v.x), fmt_e(v.y), fmt_e(v.z));
    }
    let _ = writeln!(s, "POLYGONS {} {}", nt, nt * 4);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    if !arrays.is_empty() {
        let _ = writeln!(s, "CELL_DATA {nt}");
        for a in arrays {
            match a {
                CellArray::Float(name, v) => {
                    let _ = writeln!(s, "SCALARS {name} double 1");
                    let _ = writeln!(s, "LOOKUP_TABLE default");
                    for x in *v {
                        let _ = writeln!(s, "{}", fmt_e(*x));
                    }
                }
                CellArray::Int(name, v) => {
                    let _ = writeln!(s, "SCALARS {name} int 1");
                    let _ = writeln!(s, "LOOKUP_TABLE default");
                    for x in *v {
                        let _ = writeln!(s, "{x}");
                    }
                }
            }
        }
    }
    Ok(s)
}

pub fn write_vtk_polydata(
    mesh: &TriangleMesh,
    arrays: &[CellArray<'_>],
    title: &str,
    path: &Path,
) -> Result<(), OutputError> {
    let text = vtk_polydata_string(mesh, arrays, title)?;
    write_file(path, &text)
}

/// Reads back a structured-points file written by [`vtk_structured_string`].
pub fn parse_vtk_structured(text: &str) -> Result<FieldGrid, OutputError> {
    let bad = |msg: &str| OutputError::Parse(msg.to_string());
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("# vtk DataFile Version 3.0") {
        return Err(bad("missing VTK header"));
    }
    lines.next().ok_or_else(|| bad("missing title"))?;
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(bad("only ASCII is supported"));
    }
    if lines.next().map(str::trim) != Some("DATASET STRUCTURED_POINTS") {
        return Err(bad("expected DATASET STRUCTURED_POINTS"));
    }
    let nums = |line: Option<&str>, key: &str, n: usize| -> Result<Vec<f64>, OutputError> {
        let line = line.ok_or_else(|| bad(&format!("missing {key}")))?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(bad(&format!("expected {key}")));
        }
        let v: Vec<f64> = it
            .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad number in {key}"))))
            .collect::<Result<_, _>>()?;
        if v.len() != n {
            return Err(bad(&format!("{key} expects {n} values")));
        }
        Ok(v)
    };
    let dims = nums(lines.next(), "DIMENSIONS", 3)?;
    if dims.iter().any(|d| d.fract() != 0.0 || *d < 1.0 || *d > 1e8) || dims[2] != 1.0 {
        return Err(bad("bad DIMENSIONS"));
    }
    let (nx, ny) = (dims[0] as usize, dims[1] as usize);
    let n = nx
        .checked_mul(ny)
        .filter(|n| *n <= 100_000_000)
        .ok_or_else(|| bad("grid too large"))?;
    let origin = nums(lines.next(), "ORIGIN", 3)?;
    let spacing = nums(lines.next(), "SPACING", 3)?;
    let pd = nums(lines.next(), "POINT_DATA", 1)?;
    if pd[0] != n as f64 {
        return Err(bad("POINT_DATA count mismatch"));
    }
    let mut grid = FieldGrid::new([origin[0], origin[1], origin[2]], [spacing[0], spacing[1]], nx, ny);
    let parse_f = |t: &str| t.parse::<f64>().map_err(|_| bad("bad value"));
    while let Some(line) = lines.next() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["SCALARS", name, _ty, rest @ ..] if rest.len() <= 1 => {
                if lines.next().map(str::trim) != Some("LOOKUP_TABLE default") {
                    return Err(bad("expected LOOKUP_TABLE default"));
                }
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    v.push(parse_f(lines.next().ok_or_else(|| bad("truncated scalars"))?.trim())?);
                }
                grid.scalars.push((name.to_string(), v));
            }
            ["VECTORS", name, _ty] => {
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| bad("truncated vectors"))?;
                    let c: Vec<f64> = l.split_whitespace().map(parse_f).collect::<Result<_, _>>()?;
                    if c.len() != 3 {
                        return Err(bad("vector needs 3 components"));
                    }
                    v.push([c[0], c[1], c[2]]);
                }
                grid.vectors.push((name.to_string(), v));
            }
            _ => return Err(bad(&format!("unexpected line '{line}'"))),
        }
    }
    grid.check()?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_mesh, Vec3};

    #[test]
    fn c_style_exponent() {
        assert_eq!(fmt_e(0.0), "0.000000e+00");
        assert_eq!(fmt_e(1234.5), "1.234500e+03");
        assert_eq!(fmt_e(-0.00012), "-1.200000e-04");
        assert_eq!(fmt_e(1e-300), "1.000000e-300");
    }

    #[test]
    fn two_by_two_scalar() {
        let g = FieldGrid::new([0.0, 0.0, 2.0], [1.0, 1.0], 2, 2).with_scalar("speed", vec![1.0, 2.0, 3.0, 4.0]);
        let s = vtk_structured_string(&g, "t").unwrap();
        assert!(s.contains("DIMENSIONS 2 2 1"));
        assert_eq!(s.lines().skip_while(|l| !l.starts_with("LOOKUP")).skip(1).count(), 4);
        assert_eq!(vtk_structured_string(&g, "t").unwrap(), s);
        assert_eq!(parse_vtk_structured(&s).unwrap(), g);
    }

    #[test]
    fn vectors_have_three_components() {
        let g = FieldGrid::new([0.0; 3], [2.0, 2.0], 1, 2).with_vector("wind", vec![[1.0, 2.0, 0.0], [3.0, 4.0, 0.0]]);
        let s = vtk_structured_string(&g, "t").unwrap();
        assert!(s.contains("VECTORS wind double\n1.000000e+00 2.000000e+00 0.000000e+00\n"));
    }

    #[test]
    fn grid_errors() {
        let g = FieldGrid::new([0.0; 3], [1.0, 1.0], 2, 2).with_scalar("a", vec![1.0]);
        assert!(matches!(g.check(), Err(OutputError::LengthMismatch { .. })));
        let g = FieldGrid::new([0.0; 3], [1.0, 1.0], 1, 1)
            .with_scalar("a", vec![1.0])
            .with_scalar("a", vec![1.0]);
        assert!(g.check().is_err());
    }

    #[test]
    fn cube_polydata() {
        let m = box_mesh(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0));
        let t: Vec<f64> = (0..12).map(|i| 300.0 + i as f64).collect();
        let ids = vec![7i64; 12];
        let s = vtk_polydata_string(
            &m,
            &[CellArray::Float("T_surf", &t), CellArray::Int("building_id", &ids)],
            "cube",
        )
        .unwrap();
        assert!(s.contains("POLYGONS 12 48"));
        assert!(s.contains("CELL_DATA 12\nSCALARS T_surf double 1"));
        assert!(s.contains("SCALARS building_id int 1"));
        let short = [1.0; 5];
        assert!(vtk_polydata_string(&m, &[CellArray::Float("T_surf", &short)], "cube").is_err());
    }

    #[test]
    fn writes_to_disk() {
        let dir = tempfile::tempdir().unwrap();
        let g = FieldGrid::new([0.0; 3], [1.0, 1.0], 1, 1).with_scalar("a", vec![1.0]);
        write_vtk_structured(&g, "t", &dir.path().join("a.vtk")).unwrap();
        assert!(write_vtk_structured(&g, "t", &dir.path().join("no/a.vtk")).is_err());
    }
}
