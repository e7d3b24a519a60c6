//! Binary and ASCII STL reading and writing.
//!
//! Binary layout: 80-byte header, little-endian `u32` facet count, then
//! 50 bytes per facet (normal, three vertices as `f32` triples, and a
//! `u16` attribute count). ASCII files start with `solid`.

use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::{TriangleMesh, Vec3};

const HEADER_LEN: usize = 80;
const FACETS_START: usize = HEADER_LEN + 4;
const FACET_LEN: usize = 50;

#[derive(Debug, Error)]
pub enum StlError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("truncated file: {len} bytes, binary STL needs at least {FACETS_START}")]
    Truncated { len: usize },
    #[error("facet count mismatch: header declares {declared} facets but body holds {found} (byte offset {offset})")]
    FacetCountMismatch { declared: u64, found: u64, offset: usize },
    #[error("non-finite coordinate at byte offset {offset}")]
    NonFiniteBinary { offset: usize },
    #[error("non-finite coordinate on line {line}")]
    NonFiniteAscii { line: usize },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, StlError>;

/// Reads an STL file, detecting the binary or ASCII flavour.
pub fn load_stl(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let bytes = std::fs::read(path)?;
    parse_stl(&bytes)
}

/// Parses STL bytes. A buffer whose length matches the binary facet count
/// exactly is binary even if its header begins with `solid`.
pub fn parse_stl(bytes: &[u8]) -> Result<TriangleMesh> {
    if bytes.len() >= FACETS_START {
        let declared = u32::from_le_bytes(bytes[HEADER_LEN..FACETS_START].try_into().unwrap());
        if (bytes.len() - FACETS_START) as u64 == declared as u64 * FACET_LEN as u64 {
            return parse_binary(bytes);
        }
    }
    if looks_ascii(bytes) {
        parse_ascii(bytes)
    } else {
        parse_binary(bytes)
    }
}

fn looks_ascii(bytes: &[u8]) -> bool {
    let start = bytes
        .iter()
        .position(|b| !b.is_ascii_whitespace())
        .unwrap_or(bytes.len());
    bytes[start..].starts_with(b"solid")
}

fn parse_binary(bytes: &[u8]) -> Result<TriangleMesh> {
    if bytes.len() < FACETS_START {
        return Err(StlError::Truncated { len: bytes.len() });
    }
    let declared = u32::from_le_bytes(bytes[HEADER_LEN..FACETS_START].try_into().unwrap()) as u64;
    let body = bytes.len() - FACETS_START;
    let found = (body / FACET_LEN) as u64;
    if found != declared || !body.is_multiple_of(FACET_LEN) {
        return Err(StlError::FacetCountMismatch {
            declared,
            found,
            offset: FACETS_START + (found as usize) * FACET_LEN,
        });
    }
    let read_vec = |off: usize| -> Result<Vec3> {
        let f = |k: usize| f32::from_le_bytes(bytes[off + 4 * k..off + 4 * k + 4].try_into().unwrap());
        let v = Vec3::new(f(0) as f64, f(1) as f64, f(2) as f64);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(StlError::NonFiniteBinary { offset: off })
        }
    };
    let mut soup = Vec::with_capacity(found as usize);
    let mut normals = Vec::with_capacity(found as usize);
    for i in 0..found as usize {
        let off = FACETS_START + i * FACET_LEN;
        // Normals are advisory; non-finite ones are replaced rather than rejected.
        let n = read_vec(off).unwrap_or(Vec3::ZERO);
        normals.push(n);
        soup.push([read_vec(off + 12)?, read_vec(off + 24)?, read_vec(off + 36)?]);
    }
    let mut mesh = TriangleMesh::from_triangles(&soup);
    mesh.normals = Some(normals);
    Ok(mesh)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank line as (1-based line number, tokens).
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, l) in self.inner.by_ref() {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if !toks.is_empty() {
                return Some((i + 1, toks));
            }
        }
        None
    }
}

fn expect<'a>(lines: &mut Lines<'a>, ln: usize, word: &[&str]) -> Result<(usize, Vec<&'a str>)> {
    match lines.next_tokens() {
        Some((l, t)) if t.len() >= word.len() && t[..word.len()] == *word => Ok((l, t)),
        Some((l, t)) => Err(StlError::Syntax {
            line: l,
            message: format!("expected `{}`, found `{}`", word.join(" "), t.join(" ")),
        }),
        None => Err(StlError::Syntax {
            line: ln,
            message: format!("unexpected end of file, expected `{}`", word.join(" ")),
        }),
    }
}

fn parse_ascii(bytes: &[u8]) -> Result<TriangleMesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        StlError::Syntax {
            line,
            message: "invalid UTF-8 in ASCII STL".into(),
        }
    })?;
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let syntax = |line: usize, message: String| StlError::Syntax { line, message };
    let parse_xyz = |line: usize, toks: &[&str]| -> Result<Vec3> {
        if toks.len() != 3 {
            return Err(syntax(line, format!("expected 3 coordinates, got {}", toks.len())));
        }
        let mut c = [0.0; 3];
        for (k, t) in toks.iter().enumerate() {
            c[k] = t
                .parse::<f64>()
                .map_err(|_| syntax(line, format!("bad number {t:?}")))?;
        }
        let v = Vec3::new(c[0], c[1], c[2]);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(StlError::NonFiniteAscii { line })
        }
    };

    let mut soup = Vec::new();
    let mut normals = Vec::new();
    let mut in_solid = false;
    let mut last_line = 0;
    while let Some((ln, toks)) = lines.next_tokens() {
        last_line = ln;
        match toks[0] {
            "solid" if !in_solid => in_solid = true,
            "endsolid" if in_solid => in_solid = false,
            "facet" if in_solid => {
                let n = if toks.len() >= 2 && toks[1] == "normal" {
                    parse_xyz(ln, &toks[2..]).unwrap_or(Vec3::ZERO)
                } else {
                    return Err(syntax(ln, "expected `facet normal`".into()));
                };
                expect(&mut lines, ln, &["outer", "loop"])?;
                let mut tri = [Vec3::ZERO; 3];
                for corner in &mut tri {
                    let (l, t) = expect(&mut lines, ln, &["vertex"])?;
                    *corner = parse_xyz(l, &t[1..])?;
                }
                expect(&mut lines, ln, &["endloop"])?;
                let (l, _) = expect(&mut lines, ln, &["endfacet"])?;
                last_line = l;
                soup.push(tri);
                normals.push(n);
            }
            other => {
                return Err(syntax(ln, format!("unexpected token `{other}`")));
            }
        }
    }
    if in_solid {
        return Err(syntax(last_line, "missing `endsolid`".into()));
    }
    let mut mesh = TriangleMesh::from_triangles(&soup);
    mesh.normals = Some(normals);
    Ok(mesh)
}

/// Writes a binary STL (normals recomputed from the winding).
pub fn write_binary_stl<W: Write>(mesh: &TriangleMesh, header: &str, mut w: W) -> io::Result<()> {
    let mut head = [0u8; HEADER_LEN];
    let hb = header.as_bytes();
    let n = hb.len().min(HEADER_LEN);
    head[..n].copy_from_slice(&hb[..n]);
    // A binary header must not start with "solid" or naive readers choke.
    if head.starts_with(b"solid") {
        head[..5].copy_from_slice(b"SOLID");
    }
    w.write_all(&head)?;
    w.write_all(&(mesh.triangles.len() as u32).to_le_bytes())?;
    for t in 0..mesh.triangles.len() {
        let normal = mesh.triangle_normal(t).unwrap_or(Vec3::ZERO);
        let mut rec = [0u8; FACET_LEN];
        let mut put = |k: usize, v: Vec3| {
            for (j, c) in [v.x, v.y, v.z].into_iter().enumerate() {
                let o = 12 * k + 4 * j;
                rec[o..o + 4].copy_from_slice(&(c as f32).to_le_bytes());
            }
        };
        put(0, normal);
        let [a, b, c] = mesh.corners(t);
        put(1, a);
        put(2, b);
        put(3, c);
        w.write_all(&rec)?;
    }
    Ok(())
}

pub fn write_ascii_stl<W: Write>(mesh: &TriangleMesh, name: &str, mut w: W) -> io::Result<()> {
    writeln!(w, "solid {name}")?;
    for t in 0..mesh.triangles.len() {
        let n = mesh.triangle_normal(t).unwrap_or(Vec3::ZERO);
        writeln!(w, "  facet normal {:e} {:e} {:e}", n.x, n.y, n.z)?;
        writeln!(w, "    outer loop")?;
        for v in mesh.corners(t) {
            writeln!(w, "      vertex {:e} {:e} {:e}", v.x, v.y, v.z)?;
        }
        writeln!(w, "    endloop")?;
        writeln!(w, "  endfacet")?;
    }
    writeln!(w, "endsolid {name}")
}
