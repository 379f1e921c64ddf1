//! Plain-text mesh files.
//!
//! ```text
//! 2 <num_vertices> <num_simplices>
//! x y            (one line per vertex)
//! i j k          (one line per simplex, 0-based)
//! ```
//!
//! `#` starts a comment that runs to the end of the line.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::Mesh;
use crate::error::{Error, Result};
use crate::real::{Point2, Real};

/// Non-empty, comment-stripped lines with their 1-based line numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(k, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((k + 1, line))
    })
}

pub(crate) fn parse_fields<V: FromStr>(
    line_no: usize,
    line: &str,
    expected: usize,
    what: &str,
) -> std::result::Result<Vec<V>, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != expected {
        return Err(format!(
            "line {line_no}: expected {expected} fields for {what}, found {}",
            fields.len()
        ));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<V>()
                .map_err(|_| format!("line {line_no}: cannot parse `{f}` in {what}"))
        })
        .collect()
}

pub fn parse_mesh<T: Real + FromStr>(text: &str) -> Result<Mesh<T>> {
    let mut lines = data_lines(text);
    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::MeshFormat("empty mesh file".into()))?;
    let header: Vec<usize> = parse_fields(ln, header, 3, "header").map_err(Error::MeshFormat)?;
    if header[0] != 2 {
        return Err(Error::MeshFormat(format!(
            "only dimension 2 is supported, header says {}",
            header[0]
        )));
    }
    let (nv, ns) = (header[1], header[2]);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::MeshFormat(format!("expected {nv} vertices")))?;
        let xy: Vec<T> = parse_fields(ln, line, 2, "vertex").map_err(Error::MeshFormat)?;
        vertices.push(Point2::new(xy[0], xy[1]));
    }
    let mut simplices = Vec::with_capacity(ns);
    for _ in 0..ns {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::MeshFormat(format!("expected {ns} simplices")))?;
        let ijk: Vec<usize> = parse_fields(ln, line, 3, "simplex").map_err(Error::MeshFormat)?;
        simplices.push([ijk[0], ijk[1], ijk[2]]);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::MeshFormat(format!("line {ln}: trailing data")));
    }
    Mesh::new(vertices, simplices)
}

pub fn load_mesh<T: Real + FromStr>(path: impl AsRef<Path>) -> Result<Mesh<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text)
}

pub fn format_mesh<T: Real>(mesh: &Mesh<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "2 {} {}", mesh.num_nodes(), mesh.simplices().len());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{} {}", v.x, v.y);
    }
    for [i, j, k] in mesh.simplices() {
        let _ = writeln!(out, "{i} {j} {k}");
    }
    out
}

pub fn save_mesh<T: Real>(mesh: &Mesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_mesh(mesh)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT_SQUARE: &str = "# two triangles\n2 4 2\n-1 -1\n1 -1\n-1 1\n1 1\n0 1 3 # lower right\n0 3 2\n";

    #[test]
    fn square_file_matches_generated() {
        let loaded: Mesh<f64> = parse_mesh(UNIT_SQUARE).unwrap();
        let built = Mesh::<f64>::square(1).unwrap();
        assert_eq!(loaded.vertices(), built.vertices());
        assert_eq!(loaded.simplices(), built.simplices());
        assert_eq!(loaded.mesh_size(), built.mesh_size());
    }

    #[test]
    fn format_then_parse_is_identity() {
        let built = Mesh::<f64>::disk(5).unwrap();
        let again: Mesh<f64> = parse_mesh(&format_mesh(&built)).unwrap();
        assert_eq!(again.vertices(), built.vertices());
        assert_eq!(again.simplices(), built.simplices());
    }

    #[test]
    fn zero_area_triangle() {
        let text = "2 3 1\n0 0\n1 1\n2 2\n0 1 2\n";
        assert!(matches!(
            parse_mesh::<f64>(text),
            Err(Error::DegenerateMesh { .. })
        ));
    }

    #[test]
    fn out_of_range_index() {
        let text = "2 3 1\n0 0\n1 0\n0 1\n0 1 3\n";
        assert!(matches!(parse_mesh::<f64>(text), Err(Error::MeshFormat(_))));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse_mesh::<f64>(""), Err(Error::MeshFormat(_))));
        assert!(matches!(parse_mesh::<f64>("3 1 1\n0 0 0\n0 0 0\n"), Err(Error::MeshFormat(_))));
        assert!(matches!(parse_mesh::<f64>("2 3 1\n0 0\n1 x\n0 1\n0 1 2\n"), Err(Error::MeshFormat(_))));
        assert!(matches!(parse_mesh::<f64>("2 3 1\n0 0\n1 0\n0 1\n"), Err(Error::MeshFormat(_))));
    }

    #[test]
    fn load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sq.mesh");
        save_mesh(&Mesh::<f64>::square(3).unwrap(), &path).unwrap();
        let m: Mesh<f64> = load_mesh(&path).unwrap();
        assert_eq!(m.num_nodes(), 16);
        assert!(matches!(
            load_mesh::<f64>(dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }
}
