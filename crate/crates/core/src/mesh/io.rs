//! Plain-text mesh format:
//!
//! ```text
//! VEMMESH 1
//! body <1|2>
//! <nv>
//! x y            (nv lines)
//! <nc>
//! k v0 .. v{k-1} (nc lines)
//! edge v0 v1 D|N|C
//! ```

use std::fmt::Write as _;

use super::{BoundaryLabel, Point, PolyMesh};
use crate::error::{Result, VemError};

pub fn write_mesh(mesh: &PolyMesh) -> String {
    let mut s = String::new();
    s.push_str("VEMMESH 1\n");
    writeln!(s, "body {}", mesh.body_id()).unwrap();
    writeln!(s, "{}", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:.16e} {:.16e}", p.x, p.y).unwrap();
    }
    writeln!(s, "{}", mesh.n_cells()).unwrap();
    for c in mesh.cells() {
        write!(s, "{}", c.len()).unwrap();
        for v in c {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    for e in mesh.edges() {
        if let Some(l) = e.label {
            writeln!(s, "edge {} {} {}", e.vertices[0], e.vertices[1], l.code()).unwrap();
        }
    }
    s
}

fn parse_err(line: usize, reason: impl Into<String>) -> VemError {
    VemError::Parse {
        line,
        reason: reason.into(),
    }
}

pub fn read_mesh(text: &str) -> Result<PolyMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| parse_err(0, format!("unexpected end of file, expected {what}")));
    let (ln, header) = next("header")?;
    if header != "VEMMESH 1" {
        return Err(parse_err(ln, format!("bad header `{header}`")));
    }
    let (ln, body) = next("body line")?;
    let body_id: u8 = body
        .strip_prefix("body ")
        .and_then(|b| b.trim().parse().ok())
        .ok_or_else(|| parse_err(ln, "expected `body <id>`"))?;
    let (ln, nv) = next("vertex count")?;
    let nv: usize = nv.parse().map_err(|_| parse_err(ln, "bad vertex count"))?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("vertex")?;
        let xy: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(ln, "bad coordinate"))?;
        if xy.len() != 2 {
            return Err(parse_err(ln, "vertex line needs two coordinates"));
        }
        vertices.push(Point::new(xy[0], xy[1]));
    }
    let (ln, nc) = next("cell count")?;
    let nc: usize = nc.parse().map_err(|_| parse_err(ln, "bad cell count"))?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, l) = next("cell")?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(ln, "bad cell index"))?;
        if ids.is_empty() || ids[0] + 1 != ids.len() {
            return Err(parse_err(ln, "cell line length does not match its count"));
        }
        cells.push(ids[1..].to_vec());
    }
    let mut labels = Vec::new();
    for (ln, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 4 || t[0] != "edge" {
            return Err(parse_err(ln, "expected `edge v0 v1 D|N|C`"));
        }
        let a: usize = t[1].parse().map_err(|_| parse_err(ln, "bad edge vertex"))?;
        let b: usize = t[2].parse().map_err(|_| parse_err(ln, "bad edge vertex"))?;
        let label = BoundaryLabel::from_code(t[3]).ok_or_else(|| parse_err(ln, "bad label"))?;
        labels.push((ln, a, b, label));
    }
    let mut mesh = PolyMesh::new(vertices, cells, body_id)?;
    for (ln, a, b, label) in labels {
        let id = mesh
            .find_edge(a, b)
            .ok_or_else(|| parse_err(ln, format!("no edge ({a}, {b})")))?;
        mesh.set_label(id, label).map_err(|e| parse_err(ln, e.to_string()))?;
    }
    Ok(mesh)
}
