//! File writers (and readers for round-trip checks).
//!
//! Data files carry full round-trip precision and no tolerances.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use voss_core::grid::GridSpec;
use voss_core::voss::{LocusTag, SingularLocus, VossNet};

use crate::error::{CliError, CliResult};

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes grid vertices row-major with quad faces. Non-finite coordinates are
/// written as zero; their indices are returned so they can be flagged.
pub fn export_obj(path: &Path, grid: &GridSpec, vertices: &[Vector3<f64>], lines: bool) -> CliResult<Vec<usize>> {
    assert_eq!(vertices.len(), grid.len(), "one vertex per node");
    let mut s = String::new();
    let mut bad = Vec::new();
    let _ = writeln!(s, "# {} x {} grid, row-major", grid.nx, grid.ny);
    for (k, v) in vertices.iter().enumerate() {
        let v = if v.iter().all(|c| c.is_finite()) {
            *v
        } else {
            bad.push(k);
            Vector3::zeros()
        };
        let _ = writeln!(s, "v {:.16e} {:.16e} {:.16e}", v.x, v.y, v.z);
    }
    let id = |i: usize, j: usize| grid.index(i, j) + 1;
    for j in 0..grid.ny.saturating_sub(1) {
        for i in 0..grid.nx.saturating_sub(1) {
            let _ = writeln!(s, "f {} {} {} {}", id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
        }
    }
    if lines {
        if grid.nx > 1 {
            for j in 0..grid.ny {
                let row: Vec<String> = (0..grid.nx).map(|i| id(i, j).to_string()).collect();
                let _ = writeln!(s, "l {}", row.join(" "));
            }
        }
        if grid.ny > 1 {
            for i in 0..grid.nx {
                let col: Vec<String> = (0..grid.ny).map(|j| id(i, j).to_string()).collect();
                let _ = writeln!(s, "l {}", col.join(" "));
            }
        }
    }
    write_file(path, &s)?;
    Ok(bad)
}

/// Vertices and faces of an OBJ file (1-based face indices as written).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObjMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<Vec<usize>>,
    pub lines: Vec<Vec<usize>>,
}

pub fn read_obj(path: &Path) -> CliResult<ObjMesh> {
    let text = read_file(path)?;
    let bad = |n: usize, l: &str| CliError::Config(format!("{}: line {}: malformed '{l}'", path.display(), n + 1));
    let mut m = ObjMesh::default();
    for (n, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it.map(|t| t.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad(n, line))?;
                if c.len() != 3 {
                    return Err(bad(n, line));
                }
                m.vertices.push(Vector3::new(c[0], c[1], c[2]));
            }
            Some(tag @ ("f" | "l")) => {
                let ids: Vec<usize> = it
                    .map(|t| t.split('/').next().unwrap_or("").parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad(n, line))?;
                if tag == "f" {
                    m.faces.push(ids);
                } else {
                    m.lines.push(ids);
                }
            }
            Some(t) if t.starts_with('#') => {}
            None => {}
            Some(_) => return Err(bad(n, line)),
        }
    }
    Ok(m)
}

/// Named columns sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTable {
    pub names: Vec<String>,
    /// `(x, y)` per row, row-major.
    pub points: Vec<(f64, f64)>,
    /// `columns[c][row]`.
    pub columns: Vec<Vec<f64>>,
}

impl GridTable {
    pub fn new(grid: &GridSpec) -> Self {
        GridTable { names: Vec::new(), points: grid.points(), columns: Vec::new() }
    }

    pub fn column(mut self, name: &str, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.points.len(), "column {name} has the wrong length");
        self.names.push(name.to_string());
        self.columns.push(values);
        self
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.columns[k].as_slice())
    }
}

/// `i,j,x,y,<columns>` with shortest round-trip decimal formatting.
pub fn write_grid_csv(path: &Path, grid: &GridSpec, table: &GridTable) -> CliResult<()> {
    let mut s = String::from("i,j,x,y");
    for n in &table.names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (k, (x, y)) in table.points.iter().enumerate() {
        let (i, j) = grid.ij(k);
        let _ = write!(s, "{i},{j},{x},{y}");
        for c in &table.columns {
            let _ = write!(s, ",{}", c[k]);
        }
        s.push('\n');
    }
    write_file(path, &s)
}

pub fn read_grid_csv(path: &Path) -> CliResult<GridTable> {
    let text = read_file(path)?;
    let bad = |n: usize| CliError::Config(format!("{}: malformed line {}", path.display(), n + 1));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad(0))?.split(',').collect();
    if header.len() < 4 || header[..4] != ["i", "j", "x", "y"] {
        return Err(bad(0));
    }
    let names: Vec<String> = header[4..].iter().map(|s| s.to_string()).collect();
    let mut t = GridTable { names, points: Vec::new(), columns: vec![Vec::new(); header.len() - 4] };
    for (n, line) in lines.enumerate() {
        let f: Vec<f64> = line.split(',').map(|s| s.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad(n + 1))?;
        if f.len() != header.len() {
            return Err(bad(n + 1));
        }
        t.points.push((f[2], f[3]));
        for (c, v) in f[4..].iter().enumerate() {
            t.columns[c].push(*v);
        }
    }
    Ok(t)
}

fn tag_name(t: LocusTag) -> &'static str {
    match t {
        LocusTag::RidgeX => "ridge_x",
        LocusTag::RidgeY => "ridge_y",
        LocusTag::BlowUp => "blowup",
    }
}

/// One row per polyline vertex: `polyline,tag,closed,x,y,u,v` with
/// `u = x + y`, `v = x − y`.
pub fn write_polylines_csv(path: &Path, locus: &SingularLocus) -> CliResult<()> {
    let mut s = String::from("polyline,tag,closed,x,y,u,v\n");
    for (k, p) in locus.polylines.iter().enumerate() {
        for &(x, y) in &p.points {
            let _ = writeln!(s, "{k},{},{},{x},{y},{},{}", tag_name(p.tag), p.closed, x + y, x - y);
        }
    }
    write_file(path, &s)
}

pub fn write_intersections_csv(path: &Path, locus: &SingularLocus) -> CliResult<()> {
    let mut s = String::from("x,y,u,v\n");
    for &(x, y) in &locus.intersections {
        let _ = writeln!(s, "{x},{y},{},{}", x + y, x - y);
    }
    write_file(path, &s)
}

/// Sidecar listing flagged vertices of a net mesh.
pub fn write_flagged_csv(path: &Path, net: &VossNet, flagged: &[usize]) -> CliResult<()> {
    let mut s = String::from("vertex,i,j,x,y,X,Y\n");
    for &k in flagged {
        let (i, j) = net.grid.ij(k);
        let (x, y) = net.grid.point(i, j);
        let _ = writeln!(s, "{},{i},{j},{x},{y},{},{}", k + 1, net.xy.x[k], net.xy.y[k]);
    }
    write_file(path, &s)
}
