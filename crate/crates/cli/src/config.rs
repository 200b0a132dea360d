//! Run configuration: flat `key = value` files, presets and overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use voss_core::catalog::{ClosedFormSurface, SGSolution};
use voss_core::frames::{check_grid_regular, Surface};
use voss_core::grid::GridSpec;

use crate::error::{CliError, CliResult};

/// Default tolerances by check name.
pub const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("sine_gordon", 1e-10),
    ("gauss_weingarten", 1e-8),
    ("frame", 1e-8),
    ("moutard", 1e-10),
    ("moutard_quadrature", 1e-7),
    ("closedness", 1e-6),
    ("conjugacy", 1e-5),
    ("geodesic", 1e-5),
    ("support", 1e-8),
    ("xy_system", 1e-6),
    ("reference", 1e-6),
    ("locus", 1e-3),
    ("catenary", 1e-4),
    ("round_trip", 1e-6),
    ("matrix_form", 1e-6),
];

/// Nodes whose `|X|` or `|Y|` exceed this are flagged in the sidecar.
pub const DEFAULT_BLOWUP_CAP: f64 = 1e6;

/// Named bundles of settings reproducing the worked examples.
pub const PRESETS: &[(&str, &[(&str, &str)])] = &[
    (
        "pseudosphere-helicoid",
        &[("surface", "pseudosphere"), ("symmetry", "-0.5*scaling"), ("span", "0.5,2.0,-0.187,1.313,101,101")],
    ),
    (
        "right-helicoid",
        &[("surface", "pseudosphere"), ("symmetry", "-0.5*scaling"), ("span", "0.5,2.0,-0.187,1.313,101,101")],
    ),
    (
        "dini-helicoid",
        &[("surface", "dini:0.5"), ("symmetry", "-0.5*scaling"), ("span", "0.05,1.05,-0.287,0.713,41,41")],
    ),
    (
        "koru",
        &[("surface", "kuen"), ("symmetry", "0.25*translate:x"), ("span", "-1.2,1.2,-1.187,1.213,49,49")],
    ),
    (
        "eared-screw",
        &[("surface", "kuen"), ("symmetry", "0.5*scaling"), ("span", "-1.2,1.2,-1.187,1.213,49,49")],
    ),
    (
        "arch",
        &[("surface", "pseudosphere"), ("symmetry", "rplusid_inv:(normal:0,1,0)"), ("span", "0.1,1.3,0.1,1.3,41,41")],
    ),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub preset: Option<String>,
    /// Identifier of the sine-Gordon solution.
    pub solution: String,
    /// Closed-form surface identifier, or `gw` for a surface integrated
    /// from the solution.
    pub surface: String,
    pub symmetry: Option<String>,
    pub grid: GridSpec,
    /// Quadrature base point; the grid origin when absent.
    pub base: Option<(f64, f64)>,
    /// Position of the inverse-operator net at the base point.
    pub anchor: [f64; 3],
    /// Integration constants in order of introduction.
    pub constants: Vec<f64>,
    #[serde(skip)]
    pub out: PathBuf,
    pub tolerances: BTreeMap<String, f64>,
    pub blowup_cap: f64,
    /// Sequence seed: `pmkdv:<n>`, `khorkova:<n>` or `recursion:(<spec>)`.
    pub sequence: Option<String>,
    pub direction: i32,
    pub max_n: usize,
    /// Members of a dependency analysis.
    pub members: Vec<String>,
    pub sample_seed: u64,
    /// Write `l` polylines for the coordinate lines in OBJ files.
    pub obj_lines: bool,
}

/// Ordered `key = value` assignments; later entries win.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    entries: Vec<(String, String)>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Settings {
    pub fn new() -> Self {
        Settings::default()
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.push((key.trim().to_string(), value.trim().to_string()));
    }

    /// Parses `key=value` as given on the command line.
    pub fn set_assignment(&mut self, text: &str) -> CliResult<()> {
        let (k, v) = text.split_once('=').ok_or_else(|| config_err(format!("expected key=value, got '{text}'")))?;
        if k.trim().is_empty() {
            return Err(config_err(format!("empty key in '{text}'")));
        }
        self.set(k, v);
        Ok(())
    }

    /// Reads a flat configuration file: one `key = value` per line, `#`
    /// starts a comment.
    pub fn parse_text(&mut self, text: &str) -> CliResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_assignment(line).map_err(|e| config_err(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.parse_text(&text)
    }

    fn last(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Resolves the preset (if any) underneath the explicit entries.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let preset = self.last("preset").filter(|p| !p.is_empty()).map(str::to_string);
        let mut layered: Vec<(String, String)> = Vec::new();
        if let Some(name) = &preset {
            let (_, entries) = PRESETS
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| config_err(format!("unknown preset '{name}'; known: {}", preset_names().join(", "))))?;
            layered.extend(entries.iter().map(|(k, v)| (k.to_string(), v.to_string())));
        }
        layered.extend(self.entries.iter().filter(|(k, _)| k != "preset").cloned());
        build(preset, &layered)
    }
}

fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| config_err(format!("{key}: '{v}' is not a finite number")))
}

fn parse_list(key: &str, v: &str) -> CliResult<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_f64(key, s)).collect()
}

fn parse_count(key: &str, v: &str) -> CliResult<usize> {
    let x = parse_f64(key, v)?;
    if x < 0.0 || x.fract() != 0.0 {
        return Err(config_err(format!("{key}: '{v}' is not a node count")));
    }
    Ok(x as usize)
}

/// `x0,y0,dx,dy,nx,ny`.
pub fn parse_grid(v: &str) -> CliResult<GridSpec> {
    let p: Vec<&str> = v.split(',').collect();
    if p.len() != 6 {
        return Err(config_err(format!("grid: expected x0,y0,dx,dy,nx,ny, got '{v}'")));
    }
    let f = |k: usize| parse_f64("grid", p[k]);
    GridSpec::new(f(0)?, f(1)?, f(2)?, f(3)?, parse_count("grid", p[4])?, parse_count("grid", p[5])?)
        .map_err(|e| config_err(e.to_string()))
}

/// `xa,xb,ya,yb,nx,ny`.
pub fn parse_span(v: &str) -> CliResult<GridSpec> {
    let p: Vec<&str> = v.split(',').collect();
    if p.len() != 6 {
        return Err(config_err(format!("span: expected xa,xb,ya,yb,nx,ny, got '{v}'")));
    }
    let f = |k: usize| parse_f64("span", p[k]);
    let (xa, xb, ya, yb) = (f(0)?, f(1)?, f(2)?, f(3)?);
    let (nx, ny) = (parse_count("span", p[4])?, parse_count("span", p[5])?);
    if (nx > 1 && xb <= xa) || (ny > 1 && yb <= ya) {
        return Err(config_err(format!("span: empty range in '{v}'")));
    }
    GridSpec::spanning(xa, xb, ya, yb, nx, ny).map_err(|e| config_err(e.to_string()))
}

fn build(preset: Option<String>, entries: &[(String, String)]) -> CliResult<RunConfig> {
    let mut solution: Option<String> = None;
    let mut surface: Option<String> = None;
    let mut symmetry = None;
    let mut grid = None;
    let mut base = None;
    let mut anchor = [0.0; 3];
    let mut constants = Vec::new();
    let mut out = PathBuf::from("out");
    let mut tolerances: BTreeMap<String, f64> = DEFAULT_TOLERANCES.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let mut blowup_cap = DEFAULT_BLOWUP_CAP;
    let mut sequence = None;
    let mut direction = 1;
    let mut max_n = 3;
    let mut members = Vec::new();
    let mut sample_seed = 0;
    let mut obj_lines = false;

    for (key, v) in entries {
        match key.as_str() {
            "solution" => solution = Some(v.clone()),
            "surface" => surface = Some(v.clone()),
            "symmetry" => symmetry = Some(v.clone()).filter(|s| !s.is_empty()),
            "grid" => grid = Some(parse_grid(v)?),
            "span" => grid = Some(parse_span(v)?),
            "base" => {
                let p = parse_list(key, v)?;
                if p.len() != 2 {
                    return Err(config_err(format!("base: expected x,y, got '{v}'")));
                }
                base = Some((p[0], p[1]));
            }
            "anchor" => {
                let p = parse_list(key, v)?;
                if p.len() != 3 {
                    return Err(config_err(format!("anchor: expected x,y,z, got '{v}'")));
                }
                anchor = [p[0], p[1], p[2]];
            }
            "const" | "constants" => constants = parse_list(key, v)?,
            "out" => out = PathBuf::from(v),
            "blowup_cap" => blowup_cap = parse_f64(key, v)?,
            "sequence" => sequence = Some(v.clone()),
            "direction" => {
                direction = match v.as_str() {
                    "1" | "+1" => 1,
                    "-1" => -1,
                    _ => return Err(config_err(format!("direction: expected 1 or -1, got '{v}'"))),
                }
            }
            "max_n" => max_n = parse_count(key, v)?,
            "members" => members = v.split(';').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            "sample_seed" => sample_seed = parse_count(key, v)? as u64,
            "obj_lines" => {
                obj_lines = match v.as_str() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(config_err(format!("obj_lines: expected true or false, got '{v}'"))),
                }
            }
            k => match k.strip_prefix("tol.") {
                Some(name) => {
                    if !tolerances.contains_key(name) {
                        return Err(config_err(format!("unknown tolerance '{name}'")));
                    }
                    tolerances.insert(name.to_string(), parse_f64(key, v)?);
                }
                None => return Err(config_err(format!("unknown key '{k}'"))),
            },
        }
    }

    for (name, t) in &tolerances {
        if !(*t > 0.0) {
            return Err(config_err(format!("tolerance {name} must be positive")));
        }
    }
    if !(blowup_cap > 0.0) {
        return Err(config_err("blowup_cap must be positive"));
    }
    let grid = grid.ok_or_else(|| config_err("no grid: set `grid`, `span` or a preset"))?;

    let surface = surface.unwrap_or_else(|| "gw".into());
    let solution = if surface == "gw" {
        let s = solution.ok_or_else(|| config_err("surface `gw` needs a `solution`"))?;
        SGSolution::from_id(&s).map_err(|e| config_err(e.to_string()))?.id()
    } else {
        let cf = ClosedFormSurface::from_id(&surface).map_err(|e| config_err(e.to_string()))?;
        let own = cf.solution().id();
        if let Some(s) = solution {
            let given = SGSolution::from_id(&s).map_err(|e| config_err(e.to_string()))?.id();
            if given != own {
                return Err(config_err(format!("surface {surface} lives over {own}, not {given}")));
            }
        }
        own
    };
    let phi = SGSolution::from_id(&solution).map_err(|e| config_err(e.to_string()))?;
    check_grid_regular(&phi, &grid).map_err(|e| config_err(format!("grid leaves the regular domain: {e}")))?;
    if let Some((bx, by)) = base {
        if grid.node_of(bx, by).is_none() {
            return Err(config_err(format!("base ({bx}, {by}) is not a grid node")));
        }
    }

    Ok(RunConfig {
        preset,
        solution,
        surface,
        symmetry,
        grid,
        base,
        anchor,
        constants,
        out,
        tolerances,
        blowup_cap,
        sequence,
        direction,
        max_n,
        members,
        sample_seed,
        obj_lines,
    })
}

impl RunConfig {
    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Base node of the quadratures.
    pub fn base_point(&self) -> (f64, f64) {
        self.base.unwrap_or((self.grid.x0, self.grid.y0))
    }
}
