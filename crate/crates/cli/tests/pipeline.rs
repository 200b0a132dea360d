use std::path::Path;
use std::process::Command as Process;

use nalgebra::Vector3;
use proptest::prelude::*;
use voss_cli::export::{read_grid_csv, read_obj, write_grid_csv, GridTable};
use voss_cli::{run_pipeline, Command, RunConfig, Settings};
use voss_core::grid::GridSpec;

fn config(entries: &[(&str, &str)], out: &Path) -> RunConfig {
    let mut s = Settings::new();
    for (k, v) in entries {
        s.set(k, v);
    }
    s.set("out", &out.display().to_string());
    s.resolve().unwrap()
}

fn check_value(report: &voss_cli::VerificationReport, name: &str) -> f64 {
    report.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("no check {name}")).value
}

#[test]
fn two_by_two_grid_gives_one_quad() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&[("surface", "pseudosphere"), ("symmetry", "scaling"), ("grid", "0.5,0.3,0.1,0.1,2,2")], dir.path());
    let rep = run_pipeline(&cfg, Command::Voss).unwrap();
    assert!(rep.passed, "{:?}", rep.failures().collect::<Vec<_>>());
    let m = read_obj(&dir.path().join("net.obj")).unwrap();
    assert_eq!(m.vertices.len(), 4);
    assert_eq!(m.faces, vec![vec![1, 2, 4, 3]]);
}

#[test]
fn single_node_grid_reports_its_frame() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&[("surface", "pseudosphere"), ("grid", "0.4,0.2,1,1,1,1")], dir.path());
    let rep = run_pipeline(&cfg, Command::Surface).unwrap();
    assert!(rep.passed);
    let f = rep.frame.expect("single-point frame");
    // Pseudosphere at u = 0.6, v = 0.2.
    let (u, v) = (0.6f64, 0.2f64);
    let r = Vector3::new(v.cos() / u.cosh(), v.sin() / u.cosh(), u - u.tanh());
    assert!((f.r - r).amax() < 1e-14);
    let m = read_obj(&dir.path().join("surface.obj")).unwrap();
    assert_eq!(m.vertices.len(), 1);
    assert!(m.faces.is_empty());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(json["frame"]["n"].is_array());
}

#[test]
fn right_helicoid_preset_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&[("preset", "right-helicoid")], dir.path());
    assert_eq!((cfg.grid.nx, cfg.grid.ny), (101, 101));
    let rep = run_pipeline(&cfg, Command::Voss).unwrap();
    assert!(rep.passed, "{:?}", rep.failures().collect::<Vec<_>>());
    let m = read_obj(&dir.path().join("net.obj")).unwrap();
    let g = cfg.grid;
    let helicoid = |x: f64, y: f64| {
        let (u, v) = (x + y, x - y);
        Vector3::new(-v.sin() / u.sinh(), v.cos() / u.sinh(), v)
    };
    let shift = m.vertices[0] - helicoid(g.x0, g.y0);
    for (k, (x, y)) in g.points().into_iter().enumerate() {
        assert!((m.vertices[k] - shift - helicoid(x, y)).amax() < 1e-6, "node {k}");
    }
    assert_eq!(m.faces.len(), 100 * 100);
}

#[test]
fn arch_preset_writes_mesh_and_radioid_locus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&[("preset", "arch")], dir.path());
    let rep = run_pipeline(&cfg, Command::Verify).unwrap();
    assert!(rep.passed, "{:?}", rep.failures().collect::<Vec<_>>());
    assert!(check_value(&rep, "catenary") < 1e-4);
    let text = std::fs::read_to_string(dir.path().join("radioid.csv")).unwrap();
    let mut n = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (u, v): (f64, f64) = (f[5].parse().unwrap(), f[6].parse().unwrap());
        assert!((u.tanh().abs() - v.tan().abs()).abs() < 1e-3, "{line}");
        n += 1;
    }
    assert!(n > 10);
    assert_eq!(read_obj(&dir.path().join("net.obj")).unwrap().vertices.len(), 41 * 41);
}

/// Minimal OBJ grammar: vertices with three finite reals, faces and lines
/// with in-range 1-based indices.
fn validate_obj(text: &str) -> Result<(), String> {
    let mut vertices = 0usize;
    let mut refs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.first().copied() {
            None => {}
            Some(c) if c.starts_with('#') => {}
            Some("v") => {
                if t.len() != 4 || !t[1..].iter().all(|s| s.parse::<f64>().map(f64::is_finite).unwrap_or(false)) {
                    return Err(format!("line {n}: bad vertex"));
                }
                vertices += 1;
            }
            Some("f") | Some("l") => {
                if t.len() < 3 || (t[0] == "f" && t.len() != 5) {
                    return Err(format!("line {n}: bad element"));
                }
                for s in &t[1..] {
                    refs.push(s.parse::<usize>().map_err(|_| format!("line {n}: bad index"))?);
                }
            }
            Some(other) => return Err(format!("line {n}: unknown statement {other}")),
        }
    }
    if refs.iter().any(|&r| r == 0 || r > vertices) {
        return Err("index out of range".into());
    }
    Ok(())
}

#[test]
fn koru_mesh_is_valid_obj_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&[("preset", "koru"), ("obj_lines", "true")], dir.path());
    let rep = run_pipeline(&cfg, Command::Voss).unwrap();
    assert!(rep.passed, "{:?}", rep.failures().collect::<Vec<_>>());
    let text = std::fs::read_to_string(dir.path().join("net.obj")).unwrap();
    validate_obj(&text).unwrap();
    let m = read_obj(&dir.path().join("net.obj")).unwrap();
    assert_eq!(m.lines.len(), 49 + 49);
    // Vertices and the CSV copy of the same grid agree.
    let t = read_grid_csv(&dir.path().join("net.csv")).unwrap();
    let (qx, qy, qz) = (t.get("q_x").unwrap(), t.get("q_y").unwrap(), t.get("q_z").unwrap());
    for (k, v) in m.vertices.iter().enumerate() {
        let scale = v.amax().max(1.0);
        assert!((v - Vector3::new(qx[k], qy[k], qz[k])).amax() <= 1e-12 * scale);
    }
    assert_eq!(t.points, cfg.grid.points());
    // Nodes next to the blow-up curves are listed in the sidecar.
    let flagged = std::fs::read_to_string(dir.path().join("net_flagged.csv")).unwrap();
    assert!(flagged.starts_with("vertex,i,j,x,y,X,Y"));
}

#[test]
fn reports_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let entries = [("preset", "dini-helicoid"), ("span", "0.05,1.05,-0.287,0.713,15,15")];
    run_pipeline(&config(&entries, a.path()), Command::Verify).unwrap();
    run_pipeline(&config(&entries, b.path()), Command::Verify).unwrap();
    let ra = std::fs::read(a.path().join("report.json")).unwrap();
    let rb = std::fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
    for name in ["net.csv", "net.obj", "field.csv", "singular.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn dimension_report_for_the_three_soliton() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        &[
            ("solution", "three-soliton"),
            ("span", "0.4,1.4,-0.35,0.65,11,11"),
            ("members", "khorkova:-1; pmkdv:3; pmkdv:2; pmkdv:1"),
        ],
        dir.path(),
    );
    let rep = run_pipeline(&cfg, Command::Dimension).unwrap();
    let d = rep.dependency.unwrap();
    assert_eq!(d.voss_dimension, Some(3));
    assert_eq!(d.null_vectors.len(), 1);
    let r = d.null_vectors[0].rational_strings().unwrap();
    assert_eq!(r, vec!["0", "1", "-4", "7"]);
}

#[test]
fn sequence_report_records_the_halt() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        &[("surface", "pseudosphere"), ("span", "0.3,1.3,-0.187,0.813,21,21"), ("sequence", "pmkdv:1")],
        dir.path(),
    );
    let rep = run_pipeline(&cfg, Command::Sequence).unwrap();
    let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["sequence"]["halt"]["Degenerate"]["member"], "pmkdv:1");
    assert_eq!(rep.sequence.unwrap().nets, 0);
}

fn voss(args: &[&str]) -> i32 {
    Process::new(env!("CARGO_BIN_EXE_voss")).args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let small = "0.5,-0.187,0.1,0.1,5,5";
    assert_eq!(voss(&["voss", "--preset", "right-helicoid", "--grid", small, "--out", &out]), 0);
    assert_eq!(voss(&["voss", "--preset", "right-helicoid", "--grid", small, "--tol", "support=1e-30", "--out", &out]), 1);
    assert_eq!(voss(&["voss", "--preset", "right-helicoid", "--tol", "support=-1", "--out", &out]), 2);
    assert_eq!(voss(&["voss", "--preset", "koru", "--grid", "0,0,0.1,0.1,3,3", "--out", &out]), 2);
    assert_eq!(voss(&["frobnicate"]), 2);
    // A numeric failure inside the kernel: the travelling wave gives a
    // degenerate net.
    assert_eq!(voss(&["voss", "--set", "surface=pseudosphere", "--set", "symmetry=translate:x", "--grid", small, "--out", &out]), 1);
    let cfg_file = dir.path().join("run.cfg");
    std::fs::write(&cfg_file, "preset = arch\nspan = 0.1,1.3,0.1,1.3,9,9\n").unwrap();
    assert_eq!(voss(&["surface", "--config", &cfg_file.display().to_string(), "--out", &out]), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_grids_round_trip(values in proptest::collection::vec(-1e300f64..1e300, 12), x0 in -5.0f64..5.0, dx in 1e-3f64..1.0) {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(x0, -x0, dx, 2.0 * dx, 4, 3).unwrap();
        let t = GridTable::new(&g).column("a", values.clone()).column("b", values.iter().map(|v| v / 3.0).collect());
        let p = dir.path().join("g.csv");
        write_grid_csv(&p, &g, &t).unwrap();
        let r = read_grid_csv(&p).unwrap();
        prop_assert_eq!(r, t);
    }
}
