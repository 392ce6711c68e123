use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hstv::mesh::{AxisBox, Triangulation};
use hstv::oriented_grid::{rotation_2d, OrientationField};
use serde_json::Value;

fn hstv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hstv")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = hstv(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_field(dir: &Path) -> PathBuf {
    let delta = 0.5;
    let domain = AxisBox::new(vec![0.0; 2], vec![1.0; 2]).unwrap();
    let field = OrientationField::from_fn(delta, &domain, &[0.25, 0.25], |z| {
        rotation_2d(if z[0] < 0.5 { 0.0 } else { PI / 7.0 } + if z[1] < 0.5 { 0.0 } else { PI / 5.0 })
    })
    .unwrap();
    let f = path(dir, "field.json");
    std::fs::write(&f, field.to_json()).unwrap();
    f
}

#[test]
fn radial_cone_line() {
    assert_eq!(ok(&["radial", "--profile", "cone:2", "--p", "1", "--r", "2"]).trim(), "12.5663706144,6.28318530718,6.28318530718");
}

#[test]
fn mesh_files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let m = path(dir.path(), "m.json");
    ok(&["mesh", "gen", "--kind", "lattice", "--eps", "1/8", "--box", "0", "0", "1", "1", "--out", s(&m)]);
    let text = std::fs::read_to_string(&m).unwrap();
    let mesh = Triangulation::from_json(&text).unwrap();
    assert_eq!(mesh.vertices().len(), 81);
    assert_eq!(mesh.to_json(), text);
}

#[test]
fn oriented_generation_is_byte_identical_and_audits_clean() {
    let dir = tempfile::tempdir().unwrap();
    let field = write_field(dir.path());
    let (a, b) = (path(dir.path(), "a.json"), path(dir.path(), "b.json"));
    let audit = path(dir.path(), "audit.json");
    for out in [&a, &b] {
        ok(&["mesh", "gen", "--kind", "oriented", "--field", s(&field), "--eps", "1/32", "--out", s(out), "--audit", s(&audit)]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let audit: Value = serde_json::from_str(&std::fs::read_to_string(&audit).unwrap()).unwrap();
    assert_eq!(audit["orientation_ok"], Value::Bool(true));

    let check = ok(&["mesh", "check", "--mesh", s(&a), "--eps", "1/32", "--box", "0", "0", "1", "1"]);
    let report: Value = serde_json::from_str(&check).unwrap();
    assert_eq!(report["delaunay_ok"], Value::Bool(true));
    assert!(report["nondegeneracy_c"].as_f64().unwrap().is_finite());
}

#[test]
fn interpolate_then_measure() {
    let dir = tempfile::tempdir().unwrap();
    let (m, f) = (path(dir.path(), "m.json"), path(dir.path(), "f.json"));
    ok(&["mesh", "gen", "--kind", "lattice", "--eps", "1/8", "--box", "0", "0", "1", "1", "--out", s(&m)]);
    ok(&["cpwl", "interp", "--mesh", s(&m), "--target", "affine:2,-3,1", "--out", s(&f)]);
    let report: Value = serde_json::from_str(&ok(&["cpwl", "htv", "--fn", s(&f), "--box", "0.1", "0.1", "0.9", "0.9"])).unwrap();
    assert!(report["total"].as_f64().unwrap().abs() < 1e-12);
    // p only changes the label, never the number
    let a = ok(&["cpwl", "htv", "--fn", s(&f), "--box", "0.1", "0.1", "0.9", "0.9", "--p", "inf"]);
    let b = ok(&["cpwl", "htv", "--fn", s(&f), "--box", "0.1", "0.1", "0.9", "0.9", "--p", "2"]);
    assert_eq!(a, b);
}

#[test]
fn approx_saddle_gaps_shrink() {
    let csv = ok(&["approx", "--target", "quad_saddle", "--eps", "1/16,1/32"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eps,delta,htv,target,gap"));
    let gaps: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(gaps.len(), 2);
    assert!(gaps.iter().all(|&g| g > 0.0));
    assert!(gaps[1] < gaps[0]);
}

#[test]
fn fit_solution_is_a_cpwl_file() {
    let dir = tempfile::tempdir().unwrap();
    let (m, pts, sol) = (path(dir.path(), "m.json"), path(dir.path(), "p.csv"), path(dir.path(), "sol.json"));
    ok(&["mesh", "gen", "--kind", "lattice", "--eps", "1/4", "--box", "0", "0", "1", "1", "--out", s(&m)]);
    std::fs::write(&pts, "0.25,0.25,1\n0.75,0.5,-1\n0.5,0.75,0.5\n0.26,0.74,0.2\n").unwrap();
    ok(&["fit", "--mesh", s(&m), "--points", s(&pts), "--lambda", "3", "--out", s(&sol)]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    let htv_part = v["htv_part"].as_f64().unwrap();
    let measured: Value = serde_json::from_str(&ok(&["cpwl", "htv", "--fn", s(&sol), "--box", "0", "0", "1", "1"])).unwrap();
    assert!((measured["total"].as_f64().unwrap() - htv_part).abs() <= 1e-9 * (1.0 + htv_part));
    assert!(v["certificate"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn sweep_reports_the_plateau() {
    let dir = tempfile::tempdir().unwrap();
    let (m, pts) = (path(dir.path(), "m.json"), path(dir.path(), "p.csv"));
    ok(&["mesh", "gen", "--kind", "lattice", "--eps", "1/4", "--box", "0", "0", "1", "1", "--out", s(&m)]);
    std::fs::write(&pts, "0.5,0.5,1\n").unwrap();
    let v: Value = serde_json::from_str(&ok(&["fit", "--mesh", s(&m), "--points", s(&pts), "--sweep", "1,5,100", "--exterior", "zero"])).unwrap();
    for key in ["monotone", "plateau", "modification_ok"] {
        assert_eq!(v[key], Value::Bool(true), "{key}");
    }
    // The discrete cone over the 2×2 patch around the centre costs 16.
    assert!((v["threshold"].as_f64().unwrap() - 16.0).abs() < 1e-9);

    std::fs::write(&pts, "0,0,1\n").unwrap();
    let o = hstv(&["fit", "--mesh", s(&m), "--points", s(&pts), "--sweep", "1", "--exterior", "zero"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("boundary"));
}

#[test]
fn exit_codes() {
    assert_eq!(hstv(&["--help"]).status.code(), Some(0));
    assert_eq!(hstv(&["--version"]).status.code(), Some(0));
    assert_eq!(hstv(&["radial", "--bogus"]).status.code(), Some(2));
    assert_eq!(hstv(&["radial", "--profile", "cone:2", "--p", "0.5"]).status.code(), Some(2));
    assert_eq!(hstv(&["mesh", "gen", "--kind", "lattice", "--eps", "0", "--box", "0", "0", "1", "1", "--out", "/dev/null"]).status.code(), Some(2));
    assert_eq!(hstv(&["radial", "--profile", "cone:1"]).status.code(), Some(2));
    // oversized grids are refused before any work is done
    assert_eq!(hstv(&["approx", "--target", "quad_iso", "--eps", "1/16,1e-9"]).status.code(), Some(2));
    // unreadable input is a validation error
    assert_eq!(hstv(&["cpwl", "htv", "--fn", "/nonexistent/f.json"]).status.code(), Some(2));
    // collinear points admit no triangulation: a numeric failure
    let dir = tempfile::tempdir().unwrap();
    let pts = path(dir.path(), "line.csv");
    std::fs::write(&pts, "0,0\n1,1\n2,2\n3,3\n").unwrap();
    let out = path(dir.path(), "m.json");
    assert_eq!(hstv(&["mesh", "gen", "--kind", "delaunay", "--points", s(&pts), "--out", s(&out)]).status.code(), Some(3));
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "run.json");
    std::fs::write(&cfg, r#"{"command": "radial", "profile": "bump:0.5", "p": "2", "r": "1", "seed": 7}"#).unwrap();
    assert_eq!(ok(&["--config", s(&cfg)]), ok(&["radial", "--profile", "bump:0.5", "--p", "2", "--r", "1"]));

    std::fs::write(&cfg, r#"{"command": "radial", "profile": "cone:2", "seed": "seven"}"#).unwrap();
    assert_eq!(hstv(&["--config", s(&cfg)]).status.code(), Some(2));
}
