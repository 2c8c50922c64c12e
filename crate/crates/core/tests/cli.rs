use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const DISK: &str = r#"
[geometry]
kind = "disk"
radius = 1.0
h = 0.05

[integrand]
kind = "torsion"
lambda = 1.0

[deformation]
preset = "dilation"

[routes]
compute = ["volume", "boundary", "special"]
"#;

fn setup(config: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn shapehess(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapehess"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

/// `name -> value` from a two-column or derivatives CSV.
fn lookup(csv: &Path, name: &str, column: usize) -> Option<String> {
    fs::read_to_string(csv)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>())
        .find(|f| f[0] == name)
        .map(|f| f[column].clone())
}

fn value(csv: &Path, name: &str, column: usize) -> f64 {
    lookup(csv, name, column).unwrap_or_else(|| panic!("{name} missing")).parse().unwrap()
}

#[test]
fn solve_disk_torsion() {
    let (dir, cfg) = setup(DISK);
    let out = dir.path().join("out");
    let o = shapehess("solve", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j = value(&out.join("summary.csv"), "J_value", 1);
    assert!((j - 0.196350).abs() / 0.196350 < 1e-2, "{j}");
    assert!(value(&out.join("summary.csv"), "el_residual", 1) < 1e-10);

    let state = fs::read_to_string(out.join("state.csv")).unwrap();
    assert!(state.starts_with("dof,x,y,u,bc\n"));
    let boundary = state.lines().filter(|l| l.ends_with(",D")).count();
    assert!(boundary > 0);
    let vtk = fs::read_to_string(out.join("fields.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(vtk.contains("DATASET UNSTRUCTURED_GRID") && vtk.contains("VECTORS sigma double"));
}

#[test]
fn zero_load_gives_zero_value() {
    let (dir, cfg) = setup(&DISK.replace("lambda = 1.0", "lambda = 0.0"));
    let out = dir.path().join("out");
    assert_eq!(shapehess("solve", &cfg, &out, &[]).status.code(), Some(0));
    assert_eq!(value(&out.join("summary.csv"), "J_value", 1), 0.0);
}

#[test]
fn malformed_config_names_the_key() {
    let (dir, cfg) = setup(&DISK.replace("radius = 1.0", "radius = 1.0\nresolution = 3"));
    let o = shapehess("solve", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("CONFIG") && err.contains("resolution"), "{err}");

    let (dir, cfg) = setup(&DISK.replace("h = 0.05", "h = 2.0"));
    let o = shapehess("derive", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("geometry.h"));

    let o = Command::new(env!("CARGO_BIN_EXE_shapehess")).arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn derive_disk_dilation() {
    let (dir, cfg) = setup(DISK);
    let out = dir.path().join("out");
    assert_eq!(shapehess("derive", &cfg, &out, &[]).status.code(), Some(0));
    let csv = out.join("derivatives.csv");
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("route,order,value,residual,h,notes\n"));
    for (route, exact) in [("J1_volume", 0.785398), ("J2_volume", 2.356194), ("J2_boundary", 2.356194), ("J2_torsion", 2.356194)] {
        let v = value(&csv, route, 2);
        assert!((v - exact).abs() / exact < 1e-2, "{route} {v}");
    }
    assert!(lookup(&csv, "fd_second", 2).is_none());
    assert!(fs::read_to_string(out.join("fields.vtk")).unwrap().contains("SCALARS C_normal double 1"));
}

#[test]
fn zero_field_gives_zero_rows() {
    let (dir, cfg) = setup(&DISK.replace("preset = \"dilation\"", "preset = \"zero\"").replace(", \"special\"]", ", \"special\", \"fd\"]\neps_list = [0.1, 0.05]"));
    let out = dir.path().join("out");
    assert_eq!(shapehess("derive", &cfg, &out, &[]).status.code(), Some(0));
    let text = fs::read_to_string(out.join("derivatives.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 7);
    for r in rows {
        let v: f64 = r.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(v, 0.0, "{r}");
    }
}

#[test]
fn ptorsion_with_neumann_part_is_unsupported() {
    let cfg = DISK
        .replace("h = 0.05", "h = 0.2\ndirichlet_fraction = 0.5")
        .replace("kind = \"torsion\"", "kind = \"p_torsion\"\np = 3.0")
        .replace("preset = \"dilation\"", "preset = \"normal\"");
    let (dir, cfg) = setup(&cfg);
    let o = shapehess("derive", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("UNSUPPORTED_COMBINATION"));
}

fn invariant_rows(dir: &Path) -> Vec<(String, f64, bool)> {
    fs::read_to_string(dir.join("invariants.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[3] == "true")
        })
        .collect()
}

#[test]
fn validate_disk_passes() {
    let (dir, cfg) = setup(DISK);
    let out = dir.path().join("out");
    let o = shapehess("validate", &cfg, &out, &["--seed", "3"]);
    let rows = invariant_rows(&out);
    assert_eq!(o.status.code(), Some(0), "{rows:?}");
    assert!(rows.iter().all(|r| r.2));
    let sweep = fs::read_to_string(out.join("fd_sweep.csv")).unwrap();
    assert!(sweep.starts_with("eps,J_plus,J_minus,r1,r2,r_eps_plus,r_eps_minus,status\n"));
    assert_eq!(sweep.lines().count(), 5);
}

#[test]
fn validate_flags_a_coarse_mesh() {
    let (dir, cfg) = setup(&DISK.replace("h = 0.05", "h = 0.4"));
    let out = dir.path().join("out");
    assert_eq!(shapehess("validate", &cfg, &out, &[]).status.code(), Some(1));
    let rows = invariant_rows(&out);
    assert!(rows.iter().any(|r| r.0.ends_with("route_disagreement") && !r.2), "{rows:?}");
}

#[test]
fn validate_compact_field_reports_gamma_distances() {
    let cfg = DISK.replace("preset = \"dilation\"", "preset = \"radial_bump\"\ncenter = [0.1, 0.0]\nradius = 0.5\namplitude = 0.5");
    let (dir, cfg) = setup(&cfg);
    let out = dir.path().join("out");
    shapehess("validate", &cfg, &out, &[]);
    let gamma: Vec<f64> =
        invariant_rows(&out).into_iter().filter(|r| r.0.starts_with("gamma_check_eps")).map(|r| r.1).collect();
    assert_eq!(gamma.len(), 4);
    assert!(gamma.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn sweep_orders() {
    let (dir, cfg) = setup(&DISK.replace("h = 0.05", "h = 0.1"));
    let out = dir.path().join("out");
    assert_eq!(shapehess("sweep", &cfg, &out, &["--levels", "1"]).status.code(), Some(0));
    let text = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(text.starts_with("quantity,level,h,value,order\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(',')));

    assert_eq!(shapehess("sweep", &cfg, &out, &["--levels", "3"]).status.code(), Some(0));
    let csv = out.join("convergence.csv");
    let order = |q: &str, level: &str| -> f64 {
        fs::read_to_string(&csv)
            .unwrap()
            .lines()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .find(|f| f[0] == q && f[1] == level)
            .map(|f| f[4].parse().unwrap())
            .unwrap()
    };
    assert!(order("J_value", "2") >= 2.0);
    assert!(order("J2_route_disagreement", "1") >= 0.8 && order("J2_route_disagreement", "2") >= 0.8);
}

#[test]
fn derive_is_byte_stable() {
    let (dir, cfg) = setup(&DISK.replace("h = 0.05", "h = 0.1").replace(", \"special\"]", ", \"special\", \"fd\"]"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(shapehess("derive", &cfg, &a, &["--threads", "2"]).status.code(), Some(0));
    assert_eq!(shapehess("derive", &cfg, &b, &["--threads", "2"]).status.code(), Some(0));
    for f in ["derivatives.csv", "fields.vtk"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
