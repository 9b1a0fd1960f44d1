use std::path::{Path, PathBuf};
use std::process::Command;

use trailstop_cli::commands::{verify_checks, VerifyOptions};
use trailstop_cli::RunConfig;

fn paper_cfg() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("paper.cfg")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("trailstop-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn trailstop(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_trailstop")).args(args).output().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn solve_reports_thresholds() {
    let out = scratch("solve");
    let o = trailstop(&["solve", "--config", paper_cfg().to_str().unwrap(), "--out", out.to_str().unwrap(), "--fixed-table"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_csv(&out.join("solve.csv"));
    let get = |k: &str| num(&rows.iter().find(|r| r[0] == k).unwrap()[1]);
    assert!((get("b_f_star") - 2.8845).abs() < 1e-3);
    assert!((get("psi_b_f_star") - 1.0674).abs() < 1e-3);
    assert!((get("z_bar_f_star") - 0.5441).abs() < 1e-3);
    assert!((get("b_lower_f_star") - 1.9488).abs() < 1e-3);
    let (header, table) = read_csv(&out.join("fixed_stop_table.csv"));
    assert_eq!(header, ["running_max", "floor", "b_of_floor"]);
    assert!(table.len() >= 400);
}

#[test]
fn malformed_floor_exits_nonzero() {
    let dir = scratch("bad");
    let text = std::fs::read_to_string(paper_cfg()).unwrap().replace("alpha = 0.3", "alpha = 1.2");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, text).unwrap();
    let o = trailstop(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid floor"));
}

#[test]
fn failed_assumption_is_named() {
    let dir = scratch("assumption");
    let text = std::fs::read_to_string(paper_cfg())
        .unwrap()
        .replace("kind = \"linear\"", "kind = \"tabulated\"\nx = [0.5, 1.0, 2.0, 3.0]\nh = [-1.0, -1.0, -1.0, -1.0]");
    let cfg = dir.join("neg.cfg");
    std::fs::write(&cfg, text).unwrap();
    let o = trailstop(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("positive-somewhere"));
}

#[test]
fn curves_have_markers_and_expected_shape() {
    let out = scratch("curves");
    let o = trailstop(&["curves", "--config", paper_cfg().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = [
        ("transform_h_hf.csv", "z_f_star"),
        ("value_h_vf.csv", "b_f_star"),
        ("acquisition_transform.csv", "z_bar_f_star"),
        ("acquisition_value.csv", "b_lower_f_star"),
        ("premium.csv", "b_f_star"),
    ];
    for (name, mark) in files {
        let (header, rows) = read_csv(&out.join(name));
        assert_eq!(header.last().unwrap(), "marker");
        assert_eq!(rows.iter().filter(|r| r.last().unwrap() == mark).count(), 1, "{name}");
    }
    let (_, rows) = read_csv(&out.join("transform_h_hf.csv"));
    let z_star = num(&rows.iter().find(|r| r[3] == "z_f_star").unwrap()[0]);
    for r in &rows {
        if num(&r[0]) < z_star {
            assert!(num(&r[2]) >= num(&r[1]), "H_f < H at z = {}", r[0]);
        }
    }
    let (_, rows) = read_csv(&out.join("premium.csv"));
    let last = rows.last().unwrap();
    assert_eq!(num(&last[0]), 20.0);
    let ratio = num(&last[1]) / 20.0;
    assert!((0.25..=0.32).contains(&ratio), "{ratio}");
    // floats carry 12 significant digits
    assert_eq!(last[1].replace(['-', '.'], "").trim_start_matches('0').len(), 12);
}

#[test]
fn sweep_marks_unprofitable_entry() {
    let dir = scratch("sweep");
    let text = std::fs::read_to_string(paper_cfg()).unwrap().replace("c = 0.04", "c = 5.0");
    let cfg = dir.join("costly.cfg");
    std::fs::write(&cfg, text).unwrap();
    let o = trailstop(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.join("sweep_alpha.csv"));
    assert_eq!(header, ["alpha", "b_f_star", "x0", "b_lower_f_star", "entry"]);
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r[4] == "no-entry" && r[3].is_empty()));
}

fn small_mc(n_paths: usize, refine: bool) -> RunConfig {
    let mut cfg = RunConfig::load(&paper_cfg()).unwrap();
    let mc = cfg.mc.as_mut().unwrap();
    mc.n_paths = n_paths;
    mc.refine = refine;
    mc.trailing_points = vec![[2.0, 2.0]];
    mc.fixed_points.clear();
    mc.exit_points.clear();
    cfg
}

#[test]
fn verify_is_deterministic_for_a_seed() {
    let dir = scratch("verify");
    let mut cfg = small_mc(4_000, false);
    cfg.mc.as_mut().unwrap().exit_points = vec![[2.0, 1.5, 2.5]];
    let text = cfg.to_toml().unwrap();
    let path = dir.join("small.cfg");
    std::fs::write(&path, text).unwrap();
    let args = ["verify", "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--seed", "99"];
    let a = trailstop(&args);
    let first = std::fs::read_to_string(dir.join("verify.csv")).unwrap();
    let b = trailstop(&args);
    let second = std::fs::read_to_string(dir.join("verify.csv")).unwrap();
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(first, second);
    assert_eq!(first.lines().count(), 1 + 5);
}

#[test]
fn perturbed_threshold_is_detected() {
    let cfg = small_mc(100_000, false);
    let opts = VerifyOptions { seed: Some(5), threshold_shift: 0.05 };
    let checks = verify_checks(&cfg, opts).unwrap();
    let v = checks.iter().find(|c| c.quantity.starts_with("v_f")).unwrap();
    assert!(v.z() < -3.0, "z = {}", v.z());
    let honest = verify_checks(&cfg, VerifyOptions { seed: Some(5), threshold_shift: 0.0 }).unwrap();
    let v = honest.iter().find(|c| c.quantity.starts_with("v_f")).unwrap();
    assert!(v.z().abs() <= 3.0, "z = {}", v.z());
}
