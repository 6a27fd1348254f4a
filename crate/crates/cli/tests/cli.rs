use std::path::Path;
use std::process::{Command, Output};

fn kfl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfl"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .arg("--jobs")
        .arg("1")
        .env_remove("KFL_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn simulate_writes_snapshots_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("maxwellian-perturbation.ini");
    let out = kfl(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["simulate.csv", "simulate.json", "iteration_report.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let snaps = std::fs::read_dir(dir.path().join("snapshots")).unwrap().count();
    assert_eq!(snaps, 9);
    let json: String = std::fs::read_to_string(dir.path().join("simulate.json")).unwrap();
    assert!(json.contains("\"rk4_gap\""));
}

#[test]
fn missing_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = kfl(&["simulate", "--config", "/nonexistent/kfl.ini"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read config file"));
}

#[test]
fn unknown_override_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = kfl(&["counting-check", "--bogus", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn single_cell_counting_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = kfl(&["counting-check", "--N", "1", "--M", "1", "--K", "1", "--queries", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("counting-check.csv")).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 1);
    let ratio: f64 = rows[0].last().unwrap().parse().unwrap();
    assert!(ratio.is_finite());
    let all = std::fs::read_to_string(dir.path().join("counting-check-queries.csv")).unwrap();
    assert_eq!(data_rows(&all).len(), 5);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["strichartz-scan", "--seed", "7", "--N", "2,4", "--M", "1,2", "--trials", "2", "--gauge_N", "2", "--gauge_M", "1", "--gauge_shift", "1,-1"];
    assert_eq!(kfl(&args, a.path()).status.code(), Some(0));
    assert_eq!(kfl(&args, b.path()).status.code(), Some(0));
    for f in ["strichartz-scan.csv", "strichartz-scan.json", "strichartz-gauge.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn failed_regression_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = kfl(&["counting-check", "--N", "4,8", "--M", "1", "--K", "1", "--queries", "3", "--max_slope", "-100", "--exact_1d", "false"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("counting-check.csv").is_file());
}
