use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn csmark(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csmark"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_sample_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", "experiment = simulate\nn = 50\n");
    let out = csmark(&["simulate", "--config", &cfg, "--seed", "7", "--out", "r"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sample = fs::read_to_string(dir.path().join("r/sample.csv")).unwrap();
    assert_eq!(sample.lines().count(), 51);
    let manifest = fs::read_to_string(dir.path().join("r/manifest.txt")).unwrap();
    assert!(manifest.contains("experiment = simulate"));
    assert!(manifest.contains("seed = 7"));
    assert!(manifest.contains("outputs = sample.csv"));
    // the seed override is echoed into the stored configuration
    assert!(manifest.ends_with("n = 50\nseed = 7\n"));
}

#[test]
fn zero_sample_size_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", "n = 0\n");
    let out = csmark(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out/sample.csv").exists());
}

#[test]
fn parse_error_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", "n = 10\nseed 3\n");
    let out = csmark(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2, column 1"), "{err}");
}

#[test]
fn unknown_key_and_wrong_experiment_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.txt", "n = 10\nbandwidth = 0.2\n");
    assert_eq!(csmark(&["simulate", "--config", &cfg], dir.path()).status.code(), Some(2));
    let cfg = write_config(dir.path(), "b.txt", "experiment = table1\n");
    assert_eq!(csmark(&["simulate", "--config", &cfg], dir.path()).status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.txt",
        "estimator = F2\npoint = 0.4, 0.4\nn = 300\nm = 40\nalpha = 0.2\nbeta = 0.1\n",
    );
    let a = csmark(&["mc-mse", "--config", &cfg, "--out", "a", "--threads", "1"], dir.path());
    let b = csmark(&["mc-mse", "--config", &cfg, "--out", "b", "--threads", "4"], dir.path());
    assert!(a.status.success() && b.status.success());
    let ra = fs::read(dir.path().join("a/mse.csv")).unwrap();
    let rb = fs::read(dir.path().join("b/mse.csv")).unwrap();
    assert_eq!(ra, rb);
    let text = String::from_utf8(ra).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "F2");
    let mse: f64 = row[3].parse().unwrap();
    assert!(mse > 0.0 && mse < 0.05, "{mse}");
}

#[test]
fn empty_table1_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", "points =\n");
    let out = csmark(&["table1", "--config", &cfg], dir.path());
    assert!(out.status.success());
    let t = fs::read_to_string(dir.path().join("out/table1.csv")).unwrap();
    assert_eq!(t, "point,n,estimator,alpha,beta,mse,se\n");
}

#[test]
fn estimate_grid_reads_a_saved_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.txt", "n = 200\n");
    assert!(csmark(&["simulate", "--config", &cfg, "--out", "s"], dir.path()).status.success());
    let cfg = write_config(dir.path(), "g.txt", "data = s/sample.csv\nt_grid = 0.5\nz_grid = 0.2, 0.8\n");
    let out = csmark(&["estimate-grid", "--config", &cfg, "--out", "g"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let grid = fs::read_to_string(dir.path().join("g/grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
    assert!(grid.starts_with("t,z,F1,F2,f2\n"));
}

#[test]
fn missing_data_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.txt", "data = nowhere.csv\n");
    let out = csmark(&["estimate-grid", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bandwidth_selection_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.txt",
        "n = 100\nreplications = 20\nalpha_grid = 0.1, 0.3\nbeta_grid = 0.2\n",
    );
    let out = csmark(&["bw-select", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sel = fs::read_to_string(dir.path().join("out/selection.csv")).unwrap();
    assert_eq!(sel.lines().count(), 3);
    let boot = fs::read_to_string(dir.path().join("out/bootstrap.csv")).unwrap();
    assert_eq!(boot.lines().count(), 1 + 2 + 2);
}
