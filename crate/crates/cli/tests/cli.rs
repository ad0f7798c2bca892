use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use besov_sparse::io::read_field;
use besov_sparse::AnyField;

const BIN: &str = env!("CARGO_BIN_EXE_besov-sparse");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).env_remove("BESOV_SPARSE_THREADS").output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_field_has_zero_norms() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--out-dir", "f", "field", "--kind", "zero", "--n", "8"]);
    ok(d.path(), &["--out-dir", "n", "norms", "--input", "f/field.bsf1"]);
    let rows = csv_rows(&d.path().join("n/norms.csv"));
    assert_eq!(rows.len(), 1 + 3 + 2 * 3);
    assert!(rows.iter().all(|r| &r[3] == "0"));
}

#[test]
fn missing_input_is_an_io_error_naming_the_path() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), &["norms", "--input", "does/not/exist.bsf1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does/not/exist.bsf1"));
}

#[test]
fn bad_parameters_exit_with_three() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--out-dir", "f", "field", "--kind", "shear", "--n", "8"]);
    let base = ["sparseness", "--input", "f/field.bsf1", "--component", "1", "--scale", "1"];
    for delta in ["0", "1", "1.5", "-1/2"] {
        let mut args = base.to_vec();
        args.extend(["--delta", delta]);
        assert_eq!(run(d.path(), &args).status.code(), Some(3), "delta {delta}");
    }
    assert_eq!(run(d.path(), &["norms", "--bogus"]).status.code(), Some(3));
    assert_eq!(run(d.path(), &["field", "--kind", "shear", "--n", "12"]).status.code(), Some(3));
    assert_eq!(run(d.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn empty_set_has_zero_ratio() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--out-dir", "f", "field", "--kind", "zero", "--n", "8"]);
    for mode in ["1d", "3d", "semi"] {
        let dir = format!("s-{mode}");
        let args = ["--out-dir", &dir, "sparseness", "--input", "f/field.bsf1", "--component", "2", "--scale", "1"];
        let mut args = args.to_vec();
        args.extend(["--delta", "1/2", "--mode", mode]);
        ok(d.path(), &args);
        let doc = json(&d.path().join(dir).join("sparseness.json"));
        assert_eq!(doc["report"]["ratio"], 0.0);
        assert_eq!(doc["report"]["pass"], true);
    }
}

#[test]
fn dome_level_set_report() {
    let d = tempfile::tempdir().unwrap();
    // zoom box of side 8/n_rod, 64 cells
    ok(d.path(), &["--out-dir", "f", "field", "--kind", "dome", "--n-rod", "8", "--n", "64", "--length", "1"]);
    let args = ["--out-dir", "s", "sparseness", "--input", "f/field.bsf1", "--lambda", "3/4", "--scale", "2/8"];
    let mut args = args.to_vec();
    args.extend(["--delta", "1/5", "--mode", "mixed"]);
    ok(d.path(), &args);
    let doc = json(&d.path().join("s/sparseness.json"));
    let set_ratio = doc["report"]["set"]["ratio"].as_f64().unwrap();
    assert!(set_ratio > 0.0 && set_ratio <= 0.2, "{set_ratio}");
    assert_eq!(doc["report"]["complement"]["ratio"], 1.0);
    assert_eq!(doc["report"]["pass"], false);
}

#[test]
fn lemma_needs_a_calibration_and_cites_its_hash() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--out-dir", "f", "field", "--kind", "random-band", "--n", "16", "--seed", "2"]);
    let out = run(d.path(), &["--out-dir", "l", "experiment", "lemma", "--input", "f/field.bsf1", "--scale", "1/2"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment calibrate"));

    ok(d.path(), &["--out-dir", "c", "experiment", "calibrate", "--n", "16", "--trials", "20"]);
    let args = ["--out-dir", "l", "experiment", "lemma", "--input", "f/field.bsf1", "--scale", "1/2"];
    let mut args = args.to_vec();
    args.extend(["--calibration", "c/calibration.json"]);
    ok(d.path(), &args);
    let doc = json(&d.path().join("l/lemma.json"));
    let digest = besov_sparse_cli::manifest::sha256_file(&d.path().join("c/calibration.json")).unwrap();
    assert_eq!(doc["calibration"]["sha256"], digest.as_str());
    assert_eq!(doc["verdict"]["consistent"], true);
    let manifest = json(&d.path().join("l/manifest.json"));
    assert_eq!(manifest["calibration"]["sha256"], digest.as_str());
}

#[test]
fn counterexample_table_has_growing_ratio() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--out-dir", "ce", "experiment", "counterexample", "--n", "8,16,32,64"]);
    let rows = csv_rows(&d.path().join("ce/counterexample.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][2], "0.5");
    let ratio: Vec<f64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(ratio.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn mollified_log_ratio_is_monotone() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--out-dir", "m", "experiment", "mollified-log", "--eps", "1/8,1/16,1/32,1/64"]);
    let rows = csv_rows(&d.path().join("m/mollified_log.csv"));
    let eps: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(eps, vec![0.125, 0.0625, 0.03125, 0.015625]);
    let ratio: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(ratio.windows(2).all(|w| w[1] > w[0]));
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn shear_run_decays_and_matches_snapshot_norms() {
    let d = tempfile::tempdir().unwrap();
    write_config(
        d.path(),
        "shear.json",
        r#"{"grid": {"n": 16}, "nu": 1, "dt": 0.01, "t_end": 1, "cadence": 50,
            "preset": {"name": "shear"}, "constants": {"c_star": 0.1}, "snapshot_every": 50}"#,
    );
    ok(d.path(), &["--out-dir", "sim", "simulate", "--config", "shear.json"]);
    let rows = csv_rows(&d.path().join("sim/monitor.csv"));
    assert_eq!(rows.len(), 3);
    let sup = match read_field(d.path().join("sim/snapshots/snap_000000.bsf1")).unwrap() {
        AnyField::Vector(u) => u.linf_norm(),
        AnyField::Scalar(_) => unreachable!(),
    };
    let last: f64 = rows[2][1].parse().unwrap();
    assert!((last - (-1.0f64).exp() * sup).abs() <= 1e-6);

    ok(d.path(), &["--out-dir", "n", "norms", "--input", "sim/snapshots/snap_000050.bsf1"]);
    let norms = csv_rows(&d.path().join("n/norms.csv"));
    let snap_linf: f64 = norms[0][3].parse().unwrap();
    let rec_linf: f64 = rows[1][1].parse().unwrap();
    assert_eq!(&rows[1][0], "0.5");
    assert!((snap_linf - rec_linf).abs() <= 1e-12);
}

#[test]
fn oversized_step_is_rejected_with_a_suggestion() {
    let d = tempfile::tempdir().unwrap();
    write_config(
        d.path(),
        "bad.json",
        r#"{"grid": {"n": 16}, "dt": 0.5, "t_end": 1, "preset": {"name": "taylor-green"},
            "constants": {"c_star": 0.1}}"#,
    );
    let out = run(d.path(), &["--out-dir", "sim", "simulate", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("suggested dt"));
}

#[test]
fn simulate_without_constant_or_calibration_exits_four() {
    let d = tempfile::tempdir().unwrap();
    write_config(
        d.path(),
        "nocal.json",
        r#"{"grid": {"n": 8}, "dt": 0.01, "t_end": 0.02, "preset": {"name": "shear"}, "constants": {}}"#,
    );
    assert_eq!(run(d.path(), &["simulate", "--config", "nocal.json"]).status.code(), Some(4));
}

#[test]
fn zero_data_writes_header_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    write_config(
        d.path(),
        "zero.json",
        r#"{"grid": {"n": 8}, "dt": 0.01, "t_end": 0.05, "preset": {"name": "zero"}, "constants": {"c_star": 0.1}}"#,
    );
    ok(d.path(), &["--out-dir", "z", "simulate", "--config", "zero.json"]);
    assert!(csv_rows(&d.path().join("z/monitor.csv")).is_empty());
    let m = json(&d.path().join("z/manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["config"]["t_end"], 0.05);
}

#[test]
fn rerun_reproduces_bytes_and_thread_count_does_not_matter() {
    let d = tempfile::tempdir().unwrap();
    write_config(
        d.path(),
        "rb.json",
        r#"{"grid": {"n": 16}, "nu": 0.1, "dt": 0.01, "t_end": 0.05, "cadence": 1,
            "preset": {"name": "random-band", "seed": 5, "kmax": 4, "amplitude": 1},
            "constants": {"c_star": 0.1}}"#,
    );
    ok(d.path(), &["--out-dir", "a", "simulate", "--config", "rb.json"]);
    ok(d.path(), &["--out-dir", "b", "rerun", "--manifest", "a/manifest.json"]);
    let two = Command::new(BIN)
        .current_dir(d.path())
        .args(["--out-dir", "c", "simulate", "--config", "rb.json"])
        .env("BESOV_SPARSE_THREADS", "2")
        .output()
        .unwrap();
    assert!(two.status.success());
    for f in ["monitor.csv", "escape_times.json"] {
        let a = std::fs::read(d.path().join("a").join(f)).unwrap();
        assert_eq!(a, std::fs::read(d.path().join("b").join(f)).unwrap());
        assert_eq!(a, std::fs::read(d.path().join("c").join(f)).unwrap());
    }
    let bad = Command::new(BIN)
        .current_dir(d.path())
        .args(["--out-dir", "x", "simulate", "--config", "rb.json"])
        .env("BESOV_SPARSE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(3));
}
