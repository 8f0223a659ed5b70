use std::path::Path;
use std::process::{Command, Output};

fn dnls(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls")).current_dir(dir).env_remove("DNLS_OUT_DIR").args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn scatter_of_zero_field() {
    let d = tempfile::tempdir().unwrap();
    let o = dnls(d.path(), &["scatter", "--fixture", "zero", "--out-dir", "out", "--lambda", "0.5", "--lambda", "0,0.7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(d.path().join("out/scatter.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let v = |i: usize| row[i].parse::<f64>().unwrap();
        assert_eq!((v(2), v(3)), (1.0, 0.0));
        assert_eq!(v(4).abs() + v(5).abs(), 0.0);
        assert_eq!(&row[6], "ode");
    }
    // 17 significant digits
    assert_eq!(&rows[0][0], "5.0000000000000000e-1");
}

#[test]
fn outputs_are_reproducible() {
    let d = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = dnls(d.path(), &["scatter", "--fixture", "gaussian:0.5", "--out-dir", out]);
        assert_eq!(code(&o), 0);
    }
    let a = std::fs::read(d.path().join("a/scatter.csv")).unwrap();
    let b = std::fs::read(d.path().join("b/scatter.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sequential_and_parallel_agree() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&dnls(d.path(), &["scatter", "--fixture", "soliton:1,0.5", "--out-dir", "p"])), 0);
    assert_eq!(code(&dnls(d.path(), &["scatter", "--fixture", "soliton:1,0.5", "--out-dir", "s", "--sequential"])), 0);
    assert_eq!(std::fs::read(d.path().join("p/scatter.csv")).unwrap(), std::fs::read(d.path().join("s/scatter.csv")).unwrap());
}

#[test]
fn output_dir_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dnls"))
        .current_dir(d.path())
        .env("DNLS_OUT_DIR", "from-env")
        .args(["scatter", "--fixture", "zero", "--lambda", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(d.path().join("from-env/scatter.csv").exists());
}

#[test]
fn config_file_with_flag_override() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "fixture": {"kind": "soliton", "energy": 1.0, "speed": 0.0},
        "grid": {"L": 40.0, "N": 2048},
        "output_dir": "cfg-out",
        "evolve": {"dt": 1e-3, "t_end": 0.01, "every": 5, "probes": [], "snapshots": 1}
    }"#;
    std::fs::write(d.path().join("run.json"), cfg).unwrap();
    let o = dnls(d.path(), &["evolve", "--config", "run.json", "--N", "1024"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let snap = json(&d.path().join("cfg-out/snapshot_00002.json"));
    assert_eq!(snap["N"], 1024);
    let text = std::fs::read_to_string(d.path().join("cfg-out/series.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,M,P,E");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn config_errors_exit_2_with_location() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.json"), "{\n  \"grid\": {\"L\": 40.0, \"N\": 4096},\n  \"fixtur\": {}\n}").unwrap();
    let o = dnls(d.path(), &["scatter", "--config", "bad.json"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("fixtur") && err.contains("line 3"), "{err}");

    assert_eq!(code(&dnls(d.path(), &["scatter", "--N", "1000", "--out-dir", "o"])), 2);
    assert_eq!(code(&dnls(d.path(), &["scatter", "--fixture", "blob:1"])), 2);
    assert_eq!(code(&dnls(d.path(), &["scatter", "--fixture", "zero", "--lambda", "1,-1", "--out-dir", "o"])), 2);
    assert_eq!(code(&dnls(d.path(), &["verify", "A99", "--out-dir", "o"])), 2);
}

#[test]
fn numerical_failures_exit_3() {
    let d = tempfile::tempdir().unwrap();
    let o = dnls(d.path(), &["backlund", "--fixture", "zero", "--out-dir", "o"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("backlund"));
    let o = dnls(d.path(), &["evolve", "--fixture", "gaussian:50", "--L", "10", "--N", "256", "--dt", "0.05", "--t-end", "5", "--out-dir", "o"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn spectrum_of_soliton() {
    let d = tempfile::tempdir().unwrap();
    let o = dnls(d.path(), &["spectrum", "--fixture", "soliton:1,0", "--out-dir", "o", "--ray", "0.7853981633974483"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&d.path().join("o/spectrum.json"));
    let zeros = v["eigenvalues"]["zeros"].as_array().unwrap();
    assert_eq!(zeros.len(), 1);
    let z = &zeros[0]["zeta"];
    let (re, im) = (z[0].as_f64().unwrap(), z[1].as_f64().unwrap());
    assert!(re.abs() < 1e-5 && (im - 0.5).abs() < 1e-5, "{z}");
    assert_eq!(v["rays"][0]["count"], 1);
}

#[test]
fn backlund_removes_soliton() {
    let d = tempfile::tempdir().unwrap();
    let o = dnls(d.path(), &["backlund", "--fixture", "soliton:1,0", "--out-dir", "o", "--zeta1", "0,0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&d.path().join("o/backlund.json"));
    assert!(v["mass_after"].as_f64().unwrap() < 1e-3);
    // the removed field is a valid fixture
    let o = dnls(d.path(), &["scatter", "--fixture", "file:o/backlund_after.json", "--lambda", "1", "--out-dir", "o2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_subset() {
    let d = tempfile::tempdir().unwrap();
    let o = dnls(d.path(), &["verify", "A1", "A11", "A12", "--out-dir", "o"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    let v = json(&d.path().join("o/verify.json"));
    assert_eq!(v["passed"], 3);
    assert_eq!(v["criteria"][1]["id"], "A11");
    assert!(v["criteria"][0]["measures"][0]["value"].as_f64().unwrap() < 1e-6);
}
