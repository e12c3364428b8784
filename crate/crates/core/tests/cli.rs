use std::path::Path;
use std::process::{Command, Output};

fn beamsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beamsched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["run", "--out", out, "--set", "K=3", "--set", "t=2", "--set", "M=8", "--slots", "50"];
    args.extend_from_slice(extra);
    beamsched(&args)
}

#[test]
fn run_writes_identical_files_for_the_same_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_into(&a, &["--seed", "9"]).status.success());
    assert!(run_into(&b, &["--seed", "9"]).status.success());
    for name in ["trace.csv", "summary.json"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn trace_has_one_row_per_slot_and_expected_columns() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_into(tmp.path(), &[]).status.success());
    let mut reader = csv::Reader::from_path(tmp.path().join("trace.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    for col in ["n", "lambda", "mu_1", "mu_3", "P_inst", "R_1", "R_3", "sum_rate", "t_active_mean"] {
        assert!(header.iter().any(|h| h == col), "missing {col} in {header:?}");
    }
    assert_eq!(reader.records().count(), 50);
}

#[test]
fn summary_echoes_the_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_into(tmp.path(), &[]).status.success());
    let text = std::fs::read_to_string(tmp.path().join("summary.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(!text.contains("\"auto\""), "unresolved value in summary");
    assert_eq!(json["config"]["system"]["K"], 3);
    assert_eq!(json["config"]["system"]["phi"].as_array().unwrap().len(), 3);
    assert!(json["config"]["scheduler"]["V"].as_f64().unwrap() > 0.0);
    assert_eq!(json["slots"], 50);
}

#[test]
fn config_file_and_overrides_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("ref.toml");
    std::fs::write(&path, "[system]\nK = 2\nt = 2\nM = 4\n\n[run]\nslots = 10\n").unwrap();
    let out = tmp.path().join("out");
    let status = beamsched(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "scheme=alg1-uniform",
    ])
    .status;
    assert!(status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["system"]["K"], 2);
    assert_eq!(json["config"]["scheduler"]["scheme"], "alg1-uniform");
    assert_eq!(json["slots"], 10);
}

#[test]
fn errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_into(tmp.path(), &["--set", "K=0"]).status.code(), Some(2));
    assert_eq!(run_into(tmp.path(), &["--set", "nonsense=1"]).status.code(), Some(2));
    assert_eq!(beamsched(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(beamsched(&["run", "--config", "/nonexistent/cfg.toml"]).status.code(), Some(1));
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[system]\nunknown_key = 1\n").unwrap();
    assert_eq!(beamsched(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(beamsched(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = beamsched(&[
        "sweep", "--out", out, "--set", "t=2", "--set", "M=4", "--slots", "20", "--axis", "K", "--values", "2,3,4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(tmp.path().join("sweep.csv")).unwrap();
    let values: Vec<String> = reader.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(values, ["2", "3", "4"]);
    assert!(tmp.path().join("sweep.json").exists());
}

#[test]
fn rate_region_writes_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = beamsched(&[
        "rate-region", "--out", out, "--set", "K=2", "--set", "t=2", "--set", "M=4", "--slots", "40", "--phi1",
        "0.25,0.5,0.75",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(tmp.path().join("rate_region.csv")).unwrap();
    assert_eq!(reader.records().count(), 3);
    let bad = beamsched(&["rate-region", "--out", out, "--set", "K=2", "--phi1", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn verify_passes_on_defaults() {
    let o = beamsched(&["verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().count() >= 8);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
}
