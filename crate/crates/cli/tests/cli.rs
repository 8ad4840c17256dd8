use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_earthtruth"));
    c.env("RUST_LOG", "warn");
    c
}

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The bundled desk scenario shortened to `duration_s`, writing into `out`.
fn desk_config(dir: &Path, out: &Path, duration_s: f64) -> PathBuf {
    let text = fs::read_to_string(repo().join("scenarios/desk.toml")).unwrap();
    let data = repo().join("data");
    let text = text
        .lines()
        .map(|l| {
            if l.starts_with("duration_s") {
                format!("duration_s = {duration_s:?}")
            } else if l.starts_with("output_dir") {
                format!("output_dir = {:?}", out.display().to_string())
            } else {
                l.replace("../data", &data.display().to_string())
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let p = dir.join("desk.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(path: &Path) -> Vec<(String, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn value(r: &[(String, String)], key: &str) -> f64 {
    r.iter().find(|(k, _)| k == key).unwrap().1.parse().unwrap()
}

#[test]
fn version_and_help() {
    let o = bin().arg("--version").output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("earthtruth "));
    let o = bin().arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("pipeline"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bin().arg("bogus").output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("simulate").output().unwrap().status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "[tracker]\ngate_radus = 3.0\n").unwrap();
    let o = run(&["track"], &p);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gate_radus"), "{}", stderr(&o));
}

#[test]
fn invalid_config_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "[sim]\npsf_sigma = -1.0\n").unwrap();
    assert_eq!(run(&["simulate"], &p).status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_2() {
    let o = run(&["simulate"], Path::new("/nonexistent/run.toml"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/run.toml"));
}

#[test]
fn missing_input_file_exits_1_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let p = desk_config(dir.path(), &out, 5.0);
    let o = run(&["track"], &p);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("events.csv"), "{}", stderr(&o));
    assert!(!out.join("ekf.csv").exists());
}

#[test]
fn simulate_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let p = desk_config(dir.path(), &out, 5.0);
    let o = run(&["simulate"], &p);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["events.csv", "pps_trigger.csv", "pps_utc.csv", "truth.csv", "manifest_simulate.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let truth = fs::read_to_string(out.join("truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 1 + 101);
}

#[test]
fn output_dir_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = desk_config(dir.path(), &dir.path().join("ignored"), 2.0);
    let elsewhere = dir.path().join("elsewhere");
    let o = bin()
        .args(["simulate", "-c"])
        .arg(&p)
        .arg("-o")
        .arg(&elsewhere)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(elsewhere.join("events.csv").is_file());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn pipeline_on_desk_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let p = desk_config(dir.path(), &out, 40.0);
    let o = run(&["pipeline"], &p);
    assert!(o.status.success(), "{}", stderr(&o));

    let ekf = report(&out.join("report_ekf.txt"));
    assert_eq!(value(&ekf, "samples"), 801.0);
    assert!(value(&ekf, "rmse_across_as") < 3.0);
    let ast = report(&out.join("report_astrometry.txt"));
    assert!(value(&ast, "solve_success_rate") >= 0.95);
    assert!(value(&ast, "rmse_across_as") < 2.0);

    let csv = fs::read_to_string(out.join("report_ekf.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest_pipeline.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "pipeline");
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.len() >= 14);
    for entry in outputs.iter().chain(manifest["inputs"].as_array().unwrap()) {
        let digest = entry["sha256"].as_str().unwrap();
        assert_eq!(digest.len(), 64);
        assert!(digest.bytes().all(|b| b.is_ascii_hexdigit()));
    }
    let inputs: Vec<&str> = manifest["inputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["path"].as_str().unwrap())
        .collect();
    assert!(inputs.iter().any(|p| p.ends_with("desk_field.csv")));
    assert!(!inputs.iter().any(|p| p.ends_with("events.csv")));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let pa = desk_config(dir.path(), &a, 40.0);
    assert!(run(&["pipeline"], &pa).status.success());
    let pb = desk_config(dir.path(), &b, 40.0);
    assert!(run(&["pipeline"], &pb).status.success());
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| !n.starts_with("manifest"))
        .collect();
    names.sort();
    assert!(names.len() >= 14);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n}");
    }
}

#[test]
fn stages_compose_like_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let pa = desk_config(dir.path(), &a, 40.0);
    assert!(run(&["pipeline"], &pa).status.success());
    let pb = desk_config(dir.path(), &b, 40.0);
    for stage in ["simulate", "track", "solve", "groundtruth", "evaluate"] {
        let o = run(&[stage], &pb);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    for n in ["ekf.csv", "astrometry.csv", "groundtruth.csv", "report_ekf.txt"] {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
}
