use orlomo::RunTrace;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BASE: &str = r#"{
  "algorithm": "orlomo",
  "workers": 8,
  "local_steps": 8,
  "iterations": 2000,
  "momentum": 0.9,
  "local_lr": 5e-4,
  "schedule": {"kind": "delay-penalized"},
  "seed": 1,
  "timing": {"kind": "uniform-jitter", "jitter": 0.5},
  "problem": {"kind": "noisy-quadratic", "dimension": 16, "noise": 0.1,
              "spectrum_min": 1.0, "spectrum_max": 10.0}
}"#;

fn orlomo(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_orlomo"));
    cmd.args(args).env_remove("ORLOMO_SEED");
    if let Some(s) = seed {
        cmd.env("ORLOMO_SEED", s);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn edit(f: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut v: serde_json::Value = serde_json::from_str(BASE).unwrap();
    f(&mut v);
    v.to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn loss_column(csv: &str) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect()
}

#[test]
fn run_writes_metrics_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "base.json", BASE);
    let out = orlomo(&["run", s(&cfg)], None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("final_loss="));
    let csv = std::fs::read_to_string(dir.path().join("base.metrics.csv")).unwrap();
    assert!(csv.starts_with("t,sim_time,k_t,origin,tau,eta,loss,grad_norm_sq\n"));
    let loss = loss_column(&csv);
    let trace_path = dir.path().join("t.json");
    let out = orlomo(&["run", s(&cfg), "--trace", s(&trace_path)], None);
    assert_eq!(out.status.code(), Some(0));
    let trace = RunTrace::read_json(&trace_path).unwrap();
    assert!(trace.final_loss < 1e-3 * loss[0], "{} vs {}", trace.final_loss, loss[0]);
}

#[test]
fn same_config_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", BASE);
    let mut files = Vec::new();
    for i in 0..2 {
        let m = dir.path().join(format!("m{i}.csv"));
        let t = dir.path().join(format!("t{i}.json"));
        assert_eq!(orlomo(&["run", s(&cfg), "--metrics", s(&m), "--trace", s(&t)], None).status.code(), Some(0));
        files.push((std::fs::read(m).unwrap(), std::fs::read(t).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn invalid_configs_exit_with_a_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("beta.json", edit(|v| v["momentum"] = 1.0.into()), "momentum"),
        ("unknown.json", edit(|v| v["problem"]["spectrum"] = 2.into()), "problem"),
        ("both.json", edit(|v| v["gradient_budget"] = 64.into()), "iterations"),
        ("timing.json", edit(|v| v["timing"]["base"] = (-1.0).into()), "timing.base"),
    ];
    for (name, text, path) in cases {
        let cfg = write(dir.path(), name, &text);
        let out = orlomo(&["run", s(&cfg)], None);
        assert_eq!(out.status.code(), Some(1), "{name}");
        assert!(stderr(&out).contains(path), "{name}: {}", stderr(&out));
        assert!(!dir.path().join(name.replace(".json", ".metrics.csv")).exists());
    }
    let out = orlomo(&["run", "/nonexistent/config.json"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn divergence_exits_with_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "div.json", &edit(|v| v["local_lr"] = 0.5.into()));
    let out = orlomo(&["run", s(&cfg)], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("iteration"));
}

#[test]
fn seed_override_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", BASE);
    let seeded = write(dir.path(), "c9.json", &edit(|v| v["seed"] = 9.into()));
    let m = |n: &str| dir.path().join(n);
    orlomo(&["run", s(&cfg), "--metrics", s(&m("env.csv"))], Some("9"));
    orlomo(&["run", s(&seeded), "--metrics", s(&m("cfg9.csv"))], None);
    orlomo(&["run", s(&cfg), "--metrics", s(&m("cfg1.csv"))], None);
    let read = |n: &str| std::fs::read(m(n)).unwrap();
    assert_eq!(read("env.csv"), read("cfg9.csv"));
    assert_ne!(read("env.csv"), read("cfg1.csv"));
    assert_eq!(orlomo(&["run", s(&cfg)], Some("nine")).status.code(), Some(1));
}

fn small(alg: &str) -> String {
    edit(|v| {
        v["algorithm"] = alg.into();
        v["workers"] = 4.into();
        v["local_steps"] = 2.into();
        v["iterations"] = 200.into();
    })
}

#[test]
fn verify_config_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.json", &small("orlomo"));
    let report = dir.path().join("report.json");
    let out = orlomo(&["verify", s(&cfg), "--report", s(&report)], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
    for check in json["checks"].as_array().unwrap() {
        for field in ["name", "max_abs_dev", "max_rel_dev", "checked_range", "excluded", "pass"] {
            assert!(check.get(field).is_some(), "missing {field}");
        }
    }

    let trace_path = dir.path().join("t.json");
    orlomo(&["run", s(&cfg), "--trace", s(&trace_path)], None);
    assert_eq!(orlomo(&["verify", s(&trace_path)], None).status.code(), Some(0));

    let mut trace = RunTrace::read_json(&trace_path).unwrap();
    trace.packets[3].delta_u.scale(1.0 + 1e-3);
    trace.write_json(&trace_path).unwrap();
    let out = orlomo(&["verify", s(&trace_path)], None);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL lemma1_momentum_gap"));
}

#[test]
fn verify_rejects_other_algorithms_and_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.json", &small("al-sgd"));
    assert_eq!(orlomo(&["verify", s(&cfg)], None).status.code(), Some(3));
    let junk = write(dir.path(), "junk.json", "{\"format\": \"orlomo-trace\", \"version\": 1");
    assert_eq!(orlomo(&["verify", s(&junk)], None).status.code(), Some(1));
}

#[test]
fn sweep_writes_cells_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let base = edit(|v| {
        v.as_object_mut().unwrap().remove("iterations");
        v["gradient_budget"] = 8192.into();
        v["workers"] = 4.into();
    });
    let sweep = format!(
        r#"{{"base": {base}, "algorithms": ["orlomo", "al-sgd"], "local_steps": [8, 16]}}"#
    );
    let path = write(dir.path(), "sweep.json", &sweep);
    let out_dir = dir.path().join("out");
    let out = orlomo(&["sweep", s(&path), "--out", s(&out_dir)], None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",ok")));
    let cells: Vec<_> = std::fs::read_dir(&out_dir).unwrap().filter_map(|e| {
        let e = e.unwrap();
        e.path().is_dir().then(|| e.path())
    }).collect();
    assert_eq!(cells.len(), 4);
    for cell in &cells {
        let metrics = std::fs::read(cell.join("metrics.csv")).unwrap();
        let standalone = cell.join("standalone.csv");
        let code = orlomo(&["run", s(&cell.join("config.json")), "--metrics", s(&standalone)], None);
        assert_eq!(code.status.code(), Some(0));
        assert_eq!(std::fs::read(standalone).unwrap(), metrics, "{}", cell.display());
    }
}

#[test]
fn sweep_reports_failed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = format!(r#"{{"base": {BASE}, "workers": [2], "local_steps": [4], "momentum": [0.0, 0.9]}}"#);
    let sweep = sweep.replace("5e-4", "0.5");
    let path = write(dir.path(), "sweep.json", &sweep);
    let out_dir = dir.path().join("out");
    let out = orlomo(&["sweep", s(&path), "--out", s(&out_dir)], None);
    assert_eq!(out.status.code(), Some(2));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.contains("error: numeric failure"));
}

#[test]
fn dump_problem_prints_the_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", BASE);
    let out = orlomo(&["dump-problem", s(&cfg)], None);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["kind"], "noisy-quadratic");
    assert_eq!(v["payload"]["spectrum"].as_array().unwrap().len(), 16);
    assert_eq!(v["smoothness"], 10.0);
}

#[test]
fn usage_errors() {
    assert_eq!(orlomo(&[], None).status.code(), Some(1));
    assert_eq!(orlomo(&["bogus"], None).status.code(), Some(1));
    assert_eq!(orlomo(&["--help"], None).status.code(), Some(0));
}
