use std::path::Path;
use std::process::{Command, Output};

const FTBU: &str = "[model]\nn = 3\nradius = 1.0\nm = 1.0\nq = 1.0\n\n[initdata]\nmass = 20.0\neta_halvings = 3\n\n[grid]\ncells = 1024\n\n[solver]\nt_end = 1e-3\ndt_max = 1e-3\n\n[outputs]\nsnapshot_stride = 1000\n";

fn kslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kslab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn classify_prints_verdict() {
    let out = kslab(&["classify", "--n", "3", "--m", "1", "--q", "1"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"regime\": \"FTBU\""), "{text}");
    let out = kslab(&["classify", "--n", "3", "--m", "1.2", "--q", "0.5"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("\"GB\""));
}

#[test]
fn region_scan_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scan.csv");
    let out = kslab(&[
        "region-scan", "--n", "2", "--m-min", "-1", "--m-max", "2", "--q-min", "0.1", "--q-max", "2",
        "--resolution", "7", "--out", &s(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "m,q,regime");
    assert_eq!(body.len(), 1 + 49);
}

#[test]
fn validation_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", &FTBU.replace("q = 1.0", "Q = 1.0"));
    let out = kslab(&["--config", &bad, "simulate"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
    let gb = write_config(dir.path(), "gb.toml", &FTBU.replace("m = 1.0\nq = 1.0", "m = 1.2\nq = 0.5"));
    let out = kslab(&["--config", &gb, "--out-dir", &s(dir.path()), "simulate"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
    assert_eq!(code(&kslab(&["classify", "--n", "3", "--m", "1"])), 2);
}

#[test]
fn dry_run_writes_report_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", FTBU);
    let out_dir = dir.path().join("o");
    let out = kslab(&["--config", &cfg, "--out-dir", &s(&out_dir), "--dry-run", "simulate"]);
    assert_eq!(code(&out), 0);
    let report = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    assert!(report.contains("\"dry_run\": true"));
    assert!(report.contains("\"run\": null"));
    assert!(!out_dir.join("trace.csv").exists());
}

#[test]
fn simulate_is_deterministic_and_checks_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", FTBU);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = kslab(&["--config", &cfg, "--out-dir", &s(&a), "simulate", "--expect", "blowup"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = kslab(&[
        "--config", &cfg, "--out-dir", &s(&b), "--workers", "2", "simulate", "--expect", "completed",
    ]);
    assert_eq!(code(&out), 4);
    for f in ["report.json", "trace.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report = std::fs::read_to_string(a.join("report.json")).unwrap();
    for key in ["\"outcome\": \"blowup_detected\"", "\"T_bound\"", "\"t_detect\"", "\"c1_hat\""] {
        assert!(report.contains(key), "{key}");
    }

    // Energy recomputed from snapshots matches the trace.
    let out = kslab(&["--config", &cfg, "energy", &s(&a.join("snapshots"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().nth(1).unwrap();
    let trace = std::fs::read_to_string(a.join("trace.csv")).unwrap();
    let row0 = trace.lines().find(|l| l.starts_with("0.0")).unwrap();
    let f_snap = first.split(',').nth(2).unwrap();
    let f_trace = row0.split(',').nth(6).unwrap();
    assert_eq!(f_snap, f_trace);
}

#[test]
fn init_data_and_sweep_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", FTBU);
    let o = dir.path().join("init");
    let out = kslab(&["--config", &cfg, "init-data", "--mass", "10", "--grid-cells", "128", "--out", &s(&o)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let u0 = std::fs::read_to_string(o.join("u0.csv")).unwrap();
    assert_eq!(u0.lines().filter(|l| !l.starts_with('#')).count(), 1 + 128);
    let side = std::fs::read_to_string(o.join("initdata.json")).unwrap();
    assert!(side.contains("\"norms\"") && side.contains("\"alpha\""));

    let o = dir.path().join("sweep");
    let out = kslab(&["--config", &cfg, "--out-dir", &s(&o), "sweep-eta", "--halvings", "4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = std::fs::read_to_string(o.join("sweep.csv")).unwrap();
    assert!(sweep.contains("eta,F,grad_v_term,v2_term,uv_term,G_term"));
    assert_eq!(sweep.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);
}

#[test]
fn refine_with_two_levels_has_one_order_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &FTBU.replace("t_end = 1e-3", "t_end = 1e-6"));
    let o = dir.path().join("r");
    let out = kslab(&["--config", &cfg, "--out-dir", &s(&o), "refine", "--levels", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(o.join("refine.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 2);
    let out = kslab(&["--config", &cfg, "--out-dir", &s(&o), "refine", "--levels", "1"]);
    assert_eq!(code(&out), 2);
}
