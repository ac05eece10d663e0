//! End-to-end runs of the `emu` binary on the bundled inputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emu::io;

fn emu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emu"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

fn asset(rel: &str) -> String {
    assets().join(rel).display().to_string()
}

fn app_args() -> Vec<String> {
    ["wifi_tx", "wifi_rx", "range_detection", "pulse_doppler"]
        .iter()
        .flat_map(|a| ["--app".to_string(), asset(&format!("apps/{a}.app.json"))])
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_then_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("run.trace.ndjson");
    let report = dir.path().join("run.report.json");
    let transitions = dir.path().join("run.transitions.ndjson");
    let workload = asset("workloads/validation.wl.json");
    let mut args = vec![
        "run",
        "--platform",
        "zcu102-like",
        "--workload",
        &workload,
        "--scheduler",
        "eft",
    ];
    let apps = app_args();
    args.extend(apps.iter().map(String::as_str));
    args.extend([
        "--trace",
        p(&trace),
        "--report",
        p(&report),
        "--transitions",
        p(&transitions),
        "--no-pin",
    ]);
    let out = emu(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let run_report = io::load_report(&report).unwrap();
    assert_eq!(
        (run_report.injected, run_report.completed, run_report.failed),
        (4, 4, 0)
    );
    assert!(
        std::fs::read_to_string(&transitions)
            .unwrap()
            .lines()
            .count()
            > 100
    );

    let gantt = dir.path().join("csv/gantt.csv");
    let util = dir.path().join("csv/util.csv");
    let derived = dir.path().join("derived.json");
    let export = format!("gantt={},utilization={}", p(&gantt), p(&util));
    let out = emu(&[
        "report",
        "--trace",
        p(&trace),
        "--export",
        &export,
        "--out",
        p(&derived),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let again = io::load_report(&derived).unwrap();
    assert_eq!(again.makespan_ns, run_report.makespan_ns);
    assert_eq!(again.completed, 4);
    let rows = std::fs::read_to_string(&gantt).unwrap().lines().count();
    assert!(rows > 4, "gantt has {rows} lines");
    assert!(util.exists());
}

#[test]
fn virtual_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let workload = asset("workloads/mixed-1.71.wl.json");
    let mut traces = Vec::new();
    for i in 0..2 {
        let trace = dir.path().join(format!("{i}.ndjson"));
        let mut args = vec![
            "run",
            "--platform",
            "zcu102-like",
            "--workload",
            &workload,
            "--mode",
            "virtual",
        ];
        let apps = app_args();
        args.extend(apps.iter().map(String::as_str));
        args.extend(["--trace", p(&trace), "--seed", "5"]);
        let out = emu(&args);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        traces.push(std::fs::read(&trace).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn validate_reports_broken_apps() {
    let dir = tempfile::tempdir().unwrap();
    let good = asset("apps/range_detection.app.json");
    let out = emu(&["validate", &good]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));

    let text = std::fs::read_to_string(&good).unwrap().replacen(
        "\"predecessors\": []",
        "\"predecessors\": [\"NOPE\"]",
        1,
    );
    let bad = dir.path().join("bad.app.json");
    std::fs::write(&bad, text).unwrap();
    let out = emu(&["validate", p(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("NOPE"));

    let out = emu(&["validate", p(&dir.path().join("missing.app.json"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unusable_inputs_exit_with_two() {
    let workload = asset("workloads/validation.wl.json");
    let mut args = vec![
        "run",
        "--platform",
        "no-such-board",
        "--workload",
        &workload,
    ];
    let apps = app_args();
    args.extend(apps.iter().map(String::as_str));
    let out = emu(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn extract_dag_with_recognition_substitutes_transforms() {
    let dir = tempfile::tempdir().unwrap();
    let out_app = dir.path().join("naive.app.json");
    let out = emu(&[
        "extract-dag",
        "--trace",
        &asset("traces/naive_dft.blk"),
        "--meta",
        &asset("traces/naive_dft.meta.json"),
        "--recognize",
        &asset("recognize/dft.json"),
        "-o",
        p(&out_app),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let spec = io::load_app(&out_app).unwrap();
    assert_eq!(spec.app_name, "naive_dft");
    assert_eq!(spec.dag.len(), 5);
    let funcs: Vec<&str> = spec
        .dag
        .values()
        .flat_map(|n| n.platforms.iter().map(|b| b.run_func.as_str()))
        .collect();
    assert!(
        funcs.contains(&"fft_radix2") && funcs.contains(&"ifft"),
        "{funcs:?}"
    );
    assert!(emu(&["validate", p(&out_app)]).status.success());
}

#[test]
fn samples_regenerate_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emu(&["samples", "--out", p(dir.path())]).status.success());
    for rel in [
        "apps/pulse_doppler.app.json",
        "platforms/zcu102-like.plat.json",
        "recognize/dft.json",
    ] {
        assert_eq!(
            std::fs::read(dir.path().join(rel)).unwrap(),
            std::fs::read(assets().join(rel)).unwrap(),
            "{rel}"
        );
    }
}
