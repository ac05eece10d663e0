//! Acceptance suite: one PASS/FAIL line per criterion, each checked
//! against its runtime budget. Exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use num_complex::Complex64;

use emu::io;
use emu::session::{Mode, Session};
use emu::wallclock::protocol_violations;
use emu_core::app::{emit_application, parse_application, validate_dag, ApplicationSpec};
use emu_core::engine::{run_virtual, EngineOptions};
use emu_core::extract::planted::{Planted, PlantedParams};
use emu_core::extract::{dft_recognition_table, extract, substitute_optimized, DetectParams};
use emu_core::fixtures::{
    self, random_app, rate_injections, RandomAppParams, INJECTION_ROWS, MIXED_APPS, MIXED_FRAME,
    RD_DELAY, RD_SAMPLES,
};
use emu_core::kernel::dsp::{dft_naive, fft_radix2, idft_naive, ifft};
use emu_core::kernel::KernelRegistry;
use emu_core::platform::{preset, PeKind, ProcessorElement};
use emu_core::rng::SeededRng;
use emu_core::sched::PolicyRegistry;
use emu_core::trace::{EventKind, Trace};
use emu_core::verify::{frfs_oracle, task_spans, trace_violations};
use emu_core::workload::{generate_performance, generate_validation, InjectionSpec, WorkloadQueue};
use emu_core::{NS_PER_MS, NS_PER_US};

const POLICIES: [&str; 4] = ["frfs", "met", "eft", "random"];

type Check = fn() -> Result<String>;

fn main() -> ExitCode {
    let criteria: [(&str, Duration, Check); 10] = [
        ("table-ii-arithmetic", Duration::from_secs(1), table_ii),
        ("task-count-fidelity", Duration::from_secs(30), task_counts),
        (
            "dependency-safety",
            Duration::from_secs(120),
            dependency_safety,
        ),
        (
            "oracle-equivalence",
            Duration::from_secs(30),
            oracle_equivalence,
        ),
        (
            "handshake-protocol",
            Duration::from_secs(60),
            handshake_protocol,
        ),
        ("overhead-trend", Duration::from_secs(300), overhead_trend),
        ("small-fft-trend", Duration::from_secs(60), small_fft_trend),
        ("substitution", Duration::from_secs(60), substitution),
        (
            "planted-kernel-recovery",
            Duration::from_secs(30),
            planted_recovery,
        ),
        ("fft-numerics", Duration::from_secs(10), fft_numerics),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(check)
            .unwrap_or_else(|p| Err(anyhow::anyhow!("panicked: {}", panic_message(p.as_ref()))));
        let elapsed = t.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= limit => (true, d),
            Ok(d) => (false, format!("{d}; over budget")),
            Err(e) => (false, format!("{e:#}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name} ({:.2}s of {}s) {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

fn shipped_app(name: &str) -> Result<ApplicationSpec> {
    Ok(io::load_app(
        &assets().join(format!("apps/{name}.app.json")),
    )?)
}

fn validation_queue(counts: &[(&str, u32)]) -> Result<WorkloadQueue> {
    let counts: BTreeMap<String, u32> = counts.iter().map(|(a, c)| (a.to_string(), *c)).collect();
    Ok(generate_validation(&counts, &|_| true)?)
}

fn task_starts(trace: &Trace) -> usize {
    trace
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::TaskStart { .. }))
        .count()
}

fn table_ii() -> Result<String> {
    for (jobs_per_ms, counts) in INJECTION_ROWS {
        let q = generate_performance(
            &rate_injections(&counts, MIXED_FRAME),
            MIXED_FRAME,
            1,
            &|_| true,
        )?;
        for (app, want) in MIXED_APPS.iter().zip(counts) {
            ensure!(
                q.count_for(app) == want as usize,
                "{app} at {jobs_per_ms}: {} != {want}",
                q.count_for(app)
            );
        }
        let rate = q.len() as f64 / (MIXED_FRAME / NS_PER_MS) as f64;
        ensure!(
            (rate - jobs_per_ms).abs() < 0.01,
            "rate {rate} vs {jobs_per_ms}"
        );
    }
    Ok(format!("{} rows exact", INJECTION_ROWS.len()))
}

fn task_counts() -> Result<String> {
    let mut seen = Vec::new();
    for (app, want, mode) in [
        ("range_detection", 6, Mode::Wallclock),
        ("wifi_tx", 7, Mode::Wallclock),
        ("wifi_rx", 9, Mode::Wallclock),
        ("pulse_doppler", 770, Mode::Virtual),
    ] {
        let spec = shipped_app(app)?;
        let mut s = Session::new(preset("zcu102-like")?, vec![spec], "frfs", mode);
        s.check_decisions = false;
        let out = s.run(validation_queue(&[(app, 1)])?)?;
        let got = task_starts(&out.run.trace);
        ensure!(got == want, "{app}: {got} task starts, want {want}");
        ensure!(out.run.report.completed == 1, "{app} did not complete");
        seen.push(format!("{app}={got}"));
    }
    Ok(seen.join(" "))
}

fn dependency_safety() -> Result<String> {
    let mut rng = SeededRng::new(31);
    let params = RandomAppParams {
        max_nodes: 20,
        ..RandomAppParams::default()
    };
    let registry = KernelRegistry::with_builtins();
    let mut tasks = 0;
    for i in 0..200u64 {
        let spec = random_app(&mut rng, &format!("r{i}"), &params);
        let cpus = 1 + rng.below(4);
        let ffts = 1 + rng.below(5 - cpus);
        let pes = preset(&format!("zcu102-like,cpu={cpus},fft={ffts}"))?.build()?;
        let policy_name = POLICIES[i as usize % 4];
        let policy = PolicyRegistry::with_builtins().lookup(policy_name, i)?;
        let inj = [InjectionSpec {
            app_name: spec.app_name.clone(),
            period: 100 * NS_PER_US,
            probability: 0.7,
        }];
        let q = generate_performance(&inj, 400 * NS_PER_US, i, &|_| true)?;
        let specs = [spec];
        let opts = EngineOptions {
            seed: i,
            ..EngineOptions::default()
        };
        let run = if (i / 4) % 2 == 0 {
            run_virtual(&specs, pes, &registry, q, policy, opts)?
        } else {
            let wall = emu::wallclock::WallOptions {
                pin: false,
                ..Default::default()
            };
            emu::wallclock::run_wallclock(&specs, pes, &registry, q, policy, opts, &wall)?.run
        };
        let bad = trace_violations(&run.trace, &specs);
        ensure!(
            bad.is_empty(),
            "run {i} ({policy_name}): {}",
            bad.join("; ")
        );
        ensure!(
            run.report.failed == 0,
            "run {i} ({policy_name}) failed an instance"
        );
        tasks += task_starts(&run.trace);
    }
    Ok(format!("200 runs, {tasks} tasks, no violations"))
}

fn core_pe(pe_id: usize, time_scale: f64) -> ProcessorElement {
    ProcessorElement {
        pe_id,
        pe_type: "cpu".into(),
        binds: "cpu".into(),
        kind: PeKind::Core,
        time_scale,
        accel_model: None,
    }
}

fn oracle_equivalence() -> Result<String> {
    let mut rng = SeededRng::new(77);
    let params = RandomAppParams {
        max_nodes: 6,
        platforms: vec!["cpu".into()],
        ..RandomAppParams::default()
    };
    let registry = KernelRegistry::with_builtins();
    let mut tasks = 0;
    for i in 0..100 {
        let spec = random_app(&mut rng, &format!("o{i}"), &params);
        let pes: Vec<ProcessorElement> = (0..1 + rng.below(3))
            .map(|p| core_pe(p, [1.0, 1.25, 2.0][rng.below(3)]))
            .collect();
        let inj = [InjectionSpec {
            app_name: spec.app_name.clone(),
            period: 30 * NS_PER_US,
            probability: 0.8,
        }];
        let q = generate_performance(&inj, 300 * NS_PER_US, i, &|_| true)?;
        let policy = PolicyRegistry::with_builtins().lookup("frfs", 0)?;
        let specs = [spec];
        let out = run_virtual(
            &specs,
            pes.clone(),
            &registry,
            q.clone(),
            policy,
            EngineOptions::default(),
        )?;
        let got = task_spans(&out.trace);
        ensure!(
            got == frfs_oracle(&specs, &pes, &q),
            "instance {i} differs from the oracle"
        );
        tasks += got.len();
    }
    Ok(format!("100 instances, {tasks} task spans identical"))
}

fn handshake_protocol() -> Result<String> {
    let apps: Vec<ApplicationSpec> = MIXED_APPS
        .iter()
        .map(|a| shipped_app(a))
        .collect::<Result<_>>()?;
    let mut total = 0;
    for policy in POLICIES {
        let mut s = Session::new(
            preset("zcu102-like")?,
            apps.clone(),
            policy,
            Mode::Wallclock,
        );
        s.check_decisions = false;
        s.wall.log_transitions = true;
        let q = validation_queue(&MIXED_APPS.map(|a| (a, 2)))?;
        let out = s.run(q)?;
        let bad = protocol_violations(&out.transitions, s.platform.build()?.len());
        ensure!(bad.is_empty(), "{policy}: {}", bad.join("; "));
        ensure!(
            out.transitions.len() == 3 * task_starts(&out.run.trace),
            "{policy}: transitions do not cover every task"
        );
        total += out.transitions.len();
    }
    ensure!(total >= 10_000, "only {total} transitions");
    Ok(format!("{total} legal transitions"))
}

fn overhead_trend() -> Result<String> {
    let apps: Vec<ApplicationSpec> = MIXED_APPS
        .iter()
        .map(|a| shipped_app(a))
        .collect::<Result<_>>()?;
    let mut mean: BTreeMap<(&str, usize), f64> = BTreeMap::new();
    let mut makespan: BTreeMap<(&str, usize), u64> = BTreeMap::new();
    for (row, (_, counts)) in INJECTION_ROWS.iter().enumerate() {
        for policy in ["frfs", "eft"] {
            let q = generate_performance(
                &rate_injections(counts, MIXED_FRAME),
                MIXED_FRAME,
                1,
                &|_| true,
            )?;
            let mut s = Session::new(
                preset("zcu102-like")?,
                apps.clone(),
                policy,
                Mode::Wallclock,
            );
            s.check_decisions = false;
            let r = s.run(q)?.run.report;
            ensure!(
                r.failed == 0 && r.completed == r.injected,
                "{policy} row {row} did not finish cleanly"
            );
            mean.insert((policy, row), r.overhead.mean_ns);
            makespan.insert((policy, row), r.makespan_ns);
        }
    }
    let last = INJECTION_ROWS.len() - 1;
    let frfs: Vec<f64> = (0..=last).map(|r| mean[&("frfs", r)]).collect();
    let frfs_spread = frfs.iter().cloned().fold(0.0, f64::max)
        / frfs.iter().cloned().fold(f64::INFINITY, f64::min);
    let eft_growth = mean[&("eft", last)] / mean[&("eft", 0)];
    let detail = format!(
        "frfs mean {:.1}-{:.1} us (x{frfs_spread:.2}), eft mean {:.1}->{:.1} us (x{eft_growth:.2}), makespan frfs {:.1} ms eft {:.1} ms",
        frfs.iter().cloned().fold(f64::INFINITY, f64::min) / 1e3,
        frfs.iter().cloned().fold(0.0, f64::max) / 1e3,
        mean[&("eft", 0)] / 1e3,
        mean[&("eft", last)] / 1e3,
        makespan[&("frfs", last)] as f64 / 1e6,
        makespan[&("eft", last)] as f64 / 1e6,
    );
    ensure!(frfs_spread < 2.0, "frfs overhead varies too much: {detail}");
    ensure!(
        eft_growth >= 2.0,
        "eft overhead does not grow enough: {detail}"
    );
    ensure!(
        makespan[&("frfs", last)] <= makespan[&("eft", last)],
        "frfs slower than eft: {detail}"
    );
    Ok(detail)
}

fn small_fft_trend() -> Result<String> {
    let spec = shipped_app("fft_burst")?;
    let workload = io::load_workload(&assets().join("workloads/fft-burst.wl.json"))?;
    let mut spans = Vec::new();
    for platform in ["zcu102-like,cpu=1,fft=1", "zcu102-like,cpu=2,fft=0"] {
        let s = Session::new(preset(platform)?, vec![spec.clone()], "frfs", Mode::Virtual);
        let r = s.run(s.queue(&workload)?)?.run.report;
        ensure!(
            r.completed == 64 && r.failed == 0,
            "{platform}: {} of 64 completed",
            r.completed
        );
        spans.push(r.makespan_ns);
    }
    let detail = format!(
        "1cpu+1fft {:.1} us, 2cpu {:.1} us",
        spans[0] as f64 / 1e3,
        spans[1] as f64 / 1e3
    );
    ensure!(
        spans[0] > spans[1],
        "accelerator configuration is not slower: {detail}"
    );
    Ok(detail)
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn substitution() -> Result<String> {
    let naive = fixtures::range_detection_naive(RD_SAMPLES, RD_DELAY);
    let (fast, hits) = substitute_optimized(&naive, &dft_recognition_table());
    ensure!(
        hits.len() == 3,
        "expected 3 substituted transforms, got {hits:?}"
    );
    let mut outputs = Vec::new();
    for spec in [naive, fast] {
        let mut s = Session::new(
            preset("zcu102-like")?,
            vec![spec.clone()],
            "frfs",
            Mode::Virtual,
        );
        s.exec_kernels = true;
        s.keep_instances = true;
        let out = s.run(validation_queue(&[(&spec.app_name, 1)])?)?;
        let inst = out
            .run
            .instances
            .values()
            .next()
            .context("no instance kept")?;
        let index = inst.read_u32("index").context("index")?;
        let peak = inst.read_f32("max_corr").context("max_corr")?;
        let lag = inst.read_f32("lag").context("lag")?;
        outputs.push((index, peak as f64, lag as f64));
    }
    let ((i0, p0, l0), (i1, p1, l1)) = (outputs[0], outputs[1]);
    ensure!(i0 == i1, "index {i0} vs {i1}");
    ensure!(rel_err(p0, p1) <= 1e-6, "peak {p0} vs {p1}");
    ensure!(rel_err(l0, l1) <= 1e-6, "lag {l0} vs {l1}");
    ensure!(
        l0 == RD_DELAY as f64,
        "lag {l0} is not the planted delay {RD_DELAY}"
    );

    let n = 4096;
    let mut rng = SeededRng::new(4);
    let x: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.unit(), rng.unit()))
        .collect();
    let t = Instant::now();
    let slow = dft_naive(&x);
    let naive_time = t.elapsed();
    let reps = 20;
    let t = Instant::now();
    let mut fast = x.clone();
    for _ in 0..reps {
        fast.copy_from_slice(&x);
        fft_radix2(&mut fast)?;
    }
    let fft_time = t.elapsed() / reps;
    ensure!(
        max_err(&slow, &fast) <= 1e-6,
        "transforms disagree at n={n}"
    );
    let speedup = naive_time.as_secs_f64() / fft_time.as_secs_f64();
    ensure!(speedup >= 5.0, "speedup only {speedup:.1}x");
    Ok(format!(
        "lag {l0} peak {p0:.3} match; n={n} speedup {speedup:.0}x"
    ))
}

fn planted_recovery() -> Result<String> {
    let mut rng = SeededRng::new(2024);
    let mut kernels_total = 0;
    for i in 0..50 {
        let Planted { trace, kernels } = Planted::generate(&mut rng, &PlantedParams::default());
        let ex = extract(&trace, &DetectParams::default(), &format!("planted{i}"))?;
        let found: Vec<Vec<u32>> = ex.kernels.iter().map(|k| k.members.clone()).collect();
        ensure!(
            found == kernels,
            "program {i}: found {found:?}, planted {kernels:?}"
        );
        let report = validate_dag(&ex.spec);
        ensure!(report.is_clean(), "program {i}: {report}");
        ensure!(
            parse_application(&emit_application(&ex.spec))? == ex.spec,
            "program {i} does not round-trip"
        );
        kernels_total += kernels.len();
    }
    Ok(format!("50 programs, {kernels_total} kernels recovered"))
}

fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn fft_numerics() -> Result<String> {
    let mut rng = SeededRng::new(42);
    let mut worst: f64 = 0.0;
    for log_n in 1..=12 {
        let n = 1usize << log_n;
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.unit() * 2.0 - 1.0, rng.unit() * 2.0 - 1.0))
            .collect();
        let mut f = x.clone();
        fft_radix2(&mut f)?;
        let fwd = max_err(&f, &dft_naive(&x));
        let mut inv = f.clone();
        ifft(&mut inv)?;
        let back = max_err(&inv, &idft_naive(&f));
        ensure!(
            fwd <= 1e-9 && back <= 1e-9,
            "n={n}: forward {fwd:e}, inverse {back:e}"
        );
        worst = worst.max(fwd).max(back);
    }
    Ok(format!("n=2..4096, max abs error {worst:.1e}"))
}
