//! The `emu` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use emu_core::app::validate_dag;
use emu_core::extract::{extract, substitute_optimized, DetectParams};
use emu_core::metrics::{compute_report, ExportKind};
use emu_core::workload::WorkloadMode;

use crate::io;
use crate::session::{Mode, Session};
use crate::wallclock::protocol_violations;

#[derive(Debug, Parser)]
#[command(
    name = "emu",
    version,
    about = "Emulate DAG applications on a heterogeneous SoC"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a workload and write its trace and report.
    Run(RunArgs),
    /// Check application files for structural errors.
    Validate {
        #[arg(required = true)]
        apps: Vec<PathBuf>,
    },
    /// Derive a report and CSV exports from a trace.
    Report(ReportArgs),
    /// Build an application DAG from a block trace.
    ExtractDag(ExtractArgs),
    /// Write bundled inputs: applications, platforms, workloads, a
    /// recognition table and a naive-DFT block trace.
    Samples {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Sample count of the naive-DFT block trace.
        #[arg(long, default_value_t = 32)]
        dft_samples: usize,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Platform file or preset, e.g. `zcu102-like,cpu=2,fft=1`.
    #[arg(long)]
    pub platform: String,
    #[arg(long = "app", required = true, num_args = 1..)]
    pub apps: Vec<PathBuf>,
    #[arg(long)]
    pub workload: PathBuf,
    #[arg(long, default_value = "frfs")]
    pub scheduler: String,
    #[arg(long, value_enum, default_value_t = Mode::Wallclock)]
    pub mode: Mode,
    /// Overrides the workload file's seed; also seeds the random policy.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run kernels in virtual mode too.
    #[arg(long)]
    pub exec_kernels: bool,
    /// Virtual-clock cost of one scheduling cycle.
    #[arg(long, default_value_t = 0)]
    pub sched_overhead_ns: u64,
    /// Directories searched for plugin libraries; the application files'
    /// directories are always searched.
    #[arg(long = "plugin-dir")]
    pub plugin_dirs: Vec<PathBuf>,
    /// Do not pin worker threads to host cores.
    #[arg(long)]
    pub no_pin: bool,
    /// Write every handshake transition as JSON lines (wall-clock mode).
    #[arg(long)]
    pub transitions: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Comma-separated `kind=path` pairs; kinds are gantt, utilization,
    /// overhead and latency.
    #[arg(long, value_delimiter = ',')]
    pub export: Vec<String>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long, default_value_t = DetectParams::default().hot_threshold)]
    pub hot: u64,
    #[arg(long, default_value_t = DetectParams::default().window)]
    pub window: usize,
    #[arg(long, default_value_t = DetectParams::default().affinity)]
    pub affinity: f64,
    /// Recognition table of optimized kernel implementations.
    #[arg(long)]
    pub recognize: Option<PathBuf>,
    /// Application name; defaults to the trace file's stem.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

pub fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(a) => run(a),
        Command::Validate { apps } => validate(&apps),
        Command::Report(a) => report(a),
        Command::ExtractDag(a) => extract_dag(a),
        Command::Samples { out, dft_samples } => {
            crate::assets::write_samples(&out, dft_samples)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let platform = io::load_platform(&a.platform)?;
    let apps = a
        .apps
        .iter()
        .map(|p| io::load_app(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut workload = io::load_workload(&a.workload)?;
    if let Some(s) = a.seed {
        workload.seed = s;
    }
    let mut s = Session::new(platform, apps, &a.scheduler, a.mode);
    s.seed = workload.seed;
    s.exec_kernels = a.exec_kernels;
    s.sched_overhead = a.sched_overhead_ns;
    s.keep_instances = false;
    s.wall.pin = !a.no_pin;
    s.wall.log_transitions = a.transitions.is_some();
    s.plugin_dirs = a.plugin_dirs.clone();
    for p in &a.apps {
        let dir = p
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        s.plugin_dirs.push(dir.to_path_buf());
    }
    let queue = s.queue(&workload)?;
    if workload.mode == WorkloadMode::Performance && queue.is_empty() {
        log::warn!("workload injects no instances");
    }
    let out = s.run(queue)?;
    let report = &out.run.report;
    if let Some(p) = &a.trace {
        io::save_trace(p, &out.run.trace)?;
    }
    match &a.report {
        Some(p) => io::save_report(p, report)?,
        None => println!("{}", serde_json::to_string_pretty(report)?),
    }
    if let Some(p) = &a.transitions {
        let lines: String = out
            .transitions
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect();
        io::write_bytes(p, lines)?;
        let bad = protocol_violations(&out.transitions, s.platform.build()?.len());
        if !bad.is_empty() {
            bail!("handshake protocol violated: {}", bad.join("; "));
        }
    }
    eprintln!(
        "{} instances: {} completed, {} failed; makespan {} ns",
        report.injected, report.completed, report.failed, report.makespan_ns
    );
    Ok(
        if report.failed == 0 && report.completed == report.injected {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        },
    )
}

fn validate(paths: &[PathBuf]) -> anyhow::Result<ExitCode> {
    let mut ok = true;
    for p in paths {
        match io::load_app(p) {
            Err(e) => {
                ok = false;
                println!("{e}");
            }
            Ok(spec) => {
                let r = validate_dag(&spec);
                if r.is_clean() {
                    println!("{}: ok ({} nodes)", p.display(), spec.dag.len());
                } else {
                    ok = false;
                    for f in &r.findings {
                        println!("{}: {f}", p.display());
                    }
                }
            }
        }
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn report(a: ReportArgs) -> anyhow::Result<ExitCode> {
    let trace = io::load_trace(&a.trace)?;
    let report = compute_report(&trace).with_context(|| format!("{}", a.trace.display()))?;
    for e in &a.export {
        let (kind, path) = e
            .split_once('=')
            .with_context(|| format!("bad export {e:?}: expected kind=path"))?;
        io::export_csv(&trace, ExportKind::parse(kind)?, Path::new(path))?;
    }
    match &a.out {
        Some(p) => io::save_report(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn extract_dag(a: ExtractArgs) -> anyhow::Result<ExitCode> {
    let trace = io::load_block_trace(&a.trace, &a.meta)?;
    let params = DetectParams {
        hot_threshold: a.hot,
        window: a.window,
        affinity: a.affinity,
    };
    let name = match &a.name {
        Some(n) => n.clone(),
        None => {
            let stem = a
                .trace
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("extracted");
            stem.split('.').next().unwrap_or(stem).to_string()
        }
    };
    let ex = extract(&trace, &params, &name)?;
    let mut spec = ex.spec;
    eprintln!("{} kernels, {} nodes", ex.kernels.len(), spec.dag.len());
    if let Some(t) = &a.recognize {
        let table = io::load_recognition_table(t)?;
        let (sub, hits) = substitute_optimized(&spec, &table);
        for (node, label) in &hits {
            eprintln!("substituted {label} into {node}");
        }
        spec = sub;
    }
    io::save_app(&a.out, &spec)?;
    Ok(ExitCode::SUCCESS)
}
