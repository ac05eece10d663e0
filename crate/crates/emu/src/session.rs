//! One emulation run assembled from its inputs, in either clock mode.

use std::path::PathBuf;

use emu_core::app::ApplicationSpec;
use emu_core::engine::{run_virtual, EngineOptions, RunOutput};
use emu_core::kernel::KernelRegistry;
use emu_core::platform::{Placement, PlatformConfig};
use emu_core::sched::PolicyRegistry;
use emu_core::workload::{generate, WorkloadQueue, WorkloadSpec};
use emu_core::Nanos;
use serde::{Deserialize, Serialize};

use crate::plugin;
use crate::wallclock::{run_wallclock, TransitionRecord, WallOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Wallclock,
    Virtual,
}

#[derive(Clone, Debug)]
pub struct Session {
    pub platform: PlatformConfig,
    pub apps: Vec<ApplicationSpec>,
    pub scheduler: String,
    pub mode: Mode,
    pub seed: u64,
    pub exec_kernels: bool,
    /// Virtual-clock cost of one scheduling cycle.
    pub sched_overhead: Nanos,
    pub check_decisions: bool,
    pub keep_instances: bool,
    pub wall: WallOptions,
    pub plugin_dirs: Vec<PathBuf>,
}

impl Session {
    pub fn new(
        platform: PlatformConfig,
        apps: Vec<ApplicationSpec>,
        scheduler: &str,
        mode: Mode,
    ) -> Self {
        Self {
            platform,
            apps,
            scheduler: scheduler.to_string(),
            mode,
            seed: 0,
            exec_kernels: false,
            sched_overhead: 0,
            check_decisions: cfg!(debug_assertions),
            keep_instances: false,
            wall: WallOptions::default(),
            plugin_dirs: Vec::new(),
        }
    }

    /// Builds the queue a workload file describes over this session's
    /// applications.
    pub fn queue(&self, workload: &WorkloadSpec) -> anyhow::Result<WorkloadQueue> {
        let known = |a: &str| self.apps.iter().any(|s| s.app_name == a);
        Ok(generate(workload, &known)?)
    }

    fn registry(&self) -> anyhow::Result<KernelRegistry> {
        let mut registry = KernelRegistry::with_builtins();
        plugin::load_referenced(&mut registry, &self.apps, &self.plugin_dirs)?;
        Ok(registry)
    }

    pub fn run(&self, queue: WorkloadQueue) -> anyhow::Result<SessionOutput> {
        let pes = self.platform.build()?;
        let registry = self.registry()?;
        let policy = PolicyRegistry::with_builtins().lookup(&self.scheduler, self.seed)?;
        let opts = EngineOptions {
            seed: self.seed,
            sched_overhead: self.sched_overhead,
            exec_kernels: self.exec_kernels,
            check_decisions: self.check_decisions,
            keep_instances: self.keep_instances,
        };
        let (mut run, placement, transitions) = match self.mode {
            Mode::Virtual => (
                run_virtual(&self.apps, pes, &registry, queue, policy, opts)?,
                None,
                Vec::new(),
            ),
            Mode::Wallclock => {
                let mut wall = self.wall.clone();
                wall.manager_core = self.platform.manager_core;
                wall.host_cores = wall.host_cores.or(self.platform.host_cores);
                let out = run_wallclock(&self.apps, pes, &registry, queue, policy, opts, &wall)?;
                (out.run, Some(out.placement), out.transitions)
            }
        };
        run.report.config = Some(serde_json::json!({
            "mode": self.mode,
            "scheduler": self.scheduler,
            "seed": self.seed,
            "exec_kernels": self.exec_kernels,
            "sched_overhead_ns": self.sched_overhead,
            "platform": self.platform,
            "apps": self.apps.iter().map(|a| a.app_name.as_str()).collect::<Vec<_>>(),
        }));
        Ok(SessionOutput {
            run,
            placement,
            transitions,
        })
    }
}

#[derive(Debug)]
pub struct SessionOutput {
    pub run: RunOutput,
    pub placement: Option<Placement>,
    pub transitions: Vec<TransitionRecord>,
}
