//! The workload manager: injection, completion handling, ready-list
//! maintenance, policy invocation and dispatch bookkeeping.
//!
//! [`Manager`] is clock-agnostic. The virtual-clock driver in this module
//! and the threaded wall-clock runtime in the `emu` crate both feed it
//! timestamps and completion records.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::app::{instantiate_validated, validate_dag, ApplicationInstance, ApplicationSpec};
use crate::kernel::{KernelArgs, KernelEnv, KernelHandle, KernelRegistry};
use crate::metrics::{compute_report, LoopStats, RunReport};
use crate::platform::{PeKind, PeStatus, ProcessorElement};
use crate::sched::{
    check_decision, scale_time, PeView, Policy, ReadyBinding, ReadyKey, ReadyList, ReadyTask,
    ScheduleDecision,
};
use crate::trace::{Direction, EventKind, PeInfo, Trace, TraceHeader};
use crate::workload::WorkloadQueue;
use crate::Nanos;

mod virtual_clock;

pub use virtual_clock::run_virtual;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("workload references unknown application {0}")]
    UnknownApp(String),
    #[error("application {0} is loaded twice")]
    DuplicateApp(String),
    #[error("application {app} is invalid: {reason}")]
    InvalidApp { app: String, reason: String },
    #[error("node {node} of {app} has no binding for any PE on this platform")]
    Unplaceable { app: String, node: String },
    #[error("node {node} of {app}: cannot resolve {run_func}: {reason}")]
    Kernel {
        app: String,
        node: String,
        run_func: String,
        reason: String,
    },
    #[error("node {node} of {app} needs est_exec_time on {platform} for {why}")]
    MissingEstimate {
        app: String,
        node: String,
        platform: String,
        why: &'static str,
    },
    #[error("instantiation of {app} failed: {reason}")]
    Instantiate { app: String, reason: String },
    #[error("illegal scheduling decision: {0}")]
    IllegalDecision(String),
    #[error("emulation stalled at t={0} with work outstanding")]
    Stalled(Nanos),
}

#[derive(Clone, Debug)]
pub struct EngineOptions {
    pub seed: u64,
    /// Virtual-clock cost of one scheduling cycle.
    pub sched_overhead: Nanos,
    /// Run kernels in virtual mode (wall-clock mode always runs them).
    pub exec_kernels: bool,
    /// Verify every decision against the snapshot it was made from.
    pub check_decisions: bool,
    /// Keep the final storage of finished instances in the output.
    pub keep_instances: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            sched_overhead: 0,
            exec_kernels: false,
            check_decisions: cfg!(debug_assertions),
            keep_instances: false,
        }
    }
}

/// Per-platform execution plan of one node.
#[derive(Clone, Debug)]
pub struct BindingPlan {
    pub platform: String,
    pub run_func: String,
    pub est: Option<Nanos>,
    pub kernel: KernelHandle,
}

#[derive(Clone, Debug)]
pub struct NodePlan {
    pub name: String,
    pub preds: u32,
    pub succs: Vec<u32>,
    pub args: Vec<String>,
    pub bindings: Vec<BindingPlan>,
    pub ready_bindings: Vec<ReadyBinding>,
    /// Bytes of every argument; what an accelerator copies in.
    pub in_bytes: u64,
    /// Bytes of the pointer arguments; what an accelerator copies back.
    pub out_bytes: u64,
    pub inbound_comm: u64,
}

impl NodePlan {
    pub fn binding(&self, platform: &str) -> Option<&BindingPlan> {
        self.bindings.iter().find(|b| b.platform == platform)
    }
}

/// A validated application with its kernels resolved for one platform.
#[derive(Clone, Debug)]
pub struct AppPlan {
    pub spec: ApplicationSpec,
    pub nodes: Vec<NodePlan>,
    pub heads: Vec<u32>,
}

impl AppPlan {
    pub fn build(
        spec: &ApplicationSpec,
        pes: &[ProcessorElement],
        registry: &KernelRegistry,
    ) -> Result<Self, EngineError> {
        let report = validate_dag(spec);
        if !report.is_clean() {
            return Err(EngineError::InvalidApp {
                app: spec.app_name.clone(),
                reason: report.to_string(),
            });
        }
        let index: BTreeMap<&str, u32> = spec
            .dag
            .keys()
            .enumerate()
            .map(|(i, k)| (k.as_str(), i as u32))
            .collect();
        let mut nodes = Vec::with_capacity(spec.dag.len());
        for (name, node) in &spec.dag {
            let mut bindings = Vec::new();
            for b in &node.platforms {
                if !pes.iter().any(|p| p.binds == b.platform_name) {
                    continue;
                }
                let kernel = registry
                    .resolve(&b.run_func, b.shared_object.as_deref(), &spec.shared_object)
                    .map_err(|e| EngineError::Kernel {
                        app: spec.app_name.clone(),
                        node: name.clone(),
                        run_func: b.run_func.clone(),
                        reason: e.to_string(),
                    })?;
                bindings.push(BindingPlan {
                    platform: b.platform_name.clone(),
                    run_func: b.run_func.clone(),
                    est: b.est_exec_time,
                    kernel,
                });
            }
            if bindings.is_empty() {
                return Err(EngineError::Unplaceable {
                    app: spec.app_name.clone(),
                    node: name.clone(),
                });
            }
            let mut in_bytes = 0;
            let mut out_bytes = 0;
            for a in &node.arguments {
                let v = &spec.variables[a];
                in_bytes += v.data_bytes();
                if v.is_ptr {
                    out_bytes += v.data_bytes();
                }
            }
            nodes.push(NodePlan {
                name: name.clone(),
                preds: node.predecessors.len() as u32,
                succs: node.successors.iter().map(|s| index[s.as_str()]).collect(),
                args: node.arguments.clone(),
                ready_bindings: bindings
                    .iter()
                    .map(|b| ReadyBinding {
                        platform: b.platform.clone(),
                        est: b.est,
                    })
                    .collect(),
                bindings,
                in_bytes,
                out_bytes,
                inbound_comm: spec.inbound_comm_bytes(name),
            });
        }
        let heads = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.preds == 0)
            .map(|(i, _)| i as u32)
            .collect();
        Ok(Self {
            spec: spec.clone(),
            nodes,
            heads,
        })
    }
}

/// Modeled phases of an accelerator task.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AccelTiming {
    pub transfer_in: Nanos,
    pub process: Nanos,
    pub transfer_out: Nanos,
}

impl AccelTiming {
    pub fn total(&self) -> Nanos {
        self.transfer_in + self.process + self.transfer_out
    }
}

/// Everything a PE worker needs to execute one task.
#[derive(Debug)]
pub struct TaskOrder {
    pub pe_id: usize,
    pub key: ReadyKey,
    pub instance_id: u64,
    pub node: String,
    pub kernel: KernelHandle,
    /// Copies of the argument buffers, in argument order; empty when the
    /// kernel will not run.
    pub args: Vec<Vec<u8>>,
    /// Estimated run time on this PE, scaled by its time_scale.
    pub est: Option<Nanos>,
    pub accel: Option<AccelTiming>,
    /// Set when the arguments do not fit the accelerator's local memory.
    pub fault: Option<String>,
}

impl TaskOrder {
    /// Runs the kernel over the order's argument copies.
    pub fn execute(&mut self, env: &dyn KernelEnv) -> Result<(), String> {
        let name = self.kernel.name.clone();
        let views: Vec<&mut [u8]> = self.args.iter_mut().map(Vec::as_mut_slice).collect();
        let mut args = KernelArgs::new(&name, views);
        self.kernel
            .invoke(&mut args, env)
            .map_err(|e| e.to_string())
    }
}

/// What a PE worker reports back for one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub pe_id: usize,
    pub key: ReadyKey,
    pub instance_id: u64,
    pub start: Nanos,
    pub end: Nanos,
    pub transfer_in: Option<(Nanos, Nanos)>,
    pub transfer_out: Option<(Nanos, Nanos)>,
    /// Argument buffers after execution, to be written back.
    pub args: Vec<Vec<u8>>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
struct Running {
    start: Nanos,
    est_end: Nanos,
}

struct Live {
    plan: Arc<AppPlan>,
    inst: ApplicationInstance,
    waiting: Vec<u32>,
    remaining: usize,
    running: usize,
    failed: Option<String>,
}

/// Final state of a run.
#[derive(Debug)]
pub struct RunOutput {
    pub trace: Trace,
    pub report: RunReport,
    pub instances: BTreeMap<u64, ApplicationInstance>,
}

fn pe_views<'a>(
    pes: &'a [ProcessorElement],
    slots: &[Option<Running>],
    now: Nanos,
) -> Vec<PeView<'a>> {
    pes.iter()
        .zip(slots)
        .map(|(pe, slot)| match slot {
            None => PeView {
                pe,
                status: PeStatus::Idle,
                est_available: now,
            },
            Some(r) => PeView {
                pe,
                status: PeStatus::Run,
                est_available: r.est_end.max(now),
            },
        })
        .collect()
}

pub struct Manager {
    apps: BTreeMap<String, Arc<AppPlan>>,
    pes: Vec<ProcessorElement>,
    slots: Vec<Option<Running>>,
    queue: WorkloadQueue,
    cursor: usize,
    live: BTreeMap<u64, Live>,
    ready: ReadyList,
    policy: Box<dyn Policy>,
    trace: Trace,
    opts: EngineOptions,
    copy_args: bool,
    finished: BTreeMap<u64, ApplicationInstance>,
    pub stats: LoopStats,
}

impl Manager {
    /// Validates the applications, resolves their kernels and checks that
    /// every node can run somewhere on `pes` under `policy`.
    pub fn new(
        specs: &[ApplicationSpec],
        pes: Vec<ProcessorElement>,
        registry: &KernelRegistry,
        queue: WorkloadQueue,
        policy: Box<dyn Policy>,
        opts: EngineOptions,
        copy_args: bool,
    ) -> Result<Self, EngineError> {
        let mut apps = BTreeMap::new();
        for spec in specs {
            let plan = AppPlan::build(spec, &pes, registry)?;
            if policy.needs_estimates() {
                for n in &plan.nodes {
                    if n.bindings.iter().all(|b| b.est.is_none()) {
                        return Err(EngineError::MissingEstimate {
                            app: spec.app_name.clone(),
                            node: n.name.clone(),
                            platform: n.bindings[0].platform.clone(),
                            why: "an estimate-based policy",
                        });
                    }
                }
            }
            if apps.insert(spec.app_name.clone(), Arc::new(plan)).is_some() {
                return Err(EngineError::DuplicateApp(spec.app_name.clone()));
            }
        }
        if let Some(e) = queue
            .entries
            .iter()
            .find(|e| !apps.contains_key(&e.app_name))
        {
            return Err(EngineError::UnknownApp(e.app_name.clone()));
        }
        let trace = Trace {
            header: TraceHeader {
                policy: Some(policy.name().to_string()),
                pes: pes
                    .iter()
                    .map(|p| PeInfo {
                        pe_id: p.pe_id,
                        pe_type: p.pe_type.clone(),
                        kind: p.kind,
                    })
                    .collect(),
                ..TraceHeader::default()
            },
            events: Vec::new(),
        };
        Ok(Self {
            apps,
            slots: pes.iter().map(|_| None).collect(),
            pes,
            queue,
            cursor: 0,
            live: BTreeMap::new(),
            ready: ReadyList::new(),
            policy,
            trace,
            opts,
            copy_args,
            finished: BTreeMap::new(),
            stats: LoopStats::default(),
        })
    }

    pub fn pes(&self) -> &[ProcessorElement] {
        &self.pes
    }

    pub fn plans(&self) -> impl Iterator<Item = &AppPlan> {
        self.apps.values().map(|p| p.as_ref())
    }

    pub fn policy_name(&self) -> &str {
        self.policy.name()
    }

    pub fn ready_len(&self) -> usize {
        self.ready.len()
    }

    pub fn next_arrival(&self) -> Option<Nanos> {
        self.queue.entries.get(self.cursor).map(|e| e.arrival_time)
    }

    /// Queue exhausted and every injected instance finished.
    pub fn is_done(&self) -> bool {
        self.cursor == self.queue.entries.len() && self.live.is_empty()
    }

    pub fn has_idle_pe(&self) -> bool {
        self.slots.iter().any(Option::is_none)
    }

    /// A policy invocation can assign something this cycle.
    pub fn wants_schedule(&self) -> bool {
        !self.ready.is_empty() && self.has_idle_pe()
    }

    fn make_ready(&mut self, instance_id: u64, node_index: u32, now: Nanos) {
        let live = self.live.get_mut(&instance_id).expect("live instance");
        let node = &live.plan.nodes[node_index as usize];
        live.inst
            .tasks
            .get_mut(&node.name)
            .expect("task")
            .mark_ready(now)
            .expect("pending task");
        self.trace.push(
            now,
            EventKind::TaskReady {
                instance_id,
                node: node.name.clone(),
            },
        );
        self.ready.insert(ReadyTask {
            key: ReadyKey {
                ready_time: now,
                instance_id,
                node_index,
            },
            node: node.name.clone(),
            bindings: node.ready_bindings.clone(),
            inbound_bytes: node.inbound_comm,
        });
    }

    /// Injects every queued instance with arrival time `<= now` and marks
    /// its head nodes ready. Returns how many were injected.
    pub fn inject_due(&mut self, now: Nanos) -> Result<usize, EngineError> {
        let mut n = 0;
        while let Some(e) = self.queue.entries.get(self.cursor) {
            if e.arrival_time > now {
                break;
            }
            let plan = self.apps[&e.app_name].clone();
            let inst = instantiate_validated(&plan.spec, e.instance_id, e.arrival_time).map_err(
                |err| EngineError::Instantiate {
                    app: e.app_name.clone(),
                    reason: err.to_string(),
                },
            )?;
            let id = e.instance_id;
            self.trace.push(
                now,
                EventKind::Inject {
                    instance_id: id,
                    app: e.app_name.clone(),
                },
            );
            self.cursor += 1;
            n += 1;
            let heads = plan.heads.clone();
            self.live.insert(
                id,
                Live {
                    waiting: plan.nodes.iter().map(|x| x.preds).collect(),
                    remaining: plan.nodes.len(),
                    running: 0,
                    failed: None,
                    plan,
                    inst,
                },
            );
            for h in heads {
                self.make_ready(id, h, now);
            }
        }
        Ok(n)
    }

    /// Runs the policy over the current ready list and PE snapshot.
    pub fn schedule(&mut self, now: Nanos) -> Result<ScheduleDecision, EngineError> {
        let views = pe_views(&self.pes, &self.slots, now);
        let decision = self.policy.schedule(&self.ready, &views, now);
        if self.opts.check_decisions {
            check_decision(&decision, &self.ready, &views)
                .map_err(|e| EngineError::IllegalDecision(e.to_string()))?;
        }
        Ok(decision)
    }

    /// Records one scheduling-overhead sample.
    pub fn record_sched(
        &mut self,
        t: Nanos,
        duration_ns: Nanos,
        ready_len: usize,
        assigned: usize,
    ) {
        let policy = self.policy.name().to_string();
        self.trace.push(
            t,
            EventKind::SchedDecision {
                duration_ns,
                policy,
                ready_len,
                assigned,
            },
        );
    }

    fn accel_timing(
        pe: &ProcessorElement,
        node: &NodePlan,
        b: &BindingPlan,
    ) -> Option<AccelTiming> {
        let m = pe.accel_model.as_ref()?;
        let process = match m
            .process_time
            .get(&b.run_func)
            .or_else(|| m.process_time.get(&b.kernel.name))
        {
            Some(p) => p.eval(node.in_bytes),
            None => scale_time(b.est?, pe.time_scale),
        };
        Some(AccelTiming {
            transfer_in: m.transfer_time(node.in_bytes),
            process,
            transfer_out: m.transfer_time(node.out_bytes),
        })
    }

    /// Modeled duration of `node` on `pe`: scaled estimate on a core, the
    /// three accelerator phases otherwise.
    pub fn modeled_time(pe: &ProcessorElement, node: &NodePlan) -> Option<Nanos> {
        let b = node.binding(&pe.binds)?;
        match pe.kind {
            PeKind::Core => b.est.map(|e| scale_time(e, pe.time_scale)),
            PeKind::Accelerator => Self::accel_timing(pe, node, b).map(|t| t.total()),
        }
    }

    /// Commits a decision: marks tasks running and returns one order per
    /// assignment.
    pub fn dispatch(&mut self, decision: ScheduleDecision, now: Nanos) -> Vec<TaskOrder> {
        let mut orders = Vec::with_capacity(decision.len());
        for (key, pe_id) in decision.assignments {
            let task = self.ready.remove(&key).expect("assigned task is ready");
            let pe = &self.pes[pe_id];
            assert!(self.slots[pe_id].is_none(), "dispatch to busy PE {pe_id}");
            let live = self.live.get_mut(&key.instance_id).expect("live instance");
            let node = &live.plan.nodes[key.node_index as usize];
            let b = node.binding(&pe.binds).expect("legal binding");
            live.inst
                .tasks
                .get_mut(&node.name)
                .expect("task")
                .mark_running(pe_id, now)
                .expect("ready task");
            live.running += 1;
            let accel = match pe.kind {
                PeKind::Accelerator => Self::accel_timing(pe, node, b),
                PeKind::Core => None,
            };
            let est = match pe.kind {
                PeKind::Core => b.est.map(|e| scale_time(e, pe.time_scale)),
                PeKind::Accelerator => accel.map(|a| a.total()),
            };
            let fault = match &pe.accel_model {
                Some(m) if node.in_bytes > m.local_mem_bytes => Some(format!(
                    "local memory exceeded on PE {pe_id}: {} > {} bytes",
                    node.in_bytes, m.local_mem_bytes
                )),
                _ => None,
            };
            let args = if self.copy_args {
                node.args
                    .iter()
                    .map(|a| live.inst.store[a].clone())
                    .collect()
            } else {
                Vec::new()
            };
            self.slots[pe_id] = Some(Running {
                start: now,
                est_end: now + est.unwrap_or(0),
            });
            self.trace.push(
                now,
                EventKind::Dispatch {
                    instance_id: key.instance_id,
                    node: task.node.clone(),
                    pe_id,
                },
            );
            orders.push(TaskOrder {
                pe_id,
                key,
                instance_id: key.instance_id,
                node: task.node,
                kernel: b.kernel.clone(),
                args,
                est,
                accel,
                fault,
            });
        }
        orders
    }

    /// Records a finished task, writes its outputs back and readies its
    /// successors, or fails its instance if the task failed.
    pub fn complete(&mut self, c: Completion, now: Nanos) {
        let pe_id = c.pe_id;
        if let Some(r) = self.slots[pe_id].take() {
            debug_assert!(c.start >= r.start);
        }
        let instance_id = c.instance_id;
        let live = self.live.get_mut(&instance_id).expect("live instance");
        let node_index = c.key.node_index as usize;
        let name = live.plan.nodes[node_index].name.clone();
        self.trace.push(
            c.start,
            EventKind::TaskStart {
                instance_id,
                node: name.clone(),
                pe_id,
            },
        );
        for (span, dir) in [
            (c.transfer_in, Direction::In),
            (c.transfer_out, Direction::Out),
        ] {
            if let Some((s, e)) = span {
                self.trace.push(
                    s,
                    EventKind::TransferStart {
                        instance_id,
                        node: name.clone(),
                        pe_id,
                        dir,
                    },
                );
                self.trace.push(
                    e,
                    EventKind::TransferEnd {
                        instance_id,
                        node: name.clone(),
                        pe_id,
                        dir,
                    },
                );
            }
        }
        let failed = c.error.is_some();
        self.trace.push(
            c.end,
            EventKind::TaskEnd {
                instance_id,
                node: name.clone(),
                pe_id,
                failed,
            },
        );
        live.running -= 1;
        let task = live.inst.tasks.get_mut(&name).expect("task");
        task.start_time = Some(c.start);
        task.mark_complete(c.end).expect("running task");
        live.remaining -= 1;

        if let Some(err) = c.error {
            if live.failed.is_none() {
                live.failed = Some(format!("{name}: {err}"));
                let doomed: Vec<ReadyKey> = self
                    .ready
                    .iter()
                    .filter(|t| t.key.instance_id == instance_id)
                    .map(|t| t.key)
                    .collect();
                for k in doomed {
                    self.ready.remove(&k);
                }
            }
        } else if live.failed.is_none() {
            let plan = live.plan.clone();
            for (i, arg) in plan.nodes[node_index].args.iter().enumerate() {
                if let Some(buf) = c.args.get(i) {
                    let slot = live.inst.store.get_mut(arg).expect("variable");
                    if slot != buf {
                        slot.copy_from_slice(buf);
                    }
                }
            }
            let mut newly = Vec::new();
            for s in &plan.nodes[node_index].succs {
                let w = &mut live.waiting[*s as usize];
                *w -= 1;
                if *w == 0 {
                    newly.push(*s);
                }
            }
            for s in newly {
                self.make_ready(instance_id, s, now);
            }
        }

        let live = self.live.get(&instance_id).expect("live instance");
        let t = now.max(c.end);
        if let Some(reason) = &live.failed {
            if live.running == 0 {
                self.trace.push(
                    t,
                    EventKind::InstanceFailed {
                        instance_id,
                        reason: reason.clone(),
                    },
                );
                self.retire(instance_id);
            }
        } else if live.remaining == 0 {
            self.trace
                .push(t, EventKind::InstanceComplete { instance_id });
            self.retire(instance_id);
        }
    }

    fn retire(&mut self, instance_id: u64) {
        let live = self.live.remove(&instance_id).expect("live instance");
        if self.opts.keep_instances {
            self.finished.insert(instance_id, live.inst);
        }
    }

    /// Sorts the trace and derives the report.
    pub fn finish(mut self) -> RunOutput {
        self.trace.sort();
        let mut report = compute_report(&self.trace).expect("engine traces are consistent");
        report.loop_stats = Some(self.stats.clone());
        RunOutput {
            trace: self.trace,
            report,
            instances: self.finished,
        }
    }
}
