//! Deterministic discrete-event driver: all timing comes from
//! `est_exec_time` and the accelerator models.

use alloc::boxed::Box;
use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Reverse;

use super::{Completion, EngineError, EngineOptions, Manager, RunOutput};
use crate::app::ApplicationSpec;
use crate::kernel::{KernelRegistry, NoopEnv};
use crate::platform::{PeKind, ProcessorElement};
use crate::sched::Policy;
use crate::workload::WorkloadQueue;
use crate::Nanos;

/// Pending completions ordered by end time, then PE id.
struct Pending(Reverse<(Nanos, usize)>, Completion);

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.0.cmp(&other.0)
    }
}

fn check_costs(mgr: &Manager) -> Result<(), EngineError> {
    for plan in mgr.plans() {
        for node in &plan.nodes {
            for pe in mgr.pes() {
                let Some(b) = node.binding(&pe.binds) else {
                    continue;
                };
                if Manager::modeled_time(pe, node).is_none() {
                    return Err(EngineError::MissingEstimate {
                        app: plan.spec.app_name.clone(),
                        node: node.name.clone(),
                        platform: b.platform.clone(),
                        why: match pe.kind {
                            PeKind::Core => "virtual-clock timing",
                            PeKind::Accelerator => "virtual-clock timing (no process_time either)",
                        },
                    });
                }
            }
        }
    }
    Ok(())
}

/// Runs the workload to completion on a virtual clock.
///
/// Each cycle at event time `c` injects arrivals `<= c`, collects
/// completions `<= c`, then runs the policy if anything is ready and a PE
/// is idle. Dispatched tasks start at `c + sched_overhead`; the next cycle
/// happens at the earliest pending arrival or completion, but not before
/// the manager has finished the current one.
pub fn run_virtual(
    specs: &[ApplicationSpec],
    pes: Vec<ProcessorElement>,
    registry: &KernelRegistry,
    queue: WorkloadQueue,
    policy: Box<dyn Policy>,
    opts: EngineOptions,
) -> Result<RunOutput, EngineError> {
    let overhead = opts.sched_overhead;
    let exec = opts.exec_kernels;
    let mut mgr = Manager::new(specs, pes, registry, queue, policy, opts, exec)?;
    check_costs(&mgr)?;

    let mut heap: BinaryHeap<Pending> = BinaryHeap::new();
    let mut now: Nanos = mgr.next_arrival().unwrap_or(0);
    let mut busy_until: Nanos = 0;
    loop {
        mgr.stats.iterations += 1;
        mgr.inject_due(now)?;
        while heap.peek().is_some_and(|p| (p.0).0 .0 <= now) {
            let Pending(_, c) = heap.pop().expect("peeked");
            mgr.complete(c, now);
        }
        if mgr.wants_schedule() {
            let ready_len = mgr.ready_len();
            let decision = mgr.schedule(now)?;
            mgr.record_sched(now, overhead, ready_len, decision.len());
            let start = now + overhead;
            busy_until = start;
            for mut order in mgr.dispatch(decision, now) {
                let mut error = order.fault.take();
                if error.is_none() && exec {
                    error = order.execute(&NoopEnv).err();
                }
                let (transfer_in, transfer_out, end) = match order.accel {
                    Some(a) => {
                        let t1 = start + a.transfer_in;
                        let t2 = t1 + a.process;
                        let t3 = t2 + a.transfer_out;
                        (Some((start, t1)), Some((t2, t3)), t3)
                    }
                    None => (None, None, start + order.est.unwrap_or(0)),
                };
                heap.push(Pending(
                    Reverse((end, order.pe_id)),
                    Completion {
                        pe_id: order.pe_id,
                        key: order.key,
                        instance_id: order.instance_id,
                        start,
                        end,
                        transfer_in,
                        transfer_out,
                        args: order.args,
                        error,
                    },
                ));
            }
        } else {
            mgr.stats.idle_iterations += 1;
        }
        if mgr.is_done() {
            break;
        }
        let next = match (heap.peek().map(|p| (p.0).0 .0), mgr.next_arrival()) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => return Err(EngineError::Stalled(now)),
        };
        now = next.max(busy_until).max(now);
    }
    Ok(mgr.finish())
}
