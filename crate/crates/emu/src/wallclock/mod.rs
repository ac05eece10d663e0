//! Threaded wall-clock runtime: one worker thread per PE plus the calling
//! thread as the workload manager, communicating only through each PE's
//! handshake cell.

mod cell;
pub mod host;
mod worker;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use emu_core::app::ApplicationSpec;
use emu_core::engine::{EngineError, EngineOptions, Manager, RunOutput};
use emu_core::kernel::KernelRegistry;
use emu_core::platform::{place_workers, Placement, ProcessorElement};
use emu_core::sched::Policy;
use emu_core::workload::WorkloadQueue;
use emu_core::Nanos;

pub use cell::{protocol_violations, HandshakeCell, TransitionLog, TransitionRecord};
pub use worker::{Backoff, SleepEnv};

use host::{since, thread_cpu_ns};

#[derive(Clone, Debug)]
pub struct WallOptions {
    /// Pin the manager and PE workers to host cores per the placement.
    pub pin: bool,
    /// Host cores to place workers on; defaults to what the OS reports.
    pub host_cores: Option<usize>,
    pub manager_core: usize,
    /// Longest time the manager blocks when an iteration found nothing to
    /// do. Workers wake it as soon as they complete a task, and it never
    /// sleeps past the next arrival.
    pub manager_yield: Duration,
    pub worker_backoff: Backoff,
    /// Record every handshake transition.
    pub log_transitions: bool,
}

impl Default for WallOptions {
    fn default() -> Self {
        Self {
            pin: true,
            host_cores: None,
            manager_core: 0,
            manager_yield: Duration::from_millis(1),
            worker_backoff: Backoff::default(),
            log_transitions: false,
        }
    }
}

#[derive(Debug)]
pub struct WallOutput {
    pub run: RunOutput,
    pub placement: Placement,
    /// Empty unless transitions were logged.
    pub transitions: Vec<TransitionRecord>,
}

/// Overhead clock: manager-thread CPU time where available, so that a
/// sample is not inflated when the OS preempts the manager; wall time
/// otherwise.
struct OverheadClock {
    reference: Instant,
}

impl OverheadClock {
    fn read(&self) -> Nanos {
        thread_cpu_ns().unwrap_or_else(|| since(self.reference, Instant::now()))
    }
}

/// Runs the workload in real time. The calling thread becomes the
/// workload manager; it returns once the queue is exhausted and every
/// injected instance has finished.
pub fn run_wallclock(
    specs: &[ApplicationSpec],
    pes: Vec<ProcessorElement>,
    registry: &KernelRegistry,
    queue: WorkloadQueue,
    policy: Box<dyn Policy>,
    opts: EngineOptions,
    wall: &WallOptions,
) -> Result<WallOutput, EngineError> {
    let mut mgr = Manager::new(specs, pes.clone(), registry, queue, policy, opts, true)?;
    let placement = place_workers(
        &pes,
        wall.host_cores.unwrap_or_else(host::host_cores),
        wall.manager_core,
    );
    for w in &placement.warnings {
        log::warn!("placement: {w}");
    }
    let reference = Instant::now();
    let log = wall
        .log_transitions
        .then(|| Arc::new(TransitionLog::new(reference)));
    let cells: Vec<HandshakeCell> = pes
        .iter()
        .map(|p| HandshakeCell::new(p.pe_id, log.clone()))
        .collect();
    let stop = AtomicBool::new(false);
    host::tighten_timer_slack();
    if wall.pin {
        host::pin_to(placement.manager_core);
    }

    let result = thread::scope(|scope| {
        let mut handles = Vec::with_capacity(pes.len());
        for (pe, cell) in pes.iter().zip(&cells) {
            let core = placement.pe_cores[pe.pe_id];
            let (stop, backoff, pin) = (&stop, wall.worker_backoff, wall.pin);
            let h = thread::Builder::new()
                .name(format!("pe-{}-{}", pe.pe_id, pe.pe_type))
                .spawn_scoped(scope, move || {
                    host::tighten_timer_slack();
                    if pin {
                        host::pin_to(core);
                    }
                    worker::worker_main(pe, cell, reference, stop, backoff);
                })
                .expect("spawn PE worker");
            cell.set_worker(h.thread().clone());
            handles.push(h);
        }
        let r = manager_loop(&mut mgr, &cells, reference, wall.manager_yield);
        stop.store(true, Ordering::Release);
        for h in &handles {
            h.thread().unpark();
        }
        r
    });
    result?;
    let mut run = mgr.finish();
    run.report.placement = Some(placement.clone());
    let transitions = log.map(|l| l.take()).unwrap_or_default();
    Ok(WallOutput {
        run,
        placement,
        transitions,
    })
}

fn manager_loop(
    mgr: &mut Manager,
    cells: &[HandshakeCell],
    reference: Instant,
    idle_wait: Duration,
) -> Result<(), EngineError> {
    let clock = OverheadClock { reference };
    let now = || since(reference, Instant::now());
    let mut completions = Vec::with_capacity(cells.len());
    loop {
        mgr.stats.iterations += 1;
        let injected = mgr.inject_due(now())?;

        let c0 = clock.read();
        completions.extend(cells.iter().filter_map(HandshakeCell::collect));
        let collected = completions.len();
        if collected > 0 {
            let t = now();
            for c in completions.drain(..) {
                mgr.complete(c, t);
            }
        }
        let mut dispatched = 0;
        if mgr.wants_schedule() {
            let ready_len = mgr.ready_len();
            let t = now();
            let decision = mgr.schedule(t)?;
            let orders = mgr.dispatch(decision, t);
            dispatched = orders.len();
            for o in orders {
                cells[o.pe_id].dispatch(o);
            }
            let sample = clock.read().saturating_sub(c0);
            mgr.record_sched(t, sample, ready_len, dispatched);
        } else {
            mgr.stats.idle_iterations += 1;
        }

        if mgr.is_done() {
            return Ok(());
        }
        if injected == 0 && collected == 0 && dispatched == 0 {
            let wait = match mgr.next_arrival() {
                Some(a) => Duration::from_nanos(a.saturating_sub(now()))
                    .min(idle_wait.max(Duration::from_nanos(1))),
                None => idle_wait,
            };
            thread::park_timeout(wait);
        }
    }
}
