//! PE worker threads. A core worker runs the kernel directly; an
//! accelerator worker copies the arguments into its local memory, holds
//! the PE for the modeled transfer and processing times, and computes the
//! result with the kernel's reference implementation.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use emu_core::engine::{Completion, TaskOrder};
use emu_core::kernel::KernelEnv;
use emu_core::platform::{PeKind, ProcessorElement};
use emu_core::Nanos;

use super::cell::HandshakeCell;
use super::host::{nanos, since, sleep_until};

/// Kernel environment that holds the PE by sleeping; `busy(d)` therefore
/// takes at least `d` of wall time without consuming a host core.
pub struct SleepEnv;

impl KernelEnv for SleepEnv {
    fn occupy(&self, ns: Nanos) {
        sleep_until(Instant::now() + nanos(ns));
    }
}

/// Bounds of the exponential backoff a worker uses while waiting for work.
#[derive(Clone, Copy, Debug)]
pub struct Backoff {
    pub min: Duration,
    pub max: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            min: Duration::from_micros(1),
            max: Duration::from_micros(100),
        }
    }
}

fn run_kernel(order: &mut TaskOrder) -> Result<(), String> {
    match catch_unwind(AssertUnwindSafe(|| order.execute(&SleepEnv))) {
        Ok(r) => r,
        Err(_) => Err(format!("kernel {} panicked", order.kernel.name)),
    }
}

fn completion(order: TaskOrder, start: Nanos, end: Nanos, error: Option<String>) -> Completion {
    Completion {
        pe_id: order.pe_id,
        key: order.key,
        instance_id: order.instance_id,
        start,
        end,
        transfer_in: None,
        transfer_out: None,
        args: order.args,
        error,
    }
}

fn run_on_core(mut order: TaskOrder, reference: Instant) -> Completion {
    let start = since(reference, Instant::now());
    let error = match order.fault.take() {
        Some(f) => Some(f),
        None => run_kernel(&mut order).err(),
    };
    let end = since(reference, Instant::now());
    completion(order, start, end, error)
}

fn run_on_accelerator(mut order: TaskOrder, reference: Instant, local: &mut Vec<u8>) -> Completion {
    let t0 = Instant::now();
    let start = since(reference, t0);
    if let Some(f) = order.fault.take() {
        return completion(order, start, start, Some(f));
    }
    let Some(timing) = order.accel else {
        return completion(
            order,
            start,
            start,
            Some("accelerator task without a timing model".into()),
        );
    };
    local.clear();
    for a in &order.args {
        local.extend_from_slice(a);
    }
    std::hint::black_box(&local);
    // Phase deadlines are absolute so that wake-up latency does not
    // accumulate across phases.
    sleep_until(t0 + nanos(timing.transfer_in));
    let t1 = Instant::now();
    let error = run_kernel(&mut order).err();
    sleep_until(t0 + nanos(timing.transfer_in + timing.process));
    let t2 = Instant::now();
    local.clear();
    for a in &order.args {
        local.extend_from_slice(a);
    }
    std::hint::black_box(&local);
    sleep_until(t0 + nanos(timing.total()));
    let t3 = Instant::now();
    let mut c = completion(order, start, since(reference, t3), error);
    c.transfer_in = Some((start, since(reference, t1)));
    c.transfer_out = Some((since(reference, t2), since(reference, t3)));
    c
}

/// Worker loop: wait for a dispatched order, run it, publish the result,
/// until `stop` is raised.
pub fn worker_main(
    pe: &ProcessorElement,
    cell: &HandshakeCell,
    reference: Instant,
    stop: &AtomicBool,
    backoff: Backoff,
) {
    let mut local = Vec::new();
    if let Some(m) = &pe.accel_model {
        local.reserve(m.local_mem_bytes.min(1 << 24) as usize);
    }
    let mut wait = backoff.min;
    loop {
        if let Some(order) = cell.take_order() {
            let c = match pe.kind {
                PeKind::Core => run_on_core(order, reference),
                PeKind::Accelerator => run_on_accelerator(order, reference, &mut local),
            };
            cell.finish(c);
            wait = backoff.min;
            continue;
        }
        if stop.load(Ordering::Acquire) {
            return;
        }
        thread::park_timeout(wait);
        wait = (wait * 2).min(backoff.max);
    }
}
