//! Host-thread services: core pinning, timer slack, precise sleeps and the
//! per-thread CPU clock used for overhead samples.

use std::time::{Duration, Instant};

use emu_core::Nanos;

/// Number of host cores visible to this process.
pub fn host_cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Best-effort pin of the calling thread to `core`. Returns whether the
/// hint was applied.
pub fn pin_to(core: usize) -> bool {
    let ids = core_affinity::get_core_ids().unwrap_or_default();
    match ids.into_iter().find(|c| c.id == core) {
        Some(id) => core_affinity::set_for_current(id),
        None => false,
    }
}

/// Asks the kernel to wake this thread's sleeps with minimal slack.
#[cfg(target_os = "linux")]
pub fn tighten_timer_slack() {
    // SAFETY: PR_SET_TIMERSLACK takes a plain integer and only affects
    // the calling thread.
    unsafe {
        libc::prctl(libc::PR_SET_TIMERSLACK, 1 as libc::c_ulong, 0, 0, 0);
    }
}

#[cfg(not(target_os = "linux"))]
pub fn tighten_timer_slack() {}

/// CPU time consumed by the calling thread, when the platform exposes it.
#[cfg(unix)]
pub fn thread_cpu_ns() -> Option<Nanos> {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    (rc == 0).then(|| ts.tv_sec as Nanos * 1_000_000_000 + ts.tv_nsec as Nanos)
}

#[cfg(not(unix))]
pub fn thread_cpu_ns() -> Option<Nanos> {
    None
}

/// Sleeps until `deadline`; never returns early.
pub fn sleep_until(deadline: Instant) {
    loop {
        let now = Instant::now();
        if now >= deadline {
            return;
        }
        std::thread::sleep(deadline - now);
    }
}

/// Nanoseconds from `reference` to `t`.
pub fn since(reference: Instant, t: Instant) -> Nanos {
    t.saturating_duration_since(reference).as_nanos() as Nanos
}

pub fn nanos(ns: Nanos) -> Duration {
    Duration::from_nanos(ns)
}
