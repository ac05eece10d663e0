//! Pure, allocation-only core of the DSSoC emulation framework.
//!
//! Everything here is deterministic and free of IO: the DAG application
//! model, the kernel library, workload generation, scheduling policies, the
//! shared workload-manager logic with its virtual-clock driver, trace
//! metrics, and the block-trace to DAG extraction flow. The `emu` crate
//! layers threads, wall-clock timing, plugin loading, files and the CLI on
//! top of it.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod app;
pub mod engine;
pub mod extract;
pub mod fixtures;
pub mod kernel;
pub mod metrics;
pub mod platform;
pub mod rng;
pub mod sched;
pub mod trace;
pub mod verify;
pub mod workload;

/// Nanoseconds since the emulation reference start.
pub type Nanos = u64;

pub const NS_PER_US: Nanos = 1_000;
pub const NS_PER_MS: Nanos = 1_000_000;
pub const NS_PER_SEC: Nanos = 1_000_000_000;

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}
