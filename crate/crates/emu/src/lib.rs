//! Host layer of the DSSoC emulation framework: the threaded wall-clock
//! runtime, dynamically loaded kernel plugins, file formats and the `emu`
//! command-line tool. The deterministic core lives in `emu_core`.

pub mod assets;
pub mod cli;
pub mod io;
pub mod plugin;
pub mod session;
pub mod wallclock;

pub use emu_core as core;
