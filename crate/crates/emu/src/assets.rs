//! Bundled sample inputs. The copies checked in under `assets/` are
//! exactly what [`sample_files`] produces with the default trace size.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use emu_core::app::{emit_application, ApplicationSpec};
use emu_core::extract::planted::naive_dft_trace;
use emu_core::extract::{dft_recognition_table, encode_binary_trace};
use emu_core::fixtures::{self, INJECTION_ROWS, MIXED_APPS, MIXED_FRAME};
use emu_core::platform::{preset, PRESET_NAMES};
use emu_core::workload::{WorkloadMode, WorkloadSpec};

use crate::io::{self, FileError};

pub const DEFAULT_DFT_SAMPLES: usize = 32;

/// Number of fft_burst instances in the bundled small-FFT workload.
pub const FFT_BURST_INSTANCES: u32 = 64;

fn json(value: &impl serde::Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn app(spec: &ApplicationSpec) -> (PathBuf, Vec<u8>) {
    (
        PathBuf::from(format!("apps/{}.app.json", spec.app_name)),
        (emit_application(spec) + "\n").into_bytes(),
    )
}

/// Bundled applications, keyed by name.
pub fn shipped_specs() -> BTreeMap<String, ApplicationSpec> {
    let mut apps = fixtures::shipped_apps();
    apps.push(fixtures::range_detection_naive(
        fixtures::RD_SAMPLES,
        fixtures::RD_DELAY,
    ));
    apps.into_iter().map(|a| (a.app_name.clone(), a)).collect()
}

/// Mixed-workload file for one injection row.
pub fn rate_workload(counts: &[u32; 4]) -> WorkloadSpec {
    WorkloadSpec {
        mode: WorkloadMode::Performance,
        counts: BTreeMap::new(),
        injections: fixtures::rate_injections(counts, MIXED_FRAME),
        t_end: MIXED_FRAME,
        seed: 0,
    }
}

fn validation_workload(counts: &[(&str, u32)]) -> WorkloadSpec {
    WorkloadSpec {
        mode: WorkloadMode::Validation,
        counts: counts.iter().map(|(a, n)| (a.to_string(), *n)).collect(),
        injections: Vec::new(),
        t_end: 0,
        seed: 0,
    }
}

/// Every bundled file as `(relative path, contents)`.
pub fn sample_files(dft_samples: usize) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<(PathBuf, Vec<u8>)> = shipped_specs().values().map(app).collect();
    for name in PRESET_NAMES {
        let cfg = preset(name).expect("preset builds");
        out.push((
            PathBuf::from(format!("platforms/{name}.plat.json")),
            json(&cfg),
        ));
    }
    let one_each: Vec<(&str, u32)> = MIXED_APPS.iter().map(|a| (*a, 1)).collect();
    out.push((
        PathBuf::from("workloads/validation.wl.json"),
        json(&validation_workload(&one_each)),
    ));
    out.push((
        PathBuf::from("workloads/fft-burst.wl.json"),
        json(&validation_workload(&[("fft_burst", FFT_BURST_INSTANCES)])),
    ));
    for (rate, counts) in INJECTION_ROWS {
        out.push((
            PathBuf::from(format!("workloads/mixed-{rate:.2}.wl.json")),
            json(&rate_workload(&counts)),
        ));
    }
    out.push((
        PathBuf::from("recognize/dft.json"),
        (dft_recognition_table().to_json() + "\n").into_bytes(),
    ));
    let trace = naive_dft_trace(dft_samples);
    out.push((
        PathBuf::from("traces/naive_dft.blk"),
        encode_binary_trace(&trace.blocks),
    ));
    out.push((
        PathBuf::from("traces/naive_dft.meta.json"),
        json(&trace.meta),
    ));
    out
}

pub fn write_samples(dir: &Path, dft_samples: usize) -> Result<(), FileError> {
    for (rel, bytes) in sample_files(dft_samples) {
        io::write_bytes(&dir.join(rel), bytes)?;
    }
    Ok(())
}

/// Directory of the checked-in copies.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}
