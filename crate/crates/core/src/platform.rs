//! Processing-element descriptions, the accelerator latency model, named
//! presets, worker placement and the idle/run/complete handshake rules.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::Nanos;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeKind {
    Core,
    Accelerator,
}

/// Processing time of one kernel on an accelerator: a constant, or linear
/// in the bytes moved into the accelerator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProcessTime {
    Fixed(Nanos),
    Linear { base_ns: Nanos, ns_per_kib: Nanos },
}

impl ProcessTime {
    pub fn eval(&self, in_bytes: u64) -> Nanos {
        match *self {
            ProcessTime::Fixed(ns) => ns,
            ProcessTime::Linear {
                base_ns,
                ns_per_kib,
            } => base_ns + (u128::from(in_bytes) * u128::from(ns_per_kib)).div_ceil(1024) as Nanos,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccelModel {
    #[serde(rename = "fixed_latency_ns")]
    pub fixed_latency: Nanos,
    pub bytes_per_sec: u64,
    #[serde(default)]
    pub process_time: BTreeMap<String, ProcessTime>,
    pub local_mem_bytes: u64,
}

impl AccelModel {
    pub fn transfer_time(&self, bytes: u64) -> Nanos {
        transfer_time(bytes, self.fixed_latency, self.bytes_per_sec)
    }
}

/// `fixed + ceil(bytes * 1e9 / bytes_per_sec)` nanoseconds; a zero rate
/// models an instantaneous link.
pub fn transfer_time(bytes: u64, fixed_latency: Nanos, bytes_per_sec: u64) -> Nanos {
    if bytes == 0 || bytes_per_sec == 0 {
        return fixed_latency;
    }
    let wire = (u128::from(bytes) * 1_000_000_000).div_ceil(u128::from(bytes_per_sec));
    fixed_latency + wire as Nanos
}

/// One line of a platform file: `count` identical PEs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeGroup {
    #[serde(rename = "type")]
    pub pe_type: String,
    pub kind: PeKind,
    pub count: u32,
    /// Binding name the PEs match in application `platforms` lists;
    /// defaults to `pe_type`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binds: Option<String>,
    /// Multiplier on `est_exec_time` for virtual timing and EFT/MET costs.
    #[serde(default = "unit_scale", skip_serializing_if = "is_unit_scale")]
    pub time_scale: f64,
    #[serde(default, rename = "accel", skip_serializing_if = "Option::is_none")]
    pub accel_model: Option<AccelModel>,
}

fn unit_scale() -> f64 {
    1.0
}

fn is_unit_scale(x: &f64) -> bool {
    *x == 1.0
}

/// Contents of a `.plat.json` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformConfig {
    #[serde(default)]
    pub manager_core: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host_cores: Option<usize>,
    pub pes: Vec<PeGroup>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PlatformError {
    #[error("platform has no processing elements")]
    NoPes,
    #[error("PE type {0} is declared more than once")]
    DuplicateType(String),
    #[error("accelerator PE type {0} needs an accel model")]
    MissingAccelModel(String),
    #[error("core PE type {0} must not carry an accel model")]
    CoreWithAccelModel(String),
    #[error("PE type {0} has a non-positive time_scale")]
    BadTimeScale(String),
    #[error("unknown platform preset {name} (available: {available})")]
    UnknownPreset { name: String, available: String },
    #[error("bad preset modifier {0}: expected type=count")]
    BadModifier(String),
    #[error("preset modifier names unknown PE type {0}")]
    UnknownModifierType(String),
}

/// A single emulated processing element.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessorElement {
    pub pe_id: usize,
    pub pe_type: String,
    pub binds: String,
    pub kind: PeKind,
    pub time_scale: f64,
    pub accel_model: Option<AccelModel>,
}

impl ProcessorElement {
    /// Modeled busy time of an accelerator task, split into its three phases.
    pub fn accel_phases(
        &self,
        in_bytes: u64,
        out_bytes: u64,
        process: Nanos,
    ) -> Option<[Nanos; 3]> {
        let m = self.accel_model.as_ref()?;
        Some([
            m.transfer_time(in_bytes),
            process,
            m.transfer_time(out_bytes),
        ])
    }
}

impl PlatformConfig {
    pub fn validate(&self) -> Result<(), PlatformError> {
        let mut seen = Vec::new();
        for g in &self.pes {
            if seen.contains(&&g.pe_type) {
                return Err(PlatformError::DuplicateType(g.pe_type.clone()));
            }
            seen.push(&g.pe_type);
            match (g.kind, &g.accel_model) {
                (PeKind::Accelerator, None) => {
                    return Err(PlatformError::MissingAccelModel(g.pe_type.clone()))
                }
                (PeKind::Core, Some(_)) => {
                    return Err(PlatformError::CoreWithAccelModel(g.pe_type.clone()))
                }
                _ => {}
            }
            if g.time_scale.is_nan() || g.time_scale <= 0.0 {
                return Err(PlatformError::BadTimeScale(g.pe_type.clone()));
            }
        }
        if self.pes.iter().all(|g| g.count == 0) {
            return Err(PlatformError::NoPes);
        }
        Ok(())
    }

    /// Expands groups into PEs with ids dense from 0 in file order.
    pub fn build(&self) -> Result<Vec<ProcessorElement>, PlatformError> {
        self.validate()?;
        let mut out = Vec::new();
        for g in &self.pes {
            for _ in 0..g.count {
                out.push(ProcessorElement {
                    pe_id: out.len(),
                    pe_type: g.pe_type.clone(),
                    binds: g.binds.clone().unwrap_or_else(|| g.pe_type.clone()),
                    kind: g.kind,
                    time_scale: g.time_scale,
                    accel_model: g.accel_model.clone(),
                });
            }
        }
        Ok(out)
    }

    pub fn count_of(&self, pe_type: &str) -> u32 {
        self.pes
            .iter()
            .filter(|g| g.pe_type == pe_type)
            .map(|g| g.count)
            .sum()
    }
}

/// The zcu102-like FFT accelerator: transfer-dominated, so a 128-sample
/// FFT finishes sooner on a CPU core.
pub fn zcu102_fft_model() -> AccelModel {
    let mut process_time = BTreeMap::new();
    for k in [
        "accel_fft",
        "accel_ifft",
        "range_detect_FFT_0_ACCEL",
        "range_detect_FFT_1_ACCEL",
        "range_detect_IFFT_ACCEL",
    ] {
        process_time.insert(k.to_string(), ProcessTime::Fixed(3_000));
    }
    AccelModel {
        fixed_latency: 15_000,
        bytes_per_sec: 400_000_000,
        process_time,
        local_mem_bytes: 1 << 20,
    }
}

pub const PRESET_NAMES: [&str; 2] = ["zcu102-like", "odroid-like"];

pub const ODROID_LITTLE_RATIO: f64 = 1.8;

fn core_group(pe_type: &str, count: u32) -> PeGroup {
    PeGroup {
        pe_type: pe_type.into(),
        kind: PeKind::Core,
        count,
        binds: None,
        time_scale: 1.0,
        accel_model: None,
    }
}

/// Named preset with optional `type=count` modifiers, e.g.
/// `zcu102-like,cpu=1,fft=1`.
pub fn preset(spec: &str) -> Result<PlatformConfig, PlatformError> {
    let mut parts = spec.split(',');
    let name = parts.next().unwrap_or("").trim();
    let mut config = match name {
        "zcu102-like" => PlatformConfig {
            manager_core: 0,
            host_cores: Some(4),
            pes: alloc::vec![
                core_group("cpu", 3),
                PeGroup {
                    pe_type: "fft".into(),
                    kind: PeKind::Accelerator,
                    count: 2,
                    binds: None,
                    time_scale: 1.0,
                    accel_model: Some(zcu102_fft_model()),
                },
            ],
        },
        "odroid-like" => PlatformConfig {
            manager_core: 0,
            host_cores: Some(8),
            pes: alloc::vec![
                PeGroup {
                    binds: Some("cpu".into()),
                    ..core_group("big", 4)
                },
                PeGroup {
                    binds: Some("cpu".into()),
                    time_scale: ODROID_LITTLE_RATIO,
                    ..core_group("little", 3)
                },
            ],
        },
        _ => {
            return Err(PlatformError::UnknownPreset {
                name: name.into(),
                available: PRESET_NAMES.join(","),
            })
        }
    };
    for m in parts {
        let (ty, n) = m
            .split_once('=')
            .ok_or_else(|| PlatformError::BadModifier(m.into()))?;
        let n: u32 = n
            .trim()
            .parse()
            .map_err(|_| PlatformError::BadModifier(m.into()))?;
        let g = config
            .pes
            .iter_mut()
            .find(|g| g.pe_type == ty.trim())
            .ok_or_else(|| PlatformError::UnknownModifierType(ty.trim().into()))?;
        g.count = n;
    }
    config.pes.retain(|g| g.count > 0);
    config.validate()?;
    Ok(config)
}

/// Host-core assignment for the manager and every PE worker.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub manager_core: usize,
    pub pe_cores: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Core workers take distinct non-manager cores first; accelerator workers
/// take the remaining unused cores, then round-robin over the non-manager
/// pool. The manager core is only shared when it is the sole host core.
pub fn place_workers(
    pes: &[ProcessorElement],
    host_cores: usize,
    manager_core: usize,
) -> Placement {
    let host_cores = host_cores.max(1);
    let manager_core = manager_core.min(host_cores - 1);
    let pool: Vec<usize> = (0..host_cores).filter(|c| *c != manager_core).collect();
    let pool = if pool.is_empty() {
        alloc::vec![manager_core]
    } else {
        pool
    };
    let mut warnings = Vec::new();
    let mut pe_cores = alloc::vec![usize::MAX; pes.len()];
    let mut used = alloc::vec![false; host_cores];
    let mut shared = false;

    let next_free = |used: &mut Vec<bool>| -> Option<usize> {
        let c = pool.iter().copied().find(|c| !used[*c])?;
        used[c] = true;
        Some(c)
    };
    let mut rr = 0usize;
    for kind in [PeKind::Core, PeKind::Accelerator] {
        for pe in pes.iter().filter(|p| p.kind == kind) {
            pe_cores[pe.pe_id] = match next_free(&mut used) {
                Some(c) => c,
                None => {
                    shared = true;
                    let c = pool[rr % pool.len()];
                    rr += 1;
                    c
                }
            };
        }
    }
    if !pes.iter().any(|p| p.kind == PeKind::Core) && !pes.is_empty() {
        warnings.push("no core PEs: accelerator workers share pool cores".to_string());
    }
    if shared {
        warnings.push(format!(
            "{} PE workers share {} pool cores",
            pes.len(),
            pool.len()
        ));
    }
    if pool == [manager_core] && !pes.is_empty() {
        warnings.push("single host core: PE workers share the manager core".to_string());
    }
    Placement {
        manager_core,
        pe_cores,
        warnings,
    }
}

/// Status of a PE's handshake cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeStatus {
    Idle,
    Run,
    Complete,
}

/// Which side of the handshake performed a transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Manager,
    Worker,
}

/// The only three legal handshake transitions.
pub fn transition_is_legal(from: PeStatus, to: PeStatus, by: Party) -> bool {
    matches!(
        (from, to, by),
        (PeStatus::Idle, PeStatus::Run, Party::Manager)
            | (PeStatus::Run, PeStatus::Complete, Party::Worker)
            | (PeStatus::Complete, PeStatus::Idle, Party::Manager)
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub pe_id: usize,
    pub from: PeStatus,
    pub to: PeStatus,
    pub by: Party,
}

impl Transition {
    pub fn is_legal(&self) -> bool {
        transition_is_legal(self.from, self.to, self.by)
    }
}
