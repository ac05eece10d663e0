//! Workload queues: every instance at t=0 (validation) or seeded periodic
//! probabilistic injection over a time frame (performance).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rng::SeededRng;
use crate::{fnv1a64, Nanos};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSpec {
    #[serde(rename = "app")]
    pub app_name: String,
    #[serde(rename = "period_ns")]
    pub period: Nanos,
    pub probability: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadMode {
    Validation,
    Performance,
}

/// Contents of a `.wl.json` workload file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub mode: WorkloadMode,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub counts: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub injections: Vec<InjectionSpec>,
    #[serde(default, rename = "t_end_ns")]
    pub t_end: Nanos,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum WorkloadError {
    #[error("unknown application {0}")]
    UnknownApp(String),
    #[error("injection period for {0} must be positive")]
    ZeroPeriod(String),
    #[error("injection probability for {app} must lie in [0, 1], got {p}")]
    BadProbability { app: String, p: String },
    #[error("performance mode needs at least one injection and t_end > 0")]
    EmptyPerformance,
    #[error("validation mode needs at least one application count")]
    EmptyValidation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub arrival_time: Nanos,
    pub app_name: String,
    pub instance_id: u64,
}

/// Arrival-ordered instances; ids are dense from 0 in queue order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkloadQueue {
    pub entries: Vec<QueueEntry>,
}

impl WorkloadQueue {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn from_unnumbered(mut items: Vec<(Nanos, String)>) -> Self {
        // stable: equal arrival times keep their relative order
        items.sort_by_key(|(t, _)| *t);
        let entries = items
            .into_iter()
            .enumerate()
            .map(|(i, (arrival_time, app_name))| QueueEntry {
                arrival_time,
                app_name,
                instance_id: i as u64,
            })
            .collect();
        Self { entries }
    }

    pub fn count_for(&self, app: &str) -> usize {
        self.entries.iter().filter(|e| e.app_name == app).count()
    }
}

fn check_known(app: &str, known: &dyn Fn(&str) -> bool) -> Result<(), WorkloadError> {
    if known(app) {
        Ok(())
    } else {
        Err(WorkloadError::UnknownApp(app.into()))
    }
}

/// All instances at t=0, ordered by app name then instance index.
pub fn generate_validation(
    counts: &BTreeMap<String, u32>,
    known: &dyn Fn(&str) -> bool,
) -> Result<WorkloadQueue, WorkloadError> {
    let mut items = Vec::new();
    for (app, n) in counts {
        check_known(app, known)?;
        items.extend((0..*n).map(|_| (0, app.clone())));
    }
    Ok(WorkloadQueue::from_unnumbered(items))
}

/// Periodic probabilistic injection over `[0, t_end)`.
///
/// Spec `i` contributes candidate arrivals at `k * period` for
/// `k = 0 .. floor(t_end / period)`, each kept iff a uniform draw from the
/// spec's own stream (seed xor FNV-1a of the app name) is below its
/// probability.
pub fn generate_performance(
    injections: &[InjectionSpec],
    t_end: Nanos,
    seed: u64,
    known: &dyn Fn(&str) -> bool,
) -> Result<WorkloadQueue, WorkloadError> {
    let mut items = Vec::new();
    for inj in injections {
        check_known(&inj.app_name, known)?;
        if inj.period == 0 {
            return Err(WorkloadError::ZeroPeriod(inj.app_name.clone()));
        }
        if !(0.0..=1.0).contains(&inj.probability) {
            return Err(WorkloadError::BadProbability {
                app: inj.app_name.clone(),
                p: alloc::format!("{}", inj.probability),
            });
        }
        let mut rng = SeededRng::new(seed ^ fnv1a64(inj.app_name.as_bytes()));
        let ticks = t_end / inj.period;
        for k in 0..ticks {
            if rng.unit() < inj.probability {
                items.push((k * inj.period, inj.app_name.clone()));
            }
        }
    }
    Ok(WorkloadQueue::from_unnumbered(items))
}

/// Builds the queue a workload file describes.
pub fn generate(
    spec: &WorkloadSpec,
    known: &dyn Fn(&str) -> bool,
) -> Result<WorkloadQueue, WorkloadError> {
    match spec.mode {
        WorkloadMode::Validation => {
            if spec.counts.is_empty() {
                return Err(WorkloadError::EmptyValidation);
            }
            generate_validation(&spec.counts, known)
        }
        WorkloadMode::Performance => {
            if spec.injections.is_empty() || spec.t_end == 0 {
                return Err(WorkloadError::EmptyPerformance);
            }
            generate_performance(&spec.injections, spec.t_end, spec.seed, known)
        }
    }
}

/// Stable merge by arrival time; ids are reassigned densely.
pub fn merge(queues: &[&WorkloadQueue]) -> WorkloadQueue {
    let items = queues
        .iter()
        .flat_map(|q| {
            q.entries
                .iter()
                .map(|e| (e.arrival_time, e.app_name.clone()))
        })
        .collect();
    WorkloadQueue::from_unnumbered(items)
}
