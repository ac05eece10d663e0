//! Scheduling policies over a snapshot of the ready list and PE states.
//!
//! Policies are pure functions of their inputs (plus a seeded stream for
//! RANDOM); the engine owns dispatch.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::platform::{PeKind, PeStatus, ProcessorElement};
use crate::Nanos;

mod policies;

pub use policies::{Eft, Frfs, Met, RandomPolicy};

/// FIFO order key: ready time, then instance, then node rank in name order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReadyKey {
    pub ready_time: Nanos,
    pub instance_id: u64,
    pub node_index: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadyBinding {
    pub platform: String,
    pub est: Option<Nanos>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadyTask {
    pub key: ReadyKey,
    pub node: String,
    pub bindings: Vec<ReadyBinding>,
    pub inbound_bytes: u64,
}

impl ReadyTask {
    pub fn binding(&self, platform: &str) -> Option<&ReadyBinding> {
        self.bindings.iter().find(|b| b.platform == platform)
    }

    pub fn supports(&self, platform: &str) -> bool {
        self.binding(platform).is_some()
    }
}

/// Ready tasks in FIFO order with a per-binding index, so that a policy can
/// find the oldest task a PE supports without scanning the whole list.
#[derive(Clone, Debug, Default)]
pub struct ReadyList {
    tasks: BTreeMap<ReadyKey, ReadyTask>,
    by_platform: BTreeMap<String, BTreeSet<ReadyKey>>,
}

impl ReadyList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task: ReadyTask) {
        for b in &task.bindings {
            self.by_platform
                .entry(b.platform.clone())
                .or_default()
                .insert(task.key);
        }
        self.tasks.insert(task.key, task);
    }

    pub fn remove(&mut self, key: &ReadyKey) -> Option<ReadyTask> {
        let task = self.tasks.remove(key)?;
        for b in &task.bindings {
            if let Some(set) = self.by_platform.get_mut(&b.platform) {
                set.remove(key);
            }
        }
        Some(task)
    }

    pub fn get(&self, key: &ReadyKey) -> Option<&ReadyTask> {
        self.tasks.get(key)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Tasks in FIFO order.
    pub fn iter(&self) -> impl Iterator<Item = &ReadyTask> {
        self.tasks.values()
    }

    /// Keys of tasks with a binding for `platform`, in FIFO order.
    pub fn supporting(&self, platform: &str) -> impl Iterator<Item = &ReadyKey> {
        self.by_platform.get(platform).into_iter().flatten()
    }
}

impl FromIterator<ReadyTask> for ReadyList {
    fn from_iter<I: IntoIterator<Item = ReadyTask>>(iter: I) -> Self {
        let mut r = Self::new();
        for t in iter {
            r.insert(t);
        }
        r
    }
}

/// Snapshot of one PE as seen by a policy.
#[derive(Clone, Copy, Debug)]
pub struct PeView<'a> {
    pub pe: &'a ProcessorElement,
    pub status: PeStatus,
    /// Estimated time the PE becomes free; `now` for idle PEs.
    pub est_available: Nanos,
}

impl PeView<'_> {
    pub fn pe_id(&self) -> usize {
        self.pe.pe_id
    }

    pub fn is_idle(&self) -> bool {
        self.status == PeStatus::Idle
    }

    /// Estimated execution time of `task` on this PE, if it declares one.
    pub fn cost(&self, task: &ReadyTask) -> Option<Nanos> {
        task.binding(&self.pe.binds)?
            .est
            .map(|e| scale_time(e, self.pe.time_scale))
    }

    /// Modeled time to move the task's inbound data onto this PE.
    pub fn inbound_transfer(&self, task: &ReadyTask) -> Nanos {
        match (&self.pe.kind, &self.pe.accel_model) {
            (PeKind::Accelerator, Some(m)) => m.transfer_time(task.inbound_bytes),
            _ => 0,
        }
    }
}

/// `t * scale`, rounded to the nearest nanosecond; exact for scale 1.
pub fn scale_time(t: Nanos, scale: f64) -> Nanos {
    if scale == 1.0 {
        t
    } else {
        libm::round(t as f64 * scale) as Nanos
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScheduleDecision {
    pub assignments: Vec<(ReadyKey, usize)>,
}

impl ScheduleDecision {
    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SchedError {
    #[error("unknown scheduler {name} (available: {available})")]
    UnknownPolicy { name: String, available: String },
    #[error("PE {0} assigned twice in one decision")]
    PeTwice(usize),
    #[error("task {0:?} assigned twice in one decision")]
    TaskTwice(ReadyKey),
    #[error("PE {0} was not idle")]
    PeNotIdle(usize),
    #[error("PE {0} does not exist")]
    NoSuchPe(usize),
    #[error("task {0:?} is not in the ready list")]
    NotReady(ReadyKey),
    #[error("task {node} has no binding for PE {pe_id} ({platform})")]
    Unsupported {
        node: String,
        pe_id: usize,
        platform: String,
    },
}

/// Checks every invariant a decision must satisfy against its snapshot.
pub fn check_decision(
    decision: &ScheduleDecision,
    ready: &ReadyList,
    pes: &[PeView<'_>],
) -> Result<(), SchedError> {
    let mut used_pes = BTreeSet::new();
    let mut used_tasks = BTreeSet::new();
    for (key, pe_id) in &decision.assignments {
        if !used_pes.insert(*pe_id) {
            return Err(SchedError::PeTwice(*pe_id));
        }
        if !used_tasks.insert(*key) {
            return Err(SchedError::TaskTwice(*key));
        }
        let view = pes
            .iter()
            .find(|v| v.pe_id() == *pe_id)
            .ok_or(SchedError::NoSuchPe(*pe_id))?;
        if !view.is_idle() {
            return Err(SchedError::PeNotIdle(*pe_id));
        }
        let task = ready.get(key).ok_or(SchedError::NotReady(*key))?;
        if !task.supports(&view.pe.binds) {
            return Err(SchedError::Unsupported {
                node: task.node.clone(),
                pe_id: *pe_id,
                platform: view.pe.binds.clone(),
            });
        }
    }
    Ok(())
}

/// A scheduling policy. `schedule` is called once per manager cycle in
/// which the ready list is nonempty and some PE is idle.
pub trait Policy: Send {
    fn name(&self) -> &str;

    /// Whether the policy relies on `est_exec_time` values.
    fn needs_estimates(&self) -> bool {
        false
    }

    fn schedule(&mut self, ready: &ReadyList, pes: &[PeView<'_>], now: Nanos) -> ScheduleDecision;
}

pub type PolicyFactory = Box<dyn Fn(u64) -> Box<dyn Policy> + Send + Sync>;

/// Maps policy names to constructors taking the run seed.
pub struct PolicyRegistry {
    factories: BTreeMap<String, PolicyFactory>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("frfs", Box::new(|_| Box::new(Frfs)));
        r.register("met", Box::new(|_| Box::new(Met::default())));
        r.register("eft", Box::new(|_| Box::new(Eft::default())));
        r.register("random", Box::new(|seed| Box::new(RandomPolicy::new(seed))));
        r
    }

    pub fn register(&mut self, name: &str, factory: PolicyFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn lookup(&self, name: &str, seed: u64) -> Result<Box<dyn Policy>, SchedError> {
        match self.factories.get(name) {
            Some(f) => Ok(f(seed)),
            None => Err(SchedError::UnknownPolicy {
                name: name.into(),
                available: self.names().join(","),
            }),
        }
    }
}

#[cfg(test)]
pub(crate) mod testkit {
    use super::*;
    use crate::platform::AccelModel;
    use alloc::vec;

    pub fn pe(pe_id: usize, binds: &str) -> ProcessorElement {
        ProcessorElement {
            pe_id,
            pe_type: binds.into(),
            binds: binds.into(),
            kind: PeKind::Core,
            time_scale: 1.0,
            accel_model: None,
        }
    }

    pub fn accel(pe_id: usize, binds: &str, fixed_latency: Nanos) -> ProcessorElement {
        ProcessorElement {
            kind: PeKind::Accelerator,
            accel_model: Some(AccelModel {
                fixed_latency,
                bytes_per_sec: 0,
                process_time: BTreeMap::new(),
                local_mem_bytes: 1 << 20,
            }),
            ..pe(pe_id, binds)
        }
    }

    pub fn task(
        ready_time: Nanos,
        instance_id: u64,
        bindings: &[(&str, Option<Nanos>)],
    ) -> ReadyTask {
        ReadyTask {
            key: ReadyKey {
                ready_time,
                instance_id,
                node_index: 0,
            },
            node: alloc::format!("n{instance_id}"),
            bindings: bindings
                .iter()
                .map(|(p, e)| ReadyBinding {
                    platform: (*p).into(),
                    est: *e,
                })
                .collect(),
            inbound_bytes: 0,
        }
    }

    pub fn idle(pe: &ProcessorElement, now: Nanos) -> PeView<'_> {
        PeView {
            pe,
            status: PeStatus::Idle,
            est_available: now,
        }
    }

    pub fn busy(pe: &ProcessorElement, until: Nanos) -> PeView<'_> {
        PeView {
            pe,
            status: PeStatus::Run,
            est_available: until,
        }
    }

    #[test]
    fn ready_list_orders_and_indexes() {
        let mut r: ReadyList = [
            task(5, 0, &[("cpu", None)]),
            task(3, 1, &[("cpu", None), ("fft", None)]),
        ]
        .into_iter()
        .collect();
        assert_eq!(
            r.iter().map(|t| t.key.ready_time).collect::<Vec<_>>(),
            vec![3, 5]
        );
        assert_eq!(r.supporting("fft").count(), 1);
        let k = r.iter().next().unwrap().key;
        r.remove(&k).unwrap();
        assert_eq!(r.supporting("fft").count(), 0);
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn legality_checker_rejects_each_violation() {
        let cpu = pe(0, "cpu");
        let fft = pe(1, "fft");
        let ready: ReadyList = [task(0, 0, &[("cpu", None)]), task(0, 1, &[("cpu", None)])]
            .into_iter()
            .collect();
        let k0 = ready.iter().next().unwrap().key;
        let k1 = ready.iter().nth(1).unwrap().key;
        let views = [idle(&cpu, 0), idle(&fft, 0)];
        let d = |a: Vec<(ReadyKey, usize)>| ScheduleDecision { assignments: a };
        assert_eq!(check_decision(&d(vec![(k0, 0)]), &ready, &views), Ok(()));
        assert_eq!(
            check_decision(&d(vec![(k0, 0), (k1, 0)]), &ready, &views),
            Err(SchedError::PeTwice(0))
        );
        assert!(matches!(
            check_decision(&d(vec![(k0, 1)]), &ready, &views),
            Err(SchedError::Unsupported { .. })
        ));
        let views_busy = [busy(&cpu, 9), idle(&fft, 0)];
        assert_eq!(
            check_decision(&d(vec![(k0, 0)]), &ready, &views_busy),
            Err(SchedError::PeNotIdle(0))
        );
        assert_eq!(
            check_decision(&d(vec![(k0, 7)]), &ready, &views),
            Err(SchedError::NoSuchPe(7))
        );
    }

    #[test]
    fn registry_lookup() {
        let mut reg = PolicyRegistry::with_builtins();
        assert_eq!(reg.lookup("frfs", 0).unwrap().name(), "frfs");
        match reg.lookup("bogus", 0) {
            Err(e) => assert_eq!(
                e.to_string(),
                "unknown scheduler bogus (available: eft,frfs,met,random)"
            ),
            Ok(_) => panic!("bogus resolved"),
        }
        reg.register("custom", Box::new(|_| Box::new(Frfs)));
        assert!(reg.lookup("custom", 0).is_ok());
    }
}
