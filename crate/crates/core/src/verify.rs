//! Reference checks for emulation runs: a brute-force FRFS model and a
//! trace auditor for dependency order and PE exclusivity.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::app::ApplicationSpec;
use crate::platform::ProcessorElement;
use crate::sched::scale_time;
use crate::trace::{EventKind, Trace};
use crate::workload::WorkloadQueue;
use crate::Nanos;

/// `(instance, node) -> (pe, start, end)`.
pub type Spans = BTreeMap<(u64, String), (usize, Nanos, Nanos)>;

/// Task intervals recorded in a trace.
pub fn task_spans(trace: &Trace) -> Spans {
    let mut starts = BTreeMap::new();
    let mut out = BTreeMap::new();
    for e in &trace.events {
        match &e.kind {
            EventKind::TaskStart {
                instance_id,
                node,
                pe_id,
            } => {
                starts.insert((*instance_id, node.clone()), (*pe_id, e.t));
            }
            EventKind::TaskEnd {
                instance_id, node, ..
            } => {
                let k = (*instance_id, node.clone());
                if let Some((p, s)) = starts.get(&k) {
                    out.insert(k, (*p, *s, e.t));
                }
            }
            _ => {}
        }
    }
    out
}

/// FRFS on cores with zero scheduling overhead, simulated by scanning
/// every PE and every ready task at each event time.
///
/// At each time: arrivals are injected, finished tasks release their
/// successors, then each idle PE in id order takes the earliest-ready
/// task (ties by instance id, then node name order) it has a binding for.
/// Durations are `est_exec_time * time_scale`.
pub fn frfs_oracle(
    specs: &[ApplicationSpec],
    pes: &[ProcessorElement],
    queue: &WorkloadQueue,
) -> Spans {
    let by_name: BTreeMap<&str, &ApplicationSpec> =
        specs.iter().map(|s| (s.app_name.as_str(), s)).collect();
    let mut app_of: BTreeMap<u64, &ApplicationSpec> = BTreeMap::new();
    let mut done: BTreeSet<(u64, String)> = BTreeSet::new();
    let mut released: BTreeMap<(u64, String), Nanos> = BTreeMap::new();
    let mut running: Vec<Option<(Nanos, u64, String)>> = vec![None; pes.len()];
    let mut out = Spans::new();
    let mut next = 0;
    let mut now = queue.entries.first().map_or(0, |e| e.arrival_time);
    loop {
        while next < queue.entries.len() && queue.entries[next].arrival_time <= now {
            let e = &queue.entries[next];
            app_of.insert(e.instance_id, by_name[e.app_name.as_str()]);
            next += 1;
        }
        for slot in running.iter_mut() {
            if slot.as_ref().is_some_and(|r| r.0 <= now) {
                let (_, id, node) = slot.take().expect("checked");
                done.insert((id, node));
            }
        }
        for (id, spec) in &app_of {
            for (name, node) in &spec.dag {
                let key = (*id, name.clone());
                if released.contains_key(&key) {
                    continue;
                }
                if node
                    .predecessors
                    .iter()
                    .all(|p| done.contains(&(*id, p.clone())))
                {
                    released.insert(key, now);
                }
            }
        }
        for (p, pe) in pes.iter().enumerate() {
            if running[p].is_some() {
                continue;
            }
            let pick = released
                .iter()
                .filter(|(k, _)| !out.contains_key(*k))
                .filter(|((id, name), _)| app_of[id].dag[name].binding_for(&pe.binds).is_some())
                .min_by_key(|((id, name), t)| {
                    (**t, *id, app_of[id].dag.keys().position(|k| k == name))
                })
                .map(|(k, _)| k.clone());
            if let Some((id, name)) = pick {
                let est = app_of[&id].dag[&name]
                    .binding_for(&pe.binds)
                    .and_then(|b| b.est_exec_time)
                    .unwrap_or(0);
                let end = now + scale_time(est, pe.time_scale);
                out.insert((id, name.clone()), (p, now, end));
                running[p] = Some((end, id, name));
            }
        }
        let t_run = running.iter().flatten().map(|r| r.0).min();
        let t_arr = queue.entries.get(next).map(|e| e.arrival_time);
        now = match (t_run, t_arr) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => break,
        };
    }
    out
}

/// Every dependency-order and PE-overlap violation in a trace. Tasks of
/// instances that did not fail must all have run exactly once.
pub fn trace_violations(trace: &Trace, specs: &[ApplicationSpec]) -> Vec<String> {
    let by_name: BTreeMap<&str, &ApplicationSpec> =
        specs.iter().map(|s| (s.app_name.as_str(), s)).collect();
    let mut app_of = BTreeMap::new();
    let mut failed = BTreeSet::new();
    let mut runs: BTreeMap<(u64, String), usize> = BTreeMap::new();
    for e in &trace.events {
        match &e.kind {
            EventKind::Inject { instance_id, app } => {
                app_of.insert(*instance_id, app.as_str());
            }
            EventKind::InstanceFailed { instance_id, .. } => {
                failed.insert(*instance_id);
            }
            EventKind::TaskStart {
                instance_id, node, ..
            } => {
                *runs.entry((*instance_id, node.clone())).or_insert(0) += 1;
            }
            _ => {}
        }
    }
    let spans = task_spans(trace);
    let mut v = Vec::new();
    for (id, app) in &app_of {
        let Some(spec) = by_name.get(app) else {
            v.push(format!("instance {id}: unknown app {app}"));
            continue;
        };
        for (name, node) in &spec.dag {
            let key = (*id, name.clone());
            let n = runs.get(&key).copied().unwrap_or(0);
            if n > 1 || (n == 0 && !failed.contains(id)) {
                v.push(format!("instance {id} task {name} ran {n} times"));
            }
            let Some((_, start, _)) = spans.get(&key) else {
                continue;
            };
            for p in &node.predecessors {
                match spans.get(&(*id, p.clone())) {
                    Some((_, _, end)) if end <= start => {}
                    Some((_, _, end)) => v.push(format!(
                        "instance {id}: {name} starts at {start} before {p} ends at {end}"
                    )),
                    None => v.push(format!(
                        "instance {id}: {name} ran but predecessor {p} did not"
                    )),
                }
            }
        }
    }
    type Interval<'a> = (Nanos, Nanos, &'a (u64, String));
    let mut per_pe: BTreeMap<usize, Vec<Interval<'_>>> = BTreeMap::new();
    for (k, (pe, s, e)) in &spans {
        per_pe.entry(*pe).or_default().push((*s, *e, k));
    }
    for (pe, mut iv) in per_pe {
        iv.sort();
        for w in iv.windows(2) {
            if w[0].1 > w[1].0 {
                v.push(format!("PE {pe}: {:?} overlaps {:?}", w[0].2, w[1].2));
            }
        }
    }
    v
}
