//! Run statistics derived from a trace, and the rows of the CSV exports.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::platform::Placement;
use crate::trace::{EventKind, Trace};
use crate::Nanos;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeUtilization {
    pub pe_id: usize,
    pub pe_type: String,
    pub busy_ns: Nanos,
    pub fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverheadStats {
    /// Manager cycles in which the policy ran.
    pub cycles: usize,
    pub mean_ns: f64,
    pub max_ns: Nanos,
    pub total_ns: Nanos,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AppLatency {
    pub count: usize,
    pub failed: usize,
    pub mean_ns: f64,
    pub max_ns: Nanos,
}

/// Counters the engine keeps outside the trace.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopStats {
    pub iterations: u64,
    pub idle_iterations: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub makespan_ns: Nanos,
    pub utilization: Vec<PeUtilization>,
    pub overhead: OverheadStats,
    pub apps: BTreeMap<String, AppLatency>,
    pub injected: usize,
    pub completed: usize,
    pub failed: usize,
    pub tasks_run: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_stats: Option<LoopStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("task {node} of instance {instance_id} has {what}")]
    Unmatched {
        instance_id: u64,
        node: String,
        what: &'static str,
    },
    #[error("task {node} of instance {instance_id} ends before it starts")]
    NegativeInterval { instance_id: u64, node: String },
    #[error("unknown export kind {0} (expected gantt, utilization, overhead or latency)")]
    UnknownExport(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GanttRow {
    pub pe_id: usize,
    pub instance_id: u64,
    pub node: String,
    pub start_ns: Nanos,
    pub end_ns: Nanos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilizationRow {
    pub pe_id: usize,
    pub pe_type: String,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub cycle_index: usize,
    pub duration_ns: Nanos,
    pub ready_len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub app: String,
    pub instance_id: u64,
    pub latency_ns: Nanos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportKind {
    Gantt,
    Utilization,
    Overhead,
    Latency,
}

impl ExportKind {
    pub fn parse(s: &str) -> Result<Self, MetricsError> {
        match s {
            "gantt" => Ok(Self::Gantt),
            "utilization" => Ok(Self::Utilization),
            "overhead" => Ok(Self::Overhead),
            "latency" => Ok(Self::Latency),
            _ => Err(MetricsError::UnknownExport(s.into())),
        }
    }
}

/// Matches every task_start with its task_end, per (instance, node).
pub fn gantt_rows(trace: &Trace) -> Result<Vec<GanttRow>, MetricsError> {
    let mut open: BTreeMap<(u64, &str), (usize, Nanos)> = BTreeMap::new();
    let mut rows = Vec::new();
    for e in &trace.events {
        match &e.kind {
            EventKind::TaskStart {
                instance_id,
                node,
                pe_id,
            } => {
                if open.insert((*instance_id, node), (*pe_id, e.t)).is_some() {
                    return Err(MetricsError::Unmatched {
                        instance_id: *instance_id,
                        node: node.clone(),
                        what: "two task_start events",
                    });
                }
            }
            EventKind::TaskEnd {
                instance_id, node, ..
            } => {
                let Some((pe_id, start)) = open.remove(&(*instance_id, node.as_str())) else {
                    return Err(MetricsError::Unmatched {
                        instance_id: *instance_id,
                        node: node.clone(),
                        what: "a task_end without a task_start",
                    });
                };
                if e.t < start {
                    return Err(MetricsError::NegativeInterval {
                        instance_id: *instance_id,
                        node: node.clone(),
                    });
                }
                rows.push(GanttRow {
                    pe_id,
                    instance_id: *instance_id,
                    node: node.clone(),
                    start_ns: start,
                    end_ns: e.t,
                });
            }
            _ => {}
        }
    }
    if let Some(((instance_id, node), _)) = open.into_iter().next() {
        return Err(MetricsError::Unmatched {
            instance_id,
            node: node.into(),
            what: "a task_start without a task_end",
        });
    }
    rows.sort_by_key(|a| (a.pe_id, a.start_ns, a.end_ns));
    Ok(rows)
}

pub fn overhead_rows(trace: &Trace) -> Vec<OverheadRow> {
    trace
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::SchedDecision {
                duration_ns,
                ready_len,
                ..
            } => Some((*duration_ns, *ready_len)),
            _ => None,
        })
        .enumerate()
        .map(|(cycle_index, (duration_ns, ready_len))| OverheadRow {
            cycle_index,
            duration_ns,
            ready_len,
        })
        .collect()
}

/// Inject-to-completion latency of every instance that completed.
pub fn latency_rows(trace: &Trace) -> Vec<LatencyRow> {
    let mut injected: BTreeMap<u64, (&str, Nanos)> = BTreeMap::new();
    let mut rows = Vec::new();
    for e in &trace.events {
        match &e.kind {
            EventKind::Inject { instance_id, app } => {
                injected.insert(*instance_id, (app, e.t));
            }
            EventKind::InstanceComplete { instance_id } => {
                if let Some((app, t0)) = injected.get(instance_id) {
                    rows.push(LatencyRow {
                        app: (*app).into(),
                        instance_id: *instance_id,
                        latency_ns: e.t - t0,
                    });
                }
            }
            _ => {}
        }
    }
    rows.sort_by_key(|r| r.instance_id);
    rows
}

pub fn utilization_rows(report: &RunReport) -> Vec<UtilizationRow> {
    report
        .utilization
        .iter()
        .map(|u| UtilizationRow {
            pe_id: u.pe_id,
            pe_type: u.pe_type.clone(),
            fraction: u.fraction,
        })
        .collect()
}

/// Makespan, per-PE utilization, scheduling overhead and per-app latency.
///
/// The makespan spans the first to the last task event; PE busy time is
/// the sum of task intervals, which include modeled transfers.
pub fn compute_report(trace: &Trace) -> Result<RunReport, MetricsError> {
    let gantt = gantt_rows(trace)?;
    let mut first = Nanos::MAX;
    let mut last = 0;
    for e in trace.events.iter().filter(|e| e.is_task_event()) {
        first = first.min(e.t);
        last = last.max(e.t);
    }
    let makespan_ns = if first == Nanos::MAX { 0 } else { last - first };

    let mut busy: BTreeMap<usize, Nanos> = trace.header.pes.iter().map(|p| (p.pe_id, 0)).collect();
    for r in &gantt {
        *busy.entry(r.pe_id).or_insert(0) += r.end_ns - r.start_ns;
    }
    let utilization = busy
        .into_iter()
        .map(|(pe_id, busy_ns)| PeUtilization {
            pe_id,
            pe_type: trace
                .header
                .pes
                .iter()
                .find(|p| p.pe_id == pe_id)
                .map_or_else(|| format!("pe{pe_id}"), |p| p.pe_type.clone()),
            busy_ns,
            fraction: if makespan_ns == 0 {
                0.0
            } else {
                busy_ns as f64 / makespan_ns as f64
            },
        })
        .collect();

    let samples = overhead_rows(trace);
    let total_ns: Nanos = samples.iter().map(|s| s.duration_ns).sum();
    let overhead = OverheadStats {
        cycles: samples.len(),
        mean_ns: if samples.is_empty() {
            0.0
        } else {
            total_ns as f64 / samples.len() as f64
        },
        max_ns: samples.iter().map(|s| s.duration_ns).max().unwrap_or(0),
        total_ns,
    };

    let mut apps: BTreeMap<String, AppLatency> = BTreeMap::new();
    let mut app_of: BTreeMap<u64, &str> = BTreeMap::new();
    let mut injected = 0;
    let mut failed = 0;
    for e in &trace.events {
        match &e.kind {
            EventKind::Inject { instance_id, app } => {
                injected += 1;
                app_of.insert(*instance_id, app);
                apps.entry(app.clone()).or_default();
            }
            EventKind::InstanceFailed { instance_id, .. } => {
                failed += 1;
                if let Some(app) = app_of.get(instance_id) {
                    apps.entry((*app).into()).or_default().failed += 1;
                }
            }
            _ => {}
        }
    }
    let lat = latency_rows(trace);
    for r in &lat {
        let a = apps.entry(r.app.clone()).or_default();
        a.count += 1;
        a.max_ns = a.max_ns.max(r.latency_ns);
        a.mean_ns += r.latency_ns as f64;
    }
    for a in apps.values_mut() {
        if a.count > 0 {
            a.mean_ns /= a.count as f64;
        }
    }

    Ok(RunReport {
        makespan_ns,
        utilization,
        overhead,
        apps,
        injected,
        completed: lat.len(),
        failed,
        tasks_run: gantt.len(),
        placement: None,
        loop_stats: None,
        config: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::PeKind;
    use crate::trace::{PeInfo, TraceHeader};
    use crate::NS_PER_MS;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn two_pes() -> Trace {
        Trace {
            header: TraceHeader {
                pes: vec![
                    PeInfo {
                        pe_id: 0,
                        pe_type: "cpu".into(),
                        kind: PeKind::Core,
                    },
                    PeInfo {
                        pe_id: 1,
                        pe_type: "cpu".into(),
                        kind: PeKind::Core,
                    },
                ],
                ..TraceHeader::default()
            },
            events: vec![],
        }
    }

    fn run_task(t: &mut Trace, inst: u64, node: &str, pe: usize, s: Nanos, e: Nanos) {
        t.push(
            s,
            EventKind::TaskStart {
                instance_id: inst,
                node: node.into(),
                pe_id: pe,
            },
        );
        t.push(
            e,
            EventKind::TaskEnd {
                instance_id: inst,
                node: node.into(),
                pe_id: pe,
                failed: false,
            },
        );
    }

    #[test]
    fn single_task_full_utilization() {
        let mut t = two_pes();
        t.header.pes.truncate(1);
        t.push(
            0,
            EventKind::Inject {
                instance_id: 0,
                app: "a".into(),
            },
        );
        run_task(&mut t, 0, "X", 0, 0, NS_PER_MS);
        t.push(NS_PER_MS, EventKind::InstanceComplete { instance_id: 0 });
        let r = compute_report(&t).unwrap();
        assert_eq!(r.makespan_ns, NS_PER_MS);
        assert_eq!(r.utilization[0].fraction, 1.0);
        assert_eq!(r.apps["a"].count, 1);
        assert_eq!(r.apps["a"].max_ns, NS_PER_MS);
        assert_eq!(gantt_rows(&t).unwrap().len(), 1);
    }

    #[test]
    fn serial_tasks_on_one_of_two_pes() {
        let mut t = two_pes();
        run_task(&mut t, 0, "A", 0, 0, NS_PER_MS);
        run_task(&mut t, 0, "B", 0, NS_PER_MS, 2 * NS_PER_MS);
        let r = compute_report(&t).unwrap();
        let f: Vec<f64> = r.utilization.iter().map(|u| u.fraction).collect();
        assert_eq!(f, vec![1.0, 0.0]);
    }

    #[test]
    fn empty_trace_reports_zero() {
        let r = compute_report(&Trace::default()).unwrap();
        assert_eq!(r.makespan_ns, 0);
        assert!(r.utilization.is_empty());
    }

    #[test]
    fn unmatched_start_is_named() {
        let mut t = two_pes();
        t.push(
            0,
            EventKind::TaskStart {
                instance_id: 3,
                node: "FFT_0".into(),
                pe_id: 0,
            },
        );
        let err = compute_report(&t).unwrap_err();
        assert_eq!(
            err.to_string(),
            "task FFT_0 of instance 3 has a task_start without a task_end"
        );
    }

    #[test]
    fn overhead_rows_match_decisions() {
        let mut t = two_pes();
        for d in [10, 30] {
            t.push(
                0,
                EventKind::SchedDecision {
                    duration_ns: d,
                    policy: "frfs".into(),
                    ready_len: 2,
                    assigned: 1,
                },
            );
        }
        let r = compute_report(&t).unwrap();
        assert_eq!(overhead_rows(&t).len(), 2);
        assert_eq!(
            (
                r.overhead.cycles,
                r.overhead.mean_ns,
                r.overhead.max_ns,
                r.overhead.total_ns
            ),
            (2, 20.0, 30, 40)
        );
        assert_eq!(
            ExportKind::parse("bogus"),
            Err(MetricsError::UnknownExport("bogus".into()))
        );
    }

    proptest! {
        #[test]
        fn report_matches_interval_oracle(
            jobs in proptest::collection::vec((0usize..3, 1u64..1000, 0u64..500), 1..30)
        ) {
            let mut t = Trace::default();
            t.header.pes = (0..3).map(|i| PeInfo { pe_id: i, pe_type: "cpu".into(), kind: PeKind::Core }).collect();
            let mut cursor = [0u64; 3];
            let mut lo = u64::MAX;
            let mut hi = 0;
            let mut busy = [0u64; 3];
            for (i, (pe, len, gap)) in jobs.iter().enumerate() {
                let s = cursor[*pe] + gap;
                let e = s + len;
                cursor[*pe] = e;
                busy[*pe] += len;
                lo = lo.min(s);
                hi = hi.max(e);
                run_task(&mut t, i as u64, "n", *pe, s, e);
            }
            t.sort();
            let r = compute_report(&t).unwrap();
            prop_assert_eq!(r.makespan_ns, hi - lo);
            for u in &r.utilization {
                prop_assert_eq!(u.busy_ns, busy[u.pe_id]);
                prop_assert!(u.fraction <= 1.0 + 1e-6);
            }
            let rows = gantt_rows(&t).unwrap();
            for w in rows.windows(2) {
                if w[0].pe_id == w[1].pe_id {
                    prop_assert!(w[0].end_ns <= w[1].start_ns);
                }
            }
        }
    }
}
