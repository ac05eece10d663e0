//! The per-PE resource handler: a lock-guarded idle/run/complete status
//! with the task slot it hands between the manager and the PE worker.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::thread::{self, Thread, ThreadId};
use std::time::Instant;

use emu_core::engine::{Completion, TaskOrder};
use emu_core::platform::{Party, PeStatus, Transition};
use emu_core::sched::ReadyKey;
use emu_core::Nanos;
use serde::{Deserialize, Serialize};

use super::host::since;

/// One observed status change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub t: Nanos,
    #[serde(flatten)]
    pub transition: Transition,
}

/// Append-only record of every status change on every PE. Entries are
/// appended while the changing party holds the PE's lock, so each PE's
/// subsequence is in the order the changes happened.
#[derive(Debug)]
pub struct TransitionLog {
    reference: Instant,
    records: Mutex<Vec<TransitionRecord>>,
}

impl TransitionLog {
    pub fn new(reference: Instant) -> Self {
        Self {
            reference,
            records: Mutex::new(Vec::new()),
        }
    }

    fn push(&self, transition: Transition) {
        let t = since(self.reference, Instant::now());
        self.records
            .lock()
            .expect("log lock")
            .push(TransitionRecord { t, transition });
    }

    pub fn take(&self) -> Vec<TransitionRecord> {
        std::mem::take(&mut *self.records.lock().expect("log lock"))
    }
}

/// Checks a transition log against the handshake protocol: every change is
/// one of the three legal ones made by the legal party, each PE's changes
/// chain from `idle`, and every PE ends `idle`.
pub fn protocol_violations(records: &[TransitionRecord], pe_count: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut state = vec![PeStatus::Idle; pe_count];
    for (i, r) in records.iter().enumerate() {
        let tr = r.transition;
        let Some(cur) = state.get_mut(tr.pe_id) else {
            out.push(format!("record {i}: unknown PE {}", tr.pe_id));
            continue;
        };
        if !tr.is_legal() {
            out.push(format!(
                "record {i}: illegal {:?} -> {:?} by {:?} on PE {}",
                tr.from, tr.to, tr.by, tr.pe_id
            ));
        }
        if tr.from != *cur {
            out.push(format!(
                "record {i}: PE {} left {:?} but was {:?}",
                tr.pe_id, tr.from, cur
            ));
        }
        *cur = tr.to;
    }
    for (pe, s) in state.iter().enumerate() {
        if *s != PeStatus::Idle {
            out.push(format!("PE {pe} ended in {s:?}"));
        }
    }
    out
}

struct Slot {
    status: PeStatus,
    /// The dispatched task; present exactly while status is run or complete.
    task: Option<ReadyKey>,
    order: Option<TaskOrder>,
    completion: Option<Completion>,
}

pub struct HandshakeCell {
    pe_id: usize,
    manager: ThreadId,
    slot: Mutex<Slot>,
    log: Option<std::sync::Arc<TransitionLog>>,
    worker: OnceLock<Thread>,
    manager_thread: Thread,
}

impl HandshakeCell {
    /// Must be created on the manager thread.
    pub fn new(pe_id: usize, log: Option<std::sync::Arc<TransitionLog>>) -> Self {
        Self {
            pe_id,
            manager: thread::current().id(),
            manager_thread: thread::current(),
            slot: Mutex::new(Slot {
                status: PeStatus::Idle,
                task: None,
                order: None,
                completion: None,
            }),
            log,
            worker: OnceLock::new(),
        }
    }

    pub fn set_worker(&self, worker: Thread) {
        let _ = self.worker.set(worker);
    }

    fn party(&self) -> Party {
        if thread::current().id() == self.manager {
            Party::Manager
        } else {
            Party::Worker
        }
    }

    fn lock(&self) -> MutexGuard<'_, Slot> {
        self.slot.lock().expect("handshake lock")
    }

    fn transition(&self, slot: &mut Slot, to: PeStatus) {
        let tr = Transition {
            pe_id: self.pe_id,
            from: slot.status,
            to,
            by: self.party(),
        };
        if let Some(log) = &self.log {
            log.push(tr);
        }
        assert!(
            tr.is_legal(),
            "illegal handshake {:?} -> {:?} by {:?} on PE {}",
            tr.from,
            tr.to,
            tr.by,
            self.pe_id
        );
        slot.status = to;
    }

    pub fn status(&self) -> PeStatus {
        self.lock().status
    }

    /// Manager: fills the idle slot and moves it to run.
    pub fn dispatch(&self, order: TaskOrder) {
        {
            let mut s = self.lock();
            assert_eq!(
                s.status,
                PeStatus::Idle,
                "dispatch to busy PE {}",
                self.pe_id
            );
            s.task = Some(order.key);
            s.order = Some(order);
            self.transition(&mut s, PeStatus::Run);
        }
        if let Some(w) = self.worker.get() {
            w.unpark();
        }
    }

    /// Worker: takes the order of a running slot, once.
    pub fn take_order(&self) -> Option<TaskOrder> {
        let mut s = self.lock();
        if s.status == PeStatus::Run {
            s.order.take()
        } else {
            None
        }
    }

    /// Worker: publishes the result and moves the slot to complete.
    pub fn finish(&self, completion: Completion) {
        {
            let mut s = self.lock();
            debug_assert_eq!(s.task, Some(completion.key));
            s.completion = Some(completion);
            self.transition(&mut s, PeStatus::Complete);
        }
        self.manager_thread.unpark();
    }

    /// Manager: collects a completed slot and moves it back to idle.
    pub fn collect(&self) -> Option<Completion> {
        let mut s = self.lock();
        if s.status != PeStatus::Complete {
            return None;
        }
        let c = s
            .completion
            .take()
            .expect("complete slot holds a completion");
        s.task = None;
        self.transition(&mut s, PeStatus::Idle);
        Some(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pe_id: usize, from: PeStatus, to: PeStatus, by: Party) -> TransitionRecord {
        TransitionRecord {
            t: 0,
            transition: Transition {
                pe_id,
                from,
                to,
                by,
            },
        }
    }

    #[test]
    fn legal_cycle_is_clean() {
        use PeStatus::*;
        let log = [
            rec(0, Idle, Run, Party::Manager),
            rec(1, Idle, Run, Party::Manager),
            rec(0, Run, Complete, Party::Worker),
            rec(0, Complete, Idle, Party::Manager),
            rec(1, Run, Complete, Party::Worker),
            rec(1, Complete, Idle, Party::Manager),
        ];
        assert!(protocol_violations(&log, 2).is_empty());
    }

    #[test]
    fn monitor_flags_wrong_party_gap_and_dangling_state() {
        use PeStatus::*;
        let v = protocol_violations(&[rec(0, Idle, Run, Party::Worker)], 1);
        assert!(v.iter().any(|m| m.contains("illegal")), "{v:?}");
        assert!(v.iter().any(|m| m.contains("ended in Run")), "{v:?}");
        let v = protocol_violations(&[rec(0, Run, Complete, Party::Worker)], 1);
        assert!(v.iter().any(|m| m.contains("was Idle")), "{v:?}");
        assert_eq!(
            protocol_violations(&[rec(3, Idle, Run, Party::Manager)], 1).len(),
            1
        );
    }
}
