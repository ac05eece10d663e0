use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::{PeView, Policy, ReadyKey, ReadyList, ReadyTask, ScheduleDecision};
use crate::rng::SeededRng;
use crate::Nanos;

/// First ready, first start: each idle PE, in id order, takes the oldest
/// unassigned ready task it supports.
#[derive(Clone, Copy, Debug, Default)]
pub struct Frfs;

impl Policy for Frfs {
    fn name(&self) -> &str {
        "frfs"
    }

    fn schedule(&mut self, ready: &ReadyList, pes: &[PeView<'_>], _now: Nanos) -> ScheduleDecision {
        let mut taken: Vec<ReadyKey> = Vec::new();
        let mut d = ScheduleDecision::default();
        for view in pes.iter().filter(|v| v.is_idle()) {
            if let Some(key) = ready
                .supporting(&view.pe.binds)
                .find(|k| !taken.contains(k))
            {
                taken.push(*key);
                d.assignments.push((*key, view.pe_id()));
            }
        }
        d
    }
}

fn warn_missing(warned: &mut BTreeSet<ReadyKey>, task: &ReadyTask, policy: &str) {
    if warned.insert(task.key) {
        log::warn!(
            "{policy}: task {} has no est_exec_time on any binding; skipped",
            task.node
        );
    }
}

/// Minimum execution time: each task (FIFO) goes to the lowest-id idle PE
/// of the binding with the smallest estimate, or waits for one.
#[derive(Debug, Default)]
pub struct Met {
    warned: BTreeSet<ReadyKey>,
}

/// Binding with the smallest estimate; ties go to the
/// lexicographically smallest binding name.
fn met_target(task: &ReadyTask) -> Option<&str> {
    task.bindings
        .iter()
        .filter_map(|b| b.est.map(|e| (e, b.platform.as_str())))
        .min()
        .map(|(_, p)| p)
}

impl Policy for Met {
    fn name(&self) -> &str {
        "met"
    }

    fn needs_estimates(&self) -> bool {
        true
    }

    fn schedule(&mut self, ready: &ReadyList, pes: &[PeView<'_>], _now: Nanos) -> ScheduleDecision {
        let mut free: Vec<bool> = pes.iter().map(|v| v.is_idle()).collect();
        let mut remaining = free.iter().filter(|f| **f).count();
        let mut d = ScheduleDecision::default();
        for task in ready.iter() {
            if remaining == 0 {
                break;
            }
            let Some(target) = met_target(task) else {
                warn_missing(&mut self.warned, task, "met");
                continue;
            };
            let slot = pes
                .iter()
                .enumerate()
                .filter(|(i, v)| free[*i] && v.pe.binds == target)
                .min_by_key(|(_, v)| v.pe_id());
            if let Some((i, v)) = slot {
                free[i] = false;
                remaining -= 1;
                d.assignments.push((task.key, v.pe_id()));
            }
        }
        d
    }
}

/// Earliest finish time over all supporting PEs, idle or busy; a task is
/// dispatched only when its best PE is idle.
#[derive(Debug, Default)]
pub struct Eft {
    warned: BTreeSet<ReadyKey>,
}

impl Policy for Eft {
    fn name(&self) -> &str {
        "eft"
    }

    fn needs_estimates(&self) -> bool {
        true
    }

    fn schedule(&mut self, ready: &ReadyList, pes: &[PeView<'_>], now: Nanos) -> ScheduleDecision {
        let mut avail: Vec<Nanos> = pes.iter().map(|v| v.est_available.max(now)).collect();
        let mut free: Vec<bool> = pes.iter().map(|v| v.is_idle()).collect();
        let mut d = ScheduleDecision::default();
        for task in ready.iter() {
            let mut best: Option<(Nanos, usize, usize)> = None;
            for (i, v) in pes.iter().enumerate() {
                let Some(cost) = v.cost(task) else { continue };
                let finish = avail[i] + v.inbound_transfer(task) + cost;
                let cand = (finish, v.pe_id(), i);
                if best.is_none_or(|b| (cand.0, cand.1) < (b.0, b.1)) {
                    best = Some(cand);
                }
            }
            match best {
                None => warn_missing(&mut self.warned, task, "eft"),
                Some((finish, pe_id, i)) if free[i] => {
                    free[i] = false;
                    avail[i] = finish;
                    d.assignments.push((task.key, pe_id));
                }
                Some(_) => {}
            }
        }
        d
    }
}

/// Uniform pick among idle, supporting, not-yet-assigned PEs.
#[derive(Debug)]
pub struct RandomPolicy {
    rng: SeededRng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: SeededRng::new(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn schedule(&mut self, ready: &ReadyList, pes: &[PeView<'_>], _now: Nanos) -> ScheduleDecision {
        let mut free: Vec<bool> = pes.iter().map(|v| v.is_idle()).collect();
        let mut remaining = free.iter().filter(|f| **f).count();
        let mut d = ScheduleDecision::default();
        let mut cands = vec![];
        for task in ready.iter() {
            if remaining == 0 {
                break;
            }
            cands.clear();
            cands.extend((0..pes.len()).filter(|i| free[*i] && task.supports(&pes[*i].pe.binds)));
            if cands.is_empty() {
                continue;
            }
            let i = cands[self.rng.below(cands.len())];
            free[i] = false;
            remaining -= 1;
            d.assignments.push((task.key, pes[i].pe_id()));
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::super::testkit::*;
    use super::super::{check_decision, ReadyList};
    use super::*;
    use crate::NS_PER_US;
    use proptest::prelude::*;

    const US: Nanos = NS_PER_US;

    fn keys(d: &ScheduleDecision) -> Vec<(u64, usize)> {
        d.assignments
            .iter()
            .map(|(k, p)| (k.instance_id, *p))
            .collect()
    }

    #[test]
    fn frfs_examples() {
        let cpu = pe(0, "cpu");
        let fft = pe(1, "fft");
        let views = [idle(&cpu, 0), idle(&fft, 0)];
        let one: ReadyList = [task(0, 0, &[("cpu", None)])].into_iter().collect();
        assert_eq!(keys(&Frfs.schedule(&one, &views, 0)), vec![(0, 0)]);

        let two: ReadyList = [
            task(1, 1, &[("cpu", None), ("fft", None)]),
            task(0, 0, &[("cpu", None), ("fft", None)]),
        ]
        .into_iter()
        .collect();
        assert_eq!(keys(&Frfs.schedule(&two, &views, 0)), vec![(0, 0), (1, 1)]);

        let all_busy = [busy(&cpu, 5), busy(&fft, 5)];
        assert!(Frfs.schedule(&two, &all_busy, 0).is_empty());
    }

    #[test]
    fn met_examples() {
        let cpu = pe(0, "cpu");
        let fft = pe(1, "fft");
        let t = || task(0, 0, &[("cpu", Some(5 * US)), ("fft", Some(US))]);
        let r: ReadyList = [t()].into_iter().collect();
        assert_eq!(
            keys(&Met::default().schedule(&r, &[idle(&cpu, 0), idle(&fft, 0)], 0)),
            vec![(0, 1)]
        );
        assert!(Met::default()
            .schedule(&r, &[idle(&cpu, 0), busy(&fft, 3)], 0)
            .is_empty());

        let r2: ReadyList = [t(), task(1, 1, &[("cpu", Some(5 * US)), ("fft", Some(US))])]
            .into_iter()
            .collect();
        assert_eq!(
            keys(&Met::default().schedule(&r2, &[idle(&cpu, 0), idle(&fft, 0)], 0)),
            vec![(0, 1)]
        );
    }

    #[test]
    fn met_ties_go_to_smaller_name_and_missing_estimates_skip() {
        let a = pe(0, "b_type");
        let b = pe(1, "a_type");
        let r: ReadyList = [task(0, 0, &[("b_type", Some(2)), ("a_type", Some(2))])]
            .into_iter()
            .collect();
        assert_eq!(
            keys(&Met::default().schedule(&r, &[idle(&a, 0), idle(&b, 0)], 0)),
            vec![(0, 1)]
        );
        let r: ReadyList = [task(0, 0, &[("b_type", None)])].into_iter().collect();
        assert!(Met::default().schedule(&r, &[idle(&a, 0)], 0).is_empty());
    }

    #[test]
    fn eft_examples() {
        let now = 100 * US;
        let cpu = pe(0, "cpu");
        let fft = accel(1, "fft", 0);
        let r: ReadyList = [task(0, 0, &[("cpu", Some(10 * US)), ("fft", Some(2 * US))])]
            .into_iter()
            .collect();
        let wait = Eft::default().schedule(&r, &[idle(&cpu, now), busy(&fft, now + US)], now);
        assert!(wait.is_empty());
        let go = Eft::default().schedule(&r, &[idle(&cpu, now), busy(&fft, now + 9 * US)], now);
        assert_eq!(keys(&go), vec![(0, 0)]);

        let single: ReadyList = [task(0, 0, &[("cpu", Some(1))])].into_iter().collect();
        assert_eq!(
            keys(&Eft::default().schedule(&single, &[idle(&cpu, 0)], 0)),
            vec![(0, 0)]
        );
        assert!(Eft::default()
            .schedule(&single, &[busy(&cpu, 0)], 0)
            .is_empty());
    }

    #[test]
    fn eft_charges_accelerator_transfer() {
        let cpu = pe(0, "cpu");
        let fft = accel(1, "fft", 20 * US);
        let r: ReadyList = [task(0, 0, &[("cpu", Some(10 * US)), ("fft", Some(2 * US))])]
            .into_iter()
            .collect();
        assert_eq!(
            keys(&Eft::default().schedule(&r, &[idle(&cpu, 0), idle(&fft, 0)], 0)),
            vec![(0, 0)]
        );
    }

    #[test]
    fn eft_elapsed_estimate_clamps_to_now() {
        let cpu = pe(0, "cpu");
        let fft = accel(1, "fft", 0);
        let r: ReadyList = [task(0, 0, &[("cpu", Some(10 * US)), ("fft", Some(2 * US))])]
            .into_iter()
            .collect();
        let d = Eft::default().schedule(&r, &[idle(&cpu, 50 * US), busy(&fft, 10 * US)], 50 * US);
        assert!(d.is_empty());
    }

    #[test]
    fn random_single_candidate_and_determinism() {
        let cpu = pe(0, "cpu");
        let fft = pe(1, "fft");
        let r: ReadyList = [task(0, 0, &[("cpu", None)])].into_iter().collect();
        for seed in 0..20 {
            let d = RandomPolicy::new(seed).schedule(&r, &[idle(&cpu, 0), idle(&fft, 0)], 0);
            assert_eq!(keys(&d), vec![(0, 0)]);
        }
        let r2: ReadyList = (0..4)
            .map(|i| task(i, i, &[("cpu", None), ("fft", None)]))
            .collect();
        let mut a = RandomPolicy::new(7);
        let mut b = RandomPolicy::new(7);
        for _ in 0..50 {
            let views = [idle(&cpu, 0), idle(&fft, 0)];
            assert_eq!(a.schedule(&r2, &views, 0), b.schedule(&r2, &views, 0));
        }
    }

    #[test]
    fn random_is_balanced_between_two_pes() {
        let c0 = pe(0, "cpu");
        let c1 = pe(1, "cpu");
        let r: ReadyList = [task(0, 0, &[("cpu", None)])].into_iter().collect();
        let mut p = RandomPolicy::new(1234);
        let trials = 10_000u32;
        let hits = (0..trials)
            .filter(|_| p.schedule(&r, &[idle(&c0, 0), idle(&c1, 0)], 0).assignments[0].1 == 0)
            .count() as f64;
        let sigma = libm::sqrt(f64::from(trials) * 0.25);
        assert!(
            (hits - f64::from(trials) / 2.0).abs() < 3.0 * sigma,
            "hits={hits}"
        );
    }

    /// Literal transcription of the FRFS scan rule over a plain vector.
    fn frfs_brute(tasks: &[ReadyTask], pes: &[PeView<'_>]) -> Vec<(ReadyKey, usize)> {
        let mut sorted: Vec<&ReadyTask> = tasks.iter().collect();
        sorted.sort_by_key(|t| t.key);
        let mut used = vec![false; sorted.len()];
        let mut out = Vec::new();
        let mut order: Vec<&PeView<'_>> = pes.iter().collect();
        order.sort_by_key(|v| v.pe_id());
        for v in order {
            if !v.is_idle() {
                continue;
            }
            for (i, t) in sorted.iter().enumerate() {
                if !used[i] && t.bindings.iter().any(|b| b.platform == v.pe.binds) {
                    used[i] = true;
                    out.push((t.key, v.pe_id()));
                    break;
                }
            }
        }
        out
    }

    const TYPES: [&str; 3] = ["cpu", "fft", "dsp"];

    type Case = (Vec<(u64, u8, [Option<u16>; 3])>, Vec<(u8, bool, u16)>);

    fn arb_case() -> impl Strategy<Value = Case> {
        let task = (
            0u64..6,
            1u8..8,
            proptest::array::uniform3(proptest::option::of(1u16..50)),
        );
        let pe = (0u8..3, any::<bool>(), 0u16..60);
        (
            proptest::collection::vec(task, 0..=8),
            proptest::collection::vec(pe, 1..=5),
        )
    }

    fn materialize(
        tasks: &[(u64, u8, [Option<u16>; 3])],
        pes: &[(u8, bool, u16)],
    ) -> (
        Vec<ReadyTask>,
        Vec<crate::platform::ProcessorElement>,
        Vec<(bool, u16)>,
    ) {
        let ts = tasks
            .iter()
            .enumerate()
            .map(|(i, (rt, mask, ests))| {
                let bindings: Vec<(&str, Option<Nanos>)> = (0..3)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| (TYPES[b], ests[b].map(Nanos::from)))
                    .collect();
                task(*rt, i as u64, &bindings)
            })
            .collect();
        let ps = pes
            .iter()
            .enumerate()
            .map(|(i, (t, _, _))| pe(i, TYPES[*t as usize]))
            .collect();
        let st = pes.iter().map(|(_, idle, a)| (*idle, *a)).collect();
        (ts, ps, st)
    }

    proptest! {
        #[test]
        fn frfs_matches_brute_force((tasks, pes) in arb_case()) {
            let (ts, ps, st) = materialize(&tasks, &pes);
            let views: Vec<PeView<'_>> = ps.iter().zip(&st)
                .map(|(p, (i, a))| if *i { idle(p, 10) } else { busy(p, u64::from(*a)) })
                .collect();
            let ready: ReadyList = ts.iter().cloned().collect();
            let d = Frfs.schedule(&ready, &views, 10);
            prop_assert_eq!(&d.assignments, &frfs_brute(&ts, &views));
            prop_assert!(check_decision(&d, &ready, &views).is_ok());
        }

        #[test]
        fn every_policy_is_legal((tasks, pes) in arb_case(), seed in any::<u64>()) {
            let (ts, ps, st) = materialize(&tasks, &pes);
            let views: Vec<PeView<'_>> = ps.iter().zip(&st)
                .map(|(p, (i, a))| if *i { idle(p, 10) } else { busy(p, u64::from(*a)) })
                .collect();
            let ready: ReadyList = ts.into_iter().collect();
            let mut policies: Vec<alloc::boxed::Box<dyn Policy>> = vec![
                alloc::boxed::Box::new(Frfs),
                alloc::boxed::Box::new(Met::default()),
                alloc::boxed::Box::new(Eft::default()),
                alloc::boxed::Box::new(RandomPolicy::new(seed)),
            ];
            for p in policies.iter_mut() {
                let d = p.schedule(&ready, &views, 10);
                prop_assert!(check_decision(&d, &ready, &views).is_ok(), "{} illegal", p.name());
            }
        }

        #[test]
        fn met_and_eft_are_scale_invariant((tasks, pes) in arb_case(), k in 2u64..7) {
            let (ts, ps, st) = materialize(&tasks, &pes);
            let now = 10;
            let views: Vec<PeView<'_>> = ps.iter().zip(&st)
                .map(|(p, (i, a))| if *i { idle(p, now) } else { busy(p, u64::from(*a)) })
                .collect();
            let ready: ReadyList = ts.iter().cloned().collect();
            let scaled: ReadyList = ts.iter().cloned().map(|mut t| {
                for b in &mut t.bindings { b.est = b.est.map(|e| e * k); }
                t
            }).collect();
            let scaled_views: Vec<PeView<'_>> = views.iter().map(|v| PeView {
                est_available: now * k + (v.est_available.max(now) - now) * k,
                ..*v
            }).collect();
            prop_assert_eq!(
                Met::default().schedule(&ready, &views, now),
                Met::default().schedule(&scaled, &scaled_views, now * k)
            );
            prop_assert_eq!(
                Eft::default().schedule(&ready, &views, now),
                Eft::default().schedule(&scaled, &scaled_views, now * k)
            );
        }
    }
}
