use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{BlockId, BlockTrace, VarId};
use crate::kernel::OpSummary;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    /// Minimum executions for a block to be hot.
    pub hot_threshold: u64,
    /// Co-occurrence radius in trace positions.
    pub window: usize,
    /// Fraction of a block's occurrences that must see the partner.
    pub affinity: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            hot_threshold: 128,
            window: 32,
            affinity: 0.9,
        }
    }
}

/// A detected kernel: hot blocks that execute together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelGroup {
    /// Sorted block ids.
    pub members: Vec<BlockId>,
    /// Executions of the most frequent member.
    pub count: u64,
    /// Merged op summary of the members, each counted once.
    pub ops: OpSummary,
    pub fingerprint: u64,
    /// Variables read by members, in member order.
    pub live_in: Vec<VarId>,
    /// Variables written by members, in member order.
    pub live_out: Vec<VarId>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Sliding multiset of the hot blocks inside `[i - window, i + window]`.
struct Window {
    count: Vec<u32>,
    present: Vec<u32>,
    slot: Vec<usize>,
}

impl Window {
    fn new(n: usize) -> Self {
        Self {
            count: vec![0; n],
            present: Vec::new(),
            slot: vec![usize::MAX; n],
        }
    }

    fn add(&mut self, h: u32) {
        let c = &mut self.count[h as usize];
        *c += 1;
        if *c == 1 {
            self.slot[h as usize] = self.present.len();
            self.present.push(h);
        }
    }

    fn remove(&mut self, h: u32) {
        let c = &mut self.count[h as usize];
        *c -= 1;
        if *c == 0 {
            let s = self.slot[h as usize];
            self.present.swap_remove(s);
            if let Some(moved) = self.present.get(s) {
                self.slot[*moved as usize] = s;
            }
            self.slot[h as usize] = usize::MAX;
        }
    }
}

/// Clusters hot blocks into kernels.
///
/// Blocks executed at least `hot_threshold` times are hot. Hot blocks `a`
/// and `b` are affine when `b` occurs within `window` positions of at
/// least an `affinity` fraction of `a`'s occurrences and vice versa;
/// kernels are the connected components of that relation. Kernels are
/// returned in order of first appearance.
pub fn detect_kernels(trace: &BlockTrace, params: &DetectParams) -> Vec<KernelGroup> {
    let counts = trace.counts();
    let hot: Vec<BlockId> = counts
        .iter()
        .filter(|(_, c)| **c >= params.hot_threshold)
        .map(|(b, _)| *b)
        .collect();
    if hot.is_empty() {
        return Vec::new();
    }
    let dense: BTreeMap<BlockId, u32> = hot
        .iter()
        .enumerate()
        .map(|(i, b)| (*b, i as u32))
        .collect();
    let seq: Vec<Option<u32>> = trace.blocks.iter().map(|b| dense.get(b).copied()).collect();
    let n = seq.len();
    let w = params.window;

    // co[a] holds (partner, occurrences of a that see the partner).
    let mut co: Vec<Vec<(u32, u64)>> = vec![Vec::new(); hot.len()];
    let mut win = Window::new(hot.len());
    for h in seq.iter().take(w.saturating_add(1).min(n)).flatten() {
        win.add(*h);
    }
    for i in 0..n {
        if let Some(a) = seq[i] {
            for &b in &win.present {
                if b == a {
                    continue;
                }
                let row = &mut co[a as usize];
                match row.iter_mut().find(|(p, _)| *p == b) {
                    Some(e) => e.1 += 1,
                    None => row.push((b, 1)),
                }
            }
        }
        if i >= w {
            if let Some(h) = seq[i - w] {
                win.remove(h);
            }
        }
        if let Some(Some(h)) = seq.get(i + w + 1) {
            win.add(*h);
        }
    }

    let frac = |a: u32, b: u32| {
        let seen = co[a as usize]
            .iter()
            .find(|(p, _)| *p == b)
            .map_or(0, |e| e.1);
        seen as f64 / counts[&hot[a as usize]] as f64
    };
    let mut uf = UnionFind((0..hot.len()).collect());
    for a in 0..hot.len() as u32 {
        for &(b, _) in &co[a as usize] {
            if a < b && frac(a, b) >= params.affinity && frac(b, a) >= params.affinity {
                uf.union(a as usize, b as usize);
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<BlockId>> = BTreeMap::new();
    for (i, b) in hot.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(*b);
    }
    let mut first_seen: BTreeMap<BlockId, usize> = BTreeMap::new();
    for (i, b) in trace.blocks.iter().enumerate() {
        first_seen.entry(*b).or_insert(i);
    }
    let mut out: Vec<KernelGroup> = groups
        .into_values()
        .map(|members| build_group(trace, members, &counts))
        .collect();
    out.sort_by_key(|g| g.members.iter().map(|m| first_seen[m]).min());
    out
}

fn build_group(
    trace: &BlockTrace,
    mut members: Vec<BlockId>,
    counts: &BTreeMap<BlockId, u64>,
) -> KernelGroup {
    members.sort_unstable();
    let mut ops = OpSummary::new();
    let mut live_in = Vec::new();
    let mut live_out = Vec::new();
    let mut seen_in = BTreeSet::new();
    let mut seen_out = BTreeSet::new();
    for m in &members {
        ops.merge(trace.summary(*m));
        let meta = trace.block(*m);
        for r in &meta.reads {
            if seen_in.insert(*r) {
                live_in.push(*r);
            }
        }
        for wr in &meta.writes {
            if seen_out.insert(*wr) {
                live_out.push(*wr);
            }
        }
    }
    KernelGroup {
        count: members.iter().map(|m| counts[m]).max().unwrap_or(0),
        fingerprint: ops.fingerprint(),
        ops,
        members,
        live_in,
        live_out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::planted::{simple_meta, Planted, PlantedParams};
    use crate::rng::SeededRng;
    use alloc::vec;

    fn trace(blocks: Vec<BlockId>) -> BlockTrace {
        let ids: BTreeSet<BlockId> = blocks.iter().copied().collect();
        BlockTrace::new(blocks, simple_meta(&ids)).unwrap()
    }

    fn member_sets(k: &[KernelGroup]) -> Vec<Vec<BlockId>> {
        k.iter().map(|g| g.members.clone()).collect()
    }

    #[test]
    fn single_loop_is_one_kernel() {
        let mut b = vec![1];
        for _ in 0..1000 {
            b.extend([2, 3, 4]);
        }
        b.push(5);
        let k = detect_kernels(&trace(b), &DetectParams::default());
        assert_eq!(member_sets(&k), vec![vec![2, 3, 4]]);
        assert_eq!(k[0].count, 1000);
    }

    #[test]
    fn cold_trace_has_no_kernels() {
        let b: Vec<BlockId> = (0..127).flat_map(|_| [1, 2]).collect();
        assert!(detect_kernels(&trace(b), &DetectParams::default()).is_empty());
    }

    #[test]
    fn consecutive_loops_are_separate_kernels() {
        let mut b = Vec::new();
        for _ in 0..500 {
            b.extend([10, 11]);
        }
        for _ in 0..500 {
            b.extend([20, 21]);
        }
        let k = detect_kernels(&trace(b), &DetectParams::default());
        assert_eq!(member_sets(&k), vec![vec![10, 11], vec![20, 21]]);
    }

    #[test]
    fn threshold_is_inclusive() {
        let b: Vec<BlockId> = (0..128).map(|_| 7).collect();
        let k = detect_kernels(&trace(b), &DetectParams::default());
        assert_eq!(member_sets(&k), vec![vec![7]]);
    }

    #[test]
    fn planted_kernels_are_recovered() {
        let mut rng = SeededRng::new(1);
        for _ in 0..10 {
            let Planted { trace, kernels } = Planted::generate(&mut rng, &PlantedParams::quick());
            let found = detect_kernels(&trace, &DetectParams::default());
            assert_eq!(member_sets(&found), kernels);
        }
    }
}
