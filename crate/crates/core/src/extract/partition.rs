use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::{BlockId, BlockTrace, KernelGroup, VarId};
use crate::kernel::OpSummary;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    /// Index into the detected kernel list.
    Kernel(usize),
    NonKernel,
}

/// One node of the extracted program: a maximal run of trace positions
/// with the same label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramNode {
    pub index: usize,
    pub label: Label,
    /// Trace positions `[start, end)`.
    pub start: usize,
    pub end: usize,
    /// Distinct blocks in first-appearance order.
    pub blocks: Vec<BlockId>,
    /// Kernel nodes: the group's summary. Non-kernel nodes: the merged
    /// summary of their distinct blocks.
    pub ops: OpSummary,
    pub fingerprint: Option<u64>,
    /// Dynamic operation count over the run.
    pub ops_executed: u64,
    /// Variables read before any write inside the node.
    pub live_in: Vec<VarId>,
    /// Variables the node may write.
    pub live_out: Vec<VarId>,
    /// Live-in and live-out variables in first-use order.
    pub args: Vec<VarId>,
}

impl ProgramNode {
    pub fn is_kernel(&self) -> bool {
        matches!(self.label, Label::Kernel(_))
    }
}

/// Splits the trace into a chain of nodes, one per maximal run of
/// positions that belong to the same kernel (or to no kernel).
pub fn partition_program(trace: &BlockTrace, kernels: &[KernelGroup]) -> Vec<ProgramNode> {
    let owner: BTreeMap<BlockId, usize> = kernels
        .iter()
        .enumerate()
        .flat_map(|(k, g)| g.members.iter().map(move |b| (*b, k)))
        .collect();
    let label_at = |i: usize| {
        owner
            .get(&trace.blocks[i])
            .map_or(Label::NonKernel, |k| Label::Kernel(*k))
    };
    let ops_per_block: BTreeMap<BlockId, u64> = trace
        .meta
        .blocks
        .iter()
        .map(|b| (b.id, trace.summary(b.id).total_ops()))
        .collect();

    let mut nodes = Vec::new();
    let mut start = 0;
    while start < trace.blocks.len() {
        let label = label_at(start);
        let mut end = start + 1;
        while end < trace.blocks.len() && label_at(end) == label {
            end += 1;
        }
        nodes.push(build_node(
            trace,
            kernels,
            &ops_per_block,
            nodes.len(),
            label,
            start,
            end,
        ));
        start = end;
    }
    nodes
}

fn build_node(
    trace: &BlockTrace,
    kernels: &[KernelGroup],
    ops_per_block: &BTreeMap<BlockId, u64>,
    index: usize,
    label: Label,
    start: usize,
    end: usize,
) -> ProgramNode {
    let mut blocks = Vec::new();
    let mut seen_blocks = BTreeSet::new();
    let mut ops_executed = 0;
    let mut written = BTreeSet::new();
    let mut touched = BTreeSet::new();
    let mut live_in = Vec::new();
    let mut live_out = Vec::new();
    let mut args = Vec::new();
    for &b in &trace.blocks[start..end] {
        ops_executed += ops_per_block[&b];
        if !seen_blocks.insert(b) {
            // Repeat executions add no new first uses.
            continue;
        }
        blocks.push(b);
        let meta = trace.block(b);
        for r in &meta.reads {
            if !written.contains(r) && !live_in.contains(r) {
                live_in.push(*r);
            }
            if touched.insert(*r) {
                args.push(*r);
            }
        }
        for w in &meta.writes {
            if written.insert(*w) {
                live_out.push(*w);
            }
            if touched.insert(*w) {
                args.push(*w);
            }
        }
    }
    let ops = match label {
        Label::Kernel(k) => kernels[k].ops.clone(),
        Label::NonKernel => {
            let mut s = OpSummary::new();
            for b in &blocks {
                s.merge(trace.summary(*b));
            }
            s
        }
    };
    ProgramNode {
        index,
        label,
        start,
        end,
        blocks,
        fingerprint: match label {
            Label::Kernel(k) => Some(kernels[k].fingerprint),
            Label::NonKernel => None,
        },
        ops,
        ops_executed,
        live_in,
        live_out,
        args,
    }
}
