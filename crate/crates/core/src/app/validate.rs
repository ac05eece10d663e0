use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::ApplicationSpec;

/// A single violated invariant. Findings are data, never failures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Finding {
    EmptyAppName,
    EmptyNodeName,
    EmptyVariableName,
    ZeroBytes { var: String },
    ScalarWithHeap { var: String },
    ScalarValTooLong { var: String, len: usize, bytes: u64 },
    PointerWithoutHeap { var: String },
    PointerValTooLong { var: String, len: usize, bytes: u64 },
    UnknownVariable { node: String, var: String },
    DuplicateArgument { node: String, var: String },
    NoPlatforms { node: String },
    EmptyBinding { node: String },
    UnknownNode { node: String, referenced_by: String },
    AsymmetricEdge { from: String, to: String },
    CommBytesNotSuccessor { node: String, target: String },
    NoHeadNode,
    Cycle(Vec<String>),
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::EmptyAppName => write!(f, "empty application name"),
            Finding::EmptyNodeName => write!(f, "empty node name"),
            Finding::EmptyVariableName => write!(f, "empty variable name"),
            Finding::ZeroBytes { var } => write!(f, "variable {var} has zero bytes"),
            Finding::ScalarWithHeap { var } => {
                write!(f, "scalar variable {var} declares ptr_alloc_bytes")
            }
            Finding::ScalarValTooLong { var, len, bytes } => {
                write!(
                    f,
                    "initializer of {var} has {len} bytes, slot holds {bytes}"
                )
            }
            Finding::PointerWithoutHeap { var } => {
                write!(f, "pointer variable {var} has ptr_alloc_bytes 0")
            }
            Finding::PointerValTooLong { var, len, bytes } => {
                write!(
                    f,
                    "initializer of {var} has {len} bytes, buffer holds {bytes}"
                )
            }
            Finding::UnknownVariable { node, var } => {
                write!(f, "unknown variable {var} (argument of {node})")
            }
            Finding::DuplicateArgument { node, var } => {
                write!(f, "node {node} passes {var} more than once")
            }
            Finding::NoPlatforms { node } => write!(f, "node {node} has no platforms"),
            Finding::EmptyBinding { node } => {
                write!(f, "node {node} has a platform with empty name or runfunc")
            }
            Finding::UnknownNode {
                node,
                referenced_by,
            } => {
                write!(f, "unknown node {node} referenced by {referenced_by}")
            }
            Finding::AsymmetricEdge { from, to } => write!(f, "asymmetric edge {from}\u{2192}{to}"),
            Finding::CommBytesNotSuccessor { node, target } => {
                write!(f, "node {node} lists comm_bytes for non-successor {target}")
            }
            Finding::NoHeadNode => write!(f, "no node without predecessors"),
            Finding::Cycle(nodes) => write!(f, "cycle: {}", nodes.join(",")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, finding) in self.findings.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{finding}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of an application.
pub fn validate_dag(spec: &ApplicationSpec) -> ValidationReport {
    let mut findings = Vec::new();

    if spec.app_name.is_empty() {
        findings.push(Finding::EmptyAppName);
    }
    for (name, v) in &spec.variables {
        if name.is_empty() {
            findings.push(Finding::EmptyVariableName);
        }
        if v.bytes == 0 {
            findings.push(Finding::ZeroBytes { var: name.clone() });
        }
        if v.is_ptr {
            if v.ptr_alloc_bytes == 0 {
                findings.push(Finding::PointerWithoutHeap { var: name.clone() });
            } else if v.val.len() as u64 > v.ptr_alloc_bytes {
                findings.push(Finding::PointerValTooLong {
                    var: name.clone(),
                    len: v.val.len(),
                    bytes: v.ptr_alloc_bytes,
                });
            }
        } else {
            if v.ptr_alloc_bytes != 0 {
                findings.push(Finding::ScalarWithHeap { var: name.clone() });
            }
            if v.val.len() as u64 > v.bytes {
                findings.push(Finding::ScalarValTooLong {
                    var: name.clone(),
                    len: v.val.len(),
                    bytes: v.bytes,
                });
            }
        }
    }

    for (name, node) in &spec.dag {
        if name.is_empty() {
            findings.push(Finding::EmptyNodeName);
        }
        let mut seen = BTreeSet::new();
        for arg in &node.arguments {
            if !spec.variables.contains_key(arg) {
                findings.push(Finding::UnknownVariable {
                    node: name.clone(),
                    var: arg.clone(),
                });
            }
            if !seen.insert(arg.as_str()) {
                findings.push(Finding::DuplicateArgument {
                    node: name.clone(),
                    var: arg.clone(),
                });
            }
        }
        if node.platforms.is_empty() {
            findings.push(Finding::NoPlatforms { node: name.clone() });
        }
        if node
            .platforms
            .iter()
            .any(|b| b.platform_name.is_empty() || b.run_func.is_empty())
        {
            findings.push(Finding::EmptyBinding { node: name.clone() });
        }
        for target in node.comm_bytes.keys() {
            if !node.successors.contains(target) {
                findings.push(Finding::CommBytesNotSuccessor {
                    node: name.clone(),
                    target: target.clone(),
                });
            }
        }
    }

    findings.extend(edge_findings(spec));

    if !spec.dag.is_empty() && spec.head_nodes().next().is_none() {
        findings.push(Finding::NoHeadNode);
    }
    if let Some(cycle) = find_cycle(spec) {
        findings.push(Finding::Cycle(cycle));
    }
    ValidationReport { findings }
}

/// Dangling references and predecessor/successor disagreements.
pub(super) fn edge_findings(spec: &ApplicationSpec) -> Vec<Finding> {
    let mut out = Vec::new();
    for (name, node) in &spec.dag {
        for s in &node.successors {
            match spec.dag.get(s) {
                None => out.push(Finding::UnknownNode {
                    node: s.clone(),
                    referenced_by: name.clone(),
                }),
                Some(succ) if !succ.predecessors.contains(name) => {
                    out.push(Finding::AsymmetricEdge {
                        from: name.clone(),
                        to: s.clone(),
                    })
                }
                _ => {}
            }
        }
        for p in &node.predecessors {
            match spec.dag.get(p) {
                None => out.push(Finding::UnknownNode {
                    node: p.clone(),
                    referenced_by: name.clone(),
                }),
                Some(pred) if !pred.successors.contains(name) => {
                    out.push(Finding::AsymmetricEdge {
                        from: p.clone(),
                        to: name.clone(),
                    })
                }
                _ => {}
            }
        }
    }
    out
}

/// Successor-edge adjacency over known nodes; edges may come from either
/// endpoint's list so that asymmetric documents still get cycle-checked.
fn adjacency(spec: &ApplicationSpec) -> BTreeMap<&str, BTreeSet<&str>> {
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = spec
        .dag
        .keys()
        .map(|k| (k.as_str(), BTreeSet::new()))
        .collect();
    for (name, node) in &spec.dag {
        for s in node.successors.iter().filter(|s| spec.dag.contains_key(*s)) {
            adj.get_mut(name.as_str()).unwrap().insert(s.as_str());
        }
        for p in node
            .predecessors
            .iter()
            .filter(|p| spec.dag.contains_key(*p))
        {
            adj.get_mut(p.as_str()).unwrap().insert(name.as_str());
        }
    }
    adj
}

/// Kahn's algorithm; among simultaneously available nodes the smallest name
/// goes first. `None` if the graph has a cycle.
pub fn topological_order(spec: &ApplicationSpec) -> Option<Vec<String>> {
    let (order, _) = kahn(&adjacency(spec));
    (order.len() == spec.dag.len()).then(|| order.into_iter().map(String::from).collect())
}

fn kahn<'a>(
    adj: &BTreeMap<&'a str, BTreeSet<&'a str>>,
) -> (Vec<&'a str>, BTreeMap<&'a str, usize>) {
    let mut indeg: BTreeMap<&str, usize> = adj.keys().map(|k| (*k, 0)).collect();
    for succs in adj.values() {
        for s in succs {
            *indeg.get_mut(s).unwrap() += 1;
        }
    }
    let mut avail: BTreeSet<&str> = indeg
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(k, _)| *k)
        .collect();
    let mut order = Vec::with_capacity(adj.len());
    while let Some(n) = avail.pop_first() {
        order.push(n);
        for s in &adj[n] {
            let d = indeg.get_mut(s).unwrap();
            *d -= 1;
            if *d == 0 {
                avail.insert(s);
            }
        }
    }
    (order, indeg)
}

/// One concrete cycle, rotated to start at its smallest node name.
fn find_cycle(spec: &ApplicationSpec) -> Option<Vec<String>> {
    let adj = adjacency(spec);
    let (order, indeg) = kahn(&adj);
    if order.len() == adj.len() {
        return None;
    }
    // Every node left over by Kahn still has a leftover predecessor, so
    // walking predecessors inside that set must revisit a node.
    let leftover: BTreeSet<&str> = indeg
        .iter()
        .filter(|(_, d)| **d > 0)
        .map(|(k, _)| *k)
        .collect();
    let mut preds: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (from, succs) in &adj {
        for to in succs {
            if leftover.contains(from) && leftover.contains(to) {
                preds.entry(*to).or_default().push(*from);
            }
        }
    }
    let mut path: Vec<&str> = Vec::new();
    let mut cur = *leftover.iter().next()?;
    loop {
        if let Some(pos) = path.iter().position(|n| *n == cur) {
            let mut cycle: Vec<&str> = path[pos..].to_vec();
            cycle.reverse();
            let min = cycle
                .iter()
                .enumerate()
                .min_by_key(|(_, n)| **n)
                .map(|(i, _)| i)?;
            cycle.rotate_left(min);
            return Some(cycle.into_iter().map(String::from).collect());
        }
        path.push(cur);
        cur = *preds.get(cur)?.iter().min()?;
    }
}
