use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{BlockTrace, MemoryPlan, ProgramNode};
use crate::app::{ApplicationSpec, PlatformBinding, TaskNodeSpec};
use crate::kernel::STAND_IN_PROVIDER;

/// Platform every extracted node is bound to.
pub const EXTRACT_PLATFORM: &str = "cpu";

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("node {node} references variable {var} whose size is unresolved: {reason}")]
    Unresolved {
        node: String,
        var: String,
        reason: String,
    },
    #[error("variable {var} used by node {node} is missing from the allocation table")]
    MissingVariable { node: String, var: String },
    #[error("no nodes to emit")]
    Empty,
}

pub fn node_name(k: usize) -> String {
    format!("node{k}")
}

/// Builds a serial-chain application from partitioned nodes.
///
/// Node `k` is named `node<k>` and bound to `<app>_node<k>` on the `cpu`
/// platform through the stand-in provider, with an estimate of one
/// nanosecond per executed operation. Kernel nodes carry their
/// fingerprint. Only variables some node uses are emitted.
pub fn emit_dag(
    trace: &BlockTrace,
    nodes: &[ProgramNode],
    memory: &MemoryPlan,
    app_name: &str,
) -> Result<ApplicationSpec, EmitError> {
    if nodes.is_empty() {
        return Err(EmitError::Empty);
    }
    let mut spec = ApplicationSpec {
        app_name: app_name.into(),
        shared_object: STAND_IN_PROVIDER.into(),
        ..Default::default()
    };
    let mut arg_names: Vec<Vec<String>> = Vec::with_capacity(nodes.len());
    for n in nodes {
        let name = node_name(n.index);
        let mut args = Vec::with_capacity(n.args.len());
        for id in &n.args {
            let var = trace.variable(*id).name.clone();
            if let Some(reason) = memory.unresolved.get(&var) {
                return Err(EmitError::Unresolved {
                    node: name,
                    var,
                    reason: reason.clone(),
                });
            }
            let v = memory
                .resolved
                .get(&var)
                .ok_or_else(|| EmitError::MissingVariable {
                    node: name.clone(),
                    var: var.clone(),
                })?;
            spec.variables.insert(var.clone(), v.clone());
            args.push(var);
        }
        let binding = PlatformBinding::new(EXTRACT_PLATFORM, &format!("{app_name}_{name}"))
            .with_est(n.ops_executed.max(1));
        spec.dag.insert(
            name,
            TaskNodeSpec {
                arguments: args.clone(),
                platforms: vec![binding],
                fingerprint: n.fingerprint,
                ..Default::default()
            },
        );
        arg_names.push(args);
    }
    for (i, pair) in nodes.windows(2).enumerate() {
        let (from, to) = (node_name(pair[0].index), node_name(pair[1].index));
        spec.add_edge(&from, &to);
        let outs: Vec<String> = pair[0]
            .live_out
            .iter()
            .map(|v| trace.variable(*v).name.clone())
            .collect();
        let bytes: u64 = arg_names[i + 1]
            .iter()
            .filter(|a| outs.contains(a))
            .map(|a| spec.variables[a].data_bytes())
            .sum();
        if bytes > 0 {
            let mut comm = BTreeMap::new();
            comm.insert(to.clone(), bytes);
            spec.dag.get_mut(&from).expect("emitted node").comm_bytes = comm;
        }
    }
    Ok(spec)
}
