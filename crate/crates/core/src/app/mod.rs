//! DAG application model: the JSON application schema, its validation,
//! canonical re-emission, and per-instance variable storage.

mod emit;
mod instance;
mod parse;
mod validate;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::Nanos;

pub use emit::emit_application;
pub use instance::{
    instantiate, instantiate_validated, ApplicationInstance, StateError, TaskInstance, TaskState,
};
pub use parse::parse_application;
pub use validate::{topological_order, validate_dag, Finding, ValidationReport};

/// Storage plan and initializer of one program variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableSpec {
    /// Size of the variable's own slot.
    pub bytes: u64,
    pub is_ptr: bool,
    /// Heap buffer size behind a pointer variable, 0 for scalars.
    pub ptr_alloc_bytes: u64,
    /// Initial bytes; shorter initializers are zero-filled.
    pub val: Vec<u8>,
}

impl VariableSpec {
    pub fn scalar(bytes: u64, val: Vec<u8>) -> Self {
        Self {
            bytes,
            is_ptr: false,
            ptr_alloc_bytes: 0,
            val,
        }
    }

    pub fn buffer(ptr_alloc_bytes: u64, val: Vec<u8>) -> Self {
        Self {
            bytes: 8,
            is_ptr: true,
            ptr_alloc_bytes,
            val,
        }
    }

    /// Bytes a kernel sees for this variable: the heap buffer for pointers,
    /// the slot itself for scalars.
    pub fn data_bytes(&self) -> u64 {
        if self.is_ptr {
            self.ptr_alloc_bytes
        } else {
            self.bytes
        }
    }
}

/// One way of running a node: a kernel symbol on a PE type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlatformBinding {
    pub platform_name: String,
    pub run_func: String,
    /// Overrides the application-level plugin for this binding.
    pub shared_object: Option<String>,
    pub est_exec_time: Option<Nanos>,
}

impl PlatformBinding {
    pub fn new(platform_name: &str, run_func: &str) -> Self {
        Self {
            platform_name: platform_name.into(),
            run_func: run_func.into(),
            shared_object: None,
            est_exec_time: None,
        }
    }

    pub fn with_est(mut self, ns: Nanos) -> Self {
        self.est_exec_time = Some(ns);
        self
    }

    pub fn with_plugin(mut self, plugin: &str) -> Self {
        self.shared_object = Some(plugin.into());
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TaskNodeSpec {
    pub arguments: Vec<String>,
    pub predecessors: Vec<String>,
    pub successors: Vec<String>,
    pub platforms: Vec<PlatformBinding>,
    /// Data volume sent to each successor, keyed by successor name.
    pub comm_bytes: BTreeMap<String, u64>,
    /// Kernel fingerprint carried by extracted kernel nodes.
    pub fingerprint: Option<u64>,
}

impl TaskNodeSpec {
    pub fn binding_for(&self, platform: &str) -> Option<&PlatformBinding> {
        self.platforms.iter().find(|b| b.platform_name == platform)
    }
}

/// A parsed application. Nodes and variables are keyed by name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ApplicationSpec {
    pub app_name: String,
    pub shared_object: String,
    pub variables: BTreeMap<String, VariableSpec>,
    pub dag: BTreeMap<String, TaskNodeSpec>,
}

impl ApplicationSpec {
    pub fn head_nodes(&self) -> impl Iterator<Item = &str> {
        self.dag
            .iter()
            .filter(|(_, n)| n.predecessors.is_empty())
            .map(|(k, _)| k.as_str())
    }

    /// Total bytes flowing into `node` over its inbound edges.
    pub fn inbound_comm_bytes(&self, node: &str) -> u64 {
        let Some(spec) = self.dag.get(node) else {
            return 0;
        };
        spec.predecessors
            .iter()
            .filter_map(|p| self.dag.get(p))
            .filter_map(|p| p.comm_bytes.get(node))
            .sum()
    }

    /// Adds the edge `from -> to` on both endpoints.
    pub fn add_edge(&mut self, from: &str, to: &str) {
        if let Some(n) = self.dag.get_mut(from) {
            if !n.successors.iter().any(|s| s == to) {
                n.successors.push(to.into());
            }
        }
        if let Some(n) = self.dag.get_mut(to) {
            if !n.predecessors.iter().any(|p| p == from) {
                n.predecessors.push(from.into());
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AppError {
    #[error("malformed application document: {0}")]
    Json(String),
    #[error("asymmetric edge {from}\u{2192}{to}")]
    AsymmetricEdge { from: String, to: String },
    #[error("unknown node {node} referenced by {referenced_by}")]
    UnknownNode { node: String, referenced_by: String },
    #[error("application {app} is invalid: {findings}")]
    Invalid {
        app: String,
        findings: ValidationReport,
    },
    #[error("cannot allocate {bytes} bytes for variable {var}")]
    Allocation { var: String, bytes: u64 },
}

/// Formats a fingerprint the way application files carry it.
pub fn format_fingerprint(fp: u64) -> String {
    alloc::format!("0x{fp:016x}")
}

pub fn parse_fingerprint(s: &str) -> Option<u64> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X"))?;
    u64::from_str_radix(digits, 16).ok()
}
