//! Block-trace to DAG extraction.
//!
//! A monolithic program's basic-block execution trace is clustered into hot
//! kernels by temporal affinity, partitioned into a serial chain of kernel
//! and non-kernel nodes, given variables from the allocation table, and
//! emitted as an application. Kernel nodes carry op-summary fingerprints so
//! [`substitute_optimized`] can bind recognized kernels to optimized
//! implementations.
//!
//! The clustering rule is a deliberately simple, non-canonical stand-in;
//! every parameter is exposed through [`DetectParams`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kernel::OpSummary;

mod detect;
mod emit;
mod memory;
mod partition;
pub mod planted;
mod recognize;

pub use detect::{detect_kernels, DetectParams, KernelGroup};
pub use emit::{emit_dag, node_name, EmitError, EXTRACT_PLATFORM};
pub use memory::{eval_size_expr, infer_memory, MemoryPlan};
pub use partition::{partition_program, Label, ProgramNode};
pub use recognize::{
    dft_recognition_table, substitute_optimized, Recognition, RecognitionTable, SubstitutionPolicy,
    TableError,
};

pub type BlockId = u32;
pub type VarId = u32;

/// Magic prefix of the binary trace encoding, followed by a little-endian
/// `u16` version, a reserved `u16` and `u32` block ids.
pub const BINARY_MAGIC: &[u8; 4] = b"BLKT";
pub const BINARY_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockMeta {
    pub id: BlockId,
    pub function: String,
    /// Canonical op summary, `op=count;...`.
    pub ops: String,
    #[serde(default)]
    pub reads: Vec<VarId>,
    #[serde(default)]
    pub writes: Vec<VarId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AllocSite {
    Static,
    /// Heap allocation whose byte size is given by an expression from the
    /// allocation call.
    Dynamic {
        size: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarMeta {
    pub id: VarId,
    pub name: String,
    pub elem_bytes: u64,
    pub count: u64,
    pub alloc: AllocSite,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub val: Vec<u8>,
}

/// Sidecar metadata of a block trace.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMeta {
    pub blocks: Vec<BlockMeta>,
    pub variables: Vec<VarMeta>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TraceFormatError {
    #[error("line {line}: {text:?} is not a block id")]
    BadLine { line: usize, text: String },
    #[error("binary trace: {0}")]
    Binary(String),
    #[error("block {0} is traced but missing from the metadata")]
    UnknownBlock(BlockId),
    #[error("block {block} references unknown variable {var}")]
    UnknownVariable { block: BlockId, var: VarId },
    #[error("block {0} has a malformed op summary")]
    BadOps(BlockId),
    #[error("duplicate {what} id {id}")]
    Duplicate { what: &'static str, id: u32 },
    #[error("variable name {0} is used by more than one id")]
    DuplicateName(String),
    #[error("trace is empty")]
    Empty,
}

/// A basic-block execution trace with its metadata, validated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockTrace {
    pub blocks: Vec<BlockId>,
    pub meta: TraceMeta,
    block_index: BTreeMap<BlockId, usize>,
    var_index: BTreeMap<VarId, usize>,
    summaries: BTreeMap<BlockId, OpSummary>,
}

impl BlockTrace {
    pub fn new(blocks: Vec<BlockId>, meta: TraceMeta) -> Result<Self, TraceFormatError> {
        if blocks.is_empty() {
            return Err(TraceFormatError::Empty);
        }
        let mut block_index = BTreeMap::new();
        let mut summaries = BTreeMap::new();
        for (i, b) in meta.blocks.iter().enumerate() {
            if block_index.insert(b.id, i).is_some() {
                return Err(TraceFormatError::Duplicate {
                    what: "block",
                    id: b.id,
                });
            }
            summaries.insert(
                b.id,
                OpSummary::parse(&b.ops).ok_or(TraceFormatError::BadOps(b.id))?,
            );
        }
        let mut var_index = BTreeMap::new();
        let mut names = BTreeSet::new();
        for (i, v) in meta.variables.iter().enumerate() {
            if var_index.insert(v.id, i).is_some() {
                return Err(TraceFormatError::Duplicate {
                    what: "variable",
                    id: v.id,
                });
            }
            if !names.insert(v.name.as_str()) {
                return Err(TraceFormatError::DuplicateName(v.name.clone()));
            }
        }
        for b in &meta.blocks {
            if let Some(var) = b
                .reads
                .iter()
                .chain(&b.writes)
                .find(|v| !var_index.contains_key(v))
            {
                return Err(TraceFormatError::UnknownVariable {
                    block: b.id,
                    var: *var,
                });
            }
        }
        let traced: BTreeSet<BlockId> = blocks.iter().copied().collect();
        if let Some(b) = traced.iter().find(|b| !block_index.contains_key(b)) {
            return Err(TraceFormatError::UnknownBlock(*b));
        }
        Ok(Self {
            blocks,
            meta,
            block_index,
            var_index,
            summaries,
        })
    }

    pub fn block(&self, id: BlockId) -> &BlockMeta {
        &self.meta.blocks[self.block_index[&id]]
    }

    pub fn variable(&self, id: VarId) -> &VarMeta {
        &self.meta.variables[self.var_index[&id]]
    }

    pub fn summary(&self, id: BlockId) -> &OpSummary {
        &self.summaries[&id]
    }

    /// Executions per block id.
    pub fn counts(&self) -> BTreeMap<BlockId, u64> {
        let mut c = BTreeMap::new();
        for b in &self.blocks {
            *c.entry(*b).or_insert(0) += 1;
        }
        c
    }
}

/// Parses the text encoding: block ids separated by whitespace, `#`
/// comments to end of line.
pub fn parse_text_trace(text: &str) -> Result<Vec<BlockId>, TraceFormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split_whitespace() {
            out.push(tok.parse().map_err(|_| TraceFormatError::BadLine {
                line: i + 1,
                text: tok.to_string(),
            })?);
        }
    }
    Ok(out)
}

pub fn encode_binary_trace(blocks: &[BlockId]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * blocks.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    for b in blocks {
        out.extend_from_slice(&b.to_le_bytes());
    }
    out
}

pub fn parse_binary_trace(bytes: &[u8]) -> Result<Vec<BlockId>, TraceFormatError> {
    let bad = |m: &str| TraceFormatError::Binary(m.to_string());
    if bytes.len() < 8 || &bytes[..4] != BINARY_MAGIC {
        return Err(bad("missing BLKT header"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != BINARY_VERSION {
        return Err(TraceFormatError::Binary(alloc::format!(
            "unsupported version {version}"
        )));
    }
    let body = &bytes[8..];
    if !body.len().is_multiple_of(4) {
        return Err(bad("truncated record"));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Binary if the data starts with the magic, text otherwise.
pub fn parse_trace_auto(bytes: &[u8]) -> Result<Vec<BlockId>, TraceFormatError> {
    if bytes.starts_with(BINARY_MAGIC) {
        parse_binary_trace(bytes)
    } else {
        let text = core::str::from_utf8(bytes)
            .map_err(|_| TraceFormatError::Binary("neither BLKT nor UTF-8 text".into()))?;
        parse_text_trace(text)
    }
}

/// Output of the full extraction flow.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub kernels: Vec<KernelGroup>,
    pub nodes: Vec<ProgramNode>,
    pub memory: MemoryPlan,
    pub spec: crate::app::ApplicationSpec,
}

/// Detects kernels, partitions, infers memory and emits the application.
pub fn extract(
    trace: &BlockTrace,
    params: &DetectParams,
    app_name: &str,
) -> Result<Extraction, EmitError> {
    let kernels = detect_kernels(trace, params);
    let nodes = partition_program(trace, &kernels);
    let memory = infer_memory(&trace.meta);
    let spec = emit_dag(trace, &nodes, &memory, app_name)?;
    Ok(Extraction {
        kernels,
        nodes,
        memory,
        spec,
    })
}
