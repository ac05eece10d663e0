//! Synthetic block traces with known kernel structure.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{AllocSite, BlockId, BlockMeta, BlockTrace, TraceMeta, VarId, VarMeta};
use crate::fixtures::complex_to_bytes;
use crate::rng::SeededRng;

/// Metadata for `ids` with a one-op summary per block and no variables.
pub fn simple_meta(ids: &BTreeSet<BlockId>) -> TraceMeta {
    TraceMeta {
        blocks: ids
            .iter()
            .map(|id| BlockMeta {
                id: *id,
                function: "f".into(),
                ops: "add=1".into(),
                reads: vec![],
                writes: vec![],
            })
            .collect(),
        variables: vec![],
    }
}

#[derive(Clone, Debug)]
pub struct PlantedParams {
    pub max_kernels: usize,
    /// Inclusive range of member blocks per kernel.
    pub members: (usize, usize),
    /// Inclusive range of loop trip counts as multiples of the hot
    /// threshold; drawn log-uniformly.
    pub trip_multiple: (u64, u64),
    /// Inclusive range of cold blocks between kernels.
    pub cold_run: (usize, usize),
    /// Chance that two kernels are adjacent with no cold code between.
    pub adjacent_probability: f64,
    pub hot_threshold: u64,
}

impl Default for PlantedParams {
    fn default() -> Self {
        Self {
            max_kernels: 8,
            members: (1, 5),
            trip_multiple: (10, 1000),
            cold_run: (1, 40),
            adjacent_probability: 0.2,
            hot_threshold: 128,
        }
    }
}

impl PlantedParams {
    /// Smaller trip counts for fast unit tests.
    pub fn quick() -> Self {
        Self {
            trip_multiple: (2, 20),
            ..Self::default()
        }
    }
}

/// A generated trace and its ground-truth kernels (sorted member ids, in
/// order of appearance).
#[derive(Clone, Debug)]
pub struct Planted {
    pub trace: BlockTrace,
    pub kernels: Vec<Vec<BlockId>>,
}

const OPS: &[&str] = &[
    "add", "br", "fadd", "fmul", "icmp", "load", "mul", "phi", "store", "sub", "xor",
];

fn random_ops(rng: &mut SeededRng) -> String {
    let mut parts: Vec<String> = Vec::new();
    for op in OPS {
        if rng.unit() < 0.4 {
            parts.push(format!("{op}={}", 1 + rng.below(4)));
        }
    }
    if parts.is_empty() {
        parts.push("br=1".into());
    }
    parts.join(";")
}

fn range(rng: &mut SeededRng, (lo, hi): (usize, usize)) -> usize {
    lo + rng.below(hi - lo + 1)
}

impl Planted {
    /// Program shape: optional cold prologue, then up to `max_kernels`
    /// loops separated by cold runs, then a cold epilogue. Loop bodies
    /// repeat their members in a fixed order; cold blocks run once.
    pub fn generate(rng: &mut SeededRng, p: &PlantedParams) -> Self {
        let n_vars: VarId = 6;
        let variables: Vec<VarMeta> = (0..n_vars)
            .map(|i| {
                let (alloc, count) = if i % 2 == 0 {
                    (AllocSite::Static, if i == 0 { 1 } else { 16 })
                } else {
                    (
                        AllocSite::Dynamic {
                            size: format!("{}*8", 16 * (i + 1)),
                        },
                        0,
                    )
                };
                VarMeta {
                    id: i,
                    name: format!("v{i}"),
                    elem_bytes: 8,
                    count,
                    alloc,
                    val: vec![],
                }
            })
            .collect();

        let mut next_id: BlockId = 1;
        let mut blocks_meta = Vec::new();
        let mut new_block = |rng: &mut SeededRng, function: &str| {
            let id = next_id;
            next_id += 1 + rng.below(3) as BlockId;
            let reads = (0..n_vars).filter(|_| rng.unit() < 0.3).collect();
            let writes = (0..n_vars).filter(|_| rng.unit() < 0.2).collect();
            blocks_meta.push(BlockMeta {
                id,
                function: function.into(),
                ops: random_ops(rng),
                reads,
                writes,
            });
            id
        };

        let mut seq = Vec::new();
        let cold = |rng: &mut SeededRng,
                    seq: &mut Vec<BlockId>,
                    new_block: &mut dyn FnMut(&mut SeededRng, &str) -> BlockId| {
            for _ in 0..range(rng, p.cold_run) {
                seq.push(new_block(rng, "main"));
            }
        };
        if rng.unit() < 0.5 {
            cold(rng, &mut seq, &mut new_block);
        }
        let n_kernels = 1 + rng.below(p.max_kernels);
        let mut kernels = Vec::with_capacity(n_kernels);
        for k in 0..n_kernels {
            if k > 0 && rng.unit() >= p.adjacent_probability {
                cold(rng, &mut seq, &mut new_block);
            }
            let func = format!("kernel{k}");
            let members: Vec<BlockId> = (0..range(rng, p.members))
                .map(|_| new_block(rng, &func))
                .collect();
            let (lo, hi) = p.trip_multiple;
            let (llo, lhi) = (libm::log(lo as f64), libm::log(hi as f64));
            let multiple = libm::exp(llo + rng.unit() * (lhi - llo));
            let trips = (multiple * p.hot_threshold as f64) as u64;
            for _ in 0..trips.max(p.hot_threshold) {
                seq.extend_from_slice(&members);
            }
            let mut sorted = members;
            sorted.sort_unstable();
            kernels.push(sorted);
        }
        if rng.unit() < 0.5 {
            cold(rng, &mut seq, &mut new_block);
        }
        let meta = TraceMeta {
            blocks: blocks_meta,
            variables,
        };
        Planted {
            trace: BlockTrace::new(seq, meta).expect("generated trace is consistent"),
            kernels,
        }
    }
}

/// Operation summaries of the flattened naive transform loops, split into
/// a loop header and a body. Header plus body equals the builtin summary.
const DFT_HEADER: &str = "br=1;icmp=1;phi=2";
const DFT_BODY: &str =
    "add=1;br=1;call.cos=1;call.sin=1;fadd=3;fmul=6;fsub=1;load=4;mul=1;store=2;udiv=1;uitofp=1;urem=2";
const IDFT_BODY: &str =
    "add=1;br=1;call.cos=1;call.sin=1;fadd=2;fdiv=2;fmul=6;fsub=2;load=4;mul=1;store=2;udiv=1;uitofp=1;urem=2";

/// Trace of a monolithic program that generates a signal, takes its naive
/// DFT, computes magnitudes, takes the naive inverse DFT and checksums
/// the result. Each transform is one flattened `n * n` loop; with
/// `n < 128` everything else stays cold, so extraction yields five nodes:
/// cold, dft, cold, idft, cold.
pub fn naive_dft_trace(n: usize) -> BlockTrace {
    let [v_n, v_x, v_xf, v_mag, v_y, v_sum]: [VarId; 6] = [0, 1, 2, 3, 4, 5];
    let bytes = 8 * n as u64;
    let signal: Vec<_> = (0..n)
        .map(|i| num_complex::Complex64::new(libm::cos(0.3 * i as f64), libm::sin(0.7 * i as f64)))
        .collect();
    let variables = vec![
        VarMeta {
            id: v_n,
            name: "n".into(),
            elem_bytes: 4,
            count: 1,
            alloc: AllocSite::Static,
            val: (n as u32).to_le_bytes().to_vec(),
        },
        VarMeta {
            id: v_x,
            name: "x".into(),
            elem_bytes: 8,
            count: 0,
            alloc: AllocSite::Dynamic {
                size: format!("{n}*8"),
            },
            val: complex_to_bytes(&signal),
        },
        VarMeta {
            id: v_xf,
            name: "X".into(),
            elem_bytes: 8,
            count: 0,
            alloc: AllocSite::Dynamic {
                size: format!("{n}*8"),
            },
            val: vec![],
        },
        VarMeta {
            id: v_mag,
            name: "mag".into(),
            elem_bytes: 4,
            count: n as u64,
            alloc: AllocSite::Static,
            val: vec![],
        },
        VarMeta {
            id: v_y,
            name: "y".into(),
            elem_bytes: 8,
            count: 0,
            alloc: AllocSite::Dynamic {
                size: format!("{bytes}"),
            },
            val: vec![],
        },
        VarMeta {
            id: v_sum,
            name: "checksum".into(),
            elem_bytes: 4,
            count: 1,
            alloc: AllocSite::Static,
            val: vec![],
        },
    ];
    let blk =
        |id: BlockId, function: &str, ops: &str, reads: Vec<VarId>, writes: Vec<VarId>| BlockMeta {
            id,
            function: function.to_string(),
            ops: ops.to_string(),
            reads,
            writes,
        };
    let blocks = vec![
        blk(
            1,
            "main",
            "alloca=4;call.calloc=2;call.malloc=1;store=1",
            vec![],
            vec![v_n],
        ),
        blk(2, "main", "br=1;icmp=1;phi=1", vec![v_n], vec![]),
        blk(
            3,
            "main",
            "add=1;br=1;call.cos=1;call.sin=1;fmul=2;store=2;uitofp=1",
            vec![],
            vec![v_x],
        ),
        blk(10, "dft", DFT_HEADER, vec![v_n], vec![]),
        blk(11, "dft", DFT_BODY, vec![v_x, v_xf], vec![v_xf]),
        blk(
            20,
            "main",
            "add=1;br=2;call.sqrt=1;fadd=1;fmul=2;icmp=1;load=2;phi=1;store=1",
            vec![v_n, v_xf],
            vec![v_mag],
        ),
        blk(30, "idft", DFT_HEADER, vec![v_n], vec![]),
        blk(31, "idft", IDFT_BODY, vec![v_xf, v_y], vec![v_y]),
        blk(
            40,
            "main",
            "add=1;br=2;fadd=1;icmp=1;load=1;phi=2;store=1",
            vec![v_n, v_y],
            vec![v_sum],
        ),
    ];
    let mut seq = vec![1];
    for _ in 0..n {
        seq.extend([2, 3]);
    }
    for _ in 0..n * n {
        seq.extend([10, 11]);
    }
    seq.extend(core::iter::repeat_n(20, n));
    for _ in 0..n * n {
        seq.extend([30, 31]);
    }
    seq.extend(core::iter::repeat_n(40, n));
    BlockTrace::new(seq, TraceMeta { blocks, variables }).expect("fixture trace is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{builtin_summary, OpSummary};

    #[test]
    fn transform_blocks_sum_to_builtin_summaries() {
        for (body, kernel) in [(DFT_BODY, "dft_naive"), (IDFT_BODY, "idft_naive")] {
            let mut s = OpSummary::parse(DFT_HEADER).unwrap();
            s.merge(&OpSummary::parse(body).unwrap());
            assert_eq!(s, builtin_summary(kernel).unwrap());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = Planted::generate(&mut SeededRng::new(9), &PlantedParams::quick());
        let b = Planted::generate(&mut SeededRng::new(9), &PlantedParams::quick());
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.kernels, b.kernels);
        assert!(!a.kernels.is_empty() && a.kernels.len() <= 8);
    }
}
