use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::app::{format_fingerprint, parse_fingerprint, ApplicationSpec, PlatformBinding};
use crate::kernel::{builtin_summary, OpSummary, BUILTIN_PROVIDER};
use crate::Nanos;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubstitutionPolicy {
    /// The table's bindings replace the node's bindings.
    #[default]
    Replace,
    /// The table's bindings are added after the node's, replacing any
    /// existing binding for the same platform.
    Append,
}

/// Optimized implementations for one kernel fingerprint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Recognition {
    pub label: String,
    pub fingerprint: u64,
    pub bindings: Vec<PlatformBinding>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecognitionTable {
    pub policy: SubstitutionPolicy,
    pub entries: BTreeMap<u64, Recognition>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("recognition table: {0}")]
    Json(String),
    #[error("entry {0}: give exactly one of fingerprint or summary")]
    Key(String),
    #[error("entry {label}: bad {what} {value:?}")]
    Bad {
        label: String,
        what: &'static str,
        value: String,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    #[serde(default)]
    policy: SubstitutionPolicy,
    kernels: Vec<RawEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary: Option<String>,
    platforms: Vec<RawBinding>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBinding {
    name: String,
    runfunc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shared_object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    est_exec_time: Option<Nanos>,
}

impl RecognitionTable {
    pub fn insert(&mut self, label: &str, fingerprint: u64, bindings: Vec<PlatformBinding>) {
        self.entries.insert(
            fingerprint,
            Recognition {
                label: label.into(),
                fingerprint,
                bindings,
            },
        );
    }

    /// Parses the JSON form: `{"policy": "replace"|"append", "kernels":
    /// [{"label", "fingerprint" | "summary", "platforms": [...]}]}` with
    /// platform entries shaped like an application's.
    pub fn from_json(text: &str) -> Result<Self, TableError> {
        let raw: RawTable =
            serde_json::from_str(text).map_err(|e| TableError::Json(e.to_string()))?;
        let mut t = Self {
            policy: raw.policy,
            entries: BTreeMap::new(),
        };
        for e in raw.kernels {
            let fp = match (&e.fingerprint, &e.summary) {
                (Some(f), None) => parse_fingerprint(f).ok_or_else(|| TableError::Bad {
                    label: e.label.clone(),
                    what: "fingerprint",
                    value: f.clone(),
                })?,
                (None, Some(s)) => OpSummary::parse(s)
                    .ok_or_else(|| TableError::Bad {
                        label: e.label.clone(),
                        what: "summary",
                        value: s.clone(),
                    })?
                    .fingerprint(),
                _ => return Err(TableError::Key(e.label)),
            };
            let bindings = e
                .platforms
                .into_iter()
                .map(|b| PlatformBinding {
                    platform_name: b.name,
                    run_func: b.runfunc,
                    shared_object: b.shared_object,
                    est_exec_time: b.est_exec_time,
                })
                .collect();
            t.insert(&e.label, fp, bindings);
        }
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        let raw = RawTable {
            policy: self.policy,
            kernels: self
                .entries
                .values()
                .map(|r| RawEntry {
                    label: r.label.clone(),
                    fingerprint: Some(format_fingerprint(r.fingerprint)),
                    summary: None,
                    platforms: r
                        .bindings
                        .iter()
                        .map(|b| RawBinding {
                            name: b.platform_name.clone(),
                            runfunc: b.run_func.clone(),
                            shared_object: b.shared_object.clone(),
                            est_exec_time: b.est_exec_time,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("table serializes")
    }
}

/// The naive DFT to `fft_radix2` on a core or `accel_fft` on an `fft`
/// accelerator, and the naive inverse DFT to `ifft` on a core.
pub fn dft_recognition_table() -> RecognitionTable {
    let fp = |k: &str| {
        builtin_summary(k)
            .expect("builtin has a summary")
            .fingerprint()
    };
    let b = |p: &str, f: &str| PlatformBinding::new(p, f).with_plugin(BUILTIN_PROVIDER);
    let mut t = RecognitionTable::default();
    t.insert(
        "dft",
        fp("dft_naive"),
        vec![b("cpu", "fft_radix2"), b("fft", "accel_fft")],
    );
    t.insert("idft", fp("idft_naive"), vec![b("cpu", "ifft")]);
    t
}

/// Rebinds every node whose fingerprint is in the table. Table bindings
/// without an estimate inherit the node's previous estimate for the same
/// platform, if any. Returns the new spec and the `(node, label)` hits.
pub fn substitute_optimized(
    spec: &ApplicationSpec,
    table: &RecognitionTable,
) -> (ApplicationSpec, Vec<(String, String)>) {
    let mut out = spec.clone();
    let mut hits = Vec::new();
    for (name, node) in out.dag.iter_mut() {
        let Some(hit) = node.fingerprint.and_then(|fp| table.entries.get(&fp)) else {
            continue;
        };
        let mut bindings: Vec<PlatformBinding> = hit
            .bindings
            .iter()
            .map(|b| {
                let mut b = b.clone();
                if b.est_exec_time.is_none() {
                    b.est_exec_time = node
                        .binding_for(&b.platform_name)
                        .and_then(|old| old.est_exec_time);
                }
                b
            })
            .collect();
        if table.policy == SubstitutionPolicy::Append {
            let mut kept: Vec<PlatformBinding> = node
                .platforms
                .iter()
                .filter(|old| {
                    !bindings
                        .iter()
                        .any(|b| b.platform_name == old.platform_name)
                })
                .cloned()
                .collect();
            kept.append(&mut bindings);
            bindings = kept;
        }
        node.platforms = bindings;
        log::info!("substituted {} into node {name}", hit.label);
        hits.push((name.clone(), hit.label.clone()));
    }
    (out, hits)
}
