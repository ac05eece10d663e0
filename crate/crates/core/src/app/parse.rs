use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::marker::PhantomData;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::Deserialize;

use super::{
    parse_fingerprint, validate, AppError, ApplicationSpec, PlatformBinding, TaskNodeSpec,
    VariableSpec,
};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApp {
    #[serde(rename = "AppName")]
    app_name: String,
    #[serde(rename = "SharedObject")]
    shared_object: String,
    #[serde(rename = "Variables", deserialize_with = "unique_map")]
    variables: Vec<(String, RawVariable)>,
    #[serde(rename = "DAG", deserialize_with = "unique_map")]
    dag: Vec<(String, RawNode)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    bytes: u64,
    is_ptr: bool,
    ptr_alloc_bytes: u64,
    val: Vec<u8>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    arguments: Vec<String>,
    predecessors: Vec<String>,
    successors: Vec<String>,
    platforms: Vec<RawPlatform>,
    #[serde(default, deserialize_with = "unique_map")]
    comm_bytes: Vec<(String, u64)>,
    #[serde(default)]
    fingerprint: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlatform {
    name: String,
    runfunc: String,
    #[serde(default)]
    shared_object: Option<String>,
    #[serde(default)]
    est_exec_time: Option<u64>,
}

/// JSON object decoded in document order, rejecting repeated keys.
fn unique_map<'de, D, T>(d: D) -> Result<Vec<(String, T)>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    struct UniqueVisitor<T>(PhantomData<T>);

    impl<'de, T: Deserialize<'de>> Visitor<'de> for UniqueVisitor<T> {
        type Value = Vec<(String, T)>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a JSON object")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            while let Some(key) = map.next_key::<String>()? {
                if !seen.insert(key.clone()) {
                    return Err(de::Error::custom(format!("duplicate name `{key}`")));
                }
                out.push((key, map.next_value()?));
            }
            Ok(out)
        }
    }

    d.deserialize_map(UniqueVisitor(PhantomData))
}

/// Parses an application document.
///
/// Unknown keys, missing keys, repeated node or variable names and
/// inconsistent predecessor/successor lists are rejected. Semantic checks
/// (cycles, variable references, sizes) are left to [`super::validate_dag`].
pub fn parse_application(text: &str) -> Result<ApplicationSpec, AppError> {
    let raw: RawApp = serde_json::from_str(text).map_err(|e| AppError::Json(e.to_string()))?;

    let variables = raw
        .variables
        .into_iter()
        .map(|(name, v)| {
            let spec = VariableSpec {
                bytes: v.bytes,
                is_ptr: v.is_ptr,
                ptr_alloc_bytes: v.ptr_alloc_bytes,
                val: v.val,
            };
            (name, spec)
        })
        .collect();

    let mut dag = BTreeMap::new();
    for (name, n) in raw.dag {
        let fingerprint = match n.fingerprint {
            None => None,
            Some(s) => Some(parse_fingerprint(&s).ok_or_else(|| {
                AppError::Json(format!(
                    "node {name}: fingerprint `{s}` is not a 0x-prefixed hex u64"
                ))
            })?),
        };
        let platforms = n
            .platforms
            .into_iter()
            .map(|p| PlatformBinding {
                platform_name: p.name,
                run_func: p.runfunc,
                shared_object: p.shared_object,
                est_exec_time: p.est_exec_time,
            })
            .collect();
        let node = TaskNodeSpec {
            arguments: n.arguments,
            predecessors: n.predecessors,
            successors: n.successors,
            platforms,
            comm_bytes: n.comm_bytes.into_iter().collect(),
            fingerprint,
        };
        dag.insert(name, node);
    }

    let spec = ApplicationSpec {
        app_name: raw.app_name,
        shared_object: raw.shared_object,
        variables,
        dag,
    };
    check_edges(&spec)?;
    Ok(spec)
}

fn check_edges(spec: &ApplicationSpec) -> Result<(), AppError> {
    if let Some(f) = validate::edge_findings(spec).into_iter().next() {
        return Err(match f {
            validate::Finding::AsymmetricEdge { from, to } => AppError::AsymmetricEdge { from, to },
            validate::Finding::UnknownNode {
                node,
                referenced_by,
            } => AppError::UnknownNode {
                node,
                referenced_by,
            },
            other => AppError::Json(other.to_string()),
        });
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) const LISTING: &str = r#"{
      "AppName": "range_detection",
      "SharedObject": "range_detection.so",
      "Variables": {
        "n_samples": {"bytes": 4, "is_ptr": false, "ptr_alloc_bytes": 0, "val": [0, 1, 0, 0]},
        "lfm_waveform": {"bytes": 8, "is_ptr": true, "ptr_alloc_bytes": 2048, "val": []},
        "rx": {"bytes": 8, "is_ptr": true, "ptr_alloc_bytes": 2048, "val": []},
        "X1": {"bytes": 8, "is_ptr": true, "ptr_alloc_bytes": 4096, "val": []},
        "X2": {"bytes": 8, "is_ptr": true, "ptr_alloc_bytes": 4096, "val": []},
        "corr_freq": {"bytes": 8, "is_ptr": true, "ptr_alloc_bytes": 4096, "val": []},
        "corr": {"bytes": 8, "is_ptr": true, "ptr_alloc_bytes": 4096, "val": []},
        "index": {"bytes": 4, "is_ptr": false, "ptr_alloc_bytes": 0, "val": []},
        "max_corr": {"bytes": 4, "is_ptr": false, "ptr_alloc_bytes": 0, "val": []},
        "lag": {"bytes": 4, "is_ptr": false, "ptr_alloc_bytes": 0, "val": []},
        "sampling_rate": {"bytes": 4, "is_ptr": false, "ptr_alloc_bytes": 0, "val": [0, 0, 128, 63]}
      },
      "DAG": {
        "LFM": {"arguments": ["n_samples", "lfm_waveform"], "predecessors": [], "successors": ["FFT_1"],
                "platforms": [{"name": "cpu", "runfunc": "range_detect_LFM"}]},
        "FFT_0": {"arguments": ["n_samples", "rx", "X1"], "predecessors": [], "successors": ["MUL"],
                  "platforms": [{"name": "cpu", "runfunc": "range_detect_FFT_0_CPU"},
                                {"name": "fft", "runfunc": "range_detect_FFT_0_ACCEL", "shared_object": "fft_accel.so"}]},
        "FFT_1": {"arguments": ["n_samples", "lfm_waveform", "X2"], "predecessors": ["LFM"], "successors": ["MUL"],
                  "platforms": [{"name": "cpu", "runfunc": "range_detect_FFT_1_CPU"}]},
        "MUL": {"arguments": ["n_samples", "X1", "X2", "corr_freq"], "predecessors": ["FFT_0", "FFT_1"], "successors": ["IFFT"],
                "platforms": [{"name": "cpu", "runfunc": "range_detect_MUL"}]},
        "IFFT": {"arguments": ["n_samples", "corr_freq", "corr"], "predecessors": ["MUL"], "successors": ["MAX"],
                 "platforms": [{"name": "cpu", "runfunc": "range_detect_IFFT"}]},
        "MAX": {"arguments": ["n_samples", "corr", "index", "max_corr", "lag", "sampling_rate"], "predecessors": ["IFFT"], "successors": [],
                "platforms": [{"name": "cpu", "runfunc": "range_detect_MAX"}]}
      }
    }"#;

    #[test]
    fn listing_document_parses() {
        let spec = parse_application(LISTING).unwrap();
        assert_eq!(spec.app_name, "range_detection");
        assert_eq!(spec.shared_object, "range_detection.so");
        assert_eq!(spec.dag.len(), 6);
        assert_eq!(
            spec.variables["n_samples"],
            VariableSpec {
                bytes: 4,
                is_ptr: false,
                ptr_alloc_bytes: 0,
                val: vec![0, 1, 0, 0]
            }
        );
        let fft0 = &spec.dag["FFT_0"];
        assert_eq!(
            fft0.platforms[1].shared_object.as_deref(),
            Some("fft_accel.so")
        );
        assert_eq!(fft0.platforms[1].est_exec_time, None);
        assert_eq!(super::super::validate_dag(&spec).findings, vec![]);
    }

    #[test]
    fn minimal_document() {
        let doc = r#"{"AppName":"tiny","SharedObject":"builtin",
            "Variables":{"x":{"bytes":4,"is_ptr":false,"ptr_alloc_bytes":0,"val":[]}},
            "DAG":{"only":{"arguments":["x"],"predecessors":[],"successors":[],
                           "platforms":[{"name":"cpu","runfunc":"nop"}]}}}"#;
        let spec = parse_application(doc).unwrap();
        assert_eq!(spec.dag.len(), 1);
        assert_eq!(spec.head_nodes().collect::<Vec<_>>(), vec!["only"]);
    }

    #[test]
    fn asymmetric_edge_is_rejected() {
        // FFT_1 keeps LFM as predecessor but LFM forgets the successor
        let doc = LISTING.replacen(r#""successors": ["FFT_1"]"#, r#""successors": []"#, 1);
        let err = parse_application(&doc).unwrap_err();
        assert_eq!(err.to_string(), "asymmetric edge LFM\u{2192}FFT_1");
    }

    #[test]
    fn unknown_key_is_named() {
        let doc = LISTING.replacen(r#""AppName""#, r#""Colour": 1, "AppName""#, 1);
        let err = parse_application(&doc).unwrap_err().to_string();
        assert!(err.contains("Colour"), "{err}");
    }

    #[test]
    fn missing_key_and_type_mismatch() {
        let doc = LISTING.replacen(
            r#""bytes": 4, "is_ptr": false, "ptr_alloc_bytes": 0, "val": [0, 1, 0, 0]"#,
            r#""is_ptr": false, "ptr_alloc_bytes": 0, "val": [0, 1, 0, 0]"#,
            1,
        );
        assert!(parse_application(&doc)
            .unwrap_err()
            .to_string()
            .contains("bytes"));
        let doc = LISTING.replacen(r#""val": [0, 1, 0, 0]"#, r#""val": [0, 1, 0, 300]"#, 1);
        assert!(matches!(parse_application(&doc), Err(AppError::Json(_))));
        assert!(matches!(
            parse_application("{not json"),
            Err(AppError::Json(_))
        ));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let doc = LISTING.replacen(r#""rx": {"#, r#""X1": {"#, 1);
        let err = parse_application(&doc).unwrap_err().to_string();
        assert!(err.contains("duplicate name `X1`"), "{err}");
        let doc = LISTING.replacen(r#""FFT_1": {"arguments""#, r#""FFT_0": {"arguments""#, 1);
        assert!(parse_application(&doc)
            .unwrap_err()
            .to_string()
            .contains("duplicate name `FFT_0`"));
    }

    #[test]
    fn unknown_successor_is_rejected() {
        let doc = LISTING.replacen(
            r#""successors": ["MAX"]"#,
            r#""successors": ["MAX", "ZZZ"]"#,
            1,
        );
        assert_eq!(
            parse_application(&doc).unwrap_err(),
            AppError::UnknownNode {
                node: "ZZZ".into(),
                referenced_by: "IFFT".into()
            }
        );
    }
}
