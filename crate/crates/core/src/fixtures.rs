//! Shipped applications and generators used by tests, the acceptance
//! suite and the CLI.
//!
//! The range-detection application is functional: its kernels compute a
//! real cross-correlation. The WiFi and Pulse-Doppler applications are
//! stand-ins with the right task counts whose nodes run `busy` for their
//! estimated time on a core, or are latency-modeled on an accelerator.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::app::{ApplicationSpec, PlatformBinding, TaskNodeSpec, VariableSpec};
use crate::kernel::{builtin_summary, dsp, BUILTIN_PROVIDER};
use crate::rng::SeededRng;
use crate::{Nanos, NS_PER_US};

pub const RD_SAMPLES: usize = 256;
pub const RD_DELAY: usize = 10;

const US: Nanos = NS_PER_US;

/// Little-endian interleaved f32 pairs.
pub fn complex_to_bytes(x: &[Complex64]) -> Vec<u8> {
    x.iter()
        .flat_map(|c| {
            (c.re as f32)
                .to_le_bytes()
                .into_iter()
                .chain((c.im as f32).to_le_bytes())
        })
        .collect()
}

pub fn bytes_to_complex(b: &[u8]) -> Vec<Complex64> {
    b.chunks_exact(8)
        .map(|c| {
            Complex64::new(
                f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
                f64::from(f32::from_le_bytes([c[4], c[5], c[6], c[7]])),
            )
        })
        .collect()
}

fn node(args: &[&str], platforms: Vec<PlatformBinding>) -> TaskNodeSpec {
    TaskNodeSpec {
        arguments: args.iter().map(|a| a.to_string()).collect(),
        platforms,
        ..TaskNodeSpec::default()
    }
}

fn wire(spec: &mut ApplicationSpec, edges: &[(&str, &str)]) {
    for (a, b) in edges {
        spec.add_edge(a, b);
    }
}

/// Received signal for range detection: the chirp delayed by `delay`
/// samples, truncated to `n`.
pub fn delayed_chirp(n: usize, delay: usize) -> Vec<Complex64> {
    dsp::delay(&dsp::lfm_chirp(n), delay, n)
}

fn range_detection_variables(n: usize, delay: usize) -> BTreeMap<String, VariableSpec> {
    let cbytes = 8 * n as u64;
    let fbytes = 2 * cbytes;
    let mut v = BTreeMap::new();
    v.insert(
        "n_samples".to_string(),
        VariableSpec::scalar(4, (n as u32).to_le_bytes().to_vec()),
    );
    v.insert(
        "sampling_rate".to_string(),
        VariableSpec::scalar(4, 1.0f32.to_le_bytes().to_vec()),
    );
    v.insert(
        "lfm_waveform".to_string(),
        VariableSpec::buffer(cbytes, vec![]),
    );
    v.insert(
        "received".to_string(),
        VariableSpec::buffer(cbytes, complex_to_bytes(&delayed_chirp(n, delay))),
    );
    for f in ["X1", "X2", "corr_freq", "corr"] {
        v.insert(f.to_string(), VariableSpec::buffer(fbytes, vec![]));
    }
    for s in ["index", "max_corr", "lag"] {
        v.insert(s.to_string(), VariableSpec::scalar(4, vec![]));
    }
    v
}

const RD_EDGES: [(&str, &str); 5] = [
    ("LFM", "FFT_0"),
    ("FFT_0", "MUL"),
    ("FFT_1", "MUL"),
    ("MUL", "IFFT"),
    ("IFFT", "MAX"),
];

/// The range-detection application: correlate a received signal against a
/// linear FM chirp via FFT, conjugate multiply, IFFT and argmax. FFT nodes
/// can also run on an `fft` accelerator.
pub fn range_detection_sized(n: usize, delay: usize) -> ApplicationSpec {
    let cpu = |f: &str, est: Nanos| PlatformBinding::new("cpu", f).with_est(est);
    let acc = |f: &str| {
        PlatformBinding::new("fft", f)
            .with_plugin("fft_accel.so")
            .with_est(20 * US)
    };
    let mut dag = BTreeMap::new();
    dag.insert(
        "LFM".into(),
        node(
            &["n_samples", "lfm_waveform"],
            vec![cpu("range_detect_LFM", 60 * US)],
        ),
    );
    dag.insert(
        "FFT_0".into(),
        node(
            &["n_samples", "lfm_waveform", "X1"],
            vec![
                cpu("range_detect_FFT_0_CPU", 100 * US),
                acc("range_detect_FFT_0_ACCEL"),
            ],
        ),
    );
    dag.insert(
        "FFT_1".into(),
        node(
            &["n_samples", "received", "X2"],
            vec![
                cpu("range_detect_FFT_1_CPU", 100 * US),
                acc("range_detect_FFT_1_ACCEL"),
            ],
        ),
    );
    dag.insert(
        "MUL".into(),
        node(
            &["n_samples", "X2", "X1", "corr_freq"],
            vec![cpu("range_detect_MUL", 30 * US)],
        ),
    );
    dag.insert(
        "IFFT".into(),
        node(
            &["n_samples", "corr_freq", "corr"],
            vec![
                cpu("range_detect_IFFT", 100 * US),
                acc("range_detect_IFFT_ACCEL"),
            ],
        ),
    );
    dag.insert(
        "MAX".into(),
        node(
            &[
                "n_samples",
                "corr",
                "index",
                "max_corr",
                "lag",
                "sampling_rate",
            ],
            vec![cpu("range_detect_MAX", 30 * US)],
        ),
    );
    let mut spec = ApplicationSpec {
        app_name: "range_detection".into(),
        shared_object: "range_detection.so".into(),
        variables: range_detection_variables(n, delay),
        dag,
    };
    wire(&mut spec, &RD_EDGES);
    spec
}

pub fn range_detection() -> ApplicationSpec {
    range_detection_sized(RD_SAMPLES, RD_DELAY)
}

/// Range detection written with naive O(n^2) transforms, the starting
/// point for fingerprint-based substitution. Transform nodes carry the
/// fingerprints of their kernels.
pub fn range_detection_naive(n: usize, delay: usize) -> ApplicationSpec {
    let mut spec = range_detection_sized(n, delay);
    spec.app_name = "range_detection_naive".into();
    spec.shared_object = BUILTIN_PROVIDER.into();
    let naive_est = |n: usize| (4 * n as u64 * n as u64).max(US);
    let rebind = |spec: &mut ApplicationSpec, name: &str, f: &str, est: Nanos| {
        let node = spec.dag.get_mut(name).expect("node");
        node.platforms = vec![PlatformBinding::new("cpu", f).with_est(est)];
        node.fingerprint = builtin_summary(f).map(|s| s.fingerprint());
    };
    rebind(&mut spec, "LFM", "lfm_gen", 60 * US);
    rebind(&mut spec, "FFT_0", "dft_naive", naive_est(n));
    rebind(&mut spec, "FFT_1", "dft_naive", naive_est(n));
    rebind(&mut spec, "MUL", "cmul_conj", 30 * US);
    rebind(&mut spec, "IFFT", "idft_naive", naive_est(n));
    rebind(&mut spec, "MAX", "max_corr", 30 * US);
    spec
}

/// A stand-in node: `busy` on a core for `est`, and optionally a
/// latency-modeled `nop` on the `fft` accelerator.
fn stand_in(
    duration_var: &str,
    payload: Option<&str>,
    est: Nanos,
    fft_est: Option<Nanos>,
) -> TaskNodeSpec {
    let mut args = vec![duration_var];
    if let Some(p) = payload {
        args.push(p);
    }
    let mut platforms = vec![PlatformBinding::new("cpu", "busy").with_est(est)];
    if let Some(e) = fft_est {
        platforms.push(PlatformBinding::new("fft", "nop").with_est(e));
    }
    node(&args, platforms)
}

fn duration_var(est: Nanos) -> VariableSpec {
    VariableSpec::scalar(8, est.to_le_bytes().to_vec())
}

/// A linear chain of stand-in nodes. Each entry is (name, core estimate,
/// accelerator estimate).
fn stand_in_chain(app: &str, stages: &[(&str, Nanos, Option<Nanos>)]) -> ApplicationSpec {
    let mut spec = ApplicationSpec {
        app_name: app.into(),
        shared_object: BUILTIN_PROVIDER.into(),
        ..Default::default()
    };
    spec.variables
        .insert("samples".into(), VariableSpec::buffer(1024, vec![]));
    for (name, est, fft) in stages {
        let var = format!("d_{name}");
        spec.variables.insert(var.clone(), duration_var(*est));
        spec.dag
            .insert((*name).into(), stand_in(&var, Some("samples"), *est, *fft));
    }
    for w in stages.windows(2) {
        spec.add_edge(w[0].0, w[1].0);
    }
    spec
}

/// WiFi transmitter stand-in: 7 serial stages, about 130 us.
pub fn wifi_tx() -> ApplicationSpec {
    stand_in_chain(
        "wifi_tx",
        &[
            ("TX0_SCRAMBLE", 10 * US, None),
            ("TX1_ENCODE", 30 * US, None),
            ("TX2_INTERLEAVE", 10 * US, None),
            ("TX3_QPSK", 15 * US, None),
            ("TX4_PILOT", 10 * US, None),
            ("TX5_IFFT", 40 * US, Some(10 * US)),
            ("TX6_CRC", 15 * US, None),
        ],
    )
}

/// WiFi receiver stand-in: 9 serial stages dominated by decoding, about
/// 2.2 ms.
pub fn wifi_rx() -> ApplicationSpec {
    stand_in_chain(
        "wifi_rx",
        &[
            ("RX0_MATCH", 50 * US, None),
            ("RX1_PAYLOAD", 20 * US, None),
            ("RX2_FFT", 40 * US, Some(10 * US)),
            ("RX3_PILOT", 20 * US, None),
            ("RX4_DEMOD", 30 * US, None),
            ("RX5_DEINTERLEAVE", 20 * US, None),
            ("RX6_DECODE", 1960 * US, None),
            ("RX7_DESCRAMBLE", 30 * US, None),
            ("RX8_CRC", 50 * US, None),
        ],
    )
}

pub const PD_PULSES: usize = 128;

/// Pulse-Doppler stand-in: a head node fans out to 128 pulse-compression
/// chains (FFT, MUL, IFFT) that join in a realignment node, which fans out
/// to 128 Doppler chains (DFFT, AMP, MAX). 770 tasks.
pub fn pulse_doppler() -> ApplicationSpec {
    let mut spec = ApplicationSpec {
        app_name: "pulse_doppler".into(),
        shared_object: BUILTIN_PROVIDER.into(),
        ..Default::default()
    };
    let kinds: [(&str, Nanos, Option<Nanos>); 8] = [
        ("HEAD", 20 * US, None),
        ("FFT", 40 * US, Some(10 * US)),
        ("MUL", 10 * US, None),
        ("IFFT", 40 * US, Some(10 * US)),
        ("REALIGN", 50 * US, None),
        ("DFFT", 40 * US, Some(10 * US)),
        ("AMP", 10 * US, None),
        ("MAX", 6 * US, None),
    ];
    spec.variables
        .insert("samples".into(), VariableSpec::buffer(1024, vec![]));
    let mut est = BTreeMap::new();
    for (k, e, f) in kinds {
        spec.variables.insert(format!("d_{k}"), duration_var(e));
        est.insert(k, (e, f));
    }
    let add = |spec: &mut ApplicationSpec, name: String, kind: &str| {
        let (e, f) = est[kind];
        let payload = f.map(|_| "samples");
        spec.dag
            .insert(name, stand_in(&format!("d_{kind}"), payload, e, f));
    };
    add(&mut spec, "HEAD".into(), "HEAD");
    add(&mut spec, "REALIGN".into(), "REALIGN");
    for p in 0..PD_PULSES {
        for k in ["FFT", "MUL", "IFFT", "DFFT", "AMP", "MAX"] {
            add(&mut spec, format!("{k}_{p:03}"), k);
        }
    }
    for p in 0..PD_PULSES {
        let n = |k: &str| format!("{k}_{p:03}");
        let edges = [
            ("HEAD".to_string(), n("FFT")),
            (n("FFT"), n("MUL")),
            (n("MUL"), n("IFFT")),
            (n("IFFT"), "REALIGN".to_string()),
            ("REALIGN".to_string(), n("DFFT")),
            (n("DFFT"), n("AMP")),
            (n("AMP"), n("MAX")),
        ];
        for (a, b) in &edges {
            spec.add_edge(a, b);
        }
    }
    spec
}

pub const BURST_SAMPLES: usize = 128;

/// One 128-point FFT per instance, on a core (`fft_radix2`) or the `fft`
/// accelerator (`accel_fft`).
pub fn fft_burst() -> ApplicationSpec {
    let n = BURST_SAMPLES;
    let mut spec = ApplicationSpec {
        app_name: "fft_burst".into(),
        shared_object: BUILTIN_PROVIDER.into(),
        ..Default::default()
    };
    let x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new((i % 7) as f64, 0.0))
        .collect();
    spec.variables.insert(
        "n".into(),
        VariableSpec::scalar(4, (n as u32).to_le_bytes().to_vec()),
    );
    spec.variables.insert(
        "x".into(),
        VariableSpec::buffer(8 * n as u64, complex_to_bytes(&x)),
    );
    spec.variables.insert(
        "spectrum".into(),
        VariableSpec::buffer(8 * n as u64, vec![]),
    );
    spec.dag.insert(
        "FFT".into(),
        node(
            &["n", "x", "spectrum"],
            vec![
                PlatformBinding::new("cpu", "fft_radix2").with_est(12 * US),
                PlatformBinding::new("fft", "accel_fft").with_est(3 * US),
            ],
        ),
    );
    spec
}

/// Applications of the mixed-rate workloads, in the column order of
/// [`INJECTION_ROWS`].
pub const MIXED_APPS: [&str; 4] = ["pulse_doppler", "range_detection", "wifi_tx", "wifi_rx"];

/// Reference injection rows: jobs per millisecond and the instance count of
/// each [`MIXED_APPS`] application over a 100 ms frame.
pub const INJECTION_ROWS: [(f64, [u32; 4]); 5] = [
    (1.71, [8, 123, 20, 20]),
    (2.28, [10, 164, 27, 27]),
    (3.42, [15, 245, 41, 41]),
    (4.57, [18, 329, 55, 55]),
    (6.92, [32, 495, 82, 83]),
];

pub const MIXED_FRAME: Nanos = 100 * crate::NS_PER_MS;

/// Always-inject specs whose periods `floor(t_end / count)` produce
/// `counts` instances of each [`MIXED_APPS`] application over `t_end`.
pub fn rate_injections(counts: &[u32; 4], t_end: Nanos) -> Vec<crate::workload::InjectionSpec> {
    MIXED_APPS
        .iter()
        .zip(counts)
        .filter(|(_, c)| **c > 0)
        .map(|(app, c)| crate::workload::InjectionSpec {
            app_name: (*app).into(),
            period: t_end / Nanos::from(*c),
            probability: 1.0,
        })
        .collect()
}

/// Every shipped application.
pub fn shipped_apps() -> Vec<ApplicationSpec> {
    vec![
        range_detection(),
        wifi_tx(),
        wifi_rx(),
        pulse_doppler(),
        fft_burst(),
    ]
}

/// Serial chain of `busy` tasks on `cpu` with the given estimates.
pub fn chain(app: &str, ests: &[Nanos]) -> ApplicationSpec {
    let names: Vec<String> = (0..ests.len()).map(|i| format!("T{i}")).collect();
    let stages: Vec<(&str, Nanos, Option<Nanos>)> = names
        .iter()
        .zip(ests)
        .map(|(n, e)| (n.as_str(), *e, None))
        .collect();
    stand_in_chain(app, &stages)
}

/// Parameters of [`random_app`].
#[derive(Clone, Debug)]
pub struct RandomAppParams {
    pub max_nodes: usize,
    pub edge_probability: f64,
    /// Binding names nodes may use; each node gets a nonempty subset.
    pub platforms: Vec<String>,
    pub est_range: (Nanos, Nanos),
}

impl Default for RandomAppParams {
    fn default() -> Self {
        Self {
            max_nodes: 20,
            edge_probability: 0.3,
            platforms: vec!["cpu".into(), "fft".into()],
            est_range: (5 * US, 50 * US),
        }
    }
}

/// A random acyclic application: edges only go from lower to higher node
/// index. Nodes run `busy` (cores) or `nop` (accelerators) and carry one
/// duration variable each.
pub fn random_app(rng: &mut SeededRng, name: &str, p: &RandomAppParams) -> ApplicationSpec {
    let n = 1 + rng.below(p.max_nodes.max(1));
    let mut spec = ApplicationSpec {
        app_name: name.into(),
        shared_object: BUILTIN_PROVIDER.into(),
        ..Default::default()
    };
    let names: Vec<String> = (0..n).map(|i| format!("N{i:02}")).collect();
    let (lo, hi) = p.est_range;
    for nm in &names {
        let mut platforms = Vec::new();
        let first = rng.below(p.platforms.len());
        for (i, plat) in p.platforms.iter().enumerate() {
            if i == first || rng.unit() < 0.5 {
                let est = lo + rng.below((hi - lo + 1) as usize) as Nanos;
                let f = if i == 0 { "busy" } else { "nop" };
                platforms.push(PlatformBinding::new(plat, f).with_est(est));
            }
        }
        let core_est = platforms[0].est_exec_time.unwrap_or(lo);
        let var = format!("d_{nm}");
        spec.variables.insert(var.clone(), duration_var(core_est));
        spec.dag.insert(nm.clone(), node(&[&var], platforms));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.unit() < p.edge_probability {
                spec.add_edge(&names[i], &names[j]);
            }
        }
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::{emit_application, parse_application, validate_dag};

    #[test]
    fn shipped_apps_validate_and_round_trip() {
        for spec in shipped_apps()
            .into_iter()
            .chain([range_detection_naive(64, 3)])
        {
            let report = validate_dag(&spec);
            assert!(report.is_clean(), "{}: {report}", spec.app_name);
            assert_eq!(parse_application(&emit_application(&spec)).unwrap(), spec);
        }
    }

    #[test]
    fn task_counts() {
        assert_eq!(range_detection().dag.len(), 6);
        assert_eq!(wifi_tx().dag.len(), 7);
        assert_eq!(wifi_rx().dag.len(), 9);
        assert_eq!(pulse_doppler().dag.len(), 770);
    }

    #[test]
    fn listing_sizes() {
        let rd = range_detection();
        assert_eq!(rd.variables["n_samples"].val, vec![0, 1, 0, 0]);
        assert_eq!(rd.variables["lfm_waveform"].ptr_alloc_bytes, 2048);
        assert_eq!(rd.variables["sampling_rate"].val, vec![0, 0, 128, 63]);
    }

    #[test]
    fn random_apps_are_valid() {
        let mut rng = SeededRng::new(5);
        for i in 0..50 {
            let spec = random_app(&mut rng, &format!("r{i}"), &RandomAppParams::default());
            assert!(validate_dag(&spec).is_clean());
        }
    }
}
