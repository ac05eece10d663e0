//! Reading and writing every file the emulator consumes or produces.

use std::fs;
use std::path::{Path, PathBuf};

use emu_core::app::{emit_application, parse_application, ApplicationSpec};
use emu_core::extract::{
    encode_binary_trace, parse_trace_auto, BlockTrace, RecognitionTable, TraceMeta,
};
use emu_core::metrics::{
    compute_report, gantt_rows, latency_rows, overhead_rows, utilization_rows, ExportKind,
    RunReport,
};
use emu_core::platform::{preset, PlatformConfig};
use emu_core::trace::Trace;
use emu_core::workload::WorkloadSpec;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

fn format_err(path: &Path, e: impl ToString) -> FileError {
    FileError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, FileError> {
    fs::read(path).map_err(|source| FileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_text(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_bytes(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), FileError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| FileError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| FileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| format_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), FileError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| format_err(path, e))?;
    text.push('\n');
    write_bytes(path, text)
}

/// An `.app.json` application file.
pub fn load_app(path: &Path) -> Result<ApplicationSpec, FileError> {
    parse_application(&read_text(path)?).map_err(|e| format_err(path, e))
}

pub fn save_app(path: &Path, spec: &ApplicationSpec) -> Result<(), FileError> {
    write_bytes(path, emit_application(spec) + "\n")
}

/// A `.wl.json` workload file.
pub fn load_workload(path: &Path) -> Result<WorkloadSpec, FileError> {
    read_json(path)
}

pub fn save_workload(path: &Path, spec: &WorkloadSpec) -> Result<(), FileError> {
    write_json(path, spec)
}

/// A `.plat.json` file if `arg` names an existing file, else a preset
/// such as `zcu102-like,fft=1`.
pub fn load_platform(arg: &str) -> Result<PlatformConfig, FileError> {
    let path = Path::new(arg);
    if path.is_file() {
        let config: PlatformConfig = read_json(path)?;
        config.validate().map_err(|e| format_err(path, e))?;
        return Ok(config);
    }
    preset(arg).map_err(|e| format_err(path, e))
}

pub fn save_platform(path: &Path, config: &PlatformConfig) -> Result<(), FileError> {
    write_json(path, config)
}

/// An NDJSON trace with its schema header line.
pub fn load_trace(path: &Path) -> Result<Trace, FileError> {
    Trace::from_ndjson(&read_text(path)?).map_err(|e| format_err(path, e))
}

pub fn save_trace(path: &Path, trace: &Trace) -> Result<(), FileError> {
    write_bytes(path, trace.to_ndjson())
}

pub fn load_report(path: &Path) -> Result<RunReport, FileError> {
    read_json(path)
}

pub fn save_report(path: &Path, report: &RunReport) -> Result<(), FileError> {
    write_json(path, report)
}

/// A block trace (binary or text, detected from its content) and its
/// metadata sidecar.
pub fn load_block_trace(trace: &Path, meta: &Path) -> Result<BlockTrace, FileError> {
    let blocks = parse_trace_auto(&read_bytes(trace)?).map_err(|e| format_err(trace, e))?;
    let meta: TraceMeta = read_json(meta)?;
    BlockTrace::new(blocks, meta).map_err(|e| format_err(trace, e))
}

/// Writes the binary form unless `text` is set.
pub fn save_block_trace(
    trace_path: &Path,
    meta_path: &Path,
    trace: &BlockTrace,
    text: bool,
) -> Result<(), FileError> {
    if text {
        let mut s: String = trace.blocks.iter().map(|b| format!("{b}\n")).collect();
        if s.is_empty() {
            s.push('\n');
        }
        write_bytes(trace_path, s)?;
    } else {
        write_bytes(trace_path, encode_binary_trace(&trace.blocks))?;
    }
    write_json(meta_path, &trace.meta)
}

pub fn load_recognition_table(path: &Path) -> Result<RecognitionTable, FileError> {
    RecognitionTable::from_json(&read_text(path)?).map_err(|e| format_err(path, e))
}

pub fn save_recognition_table(path: &Path, table: &RecognitionTable) -> Result<(), FileError> {
    write_bytes(path, table.to_json() + "\n")
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), FileError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).map_err(|e| format_err(path, e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| format_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| format_err(path, e))?;
    write_bytes(path, bytes)
}

/// Writes one CSV export of a trace.
pub fn export_csv(trace: &Trace, kind: ExportKind, path: &Path) -> Result<(), FileError> {
    match kind {
        ExportKind::Gantt => write_rows(
            path,
            &gantt_rows(trace).map_err(|e| format_err(path, e))?,
            &["pe_id", "instance_id", "node", "start_ns", "end_ns"],
        ),
        ExportKind::Utilization => {
            let report = compute_report(trace).map_err(|e| format_err(path, e))?;
            write_rows(
                path,
                &utilization_rows(&report),
                &["pe_id", "pe_type", "fraction"],
            )
        }
        ExportKind::Overhead => write_rows(
            path,
            &overhead_rows(trace),
            &["cycle_index", "duration_ns", "ready_len"],
        ),
        ExportKind::Latency => write_rows(
            path,
            &latency_rows(trace),
            &["app", "instance_id", "latency_ns"],
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use emu_core::extract::dft_recognition_table;
    use emu_core::extract::planted::naive_dft_trace;
    use emu_core::fixtures;

    #[test]
    fn app_and_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rd.app.json");
        save_app(&p, &fixtures::range_detection()).unwrap();
        assert_eq!(load_app(&p).unwrap(), fixtures::range_detection());
        let t = dir.path().join("t.json");
        save_recognition_table(&t, &dft_recognition_table()).unwrap();
        assert_eq!(load_recognition_table(&t).unwrap(), dft_recognition_table());
    }

    #[test]
    fn block_traces_round_trip_in_both_encodings() {
        let dir = tempfile::tempdir().unwrap();
        let trace = naive_dft_trace(8);
        for text in [false, true] {
            let (tp, mp) = (
                dir.path().join(format!("t{text}.blk")),
                dir.path().join("t.meta.json"),
            );
            save_block_trace(&tp, &mp, &trace, text).unwrap();
            assert_eq!(load_block_trace(&tp, &mp).unwrap(), trace);
        }
    }

    #[test]
    fn platform_argument_is_file_or_preset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.plat.json");
        let cfg = preset("odroid-like,little=1").unwrap();
        save_platform(&p, &cfg).unwrap();
        assert_eq!(load_platform(p.to_str().unwrap()).unwrap(), cfg);
        assert_eq!(
            load_platform("zcu102-like,fft=1").unwrap().count_of("fft"),
            1
        );
        let err = load_platform("nonesuch").unwrap_err().to_string();
        assert!(err.contains("unknown platform preset nonesuch"), "{err}");
    }

    #[test]
    fn format_errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.wl.json");
        write_bytes(&p, "{\"mode\": \"sometimes\"}").unwrap();
        let err = load_workload(&p).unwrap_err().to_string();
        assert!(err.starts_with(&p.display().to_string()), "{err}");
        assert!(matches!(
            load_trace(&dir.path().join("missing")),
            Err(FileError::Io { .. })
        ));
    }

    #[test]
    fn empty_exports_still_carry_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        export_csv(&Trace::default(), ExportKind::Gantt, &p).unwrap();
        assert_eq!(
            read_text(&p).unwrap(),
            "pe_id,instance_id,node,start_ns,end_ns\n"
        );
    }
}
