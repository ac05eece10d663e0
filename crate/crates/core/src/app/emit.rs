use alloc::string::String;
use core::fmt::Write;

use super::{format_fingerprint, topological_order, ApplicationSpec};

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn string_list(items: &[String]) -> String {
    let mut out = String::from("[");
    for (i, s) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&quote(s));
    }
    out.push(']');
    out
}

/// Canonical JSON for an application: header keys, variables sorted by
/// name, then DAG nodes in topological order with ties broken by name.
/// The output is byte-stable for structurally equal specs.
pub fn emit_application(spec: &ApplicationSpec) -> String {
    let order = topological_order(spec).unwrap_or_else(|| spec.dag.keys().cloned().collect());
    let mut out = String::new();
    // writing into a String cannot fail
    let _ = write_document(&mut out, spec, &order);
    out
}

fn write_document(out: &mut String, spec: &ApplicationSpec, order: &[String]) -> core::fmt::Result {
    writeln!(out, "{{")?;
    writeln!(out, "  \"AppName\": {},", quote(&spec.app_name))?;
    writeln!(out, "  \"SharedObject\": {},", quote(&spec.shared_object))?;

    writeln!(out, "  \"Variables\": {{")?;
    let n_vars = spec.variables.len();
    for (i, (name, v)) in spec.variables.iter().enumerate() {
        write!(
            out,
            "    {}: {{\"bytes\": {}, \"is_ptr\": {}, \"ptr_alloc_bytes\": {}, \"val\": [",
            quote(name),
            v.bytes,
            v.is_ptr,
            v.ptr_alloc_bytes
        )?;
        for (j, b) in v.val.iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            write!(out, "{b}")?;
        }
        writeln!(out, "]}}{}", if i + 1 < n_vars { "," } else { "" })?;
    }
    writeln!(out, "  }},")?;

    writeln!(out, "  \"DAG\": {{")?;
    for (i, name) in order.iter().enumerate() {
        let node = &spec.dag[name];
        writeln!(out, "    {}: {{", quote(name))?;
        writeln!(
            out,
            "      \"arguments\": {},",
            string_list(&node.arguments)
        )?;
        writeln!(
            out,
            "      \"predecessors\": {},",
            string_list(&node.predecessors)
        )?;
        writeln!(
            out,
            "      \"successors\": {},",
            string_list(&node.successors)
        )?;
        writeln!(out, "      \"platforms\": [")?;
        for (j, b) in node.platforms.iter().enumerate() {
            write!(
                out,
                "        {{\"name\": {}, \"runfunc\": {}",
                quote(&b.platform_name),
                quote(&b.run_func)
            )?;
            if let Some(so) = &b.shared_object {
                write!(out, ", \"shared_object\": {}", quote(so))?;
            }
            if let Some(est) = b.est_exec_time {
                write!(out, ", \"est_exec_time\": {est}")?;
            }
            writeln!(
                out,
                "}}{}",
                if j + 1 < node.platforms.len() {
                    ","
                } else {
                    ""
                }
            )?;
        }
        let mut tail = String::from("      ]");
        if !node.comm_bytes.is_empty() {
            tail.push_str(",\n      \"comm_bytes\": {");
            for (j, (k, v)) in node.comm_bytes.iter().enumerate() {
                if j > 0 {
                    tail.push_str(", ");
                }
                let _ = write!(tail, "{}: {v}", quote(k));
            }
            tail.push('}');
        }
        if let Some(fp) = node.fingerprint {
            let _ = write!(
                tail,
                ",\n      \"fingerprint\": {}",
                quote(&format_fingerprint(fp))
            );
        }
        writeln!(out, "{tail}")?;
        writeln!(out, "    }}{}", if i + 1 < order.len() { "," } else { "" })?;
    }
    writeln!(out, "  }}")?;
    writeln!(out, "}}")
}
