use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{AllocSite, TraceMeta};
use crate::app::VariableSpec;

/// Variable storage derived from the allocation table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MemoryPlan {
    pub resolved: BTreeMap<String, VariableSpec>,
    /// Variables whose size could not be determined, with the reason.
    pub unresolved: BTreeMap<String, String>,
}

/// Evaluates a size expression made of decimal literals joined by `*`.
pub fn eval_size_expr(expr: &str) -> Option<u64> {
    let mut product: u64 = 1;
    for factor in expr.split('*') {
        let f = factor.trim();
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        product = product.checked_mul(f.parse().ok()?)?;
    }
    Some(product)
}

/// Static single elements become scalars; static arrays and resolvable
/// heap allocations become pointer variables.
pub fn infer_memory(meta: &TraceMeta) -> MemoryPlan {
    let mut plan = MemoryPlan::default();
    for v in &meta.variables {
        let spec = match &v.alloc {
            AllocSite::Static => match v.elem_bytes.checked_mul(v.count) {
                Some(0) | None => Err("static size is zero or overflows".to_string()),
                Some(_) if v.count == 1 => Ok(VariableSpec::scalar(v.elem_bytes, v.val.clone())),
                Some(total) => Ok(VariableSpec::buffer(total, v.val.clone())),
            },
            AllocSite::Dynamic { size } => match eval_size_expr(size) {
                Some(0) => Err(alloc::format!("allocation size {size:?} is zero")),
                Some(total) => Ok(VariableSpec::buffer(total, v.val.clone())),
                None => Err(alloc::format!(
                    "allocation size {size:?} is not a literal product"
                )),
            },
        };
        match spec {
            Ok(s) => {
                plan.resolved.insert(v.name.clone(), s);
            }
            Err(why) => {
                plan.unresolved.insert(v.name.clone(), why);
            }
        }
    }
    plan
}

impl MemoryPlan {
    /// Names of unresolved variables, sorted.
    pub fn unresolved_names(&self) -> Vec<&str> {
        self.unresolved.keys().map(String::as_str).collect()
    }
}
