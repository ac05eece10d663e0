use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};

use crate::fnv1a64;

/// Normalized operation-kind multiset of a kernel body.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpSummary(BTreeMap<String, u64>);

impl OpSummary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, op: &str, count: u64) {
        if count > 0 {
            *self.0.entry(op.to_string()).or_insert(0) += count;
        }
    }

    pub fn merge(&mut self, other: &OpSummary) {
        for (op, n) in &other.0 {
            self.add(op, *n);
        }
    }

    pub fn total_ops(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Parses the canonical `op=count;op=count` form.
    pub fn parse(text: &str) -> Option<Self> {
        let mut s = Self::new();
        for part in text.split(';').filter(|p| !p.is_empty()) {
            let (op, n) = part.split_once('=')?;
            s.add(op.trim(), n.trim().parse().ok()?);
        }
        Some(s)
    }

    /// `op=count` pairs sorted by op name, joined by `;`.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (i, (op, n)) in self.0.iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            out.push_str(&format!("{op}={n}"));
        }
        out
    }

    /// FNV-1a 64 over the canonical form.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(self.canonical().as_bytes())
    }
}

impl<'a> FromIterator<(&'a str, u64)> for OpSummary {
    fn from_iter<I: IntoIterator<Item = (&'a str, u64)>>(iter: I) -> Self {
        let mut s = Self::new();
        for (op, n) in iter {
            s.add(op, n);
        }
        s
    }
}
