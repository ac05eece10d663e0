//! Kernel registry and invocation.
//!
//! A kernel is what a DAG node runs. Kernels see their arguments as an
//! ordered list of byte views (scalar slots or pointer buffers) and return a
//! status. Kernels are grouped by provider: the reserved `builtin` provider,
//! alias providers that expose builtins under a plugin's symbol names, and
//! whatever the host layer registers (dynamically loaded libraries).

mod builtins;
pub mod dsp;
mod fingerprint;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::Nanos;

pub use builtins::{builtin_summary, BUILTIN_NAMES};
pub use fingerprint::OpSummary;

/// Reserved provider id of the builtin kernel set.
pub const BUILTIN_PROVIDER: &str = "builtin";
/// Provider id whose every symbol is a `nop` stand-in; used by extracted
/// applications whose kernel bodies are not synthesized.
pub const STAND_IN_PROVIDER: &str = "stand-in";

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("plugin {plugin} is not loadable: {reason}")]
    PluginNotLoadable { plugin: String, reason: String },
    #[error("{kernel} takes {expected} arguments, got {got}")]
    Arity {
        kernel: String,
        expected: usize,
        got: usize,
    },
    #[error("argument {index} of {kernel} holds {have} bytes, needs {need}")]
    BufferTooSmall {
        kernel: String,
        index: usize,
        need: usize,
        have: usize,
    },
    #[error("{kernel} needs a power-of-two size, got {n}")]
    NotPowerOfTwo { kernel: String, n: usize },
    #[error("kernel {kernel} failed with status {status}")]
    Status { kernel: String, status: i32 },
    #[error("kernel {kernel} failed: {reason}")]
    Failed { kernel: String, reason: String },
}

/// Services a kernel may need from the PE that runs it.
pub trait KernelEnv {
    /// Holds the PE for `ns` nanoseconds of emulated work.
    fn occupy(&self, ns: Nanos);
}

/// Environment for runs where time is modeled, not spent.
pub struct NoopEnv;

impl KernelEnv for NoopEnv {
    fn occupy(&self, _ns: Nanos) {}
}

/// Ordered argument views handed to a kernel.
pub struct KernelArgs<'a> {
    kernel: &'a str,
    views: Vec<&'a mut [u8]>,
}

impl<'a> KernelArgs<'a> {
    pub fn new(kernel: &'a str, views: Vec<&'a mut [u8]>) -> Self {
        Self { kernel, views }
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn kernel(&self) -> &str {
        self.kernel
    }

    pub fn views_mut(&mut self) -> &mut [&'a mut [u8]] {
        &mut self.views
    }

    pub fn expect_arity(&self, expected: usize) -> Result<(), KernelError> {
        if self.views.len() != expected {
            return Err(KernelError::Arity {
                kernel: self.kernel.to_string(),
                expected,
                got: self.views.len(),
            });
        }
        Ok(())
    }

    fn too_small(&self, index: usize, need: usize) -> KernelError {
        KernelError::BufferTooSmall {
            kernel: self.kernel.to_string(),
            index,
            need,
            have: self.views[index].len(),
        }
    }

    pub fn bytes(&self, index: usize) -> &[u8] {
        self.views[index]
    }

    pub fn bytes_mut(&mut self, index: usize) -> &mut [u8] {
        self.views[index]
    }

    pub fn read_u32(&self, index: usize) -> Result<u32, KernelError> {
        let b = self.views[index]
            .get(..4)
            .ok_or_else(|| self.too_small(index, 4))?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Reads an unsigned integer from a 4- or 8-byte slot.
    pub fn read_uint(&self, index: usize) -> Result<u64, KernelError> {
        let v = &self.views[index];
        if v.len() >= 8 {
            let mut b = [0u8; 8];
            b.copy_from_slice(&v[..8]);
            Ok(u64::from_le_bytes(b))
        } else {
            self.read_u32(index).map(u64::from)
        }
    }

    pub fn read_f32(&self, index: usize) -> Result<f32, KernelError> {
        self.read_u32(index).map(f32::from_bits)
    }

    pub fn write_u32(&mut self, index: usize, v: u32) -> Result<(), KernelError> {
        if self.views[index].len() < 4 {
            return Err(self.too_small(index, 4));
        }
        self.views[index][..4].copy_from_slice(&v.to_le_bytes());
        Ok(())
    }

    pub fn write_f32(&mut self, index: usize, v: f32) -> Result<(), KernelError> {
        self.write_u32(index, v.to_bits())
    }

    /// Complex samples stored as interleaved `f32` (re, im) pairs.
    pub fn complex_len(&self, index: usize) -> usize {
        self.views[index].len() / 8
    }

    pub fn read_complex(&self, index: usize, count: usize) -> Result<Vec<Complex64>, KernelError> {
        let need = count * 8;
        let v = self.views[index]
            .get(..need)
            .ok_or_else(|| self.too_small(index, need))?;
        Ok(v.chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                Complex64::new(f64::from(re), f64::from(im))
            })
            .collect())
    }

    pub fn write_complex(&mut self, index: usize, data: &[Complex64]) -> Result<(), KernelError> {
        let need = data.len() * 8;
        if self.views[index].len() < need {
            return Err(self.too_small(index, need));
        }
        for (slot, x) in self.views[index].chunks_exact_mut(8).zip(data) {
            slot[..4].copy_from_slice(&(x.re as f32).to_le_bytes());
            slot[4..].copy_from_slice(&(x.im as f32).to_le_bytes());
        }
        Ok(())
    }
}

pub type KernelFn =
    Arc<dyn Fn(&mut KernelArgs<'_>, &dyn KernelEnv) -> Result<(), KernelError> + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Provider {
    Builtin,
    Plugin(String),
}

/// A resolved kernel, cheap to clone and safe to share across PE workers.
#[derive(Clone)]
pub struct KernelHandle {
    pub name: String,
    pub provider: Provider,
    pub fingerprint: Option<u64>,
    pub declared_cost: BTreeMap<String, Nanos>,
    pub func: KernelFn,
}

impl fmt::Debug for KernelHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelHandle")
            .field("name", &self.name)
            .field("provider", &self.provider)
            .field("fingerprint", &self.fingerprint)
            .finish_non_exhaustive()
    }
}

impl KernelHandle {
    pub fn invoke(
        &self,
        args: &mut KernelArgs<'_>,
        env: &dyn KernelEnv,
    ) -> Result<(), KernelError> {
        (self.func)(args, env)
    }
}

/// A named collection of kernels, e.g. one plugin library.
pub trait KernelProvider: Send + Sync {
    fn lookup(&self, symbol: &str) -> Option<KernelHandle>;
    fn symbols(&self) -> Vec<String>;
}

struct BuiltinProvider;

impl KernelProvider for BuiltinProvider {
    fn lookup(&self, symbol: &str) -> Option<KernelHandle> {
        builtins::handle(symbol)
    }

    fn symbols(&self) -> Vec<String> {
        BUILTIN_NAMES.iter().map(|s| s.to_string()).collect()
    }
}

/// Exposes builtin kernels under another library's symbol names.
pub struct AliasProvider {
    id: String,
    aliases: BTreeMap<String, String>,
}

impl AliasProvider {
    pub fn new<'s>(id: &str, pairs: impl IntoIterator<Item = (&'s str, &'s str)>) -> Self {
        Self {
            id: id.to_string(),
            aliases: pairs
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }
}

/// Resolves any symbol to a `nop` kernel that keeps the symbol's name.
pub struct StandInProvider;

impl KernelProvider for StandInProvider {
    fn lookup(&self, symbol: &str) -> Option<KernelHandle> {
        let mut h = builtins::handle("nop")?;
        h.name = symbol.to_string();
        h.provider = Provider::Plugin(STAND_IN_PROVIDER.to_string());
        Some(h)
    }

    fn symbols(&self) -> Vec<String> {
        Vec::new()
    }
}

impl KernelProvider for AliasProvider {
    fn lookup(&self, symbol: &str) -> Option<KernelHandle> {
        let target = self.aliases.get(symbol)?;
        let mut h = builtins::handle(target)?;
        h.name = symbol.to_string();
        h.provider = Provider::Plugin(self.id.clone());
        Some(h)
    }

    fn symbols(&self) -> Vec<String> {
        self.aliases.keys().cloned().collect()
    }
}

/// Kernel lookup across providers. Immutable once the run starts.
pub struct KernelRegistry {
    providers: BTreeMap<String, Box<dyn KernelProvider>>,
}

impl Default for KernelRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl KernelRegistry {
    /// Builtins only, without the bundled alias libraries.
    pub fn builtin_only() -> Self {
        let mut providers: BTreeMap<String, Box<dyn KernelProvider>> = BTreeMap::new();
        providers.insert(BUILTIN_PROVIDER.to_string(), Box::new(BuiltinProvider));
        Self { providers }
    }

    /// Builtins plus the bundled `range_detection.so` and `fft_accel.so`
    /// symbol sets used by the shipped range-detection application, and
    /// the stand-in provider for extracted applications.
    pub fn with_builtins() -> Self {
        let mut reg = Self::builtin_only();
        reg.register(STAND_IN_PROVIDER, Box::new(StandInProvider));
        reg.register(
            "range_detection.so",
            Box::new(AliasProvider::new(
                "range_detection.so",
                [
                    ("range_detect_LFM", "lfm_gen"),
                    ("range_detect_FFT_0_CPU", "fft_radix2"),
                    ("range_detect_FFT_1_CPU", "fft_radix2"),
                    ("range_detect_MUL", "cmul_conj"),
                    ("range_detect_IFFT", "ifft"),
                    ("range_detect_MAX", "max_corr"),
                ],
            )),
        );
        reg.register(
            "fft_accel.so",
            Box::new(AliasProvider::new(
                "fft_accel.so",
                [
                    ("range_detect_FFT_0_ACCEL", "accel_fft"),
                    ("range_detect_FFT_1_ACCEL", "accel_fft"),
                    ("range_detect_IFFT_ACCEL", "accel_ifft"),
                ],
            )),
        );
        reg
    }

    pub fn register(&mut self, id: &str, provider: Box<dyn KernelProvider>) {
        self.providers.insert(id.to_string(), provider);
    }

    pub fn has_provider(&self, id: &str) -> bool {
        self.providers.contains_key(id)
    }

    pub fn provider_ids(&self) -> impl Iterator<Item = &str> {
        self.providers.keys().map(String::as_str)
    }

    /// Looks `run_func` up in the binding's plugin if it names one, else in
    /// the application's default plugin.
    pub fn resolve(
        &self,
        run_func: &str,
        plugin: Option<&str>,
        default_plugin: &str,
    ) -> Result<KernelHandle, KernelError> {
        let id = plugin.unwrap_or(default_plugin);
        let provider = self
            .providers
            .get(id)
            .ok_or_else(|| KernelError::PluginNotLoadable {
                plugin: id.to_string(),
                reason: "no provider registered under this id".to_string(),
            })?;
        provider
            .lookup(run_func)
            .ok_or_else(|| KernelError::UnknownSymbol(run_func.to_string()))
    }

    pub fn builtin_suite(&self) -> Vec<KernelHandle> {
        BUILTIN_NAMES
            .iter()
            .filter_map(|n| builtins::handle(n))
            .collect()
    }
}
