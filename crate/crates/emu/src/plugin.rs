//! Kernel plugins loaded from shared libraries.
//!
//! A plugin exports one C-ABI symbol per `runfunc`:
//!
//! ```c
//! typedef struct { uint8_t *ptr; size_t len; } emu_view;
//! int32_t my_kernel(size_t argc, const emu_view *argv);
//! ```
//!
//! `argv` holds one view per node argument, in the node's `arguments`
//! order: scalar slots and pointer buffers alike. The kernel may read and
//! write inside each view and must not keep the pointers after returning.
//! A return value of 0 means success; anything else fails the task.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use emu_core::app::ApplicationSpec;
use emu_core::kernel::{
    KernelArgs, KernelEnv, KernelError, KernelHandle, KernelProvider, KernelRegistry, Provider,
};

/// One argument view as passed across the C ABI.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct KernelView {
    pub ptr: *mut u8,
    pub len: usize,
}

/// Signature of every exported kernel symbol.
pub type KernelAbi = unsafe extern "C" fn(argc: usize, argv: *const KernelView) -> i32;

/// Kernels resolved by symbol name from a loaded shared library.
pub struct DylibProvider {
    id: String,
    lib: Arc<libloading::Library>,
}

impl DylibProvider {
    pub fn open(id: &str, path: &Path) -> Result<Self, KernelError> {
        // SAFETY: loading runs the library's initializers; plugins are
        // trusted code named by the application files the user runs.
        let lib = unsafe { libloading::Library::new(path) }.map_err(|e| {
            KernelError::PluginNotLoadable {
                plugin: id.to_string(),
                reason: e.to_string(),
            }
        })?;
        Ok(Self {
            id: id.to_string(),
            lib: Arc::new(lib),
        })
    }
}

impl KernelProvider for DylibProvider {
    fn lookup(&self, symbol: &str) -> Option<KernelHandle> {
        // SAFETY: the plugin contract fixes the symbol's type to KernelAbi.
        let f: KernelAbi = unsafe { *self.lib.get::<KernelAbi>(symbol.as_bytes()).ok()? };
        let lib = self.lib.clone();
        let name = symbol.to_string();
        let func = move |args: &mut KernelArgs<'_>, _env: &dyn KernelEnv| {
            let _keep_loaded = &lib;
            let views: Vec<KernelView> = args
                .views_mut()
                .iter_mut()
                .map(|v| KernelView {
                    ptr: v.as_mut_ptr(),
                    len: v.len(),
                })
                .collect();
            // SAFETY: every view points into a live, exclusively borrowed
            // argument buffer for the duration of the call.
            let status = unsafe { f(views.len(), views.as_ptr()) };
            if status == 0 {
                Ok(())
            } else {
                Err(KernelError::Status {
                    kernel: args.kernel().to_string(),
                    status,
                })
            }
        };
        Some(KernelHandle {
            name,
            provider: Provider::Plugin(self.id.clone()),
            fingerprint: None,
            declared_cost: Default::default(),
            func: Arc::new(func),
        })
    }

    fn symbols(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Every plugin id an application refers to.
pub fn referenced_plugins(spec: &ApplicationSpec) -> BTreeSet<String> {
    let mut out = BTreeSet::from([spec.shared_object.clone()]);
    for node in spec.dag.values() {
        out.extend(
            node.platforms
                .iter()
                .filter_map(|b| b.shared_object.clone()),
        );
    }
    out
}

/// Loads every referenced plugin that no provider serves yet, looking for
/// a file of that name in `dirs` in order. Plugins that cannot be found
/// are left unregistered so that resolution reports them per node.
/// Returns the paths loaded.
pub fn load_referenced(
    registry: &mut KernelRegistry,
    specs: &[ApplicationSpec],
    dirs: &[PathBuf],
) -> Result<Vec<PathBuf>, KernelError> {
    let mut loaded = Vec::new();
    let wanted: BTreeSet<String> = specs.iter().flat_map(referenced_plugins).collect();
    for id in wanted {
        if registry.has_provider(&id) {
            continue;
        }
        let Some(path) = dirs.iter().map(|d| d.join(&id)).find(|p| p.is_file()) else {
            log::warn!("plugin {id} not found in {dirs:?}");
            continue;
        };
        registry.register(&id, Box::new(DylibProvider::open(&id, &path)?));
        log::info!("loaded plugin {id} from {}", path.display());
        loaded.push(path);
    }
    Ok(loaded)
}
