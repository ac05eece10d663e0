use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::{validate_dag, AppError, ApplicationSpec};
use crate::Nanos;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Ready,
    Running,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("illegal task transition {from:?} -> {to:?}")]
pub struct StateError {
    pub from: TaskState,
    pub to: TaskState,
}

/// Lifecycle of one task inside an instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskInstance {
    pub state: TaskState,
    pub assigned_pe: Option<usize>,
    pub ready_time: Option<Nanos>,
    pub start_time: Option<Nanos>,
    pub end_time: Option<Nanos>,
}

impl Default for TaskInstance {
    fn default() -> Self {
        Self {
            state: TaskState::Pending,
            assigned_pe: None,
            ready_time: None,
            start_time: None,
            end_time: None,
        }
    }
}

impl TaskInstance {
    fn advance(&mut self, from: TaskState, to: TaskState) -> Result<(), StateError> {
        if self.state != from {
            return Err(StateError {
                from: self.state,
                to,
            });
        }
        self.state = to;
        Ok(())
    }

    pub fn mark_ready(&mut self, t: Nanos) -> Result<(), StateError> {
        self.advance(TaskState::Pending, TaskState::Ready)?;
        self.ready_time = Some(t);
        Ok(())
    }

    pub fn mark_running(&mut self, pe: usize, t: Nanos) -> Result<(), StateError> {
        self.advance(TaskState::Ready, TaskState::Running)?;
        self.assigned_pe = Some(pe);
        self.start_time = Some(t.max(self.ready_time.unwrap_or(0)));
        Ok(())
    }

    pub fn mark_complete(&mut self, t: Nanos) -> Result<(), StateError> {
        self.advance(TaskState::Running, TaskState::Complete)?;
        self.end_time = Some(t.max(self.start_time.unwrap_or(0)));
        Ok(())
    }
}

/// A runnable copy of an application with its own variable storage.
#[derive(Clone, Debug, PartialEq)]
pub struct ApplicationInstance {
    pub instance_id: u64,
    pub app_name: String,
    pub arrival_time: Nanos,
    /// Kernel-visible bytes of each variable: the heap buffer for pointer
    /// variables, the slot for scalars. Pointer slots are runtime handles
    /// and carry no data of their own.
    pub store: BTreeMap<String, Vec<u8>>,
    pub tasks: BTreeMap<String, TaskInstance>,
}

impl ApplicationInstance {
    pub fn var(&self, name: &str) -> Option<&[u8]> {
        self.store.get(name).map(Vec::as_slice)
    }

    pub fn read_u32(&self, name: &str) -> Option<u32> {
        let b = self.var(name)?.get(..4)?;
        Some(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn read_f32(&self, name: &str) -> Option<f32> {
        self.read_u32(name).map(f32::from_bits)
    }

    pub fn is_complete(&self) -> bool {
        self.tasks.values().all(|t| t.state == TaskState::Complete)
    }
}

fn allocate(var: &str, bytes: u64, init: &[u8]) -> Result<Vec<u8>, AppError> {
    let fail = || AppError::Allocation {
        var: var.into(),
        bytes,
    };
    let len = usize::try_from(bytes).map_err(|_| fail())?;
    let mut buf = Vec::new();
    buf.try_reserve_exact(len).map_err(|_| fail())?;
    buf.resize(len, 0);
    let n = init.len().min(len);
    buf[..n].copy_from_slice(&init[..n]);
    Ok(buf)
}

/// Allocates and initializes every variable of `spec`; all tasks start
/// pending.
pub fn instantiate(
    spec: &ApplicationSpec,
    instance_id: u64,
    arrival_time: Nanos,
) -> Result<ApplicationInstance, AppError> {
    let report = validate_dag(spec);
    if !report.is_clean() {
        return Err(AppError::Invalid {
            app: spec.app_name.clone(),
            findings: report,
        });
    }
    instantiate_validated(spec, instance_id, arrival_time)
}

/// [`instantiate`] for a spec the caller has already validated.
pub fn instantiate_validated(
    spec: &ApplicationSpec,
    instance_id: u64,
    arrival_time: Nanos,
) -> Result<ApplicationInstance, AppError> {
    let mut store = BTreeMap::new();
    for (name, v) in &spec.variables {
        store.insert(name.clone(), allocate(name, v.data_bytes(), &v.val)?);
    }
    let tasks = spec
        .dag
        .keys()
        .map(|k| (k.clone(), TaskInstance::default()))
        .collect();
    Ok(ApplicationInstance {
        instance_id,
        app_name: spec.app_name.clone(),
        arrival_time,
        store,
        tasks,
    })
}
