//! Virtual NPU: machine model, tensors, host evaluation, the functional and
//! timed interpreters, the independent reference oracle, and tensor
//! comparison.

pub mod compare;
pub mod config;
pub mod exec;
pub mod host;
pub mod kernels;
pub mod oracle;
pub mod tensor;
pub mod timed;

pub use compare::{compare_tensors, ComparisonReport};
pub use config::{ConfigError, NpuConfig, ALIGNMENT_BYTES};
pub use exec::{run_functional, ExecTrace, Executor, QueueKind, VmError};
pub use host::{bind_shapes, bind_shapes_from_inputs, eval_host, Bindings, LaunchPlan, ShapeMap};
pub use oracle::{reference_eval, OracleError, ORACLE_IDS};
pub use tensor::{TensorData, TensorError, TensorValue};
pub use timed::{run_timed, CostReport};
