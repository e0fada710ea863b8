//! Deterministic four-pass lowering from the DSL to the target IR.

pub mod passes;
pub mod pipeline;

pub use passes::{pass_alignment, pass_host, pass_kernel_compute, pass_kernel_init};
pub use pipeline::{
    identity_hook, run_pipeline, run_pipeline_partial, PassRecord, PassTrace, PipelineError,
    RepairHook, DEFAULT_MAX_REPAIRS,
};
