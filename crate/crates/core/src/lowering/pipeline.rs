//! The four-pass lowering pipeline with per-pass structural gates and a
//! pluggable repair hook.
//!
//! After each pass the partial unit must pass `check_structure` (plus, after
//! pass 4, the transfer-alignment re-analysis). Gate failures invoke the
//! hook up to `max_repairs` times; the default hook is the identity, so a
//! gate failure surfaces as a pipeline error. The trace records every gate
//! outcome.

use crate::ast::Program;
use crate::diag::{rules, Diagnostic, Span};
use crate::lowering::passes;
use crate::semantic;
use crate::target::{self, TargetUnit};
use crate::vm::config::NpuConfig;
use crate::vm::host::ShapeMap;
use serde::Serialize;

pub const DEFAULT_MAX_REPAIRS: u32 = 3;

/// An injectable transformer applied when a gate fails, standing in for an
/// external correction loop.
pub type RepairHook<'h> = &'h dyn Fn(TargetUnit, &[Diagnostic]) -> TargetUnit;

/// The identity hook: gate failures abort the pipeline.
pub fn identity_hook() -> impl Fn(TargetUnit, &[Diagnostic]) -> TargetUnit {
    |unit, _| unit
}

#[derive(Debug, Clone, Serialize)]
pub struct PassRecord {
    pub pass_id: u8,
    pub diagnostics_before: Vec<Diagnostic>,
    pub diagnostics_after: Vec<Diagnostic>,
    pub repair_attempts: u32,
    pub accepted: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PassTrace {
    pub records: Vec<PassRecord>,
}

impl PassTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn accepted_passes(&self) -> usize {
        self.records.iter().filter(|r| r.accepted).count()
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub pass_id: u8,
    pub diagnostics: Vec<Diagnostic>,
    pub trace: PassTrace,
}

impl std::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "lowering aborted at pass {}: {}",
            self.pass_id,
            self.diagnostics
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )
    }
}

impl std::error::Error for PipelineError {}

/// Run passes 1..4 with gates, stopping after `stop_after` when given.
/// Programs must already satisfy the semantic suite; this re-checks to keep
/// the entry point total.
pub fn run_pipeline(
    program: &Program,
    cfg: &NpuConfig,
    hook: RepairHook,
    max_repairs: u32,
) -> Result<(TargetUnit, PassTrace), PipelineError> {
    run_pipeline_partial(program, cfg, hook, max_repairs, 4, &ShapeMap::new())
}

pub fn run_pipeline_partial(
    program: &Program,
    cfg: &NpuConfig,
    hook: RepairHook,
    max_repairs: u32,
    stop_after: u8,
    shapes: &ShapeMap,
) -> Result<(TargetUnit, PassTrace), PipelineError> {
    let mut trace = PassTrace::default();

    if let Err(diags) = semantic::check_program(program, cfg, shapes) {
        return Err(PipelineError {
            pass_id: 0,
            diagnostics: diags,
            trace,
        });
    }

    let mut unit = TargetUnit::default();
    for pass_id in 1..=stop_after.clamp(1, 4) {
        unit = match pass_id {
            1 => passes::pass_host(program),
            2 => passes::pass_kernel_init(program, unit, cfg),
            3 => passes::pass_kernel_compute(program, unit),
            4 => match passes::pass_alignment(program, unit, cfg) {
                Ok(u) => u,
                Err(diags) => {
                    return Err(PipelineError {
                        pass_id,
                        diagnostics: diags,
                        trace,
                    });
                }
            },
            _ => unreachable!(),
        };

        let gate = |unit: &TargetUnit| -> Vec<Diagnostic> {
            let mut diags = target::check_structure(unit);
            if pass_id == 4 {
                match target::scan_transfers(unit, shapes, cfg) {
                    Ok(records) => {
                        if !target::all_plain_transfers_aligned(&records) {
                            diags.push(Diagnostic::error(
                                rules::TGT_ALIGN,
                                Span::default(),
                                "unaligned plain transfers remain after the alignment pass",
                            ));
                        }
                    }
                    Err(e) => diags.push(Diagnostic::error(
                        rules::TGT_ALIGN,
                        Span::default(),
                        format!("alignment re-analysis failed: {e}"),
                    )),
                }
            }
            diags
        };

        let before = gate(&unit);
        let mut after = before.clone();
        let mut attempts = 0u32;
        while !after.is_empty() && attempts < max_repairs {
            unit = hook(unit, &after);
            attempts += 1;
            after = gate(&unit);
        }
        let accepted = after.is_empty();
        trace.records.push(PassRecord {
            pass_id,
            diagnostics_before: before,
            diagnostics_after: after.clone(),
            repair_attempts: attempts,
            accepted,
        });
        if !accepted {
            return Err(PipelineError {
                pass_id,
                diagnostics: after,
                trace,
            });
        }
    }

    Ok((unit, trace))
}
