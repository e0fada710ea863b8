//! Static enumeration of every dynamic buffer and global-memory access.
//!
//! Loops are counted and every scalar is known once shapes are bound, so the
//! walker evaluates the kernel's control flow concretely — touching no
//! tensor data — and records each access for the capacity, tiling-coverage,
//! and alignment checks.

use crate::ast::*;
use crate::diag::{rules, Diagnostic, Span};
use crate::eval::{eval_int, Env, EvalError};
use crate::semantic::symbols::SymbolTable;
use crate::vm::host::LaunchPlan;

/// Hard cap on enumerated primitive instances, to keep analysis of
/// pathological shape bindings from running away.
const MAX_INSTANCES: usize = 16_000_000;

#[derive(Debug, Clone)]
pub struct LocalAccess {
    pub buffer: String,
    pub offset: i64,
    pub count: i64,
    pub write: bool,
    pub block_id: i64,
    pub site: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopyDir {
    GlobalToLocal,
    LocalToGlobal,
}

#[derive(Debug, Clone)]
pub struct GmAccess {
    pub tensor: String,
    /// Element offset of the first row.
    pub offset: i64,
    /// Elements per row.
    pub count: i64,
    pub rows: i64,
    /// Row stride in elements (equals `count` for dense transfers).
    pub stride: i64,
    pub dir: CopyDir,
    pub dtype: Dtype,
    pub block_id: i64,
    pub stage_label: String,
    pub site: Span,
}

impl GmAccess {
    pub fn is_write(&self) -> bool {
        self.dir == CopyDir::LocalToGlobal
    }
}

#[derive(Debug, Default)]
pub struct AccessSets {
    pub local: Vec<LocalAccess>,
    pub gm: Vec<GmAccess>,
}

pub fn enumerate_accesses(
    program: &Program,
    table: &SymbolTable,
    plan: &LaunchPlan,
) -> Result<AccessSets, Vec<Diagnostic>> {
    let mut walker = Walker {
        table,
        sets: AccessSets::default(),
        diags: Vec::new(),
        instances: 0,
    };
    for block_id in 0..plan.num_blocks {
        let mut env = plan.block_env(block_id);
        walker.walk_stmts(&program.kernel.body, &mut env, block_id, "");
        if !walker.diags.is_empty() {
            return Err(walker.diags);
        }
    }
    Ok(walker.sets)
}

struct Walker<'a> {
    table: &'a SymbolTable,
    sets: AccessSets,
    diags: Vec<Diagnostic>,
    instances: usize,
}

impl<'a> Walker<'a> {
    fn fault(&mut self, err: EvalError) {
        self.diags.push(Diagnostic::error(
            rules::TIL_NONPOS,
            err.span(),
            err.message(),
        ));
    }

    fn eval(&mut self, expr: &IntExpr, env: &Env) -> Option<i64> {
        match eval_int(expr, env) {
            Ok(v) => Some(v),
            Err(e) => {
                self.fault(e);
                None
            }
        }
    }

    fn walk_stmts(&mut self, stmts: &[Stmt], env: &mut Env, block_id: i64, label: &str) {
        for stmt in stmts {
            if !self.diags.is_empty() {
                return;
            }
            match stmt {
                Stmt::Let { name, expr, .. } => {
                    if let Some(v) = self.eval(expr, env) {
                        env.bind(name, v);
                    }
                }
                Stmt::For {
                    var, bound, body, ..
                } => {
                    let bound = match self.eval(bound, env) {
                        Some(v) => v,
                        None => return,
                    };
                    // Non-positive bounds mean zero iterations.
                    for i in 0..bound.max(0) {
                        env.bind(var, i);
                        self.walk_stmts(body, env, block_id, label);
                        if !self.diags.is_empty() {
                            return;
                        }
                    }
                    env.unbind(var);
                }
                Stmt::Stage(block) => {
                    self.walk_stmts(&block.stmts, env, block_id, &block.label);
                }
                Stmt::Sync { .. } => {}
                Stmt::Prim(call) => self.record_prim(call, env, block_id, label),
            }
        }
    }

    fn slice_parts(&mut self, slice: &SliceRef, env: &Env) -> Option<(i64, i64)> {
        let off = self.eval(&slice.offset, env)?;
        let count = self.eval(&slice.count, env)?;
        if count < 0 {
            self.diags.push(Diagnostic::error(
                rules::BUF_SLICE_OOB,
                slice.span,
                format!("slice count evaluates to {count}; must be non-negative"),
            ));
            return None;
        }
        Some((off, count))
    }

    fn record_prim(&mut self, call: &PrimCall, env: &Env, block_id: i64, label: &str) {
        self.instances += 1;
        if self.instances > MAX_INSTANCES {
            self.diags.push(Diagnostic::error(
                rules::SEM_SHAPE,
                call.span,
                "static analysis budget exceeded at this shape; reduce the shape bindings",
            ));
            return;
        }
        match call.op {
            PrimOp::CopyG2L | PrimOp::CopyL2G => self.record_copy(call, env, block_id, label),
            op => self.record_compute(call, op, env, block_id),
        }
    }

    fn record_copy(&mut self, call: &PrimCall, env: &Env, block_id: i64, label: &str) {
        let (gm_pos, local_pos, dir) = match call.op {
            PrimOp::CopyG2L => (1usize, 0usize, CopyDir::GlobalToLocal),
            _ => (0, 1, CopyDir::LocalToGlobal),
        };
        let gm_slice = match &call.args[gm_pos] {
            Arg::Slice(s) => s,
            _ => return,
        };
        let local_slice = match &call.args[local_pos] {
            Arg::Slice(s) => s,
            _ => return,
        };
        let (gm_off, gm_count) = match self.slice_parts(gm_slice, env) {
            Some(v) => v,
            None => return,
        };
        let (local_off, local_count) = match self.slice_parts(local_slice, env) {
            Some(v) => v,
            None => return,
        };
        if gm_count != local_count {
            self.diags.push(Diagnostic::error(
                rules::BUF_SLICE_OOB,
                call.span,
                format!(
                    "copy sides disagree on element count ({gm_count} vs {local_count})"
                ),
            ));
            return;
        }
        let (rows, stride) = if call.args.len() == 4 {
            let rows = match &call.args[2] {
                Arg::Int(e) => match self.eval(e, env) {
                    Some(v) => v,
                    None => return,
                },
                _ => return,
            };
            let stride = match &call.args[3] {
                Arg::Int(e) => match self.eval(e, env) {
                    Some(v) => v,
                    None => return,
                },
                _ => return,
            };
            if rows < 0 {
                self.diags.push(Diagnostic::error(
                    rules::BUF_SLICE_OOB,
                    call.span,
                    format!("copy row count evaluates to {rows}; must be non-negative"),
                ));
                return;
            }
            if rows > 1 && stride < gm_count {
                self.diags.push(Diagnostic::error(
                    rules::BUF_SLICE_OOB,
                    call.span,
                    format!(
                        "copy row stride {stride} is smaller than the per-row count {gm_count}"
                    ),
                ));
                return;
            }
            (rows, stride)
        } else {
            (1, gm_count)
        };
        // Zero-sized transfers are no-ops and leave no trace.
        if gm_count == 0 || rows == 0 {
            return;
        }
        let dtype = self
            .table
            .kernel_tensor(&gm_slice.base)
            .map(|(d, _, _)| d)
            .unwrap_or(Dtype::F32);
        // The local side is always dense: rows*count elements.
        self.sets.local.push(LocalAccess {
            buffer: local_slice.base.clone(),
            offset: local_off,
            count: rows * gm_count,
            write: dir == CopyDir::GlobalToLocal,
            block_id,
            site: local_slice.span,
        });
        self.sets.gm.push(GmAccess {
            tensor: gm_slice.base.clone(),
            offset: gm_off,
            count: gm_count,
            rows,
            stride,
            dir,
            dtype,
            block_id,
            stage_label: label.to_string(),
            site: call.span,
        });
    }

    fn record_compute(&mut self, call: &PrimCall, op: PrimOp, env: &Env, block_id: i64) {
        let mut slices: Vec<(usize, &SliceRef, i64, i64)> = Vec::new();
        for (pos, arg) in call.args.iter().enumerate() {
            if let Arg::Slice(s) = arg {
                match self.slice_parts(s, env) {
                    Some((off, count)) => slices.push((pos, s, off, count)),
                    None => return,
                }
            }
        }
        // Single-element contract for reduction outputs and broadcast inputs.
        match op {
            PrimOp::ReduceSum | PrimOp::ReduceMax => {
                if let Some((_, s, _, count)) = slices.first() {
                    if *count != 1 {
                        self.diags.push(Diagnostic::error(
                            rules::SEM_KIND,
                            s.span,
                            format!("`{}` destination must be a 1-element slice", op.name()),
                        ));
                        return;
                    }
                }
            }
            PrimOp::Broadcast => {
                if let Some((_, s, _, count)) = slices.get(1) {
                    if *count != 1 {
                        self.diags.push(Diagnostic::error(
                            rules::SEM_KIND,
                            s.span,
                            format!("`{}` source must be a 1-element slice", op.name()),
                        ));
                        return;
                    }
                }
            }
            _ => {
                // Elementwise ops require equal counts across slice operands.
                if let Some((_, _, _, first)) = slices.first() {
                    if op != PrimOp::Memset
                        && slices.iter().any(|(_, _, _, c)| c != first)
                        && !matches!(op, PrimOp::ReduceSum | PrimOp::ReduceMax | PrimOp::Broadcast)
                    {
                        self.diags.push(Diagnostic::error(
                            rules::BUF_SLICE_OOB,
                            call.span,
                            format!(
                                "`{}` operand slices must have equal element counts",
                                op.name()
                            ),
                        ));
                        return;
                    }
                }
            }
        }
        for (pos, s, off, count) in slices {
            if count == 0 {
                continue;
            }
            if self.table.buffer(&s.base).is_none() {
                continue;
            }
            self.sets.local.push(LocalAccess {
                buffer: s.base.clone(),
                offset: off,
                count,
                write: pos == 0,
                block_id,
                site: s.span,
            });
        }
    }
}
