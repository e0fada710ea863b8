//! The four lowering passes, each owning one section of the target unit.
//!
//! Pass 1 translates the host side (tiling record, host statements, launch).
//! Pass 2 builds kernel init: block identity, scalar state, queue and buffer
//! setup with the configured depths. Pass 3 maps every stage block to one
//! stage function and mirrors the kernel's loop structure in Process. Pass 4
//! rewrites transfers whose alignment analysis flagged any unaligned
//! instance into padded copies.
//!
//! The DSL-to-target mapping is the frozen rule table in docs/mapping.md.

use crate::ast::*;
use crate::diag::Diagnostic;
use crate::semantic;
use crate::target::ir::*;
use crate::vm::config::NpuConfig;
use crate::vm::host::ShapeMap;

/// Pass 1: host-side translation.
pub fn pass_host(program: &Program) -> TargetUnit {
    let host = &program.host;
    let mut unit = TargetUnit {
        name: program.name.clone(),
        kernel_name: program.kernel.name.clone(),
        ..Default::default()
    };
    unit.params = host
        .params
        .iter()
        .map(|p| TargetParam {
            name: p.name.clone(),
            dims: p.dims.clone(),
            dtype: p.dtype,
            is_out: p.is_out,
        })
        .collect();
    unit.tiling_record = host
        .tiling
        .iter()
        .map(|t| TilingField {
            name: t.name.clone(),
        })
        .collect();
    // Declaration order is dependency order (checked by resolution).
    unit.host_stmts = host
        .tiling
        .iter()
        .map(|t| HostStmt::SetField {
            field: t.name.clone(),
            expr: t.expr.clone(),
        })
        .collect();
    unit.launch = Some(LaunchSpec {
        num_blocks: host.launch.num_blocks.clone(),
        workload: host.launch.workload.clone(),
        args: host
            .launch
            .args
            .iter()
            .map(|arg| match arg {
                LaunchArg::Tensor(name, _) => TargetLaunchArg::Tensor(name.clone()),
                LaunchArg::Scalar(expr) => TargetLaunchArg::Scalar(expr.clone()),
            })
            .collect(),
    });
    unit
}

/// Pass 2: kernel initialization (block identity, state, queues, buffers).
pub fn pass_kernel_init(program: &Program, mut unit: TargetUnit, cfg: &NpuConfig) -> TargetUnit {
    let kernel = &program.kernel;
    unit.kernel_state.push(StateField {
        name: "block_idx".into(),
        kind: StateKind::BlockIdx,
    });
    unit.init_stmts.push(InitStmt::GetBlockIdx);

    // Scalar launch arguments become kernel member state.
    for (index, (name, _)) in kernel.params.iter().enumerate() {
        let is_scalar = matches!(
            program.host.launch.args.get(index),
            Some(LaunchArg::Scalar(_))
        );
        if is_scalar {
            unit.kernel_state.push(StateField {
                name: name.clone(),
                kind: StateKind::ScalarArg,
            });
            unit.init_stmts.push(InitStmt::BindArg {
                name: name.clone(),
                index,
            });
        }
    }

    // Top-level scalar bindings (per-block offsets) move into init.
    for stmt in &kernel.body {
        if let Stmt::Let { name, expr, .. } = stmt {
            unit.kernel_state.push(StateField {
                name: name.clone(),
                kind: StateKind::Derived,
            });
            unit.init_stmts.push(InitStmt::SetState {
                name: name.clone(),
                expr: expr.clone(),
            });
        }
    }

    // Buffer mapping: stream_in -> input queue (VECIN, configured depth),
    // stream_out -> output queue (VECOUT), temp -> plain buffer.
    for buf in &kernel.buffers {
        match buf.role {
            BufferRole::StreamIn => unit.init_stmts.push(InitStmt::InitQueue {
                queue: format!("q_{}", buf.name),
                buffer: buf.name.clone(),
                dtype: buf.dtype,
                position: QueuePos::VecIn,
                depth: cfg.queue_depth_in,
                capacity: buf.capacity.clone(),
            }),
            BufferRole::StreamOut => unit.init_stmts.push(InitStmt::InitQueue {
                queue: format!("q_{}", buf.name),
                buffer: buf.name.clone(),
                dtype: buf.dtype,
                position: QueuePos::VecOut,
                depth: cfg.queue_depth_out,
                capacity: buf.capacity.clone(),
            }),
            BufferRole::Temp => unit.init_stmts.push(InitStmt::InitTBuf {
                buffer: buf.name.clone(),
                dtype: buf.dtype,
                space: buf.space,
                capacity: buf.capacity.clone(),
            }),
        }
    }
    unit
}

/// Pass 3: kernel computation translation.
pub fn pass_kernel_compute(program: &Program, mut unit: TargetUnit) -> TargetUnit {
    let table = match semantic::resolve_symbols(program) {
        Ok(t) => t,
        Err(_) => return unit, // pipeline preconditions guarantee resolution
    };
    let mut fns = Vec::new();
    let mut process = Vec::new();
    lower_stmts(
        program,
        &table,
        &program.kernel.body,
        &mut Vec::new(),
        &mut fns,
        &mut process,
    );
    unit.stage_fns = fns;
    unit.process_body = process;
    unit
}

fn lower_stmts(
    program: &Program,
    table: &semantic::SymbolTable,
    stmts: &[Stmt],
    loop_vars: &mut Vec<String>,
    fns: &mut Vec<StageFn>,
    process: &mut Vec<ProcessStmt>,
) {
    for stmt in stmts {
        match stmt {
            Stmt::Let { .. } => {} // owned by pass 2
            Stmt::Sync { .. } => process.push(ProcessStmt::SyncAll),
            Stmt::For {
                var, bound, body, ..
            } => {
                let mut inner = Vec::new();
                loop_vars.push(var.clone());
                lower_stmts(program, table, body, loop_vars, fns, &mut inner);
                loop_vars.pop();
                process.push(ProcessStmt::For {
                    var: var.clone(),
                    bound: bound.clone(),
                    body: inner,
                });
            }
            Stmt::Stage(block) => {
                let func = lower_stage_block(table, block, loop_vars);
                process.push(ProcessStmt::Call {
                    fn_name: func.name.clone(),
                    args: loop_vars.clone(),
                });
                fns.push(func);
            }
            Stmt::Prim(_) => {
                // Unreachable on checked programs: placement rules forbid
                // primitives outside stage blocks.
            }
        }
    }
}

fn lower_stage_block(
    table: &semantic::SymbolTable,
    block: &StageBlock,
    loop_vars: &[String],
) -> StageFn {
    let (consumed, produced) = semantic::block_events(block, table);
    let mut body = Vec::new();
    // All required inputs are dequeued at the beginning of the function.
    for buf in &consumed {
        body.push(TargetInstr::DeQue {
            queue: format!("q_{buf}"),
        });
    }
    lower_block_stmts(table, &block.stmts, &mut body);
    // Results destined for later stages are enqueued at the end.
    for buf in &produced {
        body.push(TargetInstr::EnQue {
            queue: format!("q_{buf}"),
        });
    }
    StageFn {
        kind: block.kind,
        name: stage_fn_name(block.kind, &block.label),
        params: loop_vars.to_vec(),
        body,
    }
}

fn lower_block_stmts(
    table: &semantic::SymbolTable,
    stmts: &[Stmt],
    out: &mut Vec<TargetInstr>,
) {
    for stmt in stmts {
        match stmt {
            Stmt::Let { name, expr, .. } => out.push(TargetInstr::SetScalar {
                name: name.clone(),
                expr: expr.clone(),
            }),
            Stmt::For {
                var, bound, body, ..
            } => {
                let mut inner = Vec::new();
                lower_block_stmts(table, body, &mut inner);
                out.push(TargetInstr::For {
                    var: var.clone(),
                    bound: bound.clone(),
                    body: inner,
                });
            }
            Stmt::Prim(call) => lower_prim(call, out),
            Stmt::Stage(_) | Stmt::Sync { .. } => {
                // Grammar rules out nested stages and in-block syncs.
            }
        }
    }
}

fn slice_of(arg: &Arg) -> (&SliceRef, LocalRef) {
    match arg {
        Arg::Slice(s) => (
            s,
            LocalRef {
                buffer: s.base.clone(),
                offset: s.offset.clone(),
            },
        ),
        _ => unreachable!("signature-checked operand"),
    }
}

/// The frozen primitive mapping table (docs/mapping.md).
fn lower_prim(call: &PrimCall, out: &mut Vec<TargetInstr>) {
    match call.op {
        PrimOp::CopyG2L | PrimOp::CopyL2G => {
            let inbound = call.op == PrimOp::CopyG2L;
            let (gm_pos, local_pos) = if inbound { (1, 0) } else { (0, 1) };
            let (gm_slice, _) = slice_of(&call.args[gm_pos]);
            let (local_slice, local) = slice_of(&call.args[local_pos]);
            let count = gm_slice.count.clone();
            let (rows, stride) = if call.args.len() == 4 {
                let rows = match &call.args[2] {
                    Arg::Int(e) => e.clone(),
                    _ => unreachable!(),
                };
                let stride = match &call.args[3] {
                    Arg::Int(e) => e.clone(),
                    _ => unreachable!(),
                };
                (rows, stride)
            } else {
                (IntExpr::lit(1), count.clone())
            };
            let _ = local_slice;
            out.push(TargetInstr::DataCopy {
                dir: if inbound {
                    TransferDir::GlobalToLocal
                } else {
                    TransferDir::LocalToGlobal
                },
                gm: GmRef {
                    tensor: gm_slice.base.clone(),
                    offset: gm_slice.offset.clone(),
                },
                local,
                count,
                rows,
                stride,
                site: call.span,
            });
        }
        op => {
            let (dst_slice, dst) = slice_of(&call.args[0]);
            let mut srcs = Vec::new();
            let mut imm = None;
            for arg in &call.args[1..] {
                match arg {
                    Arg::Slice(s) => srcs.push(LocalRef {
                        buffer: s.base.clone(),
                        offset: s.offset.clone(),
                    }),
                    Arg::Float(f) => imm = Some(f.clone()),
                    Arg::Int(_) => {}
                }
            }
            let (vop, count) = match op {
                PrimOp::VAdd => (VecOp::Add, dst_slice.count.clone()),
                PrimOp::VSub => (VecOp::Sub, dst_slice.count.clone()),
                PrimOp::VMul => (VecOp::Mul, dst_slice.count.clone()),
                PrimOp::VDiv => (VecOp::Div, dst_slice.count.clone()),
                PrimOp::VMax => (VecOp::Max, dst_slice.count.clone()),
                PrimOp::VMin => (VecOp::Min, dst_slice.count.clone()),
                PrimOp::VExp => (VecOp::Exp, dst_slice.count.clone()),
                PrimOp::VLn => (VecOp::Ln, dst_slice.count.clone()),
                PrimOp::VAbs => (VecOp::Abs, dst_slice.count.clone()),
                PrimOp::VRelu => (VecOp::Relu, dst_slice.count.clone()),
                PrimOp::Adds => (VecOp::Adds, dst_slice.count.clone()),
                PrimOp::Muls => (VecOp::Muls, dst_slice.count.clone()),
                PrimOp::Maxs => (VecOp::Maxs, dst_slice.count.clone()),
                PrimOp::VSel => (VecOp::Select, dst_slice.count.clone()),
                // Reductions carry the source count.
                PrimOp::ReduceSum => (
                    VecOp::ReduceSum,
                    match &call.args[1] {
                        Arg::Slice(s) => s.count.clone(),
                        _ => unreachable!(),
                    },
                ),
                PrimOp::ReduceMax => (
                    VecOp::ReduceMax,
                    match &call.args[1] {
                        Arg::Slice(s) => s.count.clone(),
                        _ => unreachable!(),
                    },
                ),
                PrimOp::Broadcast => (VecOp::Broadcast, dst_slice.count.clone()),
                PrimOp::Memset => (VecOp::Duplicate, dst_slice.count.clone()),
                PrimOp::Cast => (VecOp::Cast, dst_slice.count.clone()),
                PrimOp::CopyG2L | PrimOp::CopyL2G => unreachable!(),
            };
            out.push(TargetInstr::Vector {
                op: vop,
                dst,
                srcs,
                imm,
                count,
            });
        }
    }
}

/// Pass 4: alignment and padding refinement. Rewrites every transfer whose
/// alignment report shows an unaligned instance into a padded copy; a no-op
/// when everything is aligned. Idempotent.
pub fn pass_alignment(
    program: &Program,
    mut unit: TargetUnit,
    cfg: &NpuConfig,
) -> Result<TargetUnit, Vec<Diagnostic>> {
    pass_alignment_at(program, &mut unit, cfg, &ShapeMap::new())?;
    Ok(unit)
}

pub fn pass_alignment_at(
    program: &Program,
    unit: &mut TargetUnit,
    cfg: &NpuConfig,
    shapes: &ShapeMap,
) -> Result<(), Vec<Diagnostic>> {
    let report = semantic::analyze_alignment_at(program, cfg, shapes)?;
    let unaligned = report.unaligned_sites();
    if unaligned.is_empty() {
        return Ok(());
    }
    for func in &mut unit.stage_fns {
        rewrite_instrs(&mut func.body, &unaligned);
    }
    Ok(())
}

fn rewrite_instrs(body: &mut Vec<TargetInstr>, unaligned: &std::collections::BTreeSet<usize>) {
    for instr in body.iter_mut() {
        match instr {
            TargetInstr::For { body, .. } => rewrite_instrs(body, unaligned),
            TargetInstr::DataCopy {
                dir,
                gm,
                local,
                count,
                rows,
                stride,
                site,
            } if unaligned.contains(&site.offset) => {
                *instr = TargetInstr::DataCopyPad {
                    dir: *dir,
                    gm: gm.clone(),
                    local: local.clone(),
                    count: count.clone(),
                    rows: rows.clone(),
                    stride: stride.clone(),
                    site: *site,
                };
            }
            _ => {}
        }
    }
}
