//! Staging discipline: primitive placement per block kind, stream-buffer
//! role rules, and FIFO produce/consume ordering.
//!
//! These checks are purely syntactic over block kinds: they never evaluate
//! expressions, so permuting a compute block's interior or changing shapes
//! cannot change the verdict.

use crate::ast::*;
use crate::diag::{rules, Diagnostic};
use crate::semantic::symbols::{resolve, SymKind, SymbolTable};
use std::collections::BTreeMap;

pub fn check_staging(program: &Program) -> Vec<Diagnostic> {
    let (table, mut diags) = resolve(program);
    if crate::diag::has_errors(&diags) {
        return diags;
    }
    diags.extend(check_staging_resolved(program, &table));
    diags
}

pub fn check_staging_resolved(program: &Program, table: &SymbolTable) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    check_placement(&program.kernel.body, None, table, &mut diags);
    let mut fifo = FifoScan {
        table,
        diags: &mut diags,
    };
    let mut state = BTreeMap::new();
    fifo.scan_stmts(&program.kernel.body, &mut state);
    diags
}

/// Placement, role, and GM-operand rules for every primitive call.
fn check_placement(
    stmts: &[Stmt],
    enclosing: Option<StageKind>,
    table: &SymbolTable,
    diags: &mut Vec<Diagnostic>,
) {
    for stmt in stmts {
        match stmt {
            Stmt::For { body, .. } => check_placement(body, enclosing, table, diags),
            Stmt::Stage(block) => check_placement(&block.stmts, Some(block.kind), table, diags),
            Stmt::Prim(call) => check_prim_placement(call, enclosing, table, diags),
            _ => {}
        }
    }
}

fn check_prim_placement(
    call: &PrimCall,
    enclosing: Option<StageKind>,
    table: &SymbolTable,
    diags: &mut Vec<Diagnostic>,
) {
    let place = |required: StageKind, rule: &str, diags: &mut Vec<Diagnostic>| -> bool {
        if enclosing != Some(required) {
            let where_ = match enclosing {
                Some(kind) => format!("inside a {} block", kind.keyword()),
                None => "outside any stage block".to_string(),
            };
            diags.push(Diagnostic::error(
                rule,
                call.span,
                format!(
                    "`{}` must occur inside a {} block, found {}",
                    call.op.name(),
                    required.keyword(),
                    where_
                ),
            ));
            false
        } else {
            true
        }
    };

    match call.op {
        PrimOp::CopyG2L => {
            if !place(StageKind::CopyIn, rules::STG_G2L_PLACE, diags) {
                return;
            }
            // Destination must be a stream_in buffer.
            if let Some(Arg::Slice(dst)) = call.args.first() {
                if let Some((_, role, _, _)) = table.buffer(&dst.base) {
                    if role != BufferRole::StreamIn {
                        diags.push(Diagnostic::error(
                            rules::STG_ROLE,
                            call.span,
                            format!(
                                "`copy_g2l` must fill a stream_in buffer; `{}` has role {}",
                                dst.base,
                                role.keyword()
                            ),
                        ));
                    }
                }
            }
        }
        PrimOp::CopyL2G => {
            if !place(StageKind::CopyOut, rules::STG_L2G_PLACE, diags) {
                return;
            }
            if let Some(Arg::Slice(src)) = call.args.get(1) {
                if let Some((_, role, _, _)) = table.buffer(&src.base) {
                    if role != BufferRole::StreamOut {
                        diags.push(Diagnostic::error(
                            rules::STG_ROLE,
                            call.span,
                            format!(
                                "`copy_l2g` must drain a stream_out buffer; `{}` has role {}",
                                src.base,
                                role.keyword()
                            ),
                        ));
                    }
                }
            }
        }
        op => {
            if !place(StageKind::Compute, rules::STG_COMPUTE_PLACE, diags) {
                return;
            }
            for (idx, arg) in call.args.iter().enumerate() {
                let slice = match arg {
                    Arg::Slice(s) => s,
                    _ => continue,
                };
                if table.kernel_tensor(&slice.base).is_some() {
                    diags.push(Diagnostic::error(
                        rules::STG_GM_IN_COMPUTE,
                        slice.span,
                        format!(
                            "global tensor `{}` cannot be accessed inside a compute block",
                            slice.base
                        ),
                    ));
                    continue;
                }
                if let Some((_, role, _, _)) = table.buffer(&slice.base) {
                    let is_write = idx == 0;
                    let legal = match role {
                        BufferRole::Temp => true,
                        // Produced by copyin, consumed (read-only) here.
                        BufferRole::StreamIn => !is_write,
                        // Built here; self-reads of the tile in flight are
                        // part of producing it.
                        BufferRole::StreamOut => true,
                    };
                    if !legal {
                        diags.push(Diagnostic::error(
                            rules::STG_ROLE,
                            slice.span,
                            format!(
                                "stream_in buffer `{}` is written only by `copy_g2l` in copyin blocks",
                                slice.base
                            ),
                        ));
                    }
                }
            }
            let _ = op;
        }
    }
}

/// Static FIFO discipline per stream buffer: tiles alternate produce →
/// consume, and loop bodies must be balanced.
struct FifoScan<'a> {
    table: &'a SymbolTable,
    diags: &'a mut Vec<Diagnostic>,
}

impl<'a> FifoScan<'a> {
    fn scan_stmts(&mut self, stmts: &[Stmt], state: &mut BTreeMap<String, bool>) {
        for stmt in stmts {
            match stmt {
                Stmt::Stage(block) => self.scan_block(block, state),
                Stmt::For { body, span, .. } => {
                    let before = state.clone();
                    self.scan_stmts(body, state);
                    // A missing entry means "not pending"; compare pending
                    // sets, not raw maps.
                    let changed: Vec<String> = state
                        .iter()
                        .filter(|(k, v)| before.get(*k).copied().unwrap_or(false) != **v)
                        .map(|(k, _)| k.clone())
                        .collect();
                    if !changed.is_empty() {
                        self.diags.push(Diagnostic::error(
                            rules::STG_USE_BEFORE_DEF,
                            *span,
                            format!(
                                "loop body leaves stream buffer(s) {} in flight; every tile produced in a loop iteration must be consumed in it",
                                changed.join(", ")
                            ),
                        ));
                        *state = before;
                    }
                }
                _ => {}
            }
        }
    }

    fn scan_block(&mut self, block: &StageBlock, state: &mut BTreeMap<String, bool>) {
        let (consumed, produced) = block_events(block, self.table);
        for name in consumed {
            let pending = state.entry(name.clone()).or_insert(false);
            if !*pending {
                self.diags.push(Diagnostic::error(
                    rules::STG_USE_BEFORE_DEF,
                    block.span,
                    format!(
                        "stage `{}` consumes stream buffer `{}` before any stage produced it",
                        block.label, name
                    ),
                ));
            } else {
                *pending = false;
            }
        }
        for name in produced {
            let pending = state.entry(name.clone()).or_insert(false);
            if *pending {
                self.diags.push(Diagnostic::error(
                    rules::STG_USE_BEFORE_DEF,
                    block.span,
                    format!(
                        "stage `{}` produces stream buffer `{}` again before the previous tile was consumed",
                        block.label, name
                    ),
                ));
            } else {
                *pending = true;
            }
        }
    }
}

/// (consumed, produced) stream buffers of one stage block instance, in
/// stable buffer-declaration order. Consumption happens at stage entry,
/// production at stage exit.
pub fn block_events(block: &StageBlock, table: &SymbolTable) -> (Vec<String>, Vec<String>) {
    let mut reads: Vec<(usize, String, BufferRole)> = Vec::new();
    let mut writes: Vec<(usize, String, BufferRole)> = Vec::new();
    collect_accesses(&block.stmts, table, &mut reads, &mut writes);

    let mut consumed = Vec::new();
    let mut produced = Vec::new();
    match block.kind {
        StageKind::CopyIn => {
            for (idx, name, role) in writes {
                if role == BufferRole::StreamIn && !produced.contains(&(idx, name.clone())) {
                    produced.push((idx, name));
                }
            }
        }
        StageKind::Compute => {
            for (idx, name, role) in reads {
                if role == BufferRole::StreamIn && !consumed.contains(&(idx, name.clone())) {
                    consumed.push((idx, name));
                }
            }
            for (idx, name, role) in writes {
                if role == BufferRole::StreamOut && !produced.contains(&(idx, name.clone())) {
                    produced.push((idx, name));
                }
            }
        }
        StageKind::CopyOut => {
            for (idx, name, role) in reads {
                if role == BufferRole::StreamOut && !consumed.contains(&(idx, name.clone())) {
                    consumed.push((idx, name));
                }
            }
        }
    }
    consumed.sort();
    produced.sort();
    (
        consumed.into_iter().map(|(_, n)| n).collect(),
        produced.into_iter().map(|(_, n)| n).collect(),
    )
}

fn collect_accesses(
    stmts: &[Stmt],
    table: &SymbolTable,
    reads: &mut Vec<(usize, String, BufferRole)>,
    writes: &mut Vec<(usize, String, BufferRole)>,
) {
    for stmt in stmts {
        match stmt {
            Stmt::For { body, .. } => collect_accesses(body, table, reads, writes),
            Stmt::Prim(call) => {
                for (pos, arg) in call.args.iter().enumerate() {
                    let slice = match arg {
                        Arg::Slice(s) => s,
                        _ => continue,
                    };
                    if let Some(sym) = table.kernel.get(&slice.base) {
                        if let SymKind::Buffer { index, role, .. } = &sym.kind {
                            if pos == 0 {
                                writes.push((*index, slice.base.clone(), *role));
                            } else {
                                reads.push((*index, slice.base.clone(), *role));
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn staging(src: &str) -> Vec<Diagnostic> {
        check_staging(&parse_program(src).expect("test source must parse"))
    }

    fn rule_ids(diags: &[Diagnostic]) -> Vec<String> {
        diags.iter().map(|d| d.rule_id.clone()).collect()
    }

    #[test]
    fn g2l_inside_compute_rejected() {
        let d = staging(
            "host h(x:[8]f32){launch k<1>(x)}
             kernel k(x){ alloc_ub b: f32[8] stream_in;
               compute c { copy_g2l(b[0:8], x[0:8]) } }",
        );
        assert_eq!(rule_ids(&d), vec!["STG-G2L-PLACE"]);
    }

    #[test]
    fn vadd_inside_copyout_rejected() {
        let d = staging(
            "host h(x:[8]f32){launch k<1>(x)}
             kernel k(x){ alloc_ub b: f32[8] temp;
               copyout o { vadd(b[0:8], b[0:8], b[0:8]) } }",
        );
        assert_eq!(rule_ids(&d), vec!["STG-COMPUTE-PLACE"]);
    }

    #[test]
    fn prim_outside_any_block_rejected() {
        let d = staging(
            "host h(x:[8]f32){launch k<1>(x)}
             kernel k(x){ alloc_ub b: f32[8] stream_in; copy_g2l(b[0:8], x[0:8]) }",
        );
        assert_eq!(rule_ids(&d), vec!["STG-G2L-PLACE"]);
    }

    #[test]
    fn gm_operand_in_compute_rejected() {
        let d = staging(
            "host h(x:[8]f32){launch k<1>(x)}
             kernel k(x){ alloc_ub b: f32[8] temp;
               compute c { vadd(b[0:8], x[0:8], b[0:8]) } }",
        );
        assert_eq!(rule_ids(&d), vec!["STG-GM-IN-COMPUTE"]);
    }

    #[test]
    fn compute_writing_stream_in_rejected() {
        let d = staging(
            "host h(x:[8]f32){launch k<1>(x)}
             kernel k(x){ alloc_ub b: f32[8] stream_in;
               copyin i { copy_g2l(b[0:8], x[0:8]) }
               compute c { vexp(b[0:8], b[0:8]) } }",
        );
        assert_eq!(rule_ids(&d), vec!["STG-ROLE"]);
    }

    #[test]
    fn consume_before_produce_rejected() {
        let d = staging(
            "host h(x:[8]f32, out y:[8]f32){launch k<1>(x, y)}
             kernel k(x, y){
               alloc_ub a: f32[8] stream_in;
               alloc_ub b: f32[8] stream_out;
               compute c { adds(b[0:8], a[0:8], 0.0) }
               copyin i { copy_g2l(a[0:8], x[0:8]) }
               copyout o { copy_l2g(y[0:8], b[0:8]) } }",
        );
        assert!(rule_ids(&d).contains(&"STG-USE-BEFORE-DEF".to_string()));
    }

    #[test]
    fn unbalanced_loop_body_rejected() {
        let d = staging(
            "host h(x:[8]f32){launch k<1>(x, 2)}
             kernel k(x, n){
               alloc_ub a: f32[4] stream_in;
               for i in 0..n { copyin i_in { copy_g2l(a[0:4], x[0:4]) } } }",
        );
        assert!(rule_ids(&d).contains(&"STG-USE-BEFORE-DEF".to_string()));
    }

    #[test]
    fn well_formed_pipeline_is_clean() {
        let d = staging(
            "host h(x:[R=16]f32, out y:[R=16]f32){
               launch k<2> over R (x, y, 2, R);
             }
             kernel k(x, y, nb, total){
               alloc_ub a: f32[8] stream_in;
               alloc_ub b: f32[8] stream_out;
               let my_off = chunk_off(total, nb, block_idx);
               let my_len = chunk_len(total, nb, block_idx);
               copyin i { copy_g2l(a[0:my_len], x[my_off:my_len]) }
               compute c { vrelu(b[0:my_len], a[0:my_len]) }
               copyout o { copy_l2g(y[my_off:my_len], b[0:my_len]) }
             }",
        );
        assert!(d.is_empty(), "unexpected diagnostics: {d:?}");
    }
}
