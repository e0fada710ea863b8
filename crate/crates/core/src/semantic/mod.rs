//! Semantic rule suite: name resolution, staging discipline, buffer
//! legality, tiling coverage, and transfer alignment.
//!
//! `check_program` runs the whole suite and is the gate every simulator and
//! lowering entry point requires. The individual checks are also exposed,
//! each total over a parsed program.

mod checks;
mod staging;
mod symbols;
mod walk;

pub use checks::{
    alignment_is_ok, build_alignment_report, AlignRecord, AlignmentReport, TilingSummary,
};
pub use staging::{block_events, check_staging};
pub use symbols::{resolve_symbols, SymKind, Symbol, SymbolTable, RESERVED};
pub use walk::{enumerate_accesses, AccessSets, CopyDir, GmAccess, LocalAccess};

use crate::ast::Program;
use crate::diag::{has_errors, rules, Diagnostic};
use crate::vm::config::NpuConfig;
use crate::vm::host::{bind_shapes, eval_host_bound, Bindings, LaunchPlan, ShapeMap};
use std::collections::BTreeMap;

/// Result of the full semantic suite at one shape binding.
#[derive(Debug)]
pub struct Analysis {
    pub table: SymbolTable,
    pub bindings: Bindings,
    pub plan: LaunchPlan,
    pub buffer_capacities: BTreeMap<String, i64>,
    pub tiling: TilingSummary,
    pub alignment: AlignmentReport,
    pub accesses: AccessSets,
    pub warnings: Vec<Diagnostic>,
}

/// Run every semantic check at the given shape binding (defaults when the
/// map is empty). Errors abort with all diagnostics collected so far;
/// warnings ride along on success.
pub fn check_program(
    program: &Program,
    cfg: &NpuConfig,
    shapes: &ShapeMap,
) -> Result<Analysis, Vec<Diagnostic>> {
    let table = resolve_symbols(program)?;

    let staging = staging::check_staging_resolved(program, &table);
    if has_errors(&staging) {
        return Err(staging);
    }

    let bindings = bind_shapes(program, shapes)?;
    let plan = eval_host_bound(program, &bindings)?;
    let buffer_capacities = checks::buffer_capacities(program, &plan)?;

    let mut errors = checks::check_capacity_totals(program, &buffer_capacities, cfg);
    let accesses = match enumerate_accesses(program, &table, &plan) {
        Ok(sets) => sets,
        Err(mut diags) => {
            errors.append(&mut diags);
            return Err(errors);
        }
    };
    errors.extend(checks::check_slice_bounds(
        &accesses,
        &buffer_capacities,
        &bindings,
        &table,
    ));
    errors.extend(checks::check_coverage(program, &accesses, &bindings, &table));
    if has_errors(&errors) {
        return Err(errors);
    }

    let mut warnings = errors; // only warnings remain
    warnings.extend(staging);
    if plan.num_blocks > cfg.num_cores as i64 {
        warnings.push(Diagnostic::warning(
            rules::TIL_BLOCKS_OVER_CORES,
            program.host.launch.span,
            format!(
                "launch uses {} blocks on {} cores; excess blocks serialize",
                plan.num_blocks, cfg.num_cores
            ),
        ));
    }

    let alignment = build_alignment_report(&accesses.gm, cfg);
    let tiling = TilingSummary {
        num_blocks: plan.num_blocks,
        workload: plan.workload,
        tiling_values: plan.tiling_values.clone(),
        per_block_ranges: plan.per_block_ranges.clone(),
        warnings: warnings.clone(),
    };

    Ok(Analysis {
        table,
        bindings,
        plan,
        buffer_capacities,
        tiling,
        alignment,
        accesses,
        warnings,
    })
}

/// Buffer-capacity and slice-bounds checks at the program's declared shapes.
pub fn check_buffers(program: &Program, cfg: &NpuConfig) -> Vec<Diagnostic> {
    check_buffers_at(program, cfg, &ShapeMap::new())
}

pub fn check_buffers_at(program: &Program, cfg: &NpuConfig, shapes: &ShapeMap) -> Vec<Diagnostic> {
    let table = match resolve_symbols(program) {
        Ok(t) => t,
        Err(d) => return d,
    };
    let bindings = match bind_shapes(program, shapes) {
        Ok(b) => b,
        Err(d) => return d,
    };
    let plan = match eval_host_bound(program, &bindings) {
        Ok(p) => p,
        Err(d) => return d,
    };
    let caps = match checks::buffer_capacities(program, &plan) {
        Ok(c) => c,
        Err(d) => return d,
    };
    let mut diags = checks::check_capacity_totals(program, &caps, cfg);
    match enumerate_accesses(program, &table, &plan) {
        Ok(sets) => {
            diags.extend(checks::check_slice_bounds(&sets, &caps, &bindings, &table));
        }
        Err(mut d) => diags.append(&mut d),
    }
    diags
}

/// Tiling evaluation plus write-coverage verification at the declared
/// shapes. Warnings (e.g. more blocks than cores) ride on the summary.
pub fn check_tiling(program: &Program, cfg: &NpuConfig) -> Result<TilingSummary, Vec<Diagnostic>> {
    check_tiling_at(program, cfg, &ShapeMap::new())
}

pub fn check_tiling_at(
    program: &Program,
    cfg: &NpuConfig,
    shapes: &ShapeMap,
) -> Result<TilingSummary, Vec<Diagnostic>> {
    let table = resolve_symbols(program)?;
    let bindings = bind_shapes(program, shapes)?;
    let plan = eval_host_bound(program, &bindings)?;
    let sets = enumerate_accesses(program, &table, &plan)?;
    let coverage = checks::check_coverage(program, &sets, &bindings, &table);
    if has_errors(&coverage) {
        return Err(coverage);
    }
    let mut warnings = coverage;
    if plan.num_blocks > cfg.num_cores as i64 {
        warnings.push(Diagnostic::warning(
            rules::TIL_BLOCKS_OVER_CORES,
            program.host.launch.span,
            format!(
                "launch uses {} blocks on {} cores; excess blocks serialize",
                plan.num_blocks, cfg.num_cores
            ),
        ));
    }
    Ok(TilingSummary {
        num_blocks: plan.num_blocks,
        workload: plan.workload,
        tiling_values: plan.tiling_values,
        per_block_ranges: plan.per_block_ranges,
        warnings,
    })
}

/// One alignment record per transfer site per distinct (byte count, offset
/// class), at the declared shapes.
pub fn analyze_alignment(
    program: &Program,
    cfg: &NpuConfig,
) -> Result<AlignmentReport, Vec<Diagnostic>> {
    analyze_alignment_at(program, cfg, &ShapeMap::new())
}

pub fn analyze_alignment_at(
    program: &Program,
    cfg: &NpuConfig,
    shapes: &ShapeMap,
) -> Result<AlignmentReport, Vec<Diagnostic>> {
    let table = resolve_symbols(program)?;
    let bindings = bind_shapes(program, shapes)?;
    let plan = eval_host_bound(program, &bindings)?;
    let sets = enumerate_accesses(program, &table, &plan)?;
    Ok(build_alignment_report(&sets.gm, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn cfg() -> NpuConfig {
        NpuConfig::default()
    }

    #[test]
    fn ub_accounting_passes_within_budget() {
        // One f32 stream_in buffer of 8192 elems at depth 2: 65536 <= 196608.
        let p = parse_program(
            "host h(x:[R=16384]f32){launch k<1> over R (x, 8192)}
             kernel k(x, n){ alloc_ub b: f32[n] stream_in; }",
        )
        .unwrap();
        let diags = check_buffers(&p, &cfg());
        assert!(diags.is_empty(), "{diags:?}");
    }

    #[test]
    fn ub_overflow_detected() {
        // One f32 temp buffer of 65536 elems at depth 1: 262144 > 196608.
        let p = parse_program(
            "host h(x:[R=65536]f32){launch k<1> over R (x, 65536)}
             kernel k(x, n){ alloc_ub b: f32[n] temp; }",
        )
        .unwrap();
        let diags = check_buffers(&p, &cfg());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].rule_id, "BUF-UB-OVERFLOW");
        assert!(diags[0].message.contains("262144"));
        assert!(diags[0].message.contains("196608"));
    }

    #[test]
    fn slice_bounds_checked_at_edges() {
        let ok = parse_program(
            "host h(x:[32]f32){launch k<1>(x)}
             kernel k(x){ alloc_ub b: f32[32] stream_in;
               copyin c { copy_g2l(b[0:32], x[0:32]) } }",
        )
        .unwrap();
        assert!(check_buffers(&ok, &cfg()).is_empty());

        let oob = parse_program(
            "host h(x:[33]f32){launch k<1>(x)}
             kernel k(x){ alloc_ub b: f32[32] stream_in;
               copyin c { copy_g2l(b[1:32], x[1:32]) } }",
        )
        .unwrap();
        let diags = check_buffers(&oob, &cfg());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].rule_id, "BUF-SLICE-OOB");
    }

    const SPLIT: &str = "host h(x:[R=1024]f32, out y:[R=1024]f32){
        launch k<8> over R (x, y, 8, R);
    }
    kernel k(x, y, nb, total){
        alloc_ub a: f32[256] stream_in;
        alloc_ub b: f32[256] stream_out;
        let off = chunk_off(total, nb, block_idx);
        let len = chunk_len(total, nb, block_idx);
        copyin i { copy_g2l(a[0:len], x[off:len]) }
        compute c { vrelu(b[0:len], a[0:len]) }
        copyout o { copy_l2g(y[off:len], b[0:len]) }
    }";

    #[test]
    fn coverage_partitions_exactly() {
        let p = parse_program(SPLIT).unwrap();
        let summary = check_tiling(&p, &cfg()).unwrap();
        assert_eq!(summary.num_blocks, 8);
        assert_eq!(summary.per_block_ranges[0], (0, 128));
        assert!(summary.warnings.is_empty());
    }

    #[test]
    fn gap_detected_when_block_skips_elements() {
        let src = SPLIT.replace("copy_l2g(y[off:len], b[0:len])", "copy_l2g(y[off:len-1], b[0:len-1])");
        let p = parse_program(&src).unwrap();
        let err = check_tiling(&p, &cfg()).unwrap_err();
        assert!(err.iter().any(|d| d.rule_id == "TIL-GAP"));
    }

    #[test]
    fn overlap_detected_when_all_blocks_write_everything() {
        let src = SPLIT
            .replace("copy_l2g(y[off:len], b[0:len])", "copy_l2g(y[0:total], b[0:total])")
            .replace("alloc_ub b: f32[256] stream_out", "alloc_ub b: f32[1024] stream_out")
            .replace("vrelu(b[0:len], a[0:len])", "vrelu(b[0:total], b[0:total])");
        let p = parse_program(&src).unwrap();
        let err = check_tiling(&p, &cfg()).unwrap_err();
        assert!(err.iter().any(|d| d.rule_id == "TIL-OVERLAP"), "{err:?}");
    }

    #[test]
    fn blocks_over_cores_is_warning_only() {
        let p = parse_program(
            "host h(x:[R=64]f32, out y:[R=64]f32){ launch k<16> over R (x, y, 16, R); }
             kernel k(x, y, nb, total){
               alloc_ub a: f32[8] stream_in;
               alloc_ub b: f32[8] stream_out;
               let off = chunk_off(total, nb, block_idx);
               let len = chunk_len(total, nb, block_idx);
               copyin i { copy_g2l(a[0:len], x[off:len]) }
               compute c { vrelu(b[0:len], a[0:len]) }
               copyout o { copy_l2g(y[off:len], b[0:len]) }
             }",
        )
        .unwrap();
        let summary = check_tiling(&p, &cfg()).unwrap();
        assert_eq!(summary.warnings.len(), 1);
        assert_eq!(summary.warnings[0].rule_id, "TIL-BLOCKS-OVER-CORES");
    }

    #[test]
    fn alignment_examples_from_transfer_sizes() {
        // 64 f32 at offset 0 -> 256 B aligned; 30 f32 -> 120 B unaligned;
        // 16 f16 at element offset 24 -> 48 B offset, unaligned.
        let p = parse_program(
            "host h(a:[64]f32, b:[30]f32, c:[64]f16){launch k<1>(a, b, c)}
             kernel k(a, b, c){
               alloc_ub ab: f32[64] stream_in;
               alloc_ub bb: f32[30] stream_in;
               alloc_ub cb: f16[16] stream_in;
               copyin i {
                 copy_g2l(ab[0:64], a[0:64])
                 copy_g2l(bb[0:30], b[0:30])
                 copy_g2l(cb[0:16], c[24:16])
               }
             }",
        )
        .unwrap();
        let report = analyze_alignment(&p, &cfg()).unwrap();
        assert_eq!(report.records.len(), 3);
        let by_count: BTreeMap<i64, &AlignRecord> = report
            .records
            .iter()
            .map(|r| (r.byte_count, r))
            .collect();
        assert!(by_count[&256].aligned);
        assert!(!by_count[&120].aligned);
        let f16rec = by_count[&32];
        assert_eq!(f16rec.offset_bytes, 48);
        assert!(!f16rec.aligned);
    }

    #[test]
    fn full_suite_clean_on_split_pipeline() {
        let p = parse_program(SPLIT).unwrap();
        let analysis = check_program(&p, &cfg(), &ShapeMap::new()).unwrap();
        assert_eq!(analysis.plan.num_blocks, 8);
        assert_eq!(analysis.buffer_capacities["a"], 256);
        assert!(analysis.warnings.is_empty());
    }
}
