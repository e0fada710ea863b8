//! Capacity accounting, slice bounds, tiling coverage, and transfer
//! alignment, all driven by the enumerated access sets.

use crate::ast::*;
use crate::diag::{rules, Diagnostic, Span};
use crate::eval::{eval_int, Env};
use crate::semantic::symbols::{SymKind, SymbolTable};
use crate::semantic::walk::{AccessSets, CopyDir, GmAccess};
use crate::vm::config::NpuConfig;
use crate::vm::host::{Bindings, LaunchPlan};
use serde::Serialize;
use std::collections::BTreeMap;

/// Queue depth used for UB accounting: stream buffers are backed by
/// queue-depth many slots, temps by one.
pub fn role_depth(role: BufferRole, cfg: &NpuConfig) -> u64 {
    match role {
        BufferRole::StreamIn => cfg.queue_depth_in as u64,
        BufferRole::StreamOut => cfg.queue_depth_out as u64,
        BufferRole::Temp => 1,
    }
}

/// Evaluate every buffer capacity under the launch plan's scalar bindings.
pub fn buffer_capacities(
    program: &Program,
    plan: &LaunchPlan,
) -> Result<BTreeMap<String, i64>, Vec<Diagnostic>> {
    let mut env = Env::new();
    for (name, value) in &plan.kernel_args {
        if let crate::vm::host::KernelArgValue::Scalar(v) = value {
            env.bind(name, *v);
        }
    }
    let mut out = BTreeMap::new();
    let mut diags = Vec::new();
    for buf in &program.kernel.buffers {
        match eval_int(&buf.capacity, &env) {
            Ok(v) if v > 0 => {
                out.insert(buf.name.clone(), v);
            }
            Ok(v) => diags.push(Diagnostic::error(
                rules::TIL_NONPOS,
                buf.span,
                format!("buffer `{}` capacity evaluates to {v}; must be positive", buf.name),
            )),
            Err(e) => diags.push(Diagnostic::error(rules::TIL_NONPOS, e.span(), e.message())),
        }
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(diags)
    }
}

/// On-chip capacity accounting. All declared buffers are treated as
/// simultaneously live; stream buffers cost queue-depth many slots.
pub fn check_capacity_totals(
    program: &Program,
    caps: &BTreeMap<String, i64>,
    cfg: &NpuConfig,
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for (space, budget, rule) in [
        (BufferSpace::Ub, cfg.ub_bytes, rules::BUF_UB_OVERFLOW),
        (BufferSpace::L1, cfg.l1_bytes, rules::BUF_L1_OVERFLOW),
    ] {
        let mut total: u64 = 0;
        let mut span = Span::default();
        for buf in &program.kernel.buffers {
            if buf.space != space {
                continue;
            }
            let cap = match caps.get(&buf.name) {
                Some(c) => *c as u64,
                None => continue,
            };
            total += cap * buf.dtype.size_bytes() as u64 * role_depth(buf.role, cfg);
            span = buf.span;
        }
        if total > budget {
            let name = match space {
                BufferSpace::Ub => "UB",
                BufferSpace::L1 => "L1",
            };
            diags.push(Diagnostic::error(
                rule,
                span,
                format!(
                    "{name} buffers require {total} bytes (capacity x dtype x queue depth) but only {budget} are available"
                ),
            ));
        }
    }
    diags
}

/// Per-use slice bounds for both on-chip buffers and global tensors.
pub fn check_slice_bounds(
    sets: &AccessSets,
    caps: &BTreeMap<String, i64>,
    bindings: &Bindings,
    table: &SymbolTable,
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut reported: std::collections::HashSet<(usize, bool)> = std::collections::HashSet::new();
    for acc in &sets.local {
        let cap = match caps.get(&acc.buffer) {
            Some(c) => *c,
            None => continue,
        };
        if acc.offset < 0 || acc.offset + acc.count > cap {
            if reported.insert((acc.site.offset, false)) {
                diags.push(Diagnostic::error(
                    rules::BUF_SLICE_OOB,
                    acc.site,
                    format!(
                        "slice [{}..{}) of buffer `{}` exceeds its capacity {} (block {})",
                        acc.offset,
                        acc.offset + acc.count,
                        acc.buffer,
                        cap,
                        acc.block_id
                    ),
                ));
            }
        }
    }
    for acc in &sets.gm {
        let host_name = match table.kernel_tensor(&acc.tensor) {
            Some((_, _, host)) => host,
            None => continue,
        };
        let numel = match bindings.numel(host_name) {
            Some(n) => n,
            None => continue,
        };
        let last_row = acc.offset + (acc.rows - 1) * acc.stride;
        let end = last_row + acc.count;
        if acc.offset < 0 || end > numel {
            if reported.insert((acc.site.offset, true)) {
                diags.push(Diagnostic::error(
                    rules::BUF_SLICE_OOB,
                    acc.site,
                    format!(
                        "global access [{}..{}) of tensor `{}` exceeds its {} elements (block {})",
                        acc.offset, end, acc.tensor, numel, acc.block_id
                    ),
                ));
            }
        }
    }
    diags
}

/// Per-block workload summary plus verified coverage.
#[derive(Debug, Clone, Serialize)]
pub struct TilingSummary {
    pub num_blocks: i64,
    pub workload: i64,
    pub tiling_values: BTreeMap<String, i64>,
    /// Half-open planned ranges per block under the remainder policy.
    pub per_block_ranges: Vec<(i64, i64)>,
    #[serde(skip)]
    pub warnings: Vec<Diagnostic>,
}

/// Verify that, per output tensor, the global writes across all blocks
/// partition the full element domain: no gaps, no overlaps.
pub fn check_coverage(
    program: &Program,
    sets: &AccessSets,
    bindings: &Bindings,
    table: &SymbolTable,
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut intervals: BTreeMap<&str, Vec<(i64, i64, i64)>> = BTreeMap::new();
    for acc in &sets.gm {
        if acc.dir != CopyDir::LocalToGlobal {
            continue;
        }
        let entry = intervals.entry(acc.tensor.as_str()).or_default();
        for row in 0..acc.rows {
            let start = acc.offset + row * acc.stride;
            entry.push((start, start + acc.count, acc.block_id));
        }
    }

    for param in &program.host.params {
        if !param.is_out {
            continue;
        }
        // Find the kernel-side alias of this output tensor.
        let kernel_name = table.kernel.iter().find_map(|(name, sym)| match &sym.kind {
            SymKind::KernelTensor { host_param, .. } if host_param == &param.name => {
                Some(name.as_str())
            }
            _ => None,
        });
        let numel: i64 = bindings.numel(&param.name).unwrap_or(0);
        if numel == 0 {
            continue;
        }
        let mut ivs = kernel_name
            .and_then(|k| intervals.get(k))
            .cloned()
            .unwrap_or_default();
        if ivs.is_empty() {
            diags.push(Diagnostic::error(
                rules::TIL_GAP,
                param.span,
                format!("output tensor `{}` is never written", param.name),
            ));
            continue;
        }
        ivs.sort();
        let mut cursor = 0i64;
        let mut flagged = false;
        for (start, end, block) in &ivs {
            if *start < cursor {
                diags.push(Diagnostic::error(
                    rules::TIL_OVERLAP,
                    param.span,
                    format!(
                        "output tensor `{}` elements [{start}..{}) are written more than once (block {block})",
                        param.name,
                        cursor.min(*end)
                    ),
                ));
                flagged = true;
                break;
            }
            if *start > cursor {
                diags.push(Diagnostic::error(
                    rules::TIL_GAP,
                    param.span,
                    format!(
                        "output tensor `{}` elements [{cursor}..{start}) are never written",
                        param.name
                    ),
                ));
                flagged = true;
                break;
            }
            cursor = *end;
        }
        if !flagged && cursor != numel {
            diags.push(Diagnostic::error(
                rules::TIL_GAP,
                param.span,
                format!(
                    "output tensor `{}` elements [{cursor}..{numel}) are never written",
                    param.name
                ),
            ));
        }
    }
    diags
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignRecord {
    pub stage_label: String,
    pub tensor: String,
    pub write: bool,
    pub byte_count: i64,
    pub offset_bytes: i64,
    pub rows: i64,
    pub stride_bytes: i64,
    pub aligned: bool,
    #[serde(skip)]
    pub site: Span,
}

/// One record per transfer site per distinct (byte count, offset class).
#[derive(Debug, Clone, Default, Serialize)]
pub struct AlignmentReport {
    pub records: Vec<AlignRecord>,
}

impl AlignmentReport {
    /// Source offsets of every transfer site with at least one unaligned
    /// dynamic instance. Drives the padded-copy rewrite.
    pub fn unaligned_sites(&self) -> std::collections::BTreeSet<usize> {
        self.records
            .iter()
            .filter(|r| !r.aligned)
            .map(|r| r.site.offset)
            .collect()
    }
}

pub fn alignment_is_ok(byte_count: i64, offset_bytes: i64, rows: i64, stride_bytes: i64, alignment: i64) -> bool {
    byte_count % alignment == 0
        && offset_bytes % alignment == 0
        && (rows <= 1 || stride_bytes % alignment == 0)
}

pub fn build_alignment_report(gm: &[GmAccess], cfg: &NpuConfig) -> AlignmentReport {
    let alignment = cfg.alignment_bytes as i64;
    let mut seen: std::collections::HashSet<(usize, i64, i64, i64)> =
        std::collections::HashSet::new();
    let mut records = Vec::new();
    for acc in gm {
        let esize = acc.dtype.size_bytes() as i64;
        let byte_count = acc.count * esize;
        let offset_bytes = acc.offset * esize;
        let stride_bytes = acc.stride * esize;
        let key = (
            acc.site.offset,
            byte_count,
            offset_bytes % alignment,
            if acc.rows > 1 { stride_bytes % alignment } else { 0 },
        );
        if !seen.insert(key) {
            continue;
        }
        records.push(AlignRecord {
            stage_label: acc.stage_label.clone(),
            tensor: acc.tensor.clone(),
            write: acc.is_write(),
            byte_count,
            offset_bytes,
            rows: acc.rows,
            stride_bytes,
            aligned: alignment_is_ok(byte_count, offset_bytes, acc.rows, stride_bytes, alignment),
            site: acc.site,
        });
    }
    records.sort_by_key(|r| (r.site.offset, r.byte_count, r.offset_bytes));
    AlignmentReport { records }
}
