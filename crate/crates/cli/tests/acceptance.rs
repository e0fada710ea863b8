//! Acceptance suite. Each test implements one acceptance criterion at its
//! stated tolerance and prints one PASS line; a failure anywhere fails the
//! corresponding test.
//!
//! 1. Triangle equivalence over the whole corpus (oracle / DSL / target).
//! 2. Pipeline soundness: four accepted passes, zero repairs, everywhere.
//! 3. Checker sensitivity: one-defect fixtures rejected with exactly the
//!    expected rule id (structural and semantic families).
//! 4. Alignment pass: padded copies iff size or offset misaligned,
//!    idempotent, and complete.
//! 5. Cost-model properties: queue-depth monotonicity, double-buffering
//!    strictness, makespan bounds, core scaling.
//! 6. Determinism and byte-exact goldens.
//! 7. Tiling coverage under the remainder policy vs a summation oracle.

use adsl_cli::commands;
use adsl_cli::inputs::{generate_inputs, generate_tensor};
use adsl_cli::manifest::{default_fixture_dir, load_manifest, CATEGORIES};
use adsl_core::ast::{Dtype, StageKind};
use adsl_core::diag::Diagnostic;
use adsl_core::eval::{chunk_len, chunk_off};
use adsl_core::lowering::{self, identity_hook, DEFAULT_MAX_REPAIRS};
use adsl_core::parser::parse_program;
use adsl_core::semantic;
use adsl_core::target::{self, ir};
use adsl_core::vm::{self, NpuConfig, ShapeMap};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::time::Instant;

const RUNS_PER_SHAPE: usize = 20;

fn fixture_program(root: &PathBuf, name: &str) -> adsl_core::Program {
    let path = root.join(name).join("program.adsl");
    let source = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    parse_program(&source).unwrap_or_else(|d| panic!("{name} must parse: {d:?}"))
}

#[test]
fn criterion_1_triangle_equivalence() {
    let started = Instant::now();
    let root = default_fixture_dir();
    let (manifest, _) = load_manifest(&root.join("manifest.json")).unwrap();
    assert!(manifest.fixtures.len() >= 14, "corpus must hold >= 14 fixtures");
    for category in CATEGORIES {
        assert!(
            manifest.fixtures.iter().any(|f| f.category == category),
            "category {category} missing from corpus"
        );
    }
    let cfg = NpuConfig::default();

    let mut comparisons = 0usize;
    for fixture in &manifest.fixtures {
        let program = fixture_program(&root, &fixture.name);
        for shape_index in 0..fixture.shapes.len() {
            let shapes = fixture.shape_map(shape_index);
            let exec = vm::Executor::prepare(&program, &cfg, &shapes)
                .unwrap_or_else(|d| panic!("{} rejected: {d:?}", fixture.name));
            let (unit, _) =
                lowering::run_pipeline(&program, &cfg, &identity_hook(), DEFAULT_MAX_REPAIRS)
                    .unwrap_or_else(|e| panic!("{} lowering: {e}", fixture.name));

            for run in 0..RUNS_PER_SHAPE {
                let tensors = generate_inputs(
                    &program,
                    &exec.analysis.bindings,
                    &fixture.inputs,
                    &fixture.name,
                    shape_index,
                    run,
                );
                let actual = exec.run(&tensors).expect("functional run");
                let reference =
                    vm::reference_eval(&fixture.oracle, &tensors).expect("oracle eval");
                for (name, expected) in &reference {
                    let got = actual
                        .get(name)
                        .unwrap_or_else(|| panic!("{}: no output `{name}`", fixture.name));
                    let tol = match got.dtype() {
                        Dtype::F16 => fixture.tolerances.f16,
                        _ => fixture.tolerances.f32,
                    };
                    let report = vm::compare_tensors(got, expected, tol.rel, tol.abs).unwrap();
                    assert!(
                        report.pass,
                        "{} shape {shape_index} run {run}: `{name}` diverges \
                         (worst |err| {:.3e} at {:?}: {} vs {})",
                        fixture.name,
                        report.worst_abs_err,
                        report.worst_index,
                        report.worst_actual,
                        report.worst_reference
                    );
                    comparisons += 1;
                }
                let target_out = target::interpret_target(&unit, &tensors, &cfg)
                    .unwrap_or_else(|e| panic!("{}: target interp: {e}", fixture.name));
                for (name, value) in &actual {
                    assert!(
                        value.data.bits_equal(&target_out[name].data),
                        "{} run {run}: target interpreter diverges bitwise on `{name}`",
                        fixture.name
                    );
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 120,
        "triangle suite must finish inside 2 minutes, took {elapsed:?}"
    );
    println!(
        "ACCEPTANCE 1 PASS: triangle equivalence over {} fixtures ({comparisons} oracle \
         comparisons, bitwise DSL/target agreement, {elapsed:?})",
        manifest.fixtures.len()
    );
}

#[test]
fn criterion_2_pipeline_soundness() {
    let root = default_fixture_dir();
    let (manifest, _) = load_manifest(&root.join("manifest.json")).unwrap();
    let cfg = NpuConfig::default();
    for fixture in &manifest.fixtures {
        let program = fixture_program(&root, &fixture.name);
        let (unit, trace) =
            lowering::run_pipeline(&program, &cfg, &identity_hook(), DEFAULT_MAX_REPAIRS)
                .unwrap_or_else(|e| panic!("{}: {e}", fixture.name));
        assert_eq!(trace.records.len(), 4, "{}: four gates", fixture.name);
        for record in &trace.records {
            assert!(record.accepted, "{} pass {} rejected", fixture.name, record.pass_id);
            assert_eq!(
                record.repair_attempts, 0,
                "{} pass {} needed repairs",
                fixture.name, record.pass_id
            );
        }
        let diags = target::check_structure(&unit);
        assert!(diags.is_empty(), "{}: final unit rejected: {diags:?}", fixture.name);
    }
    println!(
        "ACCEPTANCE 2 PASS: pipeline succeeds with 0 repairs on 100% of {} fixtures",
        manifest.fixtures.len()
    );
}

fn lowered_softmax() -> ir::TargetUnit {
    let root = default_fixture_dir();
    let program = fixture_program(&root, "softmax");
    let (unit, _) = lowering::run_pipeline(
        &program,
        &NpuConfig::default(),
        &identity_hook(),
        DEFAULT_MAX_REPAIRS,
    )
    .unwrap();
    unit
}

fn assert_exactly(diags: &[Diagnostic], rule: &str, what: &str) {
    assert!(!diags.is_empty(), "{what}: expected a {rule} rejection");
    for d in diags {
        assert_eq!(d.rule_id, rule, "{what}: got {} ({})", d.rule_id, d.message);
    }
}

fn check_src_exactly(src: &str, rule: &str, what: &str) {
    let program = parse_program(src).unwrap_or_else(|d| panic!("{what} must parse: {d:?}"));
    let diags = match semantic::check_program(&program, &NpuConfig::default(), &ShapeMap::new()) {
        Ok(a) => a.warnings,
        Err(d) => d,
    };
    assert_exactly(&diags, rule, what);
}

#[test]
fn criterion_3_checker_sensitivity() {
    // Structural rules: single-instruction mutations of a valid lowered unit.
    let find_fn = |unit: &ir::TargetUnit, kind: StageKind| -> usize {
        unit.stage_fns.iter().position(|f| f.kind == kind).unwrap()
    };

    let mut unit = lowered_softmax();
    let idx = find_fn(&unit, StageKind::CopyIn);
    unit.stage_fns[idx].body.push(ir::TargetInstr::Vector {
        op: ir::VecOp::Exp,
        dst: ir::LocalRef {
            buffer: "xb".into(),
            offset: adsl_core::ast::IntExpr::lit(0),
        },
        srcs: vec![ir::LocalRef {
            buffer: "xb".into(),
            offset: adsl_core::ast::IntExpr::lit(0),
        }],
        imm: None,
        count: adsl_core::ast::IntExpr::lit(1),
    });
    assert_exactly(
        &target::check_structure(&unit),
        "TGT-STAGE-MIX",
        "vector op inside CopyIn",
    );

    let mut unit = lowered_softmax();
    let idx = find_fn(&unit, StageKind::Compute);
    let deque_pos = unit.stage_fns[idx]
        .body
        .iter()
        .position(|i| matches!(i, ir::TargetInstr::DeQue { .. }))
        .unwrap();
    unit.stage_fns[idx].body.remove(deque_pos);
    assert_exactly(
        &target::check_structure(&unit),
        "TGT-DEQ-FIRST",
        "dropped dequeue",
    );

    let mut unit = lowered_softmax();
    let idx = find_fn(&unit, StageKind::CopyIn);
    let enque_pos = unit.stage_fns[idx]
        .body
        .iter()
        .position(|i| matches!(i, ir::TargetInstr::EnQue { .. }))
        .unwrap();
    unit.stage_fns[idx].body.remove(enque_pos);
    assert_exactly(
        &target::check_structure(&unit),
        "TGT-QUEUE-IMBALANCE",
        "dropped enqueue",
    );

    let mut unit = lowered_softmax();
    let idx = find_fn(&unit, StageKind::Compute);
    unit.stage_fns[idx].body.push(ir::TargetInstr::DataCopy {
        dir: ir::TransferDir::LocalToGlobal,
        gm: ir::GmRef {
            tensor: "y".into(),
            offset: adsl_core::ast::IntExpr::lit(0),
        },
        local: ir::LocalRef {
            buffer: "yb".into(),
            offset: adsl_core::ast::IntExpr::lit(0),
        },
        count: adsl_core::ast::IntExpr::lit(8),
        rows: adsl_core::ast::IntExpr::lit(1),
        stride: adsl_core::ast::IntExpr::lit(8),
        site: adsl_core::Span::default(),
    });
    assert_exactly(
        &target::check_structure(&unit),
        "TGT-GM-IN-COMPUTE",
        "global store inside Compute",
    );

    let mut unit = lowered_softmax();
    let idx = find_fn(&unit, StageKind::CopyOut);
    unit.stage_fns[idx].body.push(ir::TargetInstr::SyncAll);
    assert_exactly(
        &target::check_structure(&unit),
        "TGT-BARRIER-PLACE",
        "barrier inside stage function",
    );

    // Semantic rules: violation programs, each rejected with exactly the
    // expected rule id.
    check_src_exactly(
        "host h(x:[8]f32){launch k<1>(x)}
         kernel k(x){ alloc_ub b: f32[8] stream_in;
           compute c { copy_g2l(b[0:8], x[0:8]) } }",
        "STG-G2L-PLACE",
        "copy_g2l inside compute",
    );
    check_src_exactly(
        "host h(x:[8]f32, out y:[8]f32){launch k<1>(x, y)}
         kernel k(x, y){ alloc_ub b: f32[8] stream_out;
           copyin c { copy_l2g(y[0:8], b[0:8]) } }",
        "STG-L2G-PLACE",
        "copy_l2g inside copyin",
    );
    check_src_exactly(
        "host h(x:[8]f32){launch k<1>(x)}
         kernel k(x){ alloc_ub b: f32[8] temp;
           copyout o { vadd(b[0:8], b[0:8], b[0:8]) } }",
        "STG-COMPUTE-PLACE",
        "vadd inside copyout",
    );
    check_src_exactly(
        "host h(x:[8]f32){launch k<1>(x)}
         kernel k(x){ alloc_ub b: f32[8] temp;
           compute c { vadd(b[0:8], x[0:8], b[0:8]) } }",
        "STG-GM-IN-COMPUTE",
        "global tensor operand in compute",
    );
    check_src_exactly(
        "host h(x:[8]f32, out y:[8]f32){launch k<1>(x, y)}
         kernel k(x, y){
           alloc_ub a: f32[8] stream_in;
           alloc_ub b: f32[8] stream_out;
           compute c { adds(b[0:8], a[0:8], 0.0) }
           copyin i { copy_g2l(a[0:8], x[0:8]) }
           copyout o { copy_l2g(y[0:8], b[0:8]) } }",
        "STG-USE-BEFORE-DEF",
        "consume before produce",
    );
    check_src_exactly(
        "host h(x:[R=65536]f32){launch k<1> over R (x, 65536)}
         kernel k(x, n){ alloc_ub b: f32[n] temp; }",
        "BUF-UB-OVERFLOW",
        "UB capacity exceeded",
    );
    check_src_exactly(
        "host h(x:[33]f32){launch k<1>(x)}
         kernel k(x){ alloc_ub b: f32[32] stream_in;
           copyin c { copy_g2l(b[1:32], x[1:32]) } }",
        "BUF-SLICE-OOB",
        "slice beyond capacity",
    );
    check_src_exactly(
        "host h(x:[8]f32){ tiling t = 0 @ \"zero tile\"; launch k<1>(x) }
         kernel k(x){ }",
        "TIL-NONPOS",
        "tiling parameter zero",
    );
    check_src_exactly(
        "host h(x:[R=64]f32, out y:[R=64]f32){ launch k<8> over R (x, y, 8, R); }
         kernel k(x, y, nb, total){
           alloc_ub a: f32[8] stream_in;
           alloc_ub b: f32[8] stream_out;
           let off = chunk_off(total, nb, block_idx);
           let len = chunk_len(total, nb, block_idx);
           copyin i { copy_g2l(a[0:len], x[off:len]) }
           compute c { vrelu(b[0:len], a[0:len]) }
           copyout o { copy_l2g(y[off:len-1], b[0:len-1]) }
         }",
        "TIL-GAP",
        "uncovered output elements",
    );
    check_src_exactly(
        "host h(x:[R=64]f32, out y:[R=64]f32){ launch k<8> over R (x, y, 8, R); }
         kernel k(x, y, nb, total){
           alloc_ub a: f32[64] stream_in;
           alloc_ub b: f32[64] stream_out;
           copyin i { copy_g2l(a[0:total], x[0:total]) }
           compute c { vrelu(b[0:total], a[0:total]) }
           copyout o { copy_l2g(y[0:total], b[0:total]) }
         }",
        "TIL-OVERLAP",
        "every block writes everything",
    );

    println!(
        "ACCEPTANCE 3 PASS: 5 structural mutations and 10 semantic violations each \
         rejected with exactly the expected rule id"
    );
}

#[test]
fn criterion_4_alignment_sweep() {
    let cfg = NpuConfig::default();
    let mut padded_cases = 0usize;
    for dtype in [Dtype::F32, Dtype::F16] {
        let esize = dtype.size_bytes() as i64;
        for n in 1..=128i64 {
            let src = format!(
                "host h(x:[{n}]{dt}, out y:[{n}]{dt}){{launch k<1> over {n} (x, y, {n})}}
                 kernel k(x, y, n){{
                   alloc_ub a: {dt}[n] stream_in;
                   alloc_ub b: {dt}[n] stream_out;
                   copyin ci {{ copy_g2l(a[0:n], x[0:n]) }}
                   compute c {{ adds(b[0:n], a[0:n], 0.0) }}
                   copyout co {{ copy_l2g(y[0:n], b[0:n]) }}
                 }}",
                dt = dtype.name()
            );
            let program = parse_program(&src).unwrap();
            let (unit, _) =
                lowering::run_pipeline(&program, &cfg, &identity_hook(), DEFAULT_MAX_REPAIRS)
                    .unwrap_or_else(|e| panic!("n={n} {dt}: {e}", dt = dtype.name()));
            let pads = count_padded(&unit);
            let unaligned = (n * esize) % 32 != 0;
            if unaligned {
                assert_eq!(pads, 2, "n={n} {}: both transfers must pad", dtype.name());
                padded_cases += 1;
            } else {
                assert_eq!(pads, 0, "n={n} {}: aligned stays plain", dtype.name());
            }
            let (_, kernel_text) = target::emit_text(&unit);
            assert_eq!(
                kernel_text.contains("DataCopyPad"),
                unaligned,
                "n={n} {}: emitted text must name DataCopyPad iff unaligned",
                dtype.name()
            );

            // Idempotence and completeness.
            let again = lowering::pass_alignment(&program, unit.clone(), &cfg).unwrap();
            assert_eq!(again, unit, "n={n}: pass must be idempotent");
            let records = target::scan_transfers(&unit, &ShapeMap::new(), &cfg).unwrap();
            assert!(
                target::all_plain_transfers_aligned(&records),
                "n={n}: unaligned plain transfer survived"
            );
        }
    }

    // Offset misalignment with an aligned byte count.
    let src = "host h(x:[64]f32, out y:[64]f32){launch k<1>(x, y)}
               kernel k(x, y){
                 alloc_ub a: f32[32] stream_in;
                 alloc_ub b: f32[32] stream_out;
                 copyin ci { copy_g2l(a[0:8], x[1:8]) }
                 compute c { adds(b[0:8], a[0:8], 0.0) }
                 copyout co { copy_l2g(y[8:8], b[0:8]) }
               }";
    let program = parse_program(src).unwrap();
    let (unit, _) =
        lowering::run_pipeline(&program, &cfg, &identity_hook(), DEFAULT_MAX_REPAIRS).unwrap();
    assert_eq!(
        count_padded(&unit),
        1,
        "offset-unaligned load pads, aligned store stays plain"
    );

    println!(
        "ACCEPTANCE 4 PASS: 1..=128 x {{f16, f32}} sweep pads iff misaligned \
         ({padded_cases} padded cases), idempotent, zero unaligned plain transfers remain"
    );
}

fn count_padded(unit: &ir::TargetUnit) -> usize {
    fn go(body: &[ir::TargetInstr]) -> usize {
        body.iter()
            .map(|i| match i {
                ir::TargetInstr::DataCopyPad { .. } => 1,
                ir::TargetInstr::For { body, .. } => go(body),
                _ => 0,
            })
            .sum()
    }
    unit.stage_fns.iter().map(|f| go(&f.body)).sum()
}

#[test]
fn criterion_5_cost_model_properties() {
    let root = default_fixture_dir();
    let (manifest, _) = load_manifest(&root.join("manifest.json")).unwrap();

    let with_depth = |depth: u32| -> NpuConfig {
        let mut cfg = NpuConfig::default();
        cfg.queue_depth_in = depth;
        cfg.queue_depth_out = depth;
        cfg
    };

    for fixture in &manifest.fixtures {
        let program = fixture_program(&root, &fixture.name);
        let shapes = fixture.shape_map(0);
        let mut makespans = Vec::new();
        for depth in [1u32, 2, 3] {
            let cfg = with_depth(depth);
            let exec = vm::Executor::prepare(&program, &cfg, &shapes).unwrap();
            let tensors = generate_inputs(
                &program,
                &exec.analysis.bindings,
                &fixture.inputs,
                &fixture.name,
                0,
                0,
            );
            let (_, report) = vm::timed::run_timed_prepared(&exec, &tensors, &cfg).unwrap();
            assert!(
                report.makespan_cycles <= report.total_instr_cycles,
                "{}: makespan exceeds the serialized bound",
                fixture.name
            );
            let max_busy = report.per_queue_busy.values().copied().max().unwrap_or(0);
            assert!(
                report.makespan_cycles >= max_busy,
                "{}: makespan below peak per-queue busy time",
                fixture.name
            );
            makespans.push(report.makespan_cycles);
        }
        assert!(
            makespans[1] <= makespans[0] && makespans[2] <= makespans[1],
            "{}: makespan must be monotone non-increasing in queue depth, got {makespans:?}",
            fixture.name
        );
    }

    // Memory-bound elementwise pipeline with >= 8 tiles per block: depth 2
    // strictly beats depth 1.
    {
        let program = fixture_program(&root, "relu");
        let shapes = ShapeMap::from([("R".into(), 128), ("C".into(), 1024)]);
        let mut results = Vec::new();
        for depth in [1u32, 2] {
            let cfg = with_depth(depth);
            let exec = vm::Executor::prepare(&program, &cfg, &shapes).unwrap();
            let tensors = generate_inputs(
                &program,
                &exec.analysis.bindings,
                &Default::default(),
                "relu",
                0,
                0,
            );
            let (_, report) = vm::timed::run_timed_prepared(&exec, &tensors, &cfg).unwrap();
            results.push(report.makespan_cycles);
        }
        assert!(
            results[1] < results[0],
            "double buffering must strictly win on the memory-bound pipeline: {results:?}"
        );
    }

    // Even workload: doubling blocks (within the core budget) cannot hurt.
    {
        let template = |blocks: i64| -> String {
            format!(
                "host h(x:[N=16384]f32, out y:[N=16384]f32){{
                   launch k<{blocks}> over N (x, y, {blocks}, 512, N);
                 }}
                 kernel k(x, y, nb, tile, total){{
                   alloc_ub a: f32[tile] stream_in;
                   alloc_ub b: f32[tile] stream_out;
                   let off = chunk_off(total, nb, block_idx);
                   let len = chunk_len(total, nb, block_idx);
                   let tiles = ceil_div(len, tile);
                   for t in 0..tiles {{
                     copyin ci {{
                       let n = min(tile, len - t * tile);
                       copy_g2l(a[0:n], x[off + t * tile : n])
                     }}
                     compute c {{
                       let n = min(tile, len - t * tile);
                       vrelu(b[0:n], a[0:n])
                     }}
                     copyout co {{
                       let n = min(tile, len - t * tile);
                       copy_l2g(y[off + t * tile : n], b[0:n])
                     }}
                   }}
                 }}"
            )
        };
        let cfg = NpuConfig::default();
        let mut spans = Vec::new();
        for blocks in [4i64, 8] {
            let program = parse_program(&template(blocks)).unwrap();
            let exec = vm::Executor::prepare(&program, &cfg, &ShapeMap::new()).unwrap();
            let x = generate_tensor(Dtype::F32, &[16384], -1.0, 1.0, 7);
            let tensors = std::collections::BTreeMap::from([("x".to_string(), x)]);
            let (_, report) = vm::timed::run_timed_prepared(&exec, &tensors, &cfg).unwrap();
            spans.push(report.makespan_cycles);
        }
        assert!(
            spans[1] <= spans[0],
            "doubling blocks on an even workload must not increase makespan: {spans:?}"
        );
    }

    println!(
        "ACCEPTANCE 5 PASS: depth monotonicity on {} fixtures, strict double-buffer win, \
         makespan bounds, and core scaling hold exactly",
        manifest.fixtures.len()
    );
}

#[test]
fn criterion_6_determinism_and_goldens() {
    let root = default_fixture_dir();
    let (manifest, _) = load_manifest(&root.join("manifest.json")).unwrap();
    let cfg = NpuConfig::default();

    // check + compile twice: byte-identical sources and traces.
    for fixture in &manifest.fixtures {
        let path = root.join(&fixture.name).join("program.adsl");
        let first = commands::compile_fixture_text(&path, &cfg).unwrap();
        let second = commands::compile_fixture_text(&path, &cfg).unwrap();
        assert_eq!(first, second, "{}: emitted artifacts differ across runs", fixture.name);
    }

    // sim twice: bit-identical outputs and cost reports.
    for fixture in manifest.fixtures.iter().take(4) {
        let program = fixture_program(&root, &fixture.name);
        let shapes = fixture.shape_map(0);
        let exec = vm::Executor::prepare(&program, &cfg, &shapes).unwrap();
        let tensors = generate_inputs(
            &program,
            &exec.analysis.bindings,
            &fixture.inputs,
            &fixture.name,
            0,
            0,
        );
        let (out1, cost1) = vm::timed::run_timed_prepared(&exec, &tensors, &cfg).unwrap();
        let (out2, cost2) = vm::timed::run_timed_prepared(&exec, &tensors, &cfg).unwrap();
        assert_eq!(cost1, cost2, "{}: cost reports differ", fixture.name);
        for (name, value) in &out1 {
            assert!(
                value.data.bits_equal(&out2[name].data),
                "{}: outputs differ across runs",
                fixture.name
            );
        }
    }

    // Golden suite must be clean against the committed files.
    let outcome = commands::cmd_goldens(&root, &cfg, false);
    assert_eq!(
        outcome.code,
        commands::EXIT_OK,
        "golden suite failed: {}",
        outcome.message
    );

    println!(
        "ACCEPTANCE 6 PASS: two full check+compile+sim sweeps byte-identical; \
         golden suite clean"
    );
}

#[test]
fn criterion_7_tiling_coverage() {
    // Policy function vs an independent one-at-a-time summation oracle.
    let mut rng = ChaCha8Rng::seed_from_u64(20260810);
    for trial in 0..1000 {
        let total = rng.gen_range(1..=10000i64);
        let parts = rng.gen_range(1..=64i64);

        let mut oracle_counts = vec![total / parts; parts as usize];
        for slot in oracle_counts.iter_mut().take((total % parts) as usize) {
            *slot += 1;
        }
        let mut oracle_offsets = vec![0i64; parts as usize];
        for i in 1..parts as usize {
            oracle_offsets[i] = oracle_offsets[i - 1] + oracle_counts[i - 1];
        }

        let mut covered = 0i64;
        for idx in 0..parts {
            let off = chunk_off(total, parts, idx);
            let len = chunk_len(total, parts, idx);
            assert_eq!(off, oracle_offsets[idx as usize], "trial {trial}: offset");
            assert_eq!(len, oracle_counts[idx as usize], "trial {trial}: length");
            assert_eq!(off, covered, "trial {trial}: gap or overlap at part {idx}");
            covered += len;
        }
        assert_eq!(covered, total, "trial {trial}: total coverage");
    }

    // End to end: random shapes partition through eval_host's plan.
    let root = default_fixture_dir();
    let program = fixture_program(&root, "relu");
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let shapes = ShapeMap::from([
            ("R".into(), rng.gen_range(1..=100i64)),
            ("C".into(), rng.gen_range(1..=100i64)),
        ]);
        let plan = vm::eval_host(&program, &shapes).unwrap();
        let mut cursor = 0i64;
        for (start, end) in &plan.per_block_ranges {
            assert_eq!(*start, cursor);
            assert!(end >= start);
            cursor = *end;
        }
        assert_eq!(cursor, plan.workload);
    }

    println!(
        "ACCEPTANCE 7 PASS: 1000 randomized splits match the summation oracle exactly; \
         50 random relu shapes partition with no gaps or overlaps"
    );
}
