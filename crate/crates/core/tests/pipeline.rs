//! End-to-end chain over real fixture sources: parse, validate, execute
//! against the reference oracle, lower through all four passes, and check
//! that the target interpreter agrees bitwise with the DSL interpreter.

use adsl_core::ast::Dtype;
use adsl_core::lowering;
use adsl_core::parser::parse_program;
use adsl_core::semantic;
use adsl_core::target;
use adsl_core::vm::{self, NpuConfig, ShapeMap, TensorData, TensorValue};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::PathBuf;

fn fixture_source(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .join("program.adsl");
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {path:?}: {e}"))
}

fn gen_tensor(dtype: Dtype, shape: &[usize], lo: f64, hi: f64, seed: u64) -> TensorValue {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let data = match dtype {
        Dtype::F32 => {
            let dist = Uniform::new(lo, hi);
            TensorData::F32((0..n).map(|_| dist.sample(&mut rng) as f32).collect())
        }
        Dtype::F16 => {
            let dist = Uniform::new(lo, hi);
            TensorData::F16(
                (0..n)
                    .map(|_| vm::tensor::f64_to_f16_bits(dist.sample(&mut rng)))
                    .collect(),
            )
        }
        Dtype::I32 => {
            let dist = Uniform::new(lo as i64, hi as i64 + 1);
            TensorData::I32((0..n).map(|_| dist.sample(&mut rng) as i32).collect())
        }
        Dtype::U8 => {
            let dist = Uniform::new(0u8, 2u8);
            TensorData::U8((0..n).map(|_| dist.sample(&mut rng)).collect())
        }
    };
    TensorValue::new(shape.to_vec(), data).unwrap()
}

struct Run {
    name: &'static str,
    oracle: &'static str,
    shapes: ShapeMap,
    lo: f64,
    hi: f64,
}

fn triangle(run: &Run) {
    let source = fixture_source(run.name);
    let program = parse_program(&source).expect("fixture parses");
    let cfg = NpuConfig::default();

    let analysis = semantic::check_program(&program, &cfg, &run.shapes)
        .unwrap_or_else(|d| panic!("{} rejected: {d:?}", run.name));
    let exec = vm::Executor::prepare(&program, &cfg, &run.shapes).unwrap();

    let (unit, trace) = lowering::run_pipeline(
        &program,
        &cfg,
        &lowering::identity_hook(),
        lowering::DEFAULT_MAX_REPAIRS,
    )
    .unwrap_or_else(|e| panic!("{} lowering failed: {e}", run.name));
    assert_eq!(trace.accepted_passes(), 4);
    assert!(target::check_structure(&unit).is_empty());

    for round in 0..3u64 {
        let mut inputs = BTreeMap::new();
        for param in &program.host.params {
            if param.is_out {
                continue;
            }
            let shape: Vec<usize> = analysis.bindings.tensor_shapes[&param.name]
                .iter()
                .map(|&d| d as usize)
                .collect();
            let seed = round * 1000 + param.name.len() as u64;
            inputs.insert(
                param.name.clone(),
                gen_tensor(param.dtype, &shape, run.lo, run.hi, seed),
            );
        }

        let got = exec.run(&inputs).expect("functional run");
        let expected = vm::reference_eval(run.oracle, &inputs).expect("oracle run");
        for (name, reference) in &expected {
            let actual = &got[name];
            let (rel, abs) = match actual.dtype() {
                Dtype::F16 => (1e-2, 1e-3),
                _ => (1e-5, 1e-6),
            };
            let report = vm::compare_tensors(actual, reference, rel, abs).unwrap();
            assert!(
                report.pass,
                "{}/{} diverges from oracle: worst {:?} actual {} vs {}",
                run.name, name, report.worst_index, report.worst_actual, report.worst_reference
            );
        }

        let target_out = target::interpret_target(&unit, &inputs, &cfg).expect("target run");
        for (name, value) in &got {
            assert!(
                value.data.bits_equal(&target_out[name].data),
                "{}/{} target interpreter diverges bitwise",
                run.name,
                name
            );
        }
    }
}

#[test]
fn relu_triangle() {
    triangle(&Run {
        name: "relu",
        oracle: "relu",
        shapes: ShapeMap::from([("R".into(), 37), ("C".into(), 99)]),
        lo: -1.0,
        hi: 1.0,
    });
}

#[test]
fn softmax_triangle() {
    triangle(&Run {
        name: "softmax",
        oracle: "softmax",
        shapes: ShapeMap::from([("R".into(), 19), ("C".into(), 257)]),
        lo: -4.0,
        hi: 4.0,
    });
}

#[test]
fn mse_loss_triangle_with_sync() {
    triangle(&Run {
        name: "mse_loss",
        oracle: "mse_loss",
        shapes: ShapeMap::from([("R".into(), 16), ("C".into(), 65)]),
        lo: -1.0,
        hi: 1.0,
    });
}

#[test]
fn row_max_triangle_nested_loops() {
    triangle(&Run {
        name: "row_max",
        oracle: "row_max",
        shapes: ShapeMap::from([("R".into(), 23), ("C".into(), 700)]),
        lo: -1.0,
        hi: 1.0,
    });
}

#[test]
fn softmax_lowering_has_expected_stage_fns() {
    let source = fixture_source("softmax");
    let program = parse_program(&source).unwrap();
    let cfg = NpuConfig::default();
    let (unit, _) = lowering::run_pipeline(
        &program,
        &cfg,
        &lowering::identity_hook(),
        lowering::DEFAULT_MAX_REPAIRS,
    )
    .unwrap();
    let names: Vec<&str> = unit.stage_fns.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, vec!["CopyInRow_in", "ComputeSoftmax", "CopyOutRow_out"]);
    let (host_text, kernel_text) = target::emit_text(&unit);
    for marker in ["CopyInRow_in", "ComputeSoftmax", "CopyOutRow_out", "Process"] {
        assert!(kernel_text.contains(marker), "missing marker {marker}");
    }
    assert!(host_text.contains("SoftmaxTiling"));
    assert!(host_text.contains("rows_per_block"));
}

#[test]
fn pass_sections_are_monotone() {
    // Earlier passes' sections stay byte-identical as later passes run,
    // except pass 4's rewrites inside stage functions.
    let source = fixture_source("relu");
    let program = parse_program(&source).unwrap();
    let cfg = NpuConfig::default();
    let p1 = lowering::pass_host(&program);
    let f1 = p1.section_fingerprints();
    let p2 = lowering::pass_kernel_init(&program, p1, &cfg);
    let f2 = p2.section_fingerprints();
    let p3 = lowering::pass_kernel_compute(&program, p2);
    let f3 = p3.section_fingerprints();
    let p4 = lowering::pass_alignment(&program, p3.clone(), &cfg).unwrap();
    let f4 = p4.section_fingerprints();

    let owned_by_pass1 = ["params", "tiling_record", "host_stmts", "launch"];
    for key in owned_by_pass1 {
        let get = |f: &[(String, String)]| f.iter().find(|(k, _)| k == key).unwrap().1.clone();
        assert_eq!(get(&f1), get(&f2), "{key} changed in pass 2");
        assert_eq!(get(&f2), get(&f3), "{key} changed in pass 3");
        assert_eq!(get(&f3), get(&f4), "{key} changed in pass 4");
    }
    for key in ["kernel_state", "init_stmts"] {
        let get = |f: &[(String, String)]| f.iter().find(|(k, _)| k == key).unwrap().1.clone();
        assert_eq!(get(&f2), get(&f3), "{key} changed in pass 3");
        assert_eq!(get(&f3), get(&f4), "{key} changed in pass 4");
    }
    // Pass 4 only rewrites transfers inside stage functions.
    let get = |f: &[(String, String)], key: &str| {
        f.iter().find(|(k, _)| k == key).unwrap().1.clone()
    };
    assert_eq!(get(&f3, "process_body"), get(&f4, "process_body"));
}

#[test]
fn alignment_pass_is_idempotent_and_complete() {
    let source = fixture_source("relu");
    let program = parse_program(&source).unwrap();
    let cfg = NpuConfig::default();
    // Odd shape so tails are unaligned.
    let shapes = ShapeMap::from([("R".into(), 37), ("C".into(), 99)]);

    let p1 = lowering::pass_host(&program);
    let p2 = lowering::pass_kernel_init(&program, p1, &cfg);
    let p3 = lowering::pass_kernel_compute(&program, p2);
    let mut once = p3.clone();
    lowering::passes::pass_alignment_at(&program, &mut once, &cfg, &shapes).unwrap();
    let mut twice = once.clone();
    lowering::passes::pass_alignment_at(&program, &mut twice, &cfg, &shapes).unwrap();
    assert_eq!(once, twice, "alignment pass must be idempotent");

    let records = target::scan_transfers(&once, &shapes, &cfg).unwrap();
    assert!(target::all_plain_transfers_aligned(&records));
    assert!(
        records.iter().any(|r| r.padded),
        "odd shapes must force at least one padded copy"
    );
}
