//! Command implementations shared by the binary and the test suites.
//!
//! Exit-code contract (documented in the README):
//! 0 success; 1 semantic/pipeline/correctness failure; 2 parse failure;
//! 3 I/O or environment failure.

use crate::inputs;
use crate::manifest::{self, FixtureManifest};
use adsl_core::diag::{has_errors, Diagnostic, Severity};
use adsl_core::lowering;
use adsl_core::parser::parse_program;
use adsl_core::semantic;
use adsl_core::target;
use adsl_core::vm::{self, NpuConfig, ShapeMap, TensorValue};
use adsl_core::Program;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SEMANTIC: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub struct Outcome {
    pub code: i32,
    /// Human-oriented summary written to stderr by the binary.
    pub message: String,
}

impl Outcome {
    fn ok(message: impl Into<String>) -> Outcome {
        Outcome {
            code: EXIT_OK,
            message: message.into(),
        }
    }

    fn fail(code: i32, message: impl Into<String>) -> Outcome {
        Outcome {
            code,
            message: message.into(),
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<NpuConfig, String> {
    match path {
        None => Ok(NpuConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("reading config {}: {e}", p.display()))?;
            NpuConfig::from_key_values(&text).map_err(|e| e.to_string())
        }
    }
}

fn read_program(path: &Path) -> Result<Program, Outcome> {
    let source = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            return Err(Outcome::fail(
                EXIT_IO,
                format!("reading {}: {e}", path.display()),
            ));
        }
    };
    match parse_program(&source) {
        Ok(p) => Ok(p),
        Err(diags) => {
            print_diags(&diags);
            Err(Outcome::fail(
                EXIT_PARSE,
                format!("{} parse error(s)", diags.len()),
            ))
        }
    }
}

fn print_diags(diags: &[Diagnostic]) {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for d in diags {
        let _ = writeln!(lock, "{}", d.to_json_line());
    }
}

/// `check`: parse then run the semantic suite; diagnostics stream to stdout
/// as JSON lines.
pub fn cmd_check(path: &Path, cfg: &NpuConfig) -> Outcome {
    let program = match read_program(path) {
        Ok(p) => p,
        Err(outcome) => return outcome,
    };
    match semantic::check_program(&program, cfg, &ShapeMap::new()) {
        Ok(analysis) => {
            print_diags(&analysis.warnings);
            Outcome::ok(format!(
                "ok: {} block(s), {} warning(s)",
                analysis.plan.num_blocks,
                analysis.warnings.len()
            ))
        }
        Err(diags) => {
            print_diags(&diags);
            let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
            Outcome::fail(EXIT_SEMANTIC, format!("{errors} semantic error(s)"))
        }
    }
}

/// `sim`: run the program on tensors from `inputs_dir`, write outputs (and
/// with `timed` the cost report) into `out_dir`.
pub fn cmd_sim(
    path: &Path,
    inputs_dir: &Path,
    out_dir: &Path,
    cfg: &NpuConfig,
    timed: bool,
    json: bool,
) -> Outcome {
    let program = match read_program(path) {
        Ok(p) => p,
        Err(outcome) => return outcome,
    };

    let mut input_tensors: BTreeMap<String, TensorValue> = BTreeMap::new();
    for param in &program.host.params {
        if param.is_out {
            continue;
        }
        let file = inputs_dir.join(format!("{}.adslt", param.name));
        let bytes = match std::fs::read(&file) {
            Ok(b) => b,
            Err(_) => {
                return Outcome::fail(
                    EXIT_SEMANTIC,
                    format!("missing input tensor `{}` ({})", param.name, file.display()),
                );
            }
        };
        match TensorValue::from_bytes(&bytes) {
            Ok(t) => {
                input_tensors.insert(param.name.clone(), t);
            }
            Err(e) => {
                return Outcome::fail(EXIT_IO, format!("bad container {}: {e}", file.display()));
            }
        }
    }

    let shapes = match vm::bind_shapes_from_inputs(&program, &input_tensors) {
        Ok(s) => s,
        Err(diags) => {
            print_diags(&diags);
            return Outcome::fail(EXIT_SEMANTIC, "input tensors do not match the program");
        }
    };
    let exec = match vm::Executor::prepare(&program, cfg, &shapes) {
        Ok(e) => e,
        Err(diags) => {
            print_diags(&diags);
            return Outcome::fail(EXIT_SEMANTIC, "program rejected by semantic checks");
        }
    };

    let (outputs, cost) = if timed {
        match vm::timed::run_timed_prepared(&exec, &input_tensors, cfg) {
            Ok((o, c)) => (o, Some(c)),
            Err(e) => return Outcome::fail(EXIT_SEMANTIC, e.to_string()),
        }
    } else {
        match exec.run(&input_tensors) {
            Ok(o) => (o, None),
            Err(e) => return Outcome::fail(EXIT_SEMANTIC, e.to_string()),
        }
    };

    if let Err(e) = std::fs::create_dir_all(out_dir) {
        return Outcome::fail(EXIT_IO, format!("creating {}: {e}", out_dir.display()));
    }
    for (name, tensor) in &outputs {
        let file = out_dir.join(format!("{name}.adslt"));
        if let Err(e) = std::fs::write(&file, tensor.to_bytes()) {
            return Outcome::fail(EXIT_IO, format!("writing {}: {e}", file.display()));
        }
    }
    if let Some(report) = &cost {
        let file = out_dir.join("cost.json");
        if let Err(e) = std::fs::write(&file, report.to_json()) {
            return Outcome::fail(EXIT_IO, format!("writing {}: {e}", file.display()));
        }
        if json {
            println!("{}", report.to_json());
        }
    }
    Outcome::ok(format!("wrote {} output tensor(s)", outputs.len()))
}

/// `compile`: run the lowering pipeline, write emitted sources and the pass
/// trace. `stop_after` dumps the intermediate unit of an earlier pass.
pub fn cmd_compile(
    path: &Path,
    out_dir: &Path,
    cfg: &NpuConfig,
    stop_after: u8,
    ext: &str,
) -> Outcome {
    let program = match read_program(path) {
        Ok(p) => p,
        Err(outcome) => return outcome,
    };
    let hook = lowering::identity_hook();
    let result = lowering::run_pipeline_partial(
        &program,
        cfg,
        &hook,
        lowering::DEFAULT_MAX_REPAIRS,
        stop_after,
        &ShapeMap::new(),
    );
    let (unit, trace) = match result {
        Ok(pair) => pair,
        Err(e) => {
            print_diags(&e.diagnostics);
            let trace_file = out_dir.join("trace.json");
            if std::fs::create_dir_all(out_dir).is_ok() {
                let _ = std::fs::write(&trace_file, e.trace.to_json());
            }
            return Outcome::fail(
                EXIT_SEMANTIC,
                format!("lowering aborted at pass {}", e.pass_id),
            );
        }
    };
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        return Outcome::fail(EXIT_IO, format!("creating {}: {e}", out_dir.display()));
    }
    let (host_text, kernel_text) = target::emit_text(&unit);
    let host_file = out_dir.join(format!("{}.host.{ext}", program.name));
    if let Err(e) = std::fs::write(&host_file, &host_text) {
        return Outcome::fail(EXIT_IO, format!("writing {}: {e}", host_file.display()));
    }
    let mut written = vec![host_file];
    if stop_after >= 2 {
        let kernel_file = out_dir.join(format!("{}.kernel.{ext}", program.name));
        if let Err(e) = std::fs::write(&kernel_file, &kernel_text) {
            return Outcome::fail(EXIT_IO, format!("writing {}: {e}", kernel_file.display()));
        }
        written.push(kernel_file);
    }
    let trace_file = out_dir.join("trace.json");
    if let Err(e) = std::fs::write(&trace_file, trace.to_json()) {
        return Outcome::fail(EXIT_IO, format!("writing {}: {e}", trace_file.display()));
    }
    written.push(trace_file);
    Outcome::ok(format!(
        "{} pass(es) accepted; wrote {} file(s)",
        trace.accepted_passes(),
        written.len()
    ))
}

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub fixture: String,
    pub shape: String,
    pub status: String,
    pub makespan_cycles: u64,
    pub naive_makespan_cycles: u64,
    pub speedup: f64,
}

/// `bench`: for each fixture x shape, check correctness against the oracle,
/// then compare the configured timed run against a naive baseline (queue
/// depth 1, single core, so blocks serialize and nothing overlaps).
pub fn cmd_bench(manifest_path: &Path, cfg: &NpuConfig, json: bool) -> Outcome {
    let (manifest, root) = match manifest::load_manifest(manifest_path) {
        Ok(m) => m,
        Err(e) => return Outcome::fail(EXIT_IO, e.to_string()),
    };
    let mut naive_cfg = cfg.clone();
    naive_cfg.queue_depth_in = 1;
    naive_cfg.queue_depth_out = 1;
    naive_cfg.num_cores = 1;

    let mut rows: Vec<BenchRow> = Vec::new();
    let mut failures = 0usize;
    for fixture in &manifest.fixtures {
        let program_path = root.join(&fixture.name).join("program.adsl");
        for (shape_index, shape) in fixture.shapes.iter().enumerate() {
            let shape_str = shape
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(",");
            match bench_one(&program_path, fixture, shape_index, cfg, &naive_cfg) {
                Ok((makespan, naive)) => rows.push(BenchRow {
                    fixture: fixture.name.clone(),
                    shape: shape_str,
                    status: "ok".into(),
                    makespan_cycles: makespan,
                    naive_makespan_cycles: naive,
                    speedup: naive as f64 / makespan.max(1) as f64,
                }),
                Err(e) => {
                    failures += 1;
                    rows.push(BenchRow {
                        fixture: fixture.name.clone(),
                        shape: shape_str,
                        status: format!("FAILED: {e}"),
                        makespan_cycles: 0,
                        naive_makespan_cycles: 0,
                        speedup: 0.0,
                    });
                }
            }
        }
    }

    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&rows).expect("rows serialize")
        );
    } else {
        println!(
            "{:<14} {:<22} {:>14} {:>14} {:>9}  status",
            "fixture", "shape", "makespan", "naive", "speedup"
        );
        for row in &rows {
            println!(
                "{:<14} {:<22} {:>14} {:>14} {:>8.2}x  {}",
                row.fixture,
                row.shape,
                row.makespan_cycles,
                row.naive_makespan_cycles,
                row.speedup,
                row.status
            );
        }
    }
    if failures > 0 {
        Outcome::fail(EXIT_SEMANTIC, format!("{failures} fixture row(s) failed"))
    } else {
        Outcome::ok(format!("{} row(s) benchmarked", rows.len()))
    }
}

fn bench_one(
    program_path: &Path,
    fixture: &FixtureManifest,
    shape_index: usize,
    cfg: &NpuConfig,
    naive_cfg: &NpuConfig,
) -> Result<(u64, u64), String> {
    let source = std::fs::read_to_string(program_path).map_err(|e| e.to_string())?;
    let program = parse_program(&source).map_err(|d| format!("parse: {}", diag_list(&d)))?;
    let shapes = fixture.shape_map(shape_index);
    let exec = vm::Executor::prepare(&program, cfg, &shapes)
        .map_err(|d| format!("check: {}", diag_list(&d)))?;
    let tensors = inputs::generate_inputs(
        &program,
        &exec.analysis.bindings,
        &fixture.inputs,
        &fixture.name,
        shape_index,
        0,
    );

    // Correctness first: a wrong kernel gets no performance row.
    let outputs = exec.run(&tensors).map_err(|e| e.to_string())?;
    let expected = vm::reference_eval(&fixture.oracle, &tensors).map_err(|e| e.to_string())?;
    for (name, reference) in &expected {
        let actual = outputs
            .get(name)
            .ok_or_else(|| format!("oracle output `{name}` has no matching tensor"))?;
        let tol = match actual.dtype() {
            adsl_core::ast::Dtype::F16 => fixture.tolerances.f16,
            _ => fixture.tolerances.f32,
        };
        let report =
            vm::compare_tensors(actual, reference, tol.rel, tol.abs).map_err(|e| e.to_string())?;
        if !report.pass {
            return Err(format!(
                "`{name}` diverges from oracle (worst |err| {:.3e} at {:?})",
                report.worst_abs_err, report.worst_index
            ));
        }
    }

    let (_, report) =
        vm::timed::run_timed_prepared(&exec, &tensors, cfg).map_err(|e| e.to_string())?;
    let naive_exec = vm::Executor::prepare(&program, naive_cfg, &shapes)
        .map_err(|d| format!("check: {}", diag_list(&d)))?;
    let (_, naive_report) = vm::timed::run_timed_prepared(&naive_exec, &tensors, naive_cfg)
        .map_err(|e| e.to_string())?;
    Ok((report.makespan_cycles, naive_report.makespan_cycles))
}

fn diag_list(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// `goldens`: compile every fixture and compare emitted sources and traces
/// byte-wise against the committed goldens; `--update` rewrites them.
pub fn cmd_goldens(fixtures_dir: &Path, cfg: &NpuConfig, update: bool) -> Outcome {
    let manifest_path = fixtures_dir.join("manifest.json");
    let (manifest, root) = match manifest::load_manifest(&manifest_path) {
        Ok(m) => m,
        Err(e) => return Outcome::fail(EXIT_IO, e.to_string()),
    };
    let mut mismatches: Vec<String> = Vec::new();
    for fixture in &manifest.fixtures {
        let dir = root.join(&fixture.name);
        let program = match read_program(&dir.join("program.adsl")) {
            Ok(p) => p,
            Err(outcome) => return outcome,
        };
        let hook = lowering::identity_hook();
        let (unit, trace) = match lowering::run_pipeline(
            &program,
            cfg,
            &hook,
            lowering::DEFAULT_MAX_REPAIRS,
        ) {
            Ok(pair) => pair,
            Err(e) => {
                return Outcome::fail(
                    EXIT_SEMANTIC,
                    format!("fixture `{}`: {e}", fixture.name),
                );
            }
        };
        let (host_text, kernel_text) = target::emit_text(&unit);
        let expectations = [
            ("expected_host", host_text),
            ("expected_kernel", kernel_text),
            ("expected_trace.json", trace.to_json()),
        ];
        for (file, actual) in expectations {
            let path = dir.join(file);
            if update {
                if let Err(e) = std::fs::write(&path, &actual) {
                    return Outcome::fail(EXIT_IO, format!("writing {}: {e}", path.display()));
                }
                continue;
            }
            match std::fs::read_to_string(&path) {
                Ok(expected) if expected == actual => {}
                Ok(_) => mismatches.push(path.display().to_string()),
                Err(_) => mismatches.push(format!("{} (missing)", path.display())),
            }
        }
        let status = if update { "updated" } else { "ok" };
        if !mismatches.iter().any(|m| m.contains(&fixture.name)) {
            println!("{}: {status}", fixture.name);
        } else {
            println!("{}: MISMATCH", fixture.name);
        }
    }
    if mismatches.is_empty() {
        Outcome::ok("golden suite clean")
    } else {
        for m in &mismatches {
            eprintln!("golden mismatch: {m}");
        }
        Outcome::fail(EXIT_SEMANTIC, format!("{} golden file(s) differ", mismatches.len()))
    }
}

/// Compile one fixture in memory; used by determinism checks.
pub fn compile_fixture_text(
    program_path: &Path,
    cfg: &NpuConfig,
) -> Result<(String, String, String), String> {
    let source = std::fs::read_to_string(program_path).map_err(|e| e.to_string())?;
    let program = parse_program(&source).map_err(|d| diag_list(&d))?;
    let hook = lowering::identity_hook();
    let (unit, trace) =
        lowering::run_pipeline(&program, cfg, &hook, lowering::DEFAULT_MAX_REPAIRS)
            .map_err(|e| e.to_string())?;
    let (host, kernel) = target::emit_text(&unit);
    Ok((host, kernel, trace.to_json()))
}

/// Convenience used by tests: full semantic result for one path.
pub fn check_path(path: &Path, cfg: &NpuConfig) -> Result<(), Vec<Diagnostic>> {
    let source = std::fs::read_to_string(path).map_err(|e| {
        vec![Diagnostic::error(
            adsl_core::diag::rules::PAR_LEX,
            adsl_core::Span::default(),
            e.to_string(),
        )]
    })?;
    let program = parse_program(&source)?;
    let analysis = semantic::check_program(&program, cfg, &ShapeMap::new())?;
    if has_errors(&analysis.warnings) {
        return Err(analysis.warnings);
    }
    Ok(())
}

/// Output directory naming used by `compile` and `sim` defaults.
pub fn default_out_dir(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "out".to_string());
    PathBuf::from(format!("{stem}_{suffix}"))
}
