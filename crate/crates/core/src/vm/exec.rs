//! Functional interpreter for the DSL on the virtual NPU.
//!
//! Execution is deterministic: blocks run in ascending id, statements in
//! program order, with `sync` splitting the kernel into barrier-delimited
//! phases (all blocks finish phase p before any starts p+1). Queue handoff
//! between stages degenerates to direct buffer visibility under this order;
//! the timed model in [`crate::vm::timed`] replays the recorded trace with
//! real queue semantics.

use crate::ast::*;
use crate::diag::Diagnostic;
use crate::eval::{eval_float, eval_int, Env};
use crate::semantic::{self, Analysis};
use crate::vm::config::NpuConfig;
use crate::vm::host::{bind_shapes_from_inputs, KernelArgValue, ShapeMap};
use crate::vm::kernels::{self, BinOp, ImmOp, KernelFault, RedOp, UnOp};
use crate::vm::tensor::{TensorData, TensorValue};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VmError {
    /// The program failed validation; run `check` for details.
    #[error("program rejected by semantic checks: {}", format_diags(.0))]
    Rejected(Vec<Diagnostic>),
    #[error("input mismatch: {0}")]
    Input(String),
    /// A fault that semantic checking should have ruled out.
    #[error("internal interpreter error: {0}")]
    Internal(String),
}

fn format_diags(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<KernelFault> for VmError {
    fn from(f: KernelFault) -> Self {
        VmError::Internal(f.0)
    }
}

/// Queues of the timed model; also used to label the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum QueueKind {
    Mte2,
    Vec,
    Scalar,
    Mte3,
}

impl QueueKind {
    pub fn name(self) -> &'static str {
        match self {
            QueueKind::Mte2 => "MTE2",
            QueueKind::Vec => "VEC",
            QueueKind::Scalar => "SCALAR",
            QueueKind::Mte3 => "MTE3",
        }
    }

    pub const ALL: [QueueKind; 4] = [
        QueueKind::Mte2,
        QueueKind::Vec,
        QueueKind::Scalar,
        QueueKind::Mte3,
    ];
}

/// One instruction occurrence in the recorded execution.
#[derive(Debug, Clone)]
pub struct InstrRec {
    pub queue: QueueKind,
    pub cycles: u64,
    pub instance: usize,
}

/// One stage-block instance (or the per-block init segment).
#[derive(Debug, Clone)]
pub struct InstanceRec {
    pub block_id: i64,
    pub phase: usize,
    pub kind: Option<StageKind>,
    pub label: String,
    /// Stream buffers this instance dequeued (reads with count > 0).
    pub consumes: Vec<String>,
    /// Stream buffers this instance enqueued (writes with count > 0).
    pub produces: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ExecTrace {
    pub instances: Vec<InstanceRec>,
    pub instrs: Vec<InstrRec>,
    pub num_phases: usize,
    pub num_blocks: i64,
}

/// A program validated and bound to one shape assignment, ready to run many
/// inputs.
pub struct Executor<'p> {
    program: &'p Program,
    cfg: NpuConfig,
    pub analysis: Analysis,
}

impl<'p> Executor<'p> {
    /// Run the full semantic suite at the given shapes and prepare an
    /// executor. Shapes default to the declared ones.
    pub fn prepare(
        program: &'p Program,
        cfg: &NpuConfig,
        shapes: &ShapeMap,
    ) -> Result<Executor<'p>, Vec<Diagnostic>> {
        let analysis = semantic::check_program(program, cfg, shapes)?;
        Ok(Executor {
            program,
            cfg: cfg.clone(),
            analysis,
        })
    }

    /// Functional run: outputs for every `out` tensor parameter.
    pub fn run(
        &self,
        inputs: &BTreeMap<String, TensorValue>,
    ) -> Result<BTreeMap<String, TensorValue>, VmError> {
        Ok(self.run_inner(inputs, false)?.0)
    }

    /// Functional run plus the instruction/instance trace for the timed
    /// model.
    pub fn run_traced(
        &self,
        inputs: &BTreeMap<String, TensorValue>,
    ) -> Result<(BTreeMap<String, TensorValue>, ExecTrace), VmError> {
        self.run_inner(inputs, true)
    }

    fn validate_inputs(&self, inputs: &BTreeMap<String, TensorValue>) -> Result<(), VmError> {
        for param in &self.program.host.params {
            if param.is_out {
                continue;
            }
            let t = inputs.get(&param.name).ok_or_else(|| {
                VmError::Input(format!("missing input tensor `{}`", param.name))
            })?;
            let expected = &self.analysis.bindings.tensor_shapes[&param.name];
            let actual: Vec<i64> = t.shape.iter().map(|&d| d as i64).collect();
            if &actual != expected {
                return Err(VmError::Input(format!(
                    "tensor `{}` has shape {actual:?}, expected {expected:?}",
                    param.name
                )));
            }
            if t.dtype() != param.dtype {
                return Err(VmError::Input(format!(
                    "tensor `{}` has dtype {}, expected {}",
                    param.name,
                    t.dtype().name(),
                    param.dtype.name()
                )));
            }
        }
        for name in inputs.keys() {
            if !self.program.host.params.iter().any(|p| &p.name == name) {
                return Err(VmError::Input(format!(
                    "input tensor `{name}` does not match any parameter"
                )));
            }
        }
        Ok(())
    }

    fn run_inner(
        &self,
        inputs: &BTreeMap<String, TensorValue>,
        traced: bool,
    ) -> Result<(BTreeMap<String, TensorValue>, ExecTrace), VmError> {
        self.validate_inputs(inputs)?;
        let plan = &self.analysis.plan;

        // Global memory: inputs as provided, outputs zero-initialized.
        let mut gm: BTreeMap<String, TensorData> = BTreeMap::new();
        for param in &self.program.host.params {
            let shape = &self.analysis.bindings.tensor_shapes[&param.name];
            let numel: i64 = shape.iter().product();
            match inputs.get(&param.name) {
                Some(t) => {
                    gm.insert(param.name.clone(), t.data.clone());
                }
                None => {
                    gm.insert(
                        param.name.clone(),
                        TensorData::zeros(param.dtype, numel as usize),
                    );
                }
            }
        }

        // Per-block on-chip state persists across phases.
        let mut blocks: Vec<BlockState> = (0..plan.num_blocks)
            .map(|b| BlockState {
                env: plan.block_env(b),
                buffers: self
                    .program
                    .kernel
                    .buffers
                    .iter()
                    .map(|buf| {
                        let cap = self.analysis.buffer_capacities[&buf.name] as usize;
                        (buf.name.clone(), TensorData::zeros(buf.dtype, cap))
                    })
                    .collect(),
            })
            .collect();

        let phases = split_phases(&self.program.kernel.body);
        let mut trace = ExecTrace {
            num_phases: phases.len(),
            num_blocks: plan.num_blocks,
            ..Default::default()
        };

        for (phase_idx, phase) in phases.iter().enumerate() {
            for block_id in 0..plan.num_blocks {
                let mut cx = BlockCx {
                    cfg: &self.cfg,
                    analysis: &self.analysis,
                    gm: &mut gm,
                    state: &mut blocks[block_id as usize],
                    block_id,
                    phase: phase_idx,
                    traced,
                    trace: &mut trace,
                    instance: None,
                };
                cx.exec_top(phase)?;
            }
        }

        let mut outputs = BTreeMap::new();
        for param in &self.program.host.params {
            if !param.is_out {
                continue;
            }
            let shape: Vec<usize> = self.analysis.bindings.tensor_shapes[&param.name]
                .iter()
                .map(|&d| d as usize)
                .collect();
            let data = gm.remove(&param.name).expect("output tensor exists");
            outputs.insert(
                param.name.clone(),
                TensorValue::new(shape, data).map_err(|e| VmError::Internal(e.to_string()))?,
            );
        }
        Ok((outputs, trace))
    }
}

/// Barrier-delimited runs of top-level statements.
fn split_phases(body: &[Stmt]) -> Vec<Vec<&Stmt>> {
    let mut phases = vec![Vec::new()];
    for stmt in body {
        if matches!(stmt, Stmt::Sync { .. }) {
            phases.push(Vec::new());
        } else {
            phases.last_mut().unwrap().push(stmt);
        }
    }
    phases
}

struct BlockState {
    env: Env,
    buffers: BTreeMap<String, TensorData>,
}

struct BlockCx<'a> {
    cfg: &'a NpuConfig,
    analysis: &'a Analysis,
    gm: &'a mut BTreeMap<String, TensorData>,
    state: &'a mut BlockState,
    block_id: i64,
    phase: usize,
    traced: bool,
    trace: &'a mut ExecTrace,
    /// Index of the instance currently being recorded.
    instance: Option<usize>,
}

impl<'a> BlockCx<'a> {
    fn eval(&self, expr: &IntExpr) -> Result<i64, VmError> {
        eval_int(expr, &self.state.env).map_err(|e| VmError::Internal(e.message()))
    }

    fn begin_instance(&mut self, kind: Option<StageKind>, label: &str) {
        if !self.traced {
            return;
        }
        self.trace.instances.push(InstanceRec {
            block_id: self.block_id,
            phase: self.phase,
            kind,
            label: label.to_string(),
            consumes: Vec::new(),
            produces: Vec::new(),
        });
        self.instance = Some(self.trace.instances.len() - 1);
    }

    fn record_instr(&mut self, queue: QueueKind, bytes: u64) {
        if !self.traced {
            return;
        }
        let cycles = match queue {
            QueueKind::Scalar => self.cfg.lat_scalar,
            QueueKind::Vec => {
                self.cfg.lat_issue + bytes.div_ceil(256) * self.cfg.lat_vec_per_256b
            }
            QueueKind::Mte2 | QueueKind::Mte3 => {
                self.cfg.lat_issue + bytes.div_ceil(256) * self.cfg.lat_mte_per_256b
            }
        };
        let instance = self.instance.expect("instruction outside any instance");
        self.trace.instrs.push(InstrRec {
            queue,
            cycles,
            instance,
        });
    }

    fn record_stream_event(&mut self, buffer: &str, write: bool) {
        if !self.traced {
            return;
        }
        let Some(idx) = self.instance else { return };
        let role = self
            .analysis
            .table
            .buffer(buffer)
            .map(|(_, role, _, _)| role);
        let inst = &mut self.trace.instances[idx];
        match (role, inst.kind) {
            (Some(BufferRole::StreamIn), Some(StageKind::CopyIn)) if write => {
                if !inst.produces.iter().any(|b| b == buffer) {
                    inst.produces.push(buffer.to_string());
                }
            }
            (Some(BufferRole::StreamIn), Some(StageKind::Compute)) if !write => {
                if !inst.consumes.iter().any(|b| b == buffer) {
                    inst.consumes.push(buffer.to_string());
                }
            }
            (Some(BufferRole::StreamOut), Some(StageKind::Compute)) if write => {
                if !inst.produces.iter().any(|b| b == buffer) {
                    inst.produces.push(buffer.to_string());
                }
            }
            (Some(BufferRole::StreamOut), Some(StageKind::CopyOut)) if !write => {
                if !inst.consumes.iter().any(|b| b == buffer) {
                    inst.consumes.push(buffer.to_string());
                }
            }
            _ => {}
        }
    }

    /// Top-level statements of one phase: init lets, loops, stage blocks.
    fn exec_top(&mut self, stmts: &[&Stmt]) -> Result<(), VmError> {
        // Top-level lets form a per-block init segment.
        if self.phase == 0 {
            self.begin_instance(None, "init");
        }
        for stmt in stmts {
            self.exec_stmt(stmt, true)?;
        }
        Ok(())
    }

    fn exec_stmt(&mut self, stmt: &Stmt, top: bool) -> Result<(), VmError> {
        match stmt {
            Stmt::Let { name, expr, .. } => {
                let value = self.eval(expr)?;
                self.state.env.bind(name, value);
                self.record_instr(QueueKind::Scalar, 0);
                Ok(())
            }
            Stmt::For {
                var, bound, body, ..
            } => {
                let bound = self.eval(bound)?;
                for i in 0..bound.max(0) {
                    self.state.env.bind(var, i);
                    for s in body {
                        self.exec_stmt(s, top)?;
                    }
                }
                self.state.env.unbind(var);
                Ok(())
            }
            Stmt::Stage(block) => {
                self.begin_instance(Some(block.kind), &block.label);
                for s in &block.stmts {
                    self.exec_stmt(s, false)?;
                }
                self.instance = None;
                Ok(())
            }
            Stmt::Sync { .. } => Err(VmError::Internal(
                "sync must be split into phases before execution".into(),
            )),
            Stmt::Prim(call) => self.exec_prim(call),
        }
    }

    fn slice(&self, arg: &Arg) -> Result<(String, i64, i64), VmError> {
        match arg {
            Arg::Slice(s) => {
                let off = self.eval(&s.offset)?;
                let count = self.eval(&s.count)?;
                Ok((s.base.clone(), off, count))
            }
            _ => Err(VmError::Internal("expected slice operand".into())),
        }
    }

    fn read_local(&self, buffer: &str, off: i64, count: i64) -> Result<TensorData, VmError> {
        let buf = self
            .state
            .buffers
            .get(buffer)
            .ok_or_else(|| VmError::Internal(format!("unknown buffer `{buffer}`")))?;
        Ok(kernels::read_slice(buf, off as usize, count as usize)?)
    }

    fn write_local(&mut self, buffer: &str, off: i64, vals: &TensorData) -> Result<(), VmError> {
        let buf = self
            .state
            .buffers
            .get_mut(buffer)
            .ok_or_else(|| VmError::Internal(format!("unknown buffer `{buffer}`")))?;
        kernels::write_slice(buf, off as usize, vals)?;
        Ok(())
    }

    fn exec_prim(&mut self, call: &PrimCall) -> Result<(), VmError> {
        match call.op {
            PrimOp::CopyG2L => self.exec_copy(call, true),
            PrimOp::CopyL2G => self.exec_copy(call, false),
            op => self.exec_compute(call, op),
        }
    }

    fn exec_copy(&mut self, call: &PrimCall, inbound: bool) -> Result<(), VmError> {
        let (gm_pos, local_pos) = if inbound { (1, 0) } else { (0, 1) };
        let (gm_name, gm_off, count) = self.slice(&call.args[gm_pos])?;
        let (local_name, local_off, local_count) = self.slice(&call.args[local_pos])?;
        if count != local_count {
            return Err(VmError::Internal("copy count mismatch".into()));
        }
        let (rows, stride) = if call.args.len() == 4 {
            let rows = match &call.args[2] {
                Arg::Int(e) => self.eval(e)?,
                _ => return Err(VmError::Internal("expected integer rows".into())),
            };
            let stride = match &call.args[3] {
                Arg::Int(e) => self.eval(e)?,
                _ => return Err(VmError::Internal("expected integer stride".into())),
            };
            (rows, stride)
        } else {
            (1, count)
        };
        if count <= 0 || rows <= 0 {
            return Ok(()); // zero-sized transfers are no-ops
        }

        let host_name = self
            .analysis
            .table
            .kernel_tensor(&gm_name)
            .map(|(_, _, h)| h.to_string())
            .ok_or_else(|| VmError::Internal(format!("`{gm_name}` is not a tensor")))?;
        let esize = self
            .analysis
            .table
            .kernel_tensor(&gm_name)
            .map(|(d, _, _)| d.size_bytes())
            .unwrap_or(4) as u64;

        if inbound {
            let gm_data = self
                .gm
                .get(&host_name)
                .ok_or_else(|| VmError::Internal(format!("missing tensor `{host_name}`")))?;
            let mut rows_data: Vec<TensorData> = Vec::with_capacity(rows as usize);
            for r in 0..rows {
                let start = (gm_off + r * stride) as usize;
                rows_data.push(kernels::read_slice(gm_data, start, count as usize)?);
            }
            let mut local_cursor = local_off;
            for rd in rows_data {
                self.write_local(&local_name, local_cursor, &rd)?;
                local_cursor += count;
            }
            self.record_instr(QueueKind::Mte2, (rows * count) as u64 * esize);
            self.record_stream_event(&local_name, true);
        } else {
            let mut rows_data: Vec<TensorData> = Vec::with_capacity(rows as usize);
            for r in 0..rows {
                rows_data.push(self.read_local(&local_name, local_off + r * count, count)?);
            }
            let gm_data = self
                .gm
                .get_mut(&host_name)
                .ok_or_else(|| VmError::Internal(format!("missing tensor `{host_name}`")))?;
            for (r, rd) in rows_data.iter().enumerate() {
                let start = (gm_off + r as i64 * stride) as usize;
                kernels::write_slice(gm_data, start, rd)?;
            }
            self.record_instr(QueueKind::Mte3, (rows * count) as u64 * esize);
            self.record_stream_event(&local_name, false);
        }
        Ok(())
    }

    fn exec_compute(&mut self, call: &PrimCall, op: PrimOp) -> Result<(), VmError> {
        let (dst_name, dst_off, dst_count) = self.slice(&call.args[0])?;
        if dst_count < 0 {
            return Err(VmError::Internal("negative count".into()));
        }

        // Source operands are materialized before the write, so overlapping
        // slices behave as read-then-write.
        let out: TensorData = match op {
            PrimOp::VAdd | PrimOp::VSub | PrimOp::VMul | PrimOp::VDiv | PrimOp::VMax
            | PrimOp::VMin => {
                let (a, ao, ac) = self.slice(&call.args[1])?;
                let (b, bo, _bc) = self.slice(&call.args[2])?;
                if ac == 0 {
                    return Ok(());
                }
                let av = self.read_local(&a, ao, ac)?;
                let bv = self.read_local(&b, bo, ac)?;
                self.record_stream_event(&a, false);
                self.record_stream_event(&b, false);
                let bin = match op {
                    PrimOp::VAdd => BinOp::Add,
                    PrimOp::VSub => BinOp::Sub,
                    PrimOp::VMul => BinOp::Mul,
                    PrimOp::VDiv => BinOp::Div,
                    PrimOp::VMax => BinOp::Max,
                    _ => BinOp::Min,
                };
                self.record_instr(QueueKind::Vec, bytes_of(&av));
                kernels::binary(bin, &av, &bv)?
            }
            PrimOp::VExp | PrimOp::VLn | PrimOp::VAbs | PrimOp::VRelu => {
                let (a, ao, ac) = self.slice(&call.args[1])?;
                if ac == 0 {
                    return Ok(());
                }
                let av = self.read_local(&a, ao, ac)?;
                self.record_stream_event(&a, false);
                let un = match op {
                    PrimOp::VExp => UnOp::Exp,
                    PrimOp::VLn => UnOp::Ln,
                    PrimOp::VAbs => UnOp::Abs,
                    _ => UnOp::Relu,
                };
                self.record_instr(QueueKind::Vec, bytes_of(&av));
                kernels::unary(un, &av)?
            }
            PrimOp::Adds | PrimOp::Muls | PrimOp::Maxs => {
                let (a, ao, ac) = self.slice(&call.args[1])?;
                let imm = match &call.args[2] {
                    Arg::Float(f) => eval_float(f, &self.state.env)
                        .map_err(|e| VmError::Internal(e.message()))?,
                    _ => return Err(VmError::Internal("expected float immediate".into())),
                };
                if ac == 0 {
                    return Ok(());
                }
                let av = self.read_local(&a, ao, ac)?;
                self.record_stream_event(&a, false);
                let im = match op {
                    PrimOp::Adds => ImmOp::Adds,
                    PrimOp::Muls => ImmOp::Muls,
                    _ => ImmOp::Maxs,
                };
                self.record_instr(QueueKind::Vec, bytes_of(&av));
                kernels::immediate(im, &av, imm)?
            }
            PrimOp::VSel => {
                let (m, mo, mc) = self.slice(&call.args[1])?;
                let (a, ao, _) = self.slice(&call.args[2])?;
                let (b, bo, _) = self.slice(&call.args[3])?;
                if mc == 0 {
                    return Ok(());
                }
                let mv = self.read_local(&m, mo, mc)?;
                let av = self.read_local(&a, ao, mc)?;
                let bv = self.read_local(&b, bo, mc)?;
                for name in [&m, &a, &b] {
                    self.record_stream_event(name, false);
                }
                self.record_instr(QueueKind::Vec, bytes_of(&av));
                kernels::select(&mv, &av, &bv)?
            }
            PrimOp::ReduceSum | PrimOp::ReduceMax => {
                let (a, ao, ac) = self.slice(&call.args[1])?;
                if ac == 0 {
                    return Ok(());
                }
                let av = self.read_local(&a, ao, ac)?;
                self.record_stream_event(&a, false);
                let red = if op == PrimOp::ReduceSum {
                    RedOp::Sum
                } else {
                    RedOp::Max
                };
                self.record_instr(QueueKind::Vec, bytes_of(&av));
                kernels::reduce(red, &av)?
            }
            PrimOp::Broadcast => {
                let (a, ao, ac) = self.slice(&call.args[1])?;
                if dst_count == 0 {
                    return Ok(());
                }
                let av = self.read_local(&a, ao, ac)?;
                self.record_stream_event(&a, false);
                self.record_instr(
                    QueueKind::Vec,
                    dst_count as u64 * av.dtype().size_bytes() as u64,
                );
                kernels::broadcast(&av, dst_count as usize)?
            }
            PrimOp::Memset => {
                let imm = match &call.args[1] {
                    Arg::Float(f) => eval_float(f, &self.state.env)
                        .map_err(|e| VmError::Internal(e.message()))?,
                    _ => return Err(VmError::Internal("expected float immediate".into())),
                };
                if dst_count == 0 {
                    return Ok(());
                }
                let dtype = self
                    .analysis
                    .table
                    .buffer(&dst_name)
                    .map(|(_, _, d, _)| d)
                    .ok_or_else(|| VmError::Internal("memset target not a buffer".into()))?;
                self.record_instr(
                    QueueKind::Vec,
                    dst_count as u64 * dtype.size_bytes() as u64,
                );
                kernels::fill(dtype, imm, dst_count as usize)?
            }
            PrimOp::Cast => {
                let (a, ao, ac) = self.slice(&call.args[1])?;
                if ac == 0 {
                    return Ok(());
                }
                let av = self.read_local(&a, ao, ac)?;
                self.record_stream_event(&a, false);
                let dtype = self
                    .analysis
                    .table
                    .buffer(&dst_name)
                    .map(|(_, _, d, _)| d)
                    .ok_or_else(|| VmError::Internal("cast target not a buffer".into()))?;
                self.record_instr(QueueKind::Vec, ac as u64 * dtype.size_bytes() as u64);
                kernels::cast(dtype, &av)?
            }
            PrimOp::CopyG2L | PrimOp::CopyL2G => unreachable!(),
        };

        self.write_local(&dst_name, dst_off, &out)?;
        self.record_stream_event(&dst_name, true);
        Ok(())
    }
}

fn bytes_of(data: &TensorData) -> u64 {
    (data.len() * data.dtype().size_bytes()) as u64
}

/// Validate (at the shapes implied by the inputs) and execute functionally.
pub fn run_functional(
    program: &Program,
    inputs: &BTreeMap<String, TensorValue>,
    cfg: &NpuConfig,
) -> Result<BTreeMap<String, TensorValue>, VmError> {
    let shapes = bind_shapes_from_inputs(program, inputs).map_err(VmError::Rejected)?;
    let exec = Executor::prepare(program, cfg, &shapes).map_err(VmError::Rejected)?;
    exec.run(inputs)
}

/// Scalar kernel argument values, exposed for the target interpreter.
pub fn scalar_args(plan: &crate::vm::host::LaunchPlan) -> Vec<(String, i64)> {
    plan.kernel_args
        .iter()
        .filter_map(|(name, v)| match v {
            KernelArgValue::Scalar(s) => Some((name.clone(), *s)),
            KernelArgValue::Tensor(_) => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn run_src(
        src: &str,
        inputs: &BTreeMap<String, TensorValue>,
    ) -> BTreeMap<String, TensorValue> {
        let p = parse_program(src).unwrap();
        run_functional(&p, inputs, &NpuConfig::default()).unwrap()
    }

    const RELU_1D: &str = "host relu(x:[N=3]f32, out y:[N=3]f32){
        launch k<1> over N (x, y, 1, N);
    }
    kernel k(x, y, nb, total){
        alloc_ub a: f32[16] stream_in;
        alloc_ub b: f32[16] stream_out;
        let off = chunk_off(total, nb, block_idx);
        let len = chunk_len(total, nb, block_idx);
        copyin i { copy_g2l(a[0:len], x[off:len]) }
        compute c { vrelu(b[0:len], a[0:len]) }
        copyout o { copy_l2g(y[off:len], b[0:len]) }
    }";

    #[test]
    fn relu_matches_definition() {
        let mut inputs = BTreeMap::new();
        inputs.insert(
            "x".to_string(),
            TensorValue::from_f32(vec![3], vec![-1.0, 0.0, 2.5]).unwrap(),
        );
        let out = run_src(RELU_1D, &inputs);
        assert_eq!(
            out["y"],
            TensorValue::from_f32(vec![3], vec![0.0, 0.0, 2.5]).unwrap()
        );
    }

    #[test]
    fn reduce_sum_of_ones_is_exact() {
        let src = "host rs(x:[R=8, C=1024]f32, out y:[R=8]f32){
            launch k<8> over R (x, y, 8, R, C);
        }
        kernel k(x, y, nb, rows, cols){
            alloc_ub a: f32[1024] stream_in;
            alloc_ub b: f32[8] stream_out;
            let r0 = chunk_off(rows, nb, block_idx);
            let rn = chunk_len(rows, nb, block_idx);
            for r in 0..rn {
                copyin i { copy_g2l(a[0:cols], x[(r0 + r) * cols : cols]) }
                compute c { reduce_sum(b[0:1], a[0:cols]) }
                copyout o { copy_l2g(y[r0 + r : 1], b[0:1]) }
            }
        }";
        let mut inputs = BTreeMap::new();
        inputs.insert(
            "x".to_string(),
            TensorValue::from_f32(vec![8, 1024], vec![1.0; 8 * 1024]).unwrap(),
        );
        let out = run_src(src, &inputs);
        assert_eq!(
            out["y"],
            TensorValue::from_f32(vec![8], vec![1024.0; 8]).unwrap()
        );
    }

    #[test]
    fn bad_input_shape_is_reported() {
        let p = parse_program(RELU_1D).unwrap();
        let mut inputs = BTreeMap::new();
        inputs.insert(
            "x".to_string(),
            TensorValue::from_f32(vec![4], vec![0.0; 4]).unwrap(),
        );
        // Shape [4] binds N=4 and runs fine; mismatched dtype must fail.
        assert!(run_functional(&p, &inputs, &NpuConfig::default()).is_ok());
        let mut bad = BTreeMap::new();
        bad.insert(
            "x".to_string(),
            TensorValue::new(vec![3], TensorData::I32(vec![1, 2, 3])).unwrap(),
        );
        assert!(run_functional(&p, &bad, &NpuConfig::default()).is_err());
    }

    #[test]
    fn trace_records_queues_and_stream_events() {
        let p = parse_program(RELU_1D).unwrap();
        let exec = Executor::prepare(&p, &NpuConfig::default(), &ShapeMap::new()).unwrap();
        let mut inputs = BTreeMap::new();
        inputs.insert(
            "x".to_string(),
            TensorValue::from_f32(vec![3], vec![1.0, -1.0, 2.0]).unwrap(),
        );
        let (_, trace) = exec.run_traced(&inputs).unwrap();
        let queues: Vec<QueueKind> = trace.instrs.iter().map(|i| i.queue).collect();
        assert!(queues.contains(&QueueKind::Mte2));
        assert!(queues.contains(&QueueKind::Vec));
        assert!(queues.contains(&QueueKind::Mte3));
        assert!(queues.contains(&QueueKind::Scalar));
        let copyin = trace
            .instances
            .iter()
            .find(|i| i.kind == Some(StageKind::CopyIn))
            .unwrap();
        assert_eq!(copyin.produces, vec!["a".to_string()]);
        let compute = trace
            .instances
            .iter()
            .find(|i| i.kind == Some(StageKind::Compute))
            .unwrap();
        assert_eq!(compute.consumes, vec!["a".to_string()]);
        assert_eq!(compute.produces, vec!["b".to_string()]);
    }
}
