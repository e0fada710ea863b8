//! Abstract syntax tree for the kernel DSL.
//!
//! A program is one host function (planning: shapes, tiling, launch) plus one
//! kernel function (on-chip: buffers, staged blocks, primitives). Spans are
//! carried on every node for diagnostics; structural comparisons should go
//! through [`strip_spans`] first.

use crate::diag::Span;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F16,
    F32,
    I32,
    U8,
}

impl Dtype {
    pub fn size_bytes(self) -> usize {
        match self {
            Dtype::F16 => 2,
            Dtype::F32 => 4,
            Dtype::I32 => 4,
            Dtype::U8 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F16 => "f16",
            Dtype::F32 => "f32",
            Dtype::I32 => "i32",
            Dtype::U8 => "u8",
        }
    }

    pub fn from_name(s: &str) -> Option<Dtype> {
        match s {
            "f16" => Some(Dtype::F16),
            "f32" => Some(Dtype::F32),
            "i32" => Some(Dtype::I32),
            "u8" => Some(Dtype::U8),
            _ => None,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Dtype::F16 | Dtype::F32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BufferSpace {
    Ub,
    L1,
}

impl BufferSpace {
    pub fn keyword(self) -> &'static str {
        match self {
            BufferSpace::Ub => "alloc_ub",
            BufferSpace::L1 => "alloc_l1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferRole {
    StreamIn,
    StreamOut,
    Temp,
}

impl BufferRole {
    pub fn keyword(self) -> &'static str {
        match self {
            BufferRole::StreamIn => "stream_in",
            BufferRole::StreamOut => "stream_out",
            BufferRole::Temp => "temp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StageKind {
    CopyIn,
    Compute,
    CopyOut,
}

impl StageKind {
    pub fn keyword(self) -> &'static str {
        match self {
            StageKind::CopyIn => "copyin",
            StageKind::Compute => "compute",
            StageKind::CopyOut => "copyout",
        }
    }

    /// Prefix used when naming the lowered stage function.
    pub fn fn_prefix(self) -> &'static str {
        match self {
            StageKind::CopyIn => "CopyIn",
            StageKind::Compute => "Compute",
            StageKind::CopyOut => "CopyOut",
        }
    }
}

/// The whole translation unit: exactly one host and one kernel function.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    /// Program name; by convention the host function's name.
    pub name: String,
    pub host: HostFn,
    pub kernel: KernelFn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HostFn {
    pub name: String,
    pub params: Vec<TensorParam>,
    pub tiling: Vec<TilingDecl>,
    pub launch: LaunchStmt,
    pub span: Span,
}

/// A global tensor parameter with its declared (default) shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorParam {
    pub name: String,
    pub dims: Vec<DimDecl>,
    pub dtype: Dtype,
    pub is_out: bool,
    pub span: Span,
}

impl TensorParam {
    /// Element count under the default shape bindings.
    pub fn default_numel(&self) -> i64 {
        self.dims.iter().map(|d| d.default_value()).product()
    }
}

/// One dimension: either a literal or a named symbol with a default value.
/// Named symbols may be rebound by a shape map at evaluation time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DimDecl {
    Lit(i64),
    Sym { name: String, default: i64 },
}

impl DimDecl {
    pub fn default_value(&self) -> i64 {
        match self {
            DimDecl::Lit(v) => *v,
            DimDecl::Sym { default, .. } => *default,
        }
    }

    pub fn sym_name(&self) -> Option<&str> {
        match self {
            DimDecl::Lit(_) => None,
            DimDecl::Sym { name, .. } => Some(name),
        }
    }
}

/// `tiling <name> = <expr> @ "<rationale>";` — the rationale is mandatory
/// and preserved verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct TilingDecl {
    pub name: String,
    pub expr: IntExpr,
    pub rationale: String,
    pub span: Span,
}

/// `launch <kernel><num_blocks> [over <workload>] (<args>);`
#[derive(Debug, Clone, PartialEq)]
pub struct LaunchStmt {
    pub kernel: String,
    pub num_blocks: IntExpr,
    /// Workload size the per-block ranges partition. Defaults to
    /// `num_blocks` (one unit per block) when absent.
    pub workload: Option<IntExpr>,
    pub args: Vec<LaunchArg>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LaunchArg {
    /// A bare identifier naming a host tensor parameter.
    Tensor(String, Span),
    /// Any other integer expression; becomes a scalar kernel argument.
    Scalar(IntExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelFn {
    pub name: String,
    /// Untyped parameter names; kinds and types come from the launch
    /// argument list, position-wise.
    pub params: Vec<(String, Span)>,
    pub buffers: Vec<BufferDecl>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

/// `alloc_ub <name>: <dtype>[<capacity>] <role>;`
#[derive(Debug, Clone, PartialEq)]
pub struct BufferDecl {
    pub name: String,
    pub space: BufferSpace,
    pub dtype: Dtype,
    pub capacity: IntExpr,
    pub role: BufferRole,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Let {
        name: String,
        expr: IntExpr,
        span: Span,
    },
    For {
        var: String,
        bound: IntExpr,
        body: Vec<Stmt>,
        span: Span,
    },
    Stage(StageBlock),
    Sync {
        span: Span,
    },
    Prim(PrimCall),
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Let { span, .. } | Stmt::For { span, .. } | Stmt::Sync { span } => *span,
            Stmt::Stage(b) => b.span,
            Stmt::Prim(p) => p.span,
        }
    }
}

/// `copyin <label> { ... }` and friends.
#[derive(Debug, Clone, PartialEq)]
pub struct StageBlock {
    pub kind: StageKind,
    pub label: String,
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimOp {
    CopyG2L,
    CopyL2G,
    VAdd,
    VSub,
    VMul,
    VDiv,
    VExp,
    VLn,
    VAbs,
    VMax,
    VMin,
    VRelu,
    Adds,
    Muls,
    Maxs,
    VSel,
    ReduceSum,
    ReduceMax,
    Broadcast,
    Memset,
    Cast,
}

/// Operand kind expected at one argument position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    /// A slice of an on-chip buffer.
    Local,
    /// A slice of a global tensor parameter.
    Global,
    /// Integer scalar expression.
    Int,
    /// Float scalar expression.
    Float,
}

impl PrimOp {
    pub const ALL: [PrimOp; 21] = [
        PrimOp::CopyG2L,
        PrimOp::CopyL2G,
        PrimOp::VAdd,
        PrimOp::VSub,
        PrimOp::VMul,
        PrimOp::VDiv,
        PrimOp::VExp,
        PrimOp::VLn,
        PrimOp::VAbs,
        PrimOp::VMax,
        PrimOp::VMin,
        PrimOp::VRelu,
        PrimOp::Adds,
        PrimOp::Muls,
        PrimOp::Maxs,
        PrimOp::VSel,
        PrimOp::ReduceSum,
        PrimOp::ReduceMax,
        PrimOp::Broadcast,
        PrimOp::Memset,
        PrimOp::Cast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimOp::CopyG2L => "copy_g2l",
            PrimOp::CopyL2G => "copy_l2g",
            PrimOp::VAdd => "vadd",
            PrimOp::VSub => "vsub",
            PrimOp::VMul => "vmul",
            PrimOp::VDiv => "vdiv",
            PrimOp::VExp => "vexp",
            PrimOp::VLn => "vln",
            PrimOp::VAbs => "vabs",
            PrimOp::VMax => "vmax",
            PrimOp::VMin => "vmin",
            PrimOp::VRelu => "vrelu",
            PrimOp::Adds => "adds",
            PrimOp::Muls => "muls",
            PrimOp::Maxs => "maxs",
            PrimOp::VSel => "vsel",
            PrimOp::ReduceSum => "reduce_sum",
            PrimOp::ReduceMax => "reduce_max",
            PrimOp::Broadcast => "broadcast",
            PrimOp::Memset => "memset",
            PrimOp::Cast => "cast",
        }
    }

    pub fn from_name(s: &str) -> Option<PrimOp> {
        Self::ALL.iter().copied().find(|op| op.name() == s)
    }

    /// Fixed operand signatures. Copies have a 2-argument dense form and a
    /// 4-argument strided form (`rows`, `row_stride`); everything else has
    /// exactly one arity. See `docs/grammar.md` for the full table.
    pub fn signatures(self) -> &'static [&'static [ArgKind]] {
        use ArgKind::*;
        match self {
            PrimOp::CopyG2L => &[
                &[Local, Global],
                &[Local, Global, Int, Int],
            ],
            PrimOp::CopyL2G => &[
                &[Global, Local],
                &[Global, Local, Int, Int],
            ],
            PrimOp::VAdd
            | PrimOp::VSub
            | PrimOp::VMul
            | PrimOp::VDiv
            | PrimOp::VMax
            | PrimOp::VMin => &[&[Local, Local, Local]],
            PrimOp::VExp | PrimOp::VLn | PrimOp::VAbs | PrimOp::VRelu => &[&[Local, Local]],
            PrimOp::Adds | PrimOp::Muls | PrimOp::Maxs => &[&[Local, Local, Float]],
            PrimOp::VSel => &[&[Local, Local, Local, Local]],
            PrimOp::ReduceSum | PrimOp::ReduceMax => &[&[Local, Local]],
            PrimOp::Broadcast => &[&[Local, Local]],
            PrimOp::Memset => &[&[Local, Float]],
            PrimOp::Cast => &[&[Local, Local]],
        }
    }

    /// True for ops that are legal only inside `compute` blocks.
    pub fn is_compute(self) -> bool {
        !matches!(self, PrimOp::CopyG2L | PrimOp::CopyL2G)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimCall {
    pub op: PrimOp,
    pub args: Vec<Arg>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Slice(SliceRef),
    Int(IntExpr),
    Float(FloatExpr),
}

/// `<base>[<offset> : <count>]` — a contiguous element range of a buffer or
/// global tensor. For strided copies the count is the per-row element count.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRef {
    pub base: String,
    pub offset: IntExpr,
    pub count: IntExpr,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IntBinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl IntBinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            IntBinOp::Add => "+",
            IntBinOp::Sub => "-",
            IntBinOp::Mul => "*",
            IntBinOp::Div => "/",
            IntBinOp::Mod => "%",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            IntBinOp::Add | IntBinOp::Sub => 1,
            IntBinOp::Mul | IntBinOp::Div | IntBinOp::Mod => 2,
        }
    }
}

/// Built-in integer functions usable in any integer expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Min,
    Max,
    CeilDiv,
    /// `chunk_off(total, parts, idx)` — start of part `idx` under the
    /// remainder-to-lowest-index split policy.
    ChunkOff,
    /// `chunk_len(total, parts, idx)` — length of part `idx`.
    ChunkLen,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::CeilDiv => "ceil_div",
            Builtin::ChunkOff => "chunk_off",
            Builtin::ChunkLen => "chunk_len",
        }
    }

    pub fn from_name(s: &str) -> Option<Builtin> {
        match s {
            "min" => Some(Builtin::Min),
            "max" => Some(Builtin::Max),
            "ceil_div" => Some(Builtin::CeilDiv),
            "chunk_off" => Some(Builtin::ChunkOff),
            "chunk_len" => Some(Builtin::ChunkLen),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Min | Builtin::Max | Builtin::CeilDiv => 2,
            Builtin::ChunkOff | Builtin::ChunkLen => 3,
        }
    }
}

/// 64-bit signed integer expression. Division/modulo by zero and overflow
/// are checked faults at evaluation time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum IntExpr {
    Lit(i64, Span),
    Ident(String, Span),
    Neg(Box<IntExpr>, Span),
    Bin {
        op: IntBinOp,
        lhs: Box<IntExpr>,
        rhs: Box<IntExpr>,
        span: Span,
    },
    Call {
        func: Builtin,
        args: Vec<IntExpr>,
        span: Span,
    },
}

impl IntExpr {
    pub fn span(&self) -> Span {
        match self {
            IntExpr::Lit(_, s) | IntExpr::Ident(_, s) | IntExpr::Neg(_, s) => *s,
            IntExpr::Bin { span, .. } | IntExpr::Call { span, .. } => *span,
        }
    }

    pub fn lit(v: i64) -> IntExpr {
        IntExpr::Lit(v, Span::default())
    }

    pub fn ident(name: &str) -> IntExpr {
        IntExpr::Ident(name.to_string(), Span::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FloatBinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl FloatBinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            FloatBinOp::Add => "+",
            FloatBinOp::Sub => "-",
            FloatBinOp::Mul => "*",
            FloatBinOp::Div => "/",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            FloatBinOp::Add | FloatBinOp::Sub => 1,
            FloatBinOp::Mul | FloatBinOp::Div => 2,
        }
    }
}

/// Float immediate expression for `adds`/`muls`/`maxs`/`memset`. Evaluated
/// in f32, matching scalar-unit arithmetic. `float(e)` converts an integer
/// scalar expression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FloatExpr {
    Lit(f64, Span),
    FromInt(Box<IntExpr>, Span),
    Neg(Box<FloatExpr>, Span),
    Bin {
        op: FloatBinOp,
        lhs: Box<FloatExpr>,
        rhs: Box<FloatExpr>,
        span: Span,
    },
}

impl FloatExpr {
    pub fn span(&self) -> Span {
        match self {
            FloatExpr::Lit(_, s) | FloatExpr::FromInt(_, s) | FloatExpr::Neg(_, s) => *s,
            FloatExpr::Bin { span, .. } => *span,
        }
    }
}

/// Ordered stage-block listing: (kind, label, per-kind dense index).
pub fn list_stage_blocks(kernel: &KernelFn) -> Vec<(StageKind, String, usize)> {
    let mut out = Vec::new();
    let mut counts = [0usize; 3];
    fn walk(
        stmts: &[Stmt],
        out: &mut Vec<(StageKind, String, usize)>,
        counts: &mut [usize; 3],
    ) {
        for stmt in stmts {
            match stmt {
                Stmt::Stage(block) => {
                    let slot = match block.kind {
                        StageKind::CopyIn => 0,
                        StageKind::Compute => 1,
                        StageKind::CopyOut => 2,
                    };
                    out.push((block.kind, block.label.clone(), counts[slot]));
                    counts[slot] += 1;
                }
                Stmt::For { body, .. } => walk(body, out, counts),
                _ => {}
            }
        }
    }
    walk(&kernel.body, &mut out, &mut counts);
    out
}

/// Zero out every span in the program, for structural comparisons.
pub fn strip_spans(p: &mut Program) {
    p.host.span = Span::default();
    for t in &mut p.host.params {
        t.span = Span::default();
    }
    for t in &mut p.host.tiling {
        t.span = Span::default();
        strip_int(&mut t.expr);
    }
    p.host.launch.span = Span::default();
    strip_int(&mut p.host.launch.num_blocks);
    if let Some(w) = &mut p.host.launch.workload {
        strip_int(w);
    }
    for a in &mut p.host.launch.args {
        match a {
            LaunchArg::Tensor(_, s) => *s = Span::default(),
            LaunchArg::Scalar(e) => strip_int(e),
        }
    }
    p.kernel.span = Span::default();
    for (_, s) in &mut p.kernel.params {
        *s = Span::default();
    }
    for b in &mut p.kernel.buffers {
        b.span = Span::default();
        strip_int(&mut b.capacity);
    }
    strip_stmts(&mut p.kernel.body);
}

fn strip_stmts(stmts: &mut [Stmt]) {
    for stmt in stmts {
        match stmt {
            Stmt::Let { expr, span, .. } => {
                *span = Span::default();
                strip_int(expr);
            }
            Stmt::For { bound, body, span, .. } => {
                *span = Span::default();
                strip_int(bound);
                strip_stmts(body);
            }
            Stmt::Stage(block) => {
                block.span = Span::default();
                strip_stmts(&mut block.stmts);
            }
            Stmt::Sync { span } => *span = Span::default(),
            Stmt::Prim(call) => {
                call.span = Span::default();
                for arg in &mut call.args {
                    match arg {
                        Arg::Slice(s) => {
                            s.span = Span::default();
                            strip_int(&mut s.offset);
                            strip_int(&mut s.count);
                        }
                        Arg::Int(e) => strip_int(e),
                        Arg::Float(e) => strip_float(e),
                    }
                }
            }
        }
    }
}

fn strip_int(e: &mut IntExpr) {
    match e {
        IntExpr::Lit(_, s) | IntExpr::Ident(_, s) => *s = Span::default(),
        IntExpr::Neg(inner, s) => {
            *s = Span::default();
            strip_int(inner);
        }
        IntExpr::Bin { lhs, rhs, span, .. } => {
            *span = Span::default();
            strip_int(lhs);
            strip_int(rhs);
        }
        IntExpr::Call { args, span, .. } => {
            *span = Span::default();
            for a in args {
                strip_int(a);
            }
        }
    }
}

fn strip_float(e: &mut FloatExpr) {
    match e {
        FloatExpr::Lit(_, s) => *s = Span::default(),
        FloatExpr::FromInt(inner, s) => {
            *s = Span::default();
            strip_int(inner);
        }
        FloatExpr::Neg(inner, s) => {
            *s = Span::default();
            strip_float(inner);
        }
        FloatExpr::Bin { lhs, rhs, span, .. } => {
            *span = Span::default();
            strip_float(lhs);
            strip_float(rhs);
        }
    }
}
