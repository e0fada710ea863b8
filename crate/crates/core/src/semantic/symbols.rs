//! Name resolution and operand-kind checking.
//!
//! Host and kernel scopes are separate namespaces. Kernel parameters are
//! untyped in source; their kinds (tensor vs scalar) come position-wise from
//! the launch argument list.

use crate::ast::*;
use crate::diag::{rules, Diagnostic, Span};
use std::collections::BTreeMap;

/// Names that cannot be declared: expression builtins plus the implicit
/// block identifier.
pub const RESERVED: [&str; 7] = [
    "min",
    "max",
    "ceil_div",
    "chunk_off",
    "chunk_len",
    "float",
    "block_idx",
];

#[derive(Debug, Clone, PartialEq)]
pub enum SymKind {
    /// Named shape dimension with its default value.
    DimSym { default: i64 },
    HostTensor {
        index: usize,
        dtype: Dtype,
        is_out: bool,
    },
    TilingParam { index: usize },
    KernelTensor {
        index: usize,
        dtype: Dtype,
        is_out: bool,
        host_param: String,
    },
    KernelScalar { index: usize },
    Buffer {
        index: usize,
        space: BufferSpace,
        dtype: Dtype,
        role: BufferRole,
    },
    ScalarLet,
    LoopVar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub kind: SymKind,
    pub decl_span: Span,
}

/// Declaration sites for every identifier, split by scope.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    pub host: BTreeMap<String, Symbol>,
    pub kernel: BTreeMap<String, Symbol>,
}

impl SymbolTable {
    pub fn buffer(&self, name: &str) -> Option<(&Symbol, BufferRole, Dtype, BufferSpace)> {
        match self.kernel.get(name) {
            Some(sym) => match &sym.kind {
                SymKind::Buffer {
                    role, dtype, space, ..
                } => Some((sym, *role, *dtype, *space)),
                _ => None,
            },
            None => None,
        }
    }

    pub fn kernel_tensor(&self, name: &str) -> Option<(Dtype, bool, &str)> {
        match self.kernel.get(name).map(|s| &s.kind) {
            Some(SymKind::KernelTensor {
                dtype,
                is_out,
                host_param,
                ..
            }) => Some((*dtype, *is_out, host_param.as_str())),
            _ => None,
        }
    }
}

pub fn resolve_symbols(program: &Program) -> Result<SymbolTable, Vec<Diagnostic>> {
    let (table, diags) = resolve(program);
    if diags.iter().any(|d| d.severity == crate::diag::Severity::Error) {
        Err(diags)
    } else {
        Ok(table)
    }
}

/// Full resolution; returns the (possibly partial) table plus diagnostics.
pub fn resolve(program: &Program) -> (SymbolTable, Vec<Diagnostic>) {
    let mut table = SymbolTable::default();
    let mut diags = Vec::new();

    resolve_host(program, &mut table, &mut diags);
    resolve_kernel_decls(program, &mut table, &mut diags);
    let mut body_ck = BodyResolver {
        table: &table,
        diags: &mut diags,
        scope: Vec::new(),
    };
    body_ck.check_stmts(&program.kernel.body);

    (table, diags)
}

fn declare(
    map: &mut BTreeMap<String, Symbol>,
    name: &str,
    span: Span,
    kind: SymKind,
    diags: &mut Vec<Diagnostic>,
) {
    if RESERVED.contains(&name) {
        diags.push(Diagnostic::error(
            rules::SEM_DUP,
            span,
            format!("`{name}` is a reserved name"),
        ));
        return;
    }
    if let Some(prev) = map.get(name) {
        // Re-declaring the same dimension symbol with the same default is
        // how shapes are shared across parameters.
        if let (SymKind::DimSym { default: a }, SymKind::DimSym { default: b }) =
            (&prev.kind, &kind)
        {
            if a == b {
                return;
            }
            diags.push(Diagnostic::error(
                rules::SEM_DUP,
                span,
                format!("dimension `{name}` re-declared with default {b}, previously {a}"),
            ));
            return;
        }
        diags.push(Diagnostic::error(
            rules::SEM_DUP,
            span,
            format!("`{name}` is already declared in this scope"),
        ));
        return;
    }
    map.insert(name.to_string(), Symbol {
        kind,
        decl_span: span,
    });
}

fn resolve_host(program: &Program, table: &mut SymbolTable, diags: &mut Vec<Diagnostic>) {
    let host = &program.host;
    for (index, param) in host.params.iter().enumerate() {
        for dim in &param.dims {
            if let DimDecl::Sym { name, default } = dim {
                declare(
                    &mut table.host,
                    name,
                    param.span,
                    SymKind::DimSym { default: *default },
                    diags,
                );
            }
        }
        declare(
            &mut table.host,
            &param.name,
            param.span,
            SymKind::HostTensor {
                index,
                dtype: param.dtype,
                is_out: param.is_out,
            },
            diags,
        );
    }
    for (index, decl) in host.tiling.iter().enumerate() {
        // Expressions may reference dims and earlier tiling parameters, so
        // source order is already dependency order.
        check_host_expr(&decl.expr, table, diags);
        declare(
            &mut table.host,
            &decl.name,
            decl.span,
            SymKind::TilingParam { index },
            diags,
        );
    }

    let launch = &host.launch;
    if launch.kernel != program.kernel.name {
        diags.push(Diagnostic::error(
            rules::SEM_UNDEF,
            launch.span,
            format!(
                "launch target `{}` does not name the kernel (`{}`)",
                launch.kernel, program.kernel.name
            ),
        ));
    }
    check_host_expr(&launch.num_blocks, table, diags);
    if let Some(w) = &launch.workload {
        check_host_expr(w, table, diags);
    }
    for arg in &launch.args {
        if let LaunchArg::Scalar(expr) = arg {
            check_host_expr(expr, table, diags);
        }
    }
    if launch.args.len() != program.kernel.params.len() {
        diags.push(Diagnostic::error(
            rules::SEM_ARITY,
            launch.span,
            format!(
                "launch passes {} argument(s) but kernel `{}` declares {} parameter(s)",
                launch.args.len(),
                program.kernel.name,
                program.kernel.params.len()
            ),
        ));
    }
}

fn check_host_expr(expr: &IntExpr, table: &SymbolTable, diags: &mut Vec<Diagnostic>) {
    for_each_ident(expr, &mut |name, span| match table.host.get(name) {
        Some(sym) => {
            if matches!(sym.kind, SymKind::HostTensor { .. }) {
                diags.push(Diagnostic::error(
                    rules::SEM_KIND,
                    span,
                    format!("tensor `{name}` cannot appear in a scalar expression"),
                ));
            }
        }
        None => {
            diags.push(Diagnostic::error(
                rules::SEM_UNDEF,
                span,
                format!("`{name}` is not defined here"),
            ));
        }
    });
}

fn for_each_ident(expr: &IntExpr, f: &mut impl FnMut(&str, Span)) {
    match expr {
        IntExpr::Lit(..) => {}
        IntExpr::Ident(name, span) => f(name, *span),
        IntExpr::Neg(inner, _) => for_each_ident(inner, f),
        IntExpr::Bin { lhs, rhs, .. } => {
            for_each_ident(lhs, f);
            for_each_ident(rhs, f);
        }
        IntExpr::Call { args, .. } => {
            for a in args {
                for_each_ident(a, f);
            }
        }
    }
}

fn resolve_kernel_decls(program: &Program, table: &mut SymbolTable, diags: &mut Vec<Diagnostic>) {
    let kernel = &program.kernel;
    for (index, (name, span)) in kernel.params.iter().enumerate() {
        let kind = match program.host.launch.args.get(index) {
            Some(LaunchArg::Tensor(host_name, _)) => {
                let (dtype, is_out) = program
                    .host
                    .params
                    .iter()
                    .find(|p| &p.name == host_name)
                    .map(|p| (p.dtype, p.is_out))
                    .unwrap_or((Dtype::F32, false));
                SymKind::KernelTensor {
                    index,
                    dtype,
                    is_out,
                    host_param: host_name.clone(),
                }
            }
            _ => SymKind::KernelScalar { index },
        };
        declare(&mut table.kernel, name, *span, kind, diags);
    }
    for (index, buf) in kernel.buffers.iter().enumerate() {
        // Capacities must be uniform across blocks: only scalar kernel
        // parameters and literals may appear.
        for_each_ident(&buf.capacity, &mut |name, span| {
            match table.kernel.get(name) {
                Some(sym) if matches!(sym.kind, SymKind::KernelScalar { .. }) => {}
                Some(_) => diags.push(Diagnostic::error(
                    rules::SEM_KIND,
                    span,
                    format!(
                        "buffer capacity may only use scalar kernel parameters, not `{name}`"
                    ),
                )),
                None => diags.push(Diagnostic::error(
                    rules::SEM_UNDEF,
                    span,
                    format!("`{name}` is not defined here"),
                )),
            }
        });
        declare(
            &mut table.kernel,
            &buf.name,
            buf.span,
            SymKind::Buffer {
                index,
                space: buf.space,
                dtype: buf.dtype,
                role: buf.role,
            },
            diags,
        );
    }
}

struct BodyResolver<'a> {
    table: &'a SymbolTable,
    diags: &'a mut Vec<Diagnostic>,
    /// Names visible at the current point (lets and loop vars). Sibling
    /// stage blocks may reuse local names; shadowing a visible name is an
    /// error.
    scope: Vec<String>,
}

impl<'a> BodyResolver<'a> {
    fn declare_local(&mut self, name: &str, span: Span, kind: SymKind) {
        let _ = kind;
        if RESERVED.contains(&name) {
            self.diags.push(Diagnostic::error(
                rules::SEM_DUP,
                span,
                format!("`{name}` is a reserved name"),
            ));
            return;
        }
        if self.table.kernel.contains_key(name) || self.scope.iter().any(|s| s == name) {
            self.diags.push(Diagnostic::error(
                rules::SEM_DUP,
                span,
                format!("`{name}` is already declared in this scope"),
            ));
            return;
        }
        self.scope.push(name.to_string());
    }

    fn check_stmts(&mut self, stmts: &[Stmt]) {
        let scope_mark = self.scope.len();
        for stmt in stmts {
            match stmt {
                Stmt::Let { name, expr, span } => {
                    self.check_scalar_expr(expr);
                    self.declare_local(name, *span, SymKind::ScalarLet);
                }
                Stmt::For {
                    var, bound, body, span,
                } => {
                    self.check_scalar_expr(bound);
                    let mark = self.scope.len();
                    self.declare_local(var, *span, SymKind::LoopVar);
                    self.check_stmts(body);
                    self.scope.truncate(mark);
                }
                Stmt::Stage(block) => self.check_stmts(&block.stmts),
                Stmt::Sync { .. } => {}
                Stmt::Prim(call) => self.check_prim(call),
            }
        }
        self.scope.truncate(scope_mark);
    }

    fn check_scalar_expr(&mut self, expr: &IntExpr) {
        let table = self.table;
        let scope = &self.scope;
        let diags = &mut *self.diags;
        for_each_ident(expr, &mut |name, span| {
            if name == "block_idx" {
                return;
            }
            if scope.iter().any(|s| s == name) {
                return;
            }
            match table.kernel.get(name).map(|s| &s.kind) {
                Some(SymKind::KernelScalar { .. }) => {}
                Some(SymKind::KernelTensor { .. }) | Some(SymKind::Buffer { .. }) => {
                    diags.push(Diagnostic::error(
                        rules::SEM_KIND,
                        span,
                        format!("`{name}` is not a scalar"),
                    ));
                }
                Some(_) => {}
                None => {
                    diags.push(Diagnostic::error(
                        rules::SEM_UNDEF,
                        span,
                        format!("`{name}` is not defined or not in scope here"),
                    ));
                }
            }
        });
    }

    /// Operand base classification for one slice.
    fn slice_base(&mut self, slice: &SliceRef) -> Option<SymKind> {
        self.check_scalar_expr(&slice.offset);
        self.check_scalar_expr(&slice.count);
        match self.table.kernel.get(&slice.base).map(|s| s.kind.clone()) {
            Some(kind @ (SymKind::Buffer { .. } | SymKind::KernelTensor { .. })) => Some(kind),
            Some(_) => {
                self.diags.push(Diagnostic::error(
                    rules::SEM_KIND,
                    slice.span,
                    format!("`{}` is not a buffer or tensor parameter", slice.base),
                ));
                None
            }
            None => {
                self.diags.push(Diagnostic::error(
                    rules::SEM_UNDEF,
                    slice.span,
                    format!("`{}` is not defined here", slice.base),
                ));
                None
            }
        }
    }

    fn check_prim(&mut self, call: &PrimCall) {
        let mut slice_kinds: Vec<Option<SymKind>> = Vec::new();
        for arg in &call.args {
            match arg {
                Arg::Slice(s) => {
                    let kind = self.slice_base(s);
                    slice_kinds.push(kind);
                }
                Arg::Int(e) => {
                    self.check_scalar_expr(e);
                    slice_kinds.push(None);
                }
                Arg::Float(e) => {
                    self.check_float_expr(e);
                    slice_kinds.push(None);
                }
            }
        }

        match call.op {
            PrimOp::CopyG2L | PrimOp::CopyL2G => {
                let (gm_pos, local_pos) = if call.op == PrimOp::CopyG2L {
                    (1, 0)
                } else {
                    (0, 1)
                };
                let mut dtypes: Vec<Dtype> = Vec::new();
                if let Some(Some(kind)) = slice_kinds.get(local_pos) {
                    match kind {
                        SymKind::Buffer { dtype, .. } => dtypes.push(*dtype),
                        SymKind::KernelTensor { .. } => {
                            self.diags.push(Diagnostic::error(
                                rules::SEM_KIND,
                                call.span,
                                format!(
                                    "`{}` expects an on-chip buffer on the local side",
                                    call.op.name()
                                ),
                            ));
                        }
                        _ => {}
                    }
                }
                if let Some(Some(kind)) = slice_kinds.get(gm_pos) {
                    match kind {
                        SymKind::KernelTensor { dtype, is_out, .. } => {
                            dtypes.push(*dtype);
                            if call.op == PrimOp::CopyL2G && !is_out {
                                self.diags.push(Diagnostic::error(
                                    rules::SEM_KIND,
                                    call.span,
                                    "cannot store to a read-only input tensor; mark the parameter `out`",
                                ));
                            }
                        }
                        SymKind::Buffer { .. } => {
                            self.diags.push(Diagnostic::error(
                                rules::SEM_KIND,
                                call.span,
                                format!(
                                    "`{}` expects a global tensor on the global side",
                                    call.op.name()
                                ),
                            ));
                        }
                        _ => {}
                    }
                }
                if dtypes.len() == 2 && dtypes[0] != dtypes[1] {
                    self.diags.push(Diagnostic::error(
                        rules::SEM_KIND,
                        call.span,
                        format!(
                            "copy between {} and {} elements; dtypes must match",
                            dtypes[0].name(),
                            dtypes[1].name()
                        ),
                    ));
                }
            }
            op => self.check_compute_dtypes(call, op, &slice_kinds),
        }
    }

    fn check_float_expr(&mut self, expr: &FloatExpr) {
        match expr {
            FloatExpr::Lit(..) => {}
            FloatExpr::FromInt(inner, _) => self.check_scalar_expr(inner),
            FloatExpr::Neg(inner, _) => self.check_float_expr(inner),
            FloatExpr::Bin { lhs, rhs, .. } => {
                self.check_float_expr(lhs);
                self.check_float_expr(rhs);
            }
        }
    }

    /// Dtype legality for compute primitives. Global operands are skipped
    /// here; staging reports them as STG-GM-IN-COMPUTE.
    fn check_compute_dtypes(&mut self, call: &PrimCall, op: PrimOp, kinds: &[Option<SymKind>]) {
        let buf_dtype = |kind: &Option<SymKind>| -> Option<Dtype> {
            match kind {
                Some(SymKind::Buffer { dtype, .. }) => Some(*dtype),
                _ => None,
            }
        };
        let dts: Vec<Option<Dtype>> = kinds.iter().map(buf_dtype).collect();
        let mut complain = |msg: String| {
            self.diags
                .push(Diagnostic::error(rules::SEM_KIND, call.span, msg));
        };

        let all_known = |dts: &[Option<Dtype>], idxs: &[usize]| -> Option<Vec<Dtype>> {
            idxs.iter().map(|&i| dts.get(i).copied().flatten()).collect()
        };

        match op {
            PrimOp::VAdd | PrimOp::VSub | PrimOp::VMul | PrimOp::VMax | PrimOp::VMin => {
                if let Some(v) = all_known(&dts, &[0, 1, 2]) {
                    if !(v[0] == v[1] && v[1] == v[2]) {
                        complain(format!("`{}` operands must share one dtype", op.name()));
                    } else if v[0] == Dtype::U8 {
                        complain(format!("`{}` does not operate on u8", op.name()));
                    }
                }
            }
            PrimOp::VDiv => {
                if let Some(v) = all_known(&dts, &[0, 1, 2]) {
                    if !(v[0] == v[1] && v[1] == v[2] && v[0].is_float()) {
                        complain("`vdiv` requires one float dtype across operands".into());
                    }
                }
            }
            PrimOp::VExp | PrimOp::VLn | PrimOp::VRelu => {
                if let Some(v) = all_known(&dts, &[0, 1]) {
                    if !(v[0] == v[1] && v[0].is_float()) {
                        complain(format!("`{}` requires one float dtype", op.name()));
                    }
                }
            }
            PrimOp::VAbs => {
                if let Some(v) = all_known(&dts, &[0, 1]) {
                    if v[0] != v[1] || v[0] == Dtype::U8 {
                        complain("`vabs` operands must share a non-u8 dtype".into());
                    }
                }
            }
            PrimOp::Adds | PrimOp::Muls | PrimOp::Maxs => {
                if let Some(v) = all_known(&dts, &[0, 1]) {
                    if !(v[0] == v[1] && v[0].is_float()) {
                        complain(format!("`{}` requires one float dtype", op.name()));
                    }
                }
            }
            PrimOp::VSel => {
                if let Some(v) = all_known(&dts, &[0, 1, 2, 3]) {
                    if v[1] != Dtype::U8 {
                        complain("`vsel` mask must be u8".into());
                    }
                    if !(v[0] == v[2] && v[2] == v[3] && v[0] != Dtype::U8) {
                        complain("`vsel` data operands must share a non-u8 dtype".into());
                    }
                }
            }
            PrimOp::ReduceSum | PrimOp::ReduceMax => {
                if let Some(v) = all_known(&dts, &[0, 1]) {
                    if !(v[0] == v[1] && v[0].is_float()) {
                        complain(format!("`{}` requires one float dtype", op.name()));
                    }
                }
            }
            PrimOp::Broadcast => {
                if let Some(v) = all_known(&dts, &[0, 1]) {
                    if v[0] != v[1] || v[0] == Dtype::U8 {
                        complain("`broadcast` operands must share a non-u8 dtype".into());
                    }
                }
            }
            PrimOp::Memset => {
                if let Some(v) = all_known(&dts, &[0]) {
                    if !v[0].is_float() {
                        complain("`memset` requires a float buffer".into());
                    }
                }
            }
            PrimOp::Cast => {
                if let Some(v) = all_known(&dts, &[0, 1]) {
                    if v[0] == v[1] {
                        complain("`cast` requires distinct source and destination dtypes".into());
                    }
                }
            }
            PrimOp::CopyG2L | PrimOp::CopyL2G => unreachable!(),
        }
    }
}
