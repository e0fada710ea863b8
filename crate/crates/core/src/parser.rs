//! Recursive-descent parser producing a [`Program`] or diagnostics.
//!
//! The parser is total: any input yields either a `Program` or at least one
//! diagnostic; it never panics. Placement of primitives inside the wrong
//! stage block is deliberately NOT a parse error — staging is a semantic
//! rule checked later.
//!
//! Statement-terminating semicolons are optional; the canonical renderer
//! emits them.

use crate::ast::*;
use crate::diag::{rules, Diagnostic, Span};
use crate::lexer::{lex, Tok, Token};

pub fn parse_program(source: &str) -> Result<Program, Vec<Diagnostic>> {
    let lexed = lex(source);
    if !lexed.diagnostics.is_empty() {
        return Err(lexed.diagnostics);
    }
    let mut p = Parser {
        tokens: lexed.tokens,
        pos: 0,
    };
    p.program().map_err(|d| vec![d])
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos.min(self.tokens.len() - 1)].tok
    }

    fn peek2(&self) -> &Tok {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)].tok
    }

    fn here(&self) -> Span {
        self.tokens[self.pos.min(self.tokens.len() - 1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, ctx: &str) -> PResult<Span> {
        if self.peek() == &tok {
            Ok(self.bump().span)
        } else {
            Err(self.syntax_error(&format!(
                "expected {} {}, found {}",
                tok.describe(),
                ctx,
                self.peek().describe()
            )))
        }
    }

    fn expect_ident(&mut self, ctx: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok((name, span))
            }
            other => Err(self.syntax_error(&format!(
                "expected identifier {}, found {}",
                ctx,
                other.describe()
            ))),
        }
    }

    fn syntax_error(&self, msg: &str) -> Diagnostic {
        Diagnostic::error(rules::PAR_SYNTAX, self.here(), msg)
    }

    fn eat_semi(&mut self) {
        self.eat(&Tok::Semi);
    }

    // program := host_fn kernel_fn EOF
    fn program(&mut self) -> PResult<Program> {
        let host = self.host_fn()?;
        let kernel = self.kernel_fn(&host)?;
        match self.peek() {
            Tok::Eof => {}
            Tok::KwHost | Tok::KwKernel => {
                return Err(Diagnostic::error(
                    rules::PAR_DUP,
                    self.here(),
                    "a program has exactly one host function and one kernel function",
                ));
            }
            other => {
                return Err(self.syntax_error(&format!(
                    "expected end of input, found {}",
                    other.describe()
                )));
            }
        }
        Ok(Program {
            name: host.name.clone(),
            host,
            kernel,
        })
    }

    fn host_fn(&mut self) -> PResult<HostFn> {
        let start = self.expect(Tok::KwHost, "to begin the program")?;
        let (name, _) = self.expect_ident("after `host`")?;
        self.expect(Tok::LParen, "after host function name")?;
        let mut params = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                params.push(self.tensor_param()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "after host parameters")?;
        self.expect(Tok::LBrace, "to open the host body")?;

        let mut tiling = Vec::new();
        while self.peek() == &Tok::KwTiling {
            tiling.push(self.tiling_decl()?);
        }
        if self.peek() == &Tok::KwTiling {
            return Err(self.syntax_error("tiling declarations must precede the launch statement"));
        }
        let param_names: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
        let launch = self.launch_stmt(&param_names)?;
        let end = self.expect(Tok::RBrace, "to close the host body")?;
        Ok(HostFn {
            name,
            params,
            tiling,
            launch,
            span: start.merge(end),
        })
    }

    // tensor_param := [out] IDENT ':' '[' dim (',' dim)* ']' dtype
    fn tensor_param(&mut self) -> PResult<TensorParam> {
        let is_out = self.eat(&Tok::KwOut);
        let (name, start) = self.expect_ident("as parameter name")?;
        self.expect(Tok::Colon, "after parameter name")?;
        self.expect(Tok::LBracket, "to open the shape")?;
        let mut dims = Vec::new();
        loop {
            dims.push(self.dim_decl()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RBracket, "to close the shape")?;
        let (dt_name, dt_span) = self.expect_ident("as element type")?;
        let dtype = Dtype::from_name(&dt_name).ok_or_else(|| {
            Diagnostic::error(
                rules::PAR_SYNTAX,
                dt_span,
                format!("unknown element type `{dt_name}`; expected f16, f32, i32, or u8"),
            )
        })?;
        Ok(TensorParam {
            name,
            dims,
            dtype,
            is_out,
            span: start.merge(dt_span),
        })
    }

    // dim := INT | IDENT '=' INT
    fn dim_decl(&mut self) -> PResult<DimDecl> {
        match self.peek().clone() {
            Tok::Int(v) => {
                let span = self.bump().span;
                if v <= 0 {
                    return Err(Diagnostic::error(
                        rules::PAR_SYNTAX,
                        span,
                        "shape dimensions must be positive",
                    ));
                }
                Ok(DimDecl::Lit(v))
            }
            Tok::Ident(name) => {
                self.bump();
                self.expect(Tok::Eq, "after dimension symbol (write `R=1024`)")?;
                match self.peek().clone() {
                    Tok::Int(v) => {
                        let span = self.bump().span;
                        if v <= 0 {
                            return Err(Diagnostic::error(
                                rules::PAR_SYNTAX,
                                span,
                                "shape dimensions must be positive",
                            ));
                        }
                        Ok(DimDecl::Sym { name, default: v })
                    }
                    other => Err(self.syntax_error(&format!(
                        "expected default dimension value, found {}",
                        other.describe()
                    ))),
                }
            }
            other => Err(self.syntax_error(&format!(
                "expected dimension, found {}",
                other.describe()
            ))),
        }
    }

    // tiling_decl := 'tiling' IDENT '=' int_expr '@' STR [';']
    fn tiling_decl(&mut self) -> PResult<TilingDecl> {
        let start = self.expect(Tok::KwTiling, "")?;
        let (name, _) = self.expect_ident("after `tiling`")?;
        self.expect(Tok::Eq, "after tiling parameter name")?;
        let expr = self.int_expr()?;
        self.expect(Tok::At, "before the tiling rationale string")?;
        let (rationale, rat_span) = match self.peek().clone() {
            Tok::Str(s) => {
                let span = self.bump().span;
                (s, span)
            }
            other => {
                return Err(self.syntax_error(&format!(
                    "expected rationale string after `@`, found {}",
                    other.describe()
                )));
            }
        };
        if rationale.trim().is_empty() {
            return Err(Diagnostic::error(
                rules::PAR_SYNTAX,
                rat_span,
                "tiling rationale must be non-empty",
            ));
        }
        self.eat_semi();
        Ok(TilingDecl {
            name,
            expr,
            rationale,
            span: start.merge(rat_span),
        })
    }

    // launch := 'launch' IDENT '<' int_expr '>' ['over' int_expr] '(' args ')' [';']
    fn launch_stmt(&mut self, tensor_params: &[String]) -> PResult<LaunchStmt> {
        let start = self.expect(Tok::KwLaunch, "in the host body")?;
        let (kernel, _) = self.expect_ident("as launch target")?;
        self.expect(Tok::Lt, "before the block count")?;
        let num_blocks = self.int_expr()?;
        self.expect(Tok::Gt, "after the block count")?;
        let workload = if self.eat(&Tok::KwOver) {
            Some(self.int_expr()?)
        } else {
            None
        };
        self.expect(Tok::LParen, "to open launch arguments")?;
        let mut args = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                args.push(self.launch_arg(tensor_params)?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let end = self.expect(Tok::RParen, "to close launch arguments")?;
        self.eat_semi();
        Ok(LaunchStmt {
            kernel,
            num_blocks,
            workload,
            args,
            span: start.merge(end),
        })
    }

    fn launch_arg(&mut self, tensor_params: &[String]) -> PResult<LaunchArg> {
        // A bare identifier naming a host tensor parameter is a tensor
        // argument; anything else is a scalar expression.
        if let Tok::Ident(name) = self.peek().clone() {
            let is_tensor = tensor_params.iter().any(|p| p == &name);
            let next_is_expr_tail = matches!(
                self.peek2(),
                Tok::Plus | Tok::Minus | Tok::Star | Tok::Slash | Tok::Percent
            );
            if is_tensor && !next_is_expr_tail {
                let span = self.bump().span;
                return Ok(LaunchArg::Tensor(name, span));
            }
        }
        Ok(LaunchArg::Scalar(self.int_expr()?))
    }

    fn kernel_fn(&mut self, host: &HostFn) -> PResult<KernelFn> {
        let start = match self.peek() {
            Tok::KwKernel => self.bump().span,
            Tok::Eof => {
                return Err(Diagnostic::error(
                    rules::PAR_SYNTAX,
                    self.here(),
                    "missing kernel function; a program is one host plus one kernel",
                ));
            }
            other => {
                return Err(self.syntax_error(&format!(
                    "expected `kernel`, found {}",
                    other.describe()
                )));
            }
        };
        let _ = host;
        let (name, _) = self.expect_ident("after `kernel`")?;
        self.expect(Tok::LParen, "after kernel name")?;
        let mut params = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                let (pname, pspan) = self.expect_ident("as kernel parameter")?;
                params.push((pname, pspan));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "after kernel parameters")?;
        self.expect(Tok::LBrace, "to open the kernel body")?;

        let mut buffers = Vec::new();
        while matches!(self.peek(), Tok::KwAllocUb | Tok::KwAllocL1) {
            buffers.push(self.buffer_decl()?);
        }

        let mut body = Vec::new();
        // Top-level scalar bindings come first so lowering can place them in
        // the kernel init section.
        while self.peek() == &Tok::KwLet {
            body.push(self.let_stmt()?);
        }
        let mut labels: Vec<String> = Vec::new();
        while self.peek() != &Tok::RBrace && self.peek() != &Tok::Eof {
            body.push(self.top_stmt(&mut labels)?);
        }
        let end = self.expect(Tok::RBrace, "to close the kernel body")?;
        Ok(KernelFn {
            name,
            params,
            buffers,
            body,
            span: start.merge(end),
        })
    }

    // buffer_decl := ('alloc_ub'|'alloc_l1') IDENT ':' dtype '[' int_expr ']' role [';']
    fn buffer_decl(&mut self) -> PResult<BufferDecl> {
        let (space, start) = match self.peek() {
            Tok::KwAllocUb => (BufferSpace::Ub, self.bump().span),
            _ => (BufferSpace::L1, self.bump().span),
        };
        let (name, _) = self.expect_ident("as buffer name")?;
        self.expect(Tok::Colon, "after buffer name")?;
        let (dt_name, dt_span) = self.expect_ident("as buffer element type")?;
        let dtype = Dtype::from_name(&dt_name).ok_or_else(|| {
            Diagnostic::error(
                rules::PAR_SYNTAX,
                dt_span,
                format!("unknown element type `{dt_name}`"),
            )
        })?;
        self.expect(Tok::LBracket, "to open the buffer capacity")?;
        let capacity = self.int_expr()?;
        self.expect(Tok::RBracket, "to close the buffer capacity")?;
        let (role_name, role_span) = self.expect_ident("as buffer role")?;
        let role = match role_name.as_str() {
            "stream_in" => BufferRole::StreamIn,
            "stream_out" => BufferRole::StreamOut,
            "temp" => BufferRole::Temp,
            other => {
                return Err(Diagnostic::error(
                    rules::PAR_SYNTAX,
                    role_span,
                    format!("unknown buffer role `{other}`; expected stream_in, stream_out, or temp"),
                ));
            }
        };
        self.eat_semi();
        Ok(BufferDecl {
            name,
            space,
            dtype,
            capacity,
            role,
            span: start.merge(role_span),
        })
    }

    fn let_stmt(&mut self) -> PResult<Stmt> {
        let start = self.expect(Tok::KwLet, "")?;
        let (name, _) = self.expect_ident("after `let`")?;
        self.expect(Tok::Eq, "after binding name")?;
        let expr = self.int_expr()?;
        let span = start.merge(expr.span());
        self.eat_semi();
        Ok(Stmt::Let { name, expr, span })
    }

    /// Statements at kernel top level: loops, stage blocks, sync, primitives.
    fn top_stmt(&mut self, labels: &mut Vec<String>) -> PResult<Stmt> {
        match self.peek().clone() {
            Tok::KwFor => self.for_stmt(labels, true),
            Tok::KwCopyin | Tok::KwCompute | Tok::KwCopyout => {
                Ok(Stmt::Stage(self.stage_block(labels)?))
            }
            Tok::KwSync => {
                let span = self.bump().span;
                self.eat_semi();
                Ok(Stmt::Sync { span })
            }
            Tok::KwLet => Err(self.syntax_error(
                "top-level `let` bindings must precede loops and stage blocks",
            )),
            Tok::KwAllocUb | Tok::KwAllocL1 => Err(self.syntax_error(
                "buffer declarations must precede kernel statements",
            )),
            Tok::Ident(_) => Ok(Stmt::Prim(self.prim_call()?)),
            other => Err(self.syntax_error(&format!(
                "expected a statement, found {}",
                other.describe()
            ))),
        }
    }

    /// Statements inside a `for` at kernel level (no sync, no let).
    fn loop_stmt(&mut self, labels: &mut Vec<String>) -> PResult<Stmt> {
        match self.peek().clone() {
            Tok::KwFor => self.for_stmt(labels, true),
            Tok::KwCopyin | Tok::KwCompute | Tok::KwCopyout => {
                Ok(Stmt::Stage(self.stage_block(labels)?))
            }
            Tok::KwSync => Err(self.syntax_error(
                "`sync` is only allowed at kernel top level, outside loops",
            )),
            Tok::KwLet => Err(self.syntax_error(
                "`let` is not allowed directly inside kernel-level loops; bind it inside a stage block or before the loop",
            )),
            Tok::Ident(_) => Ok(Stmt::Prim(self.prim_call()?)),
            other => Err(self.syntax_error(&format!(
                "expected a statement, found {}",
                other.describe()
            ))),
        }
    }

    /// Statements inside stage blocks: let, for, primitives.
    fn block_stmt(&mut self) -> PResult<Stmt> {
        match self.peek().clone() {
            Tok::KwLet => self.let_stmt(),
            Tok::KwFor => {
                // Loops inside stage blocks carry block statements.
                self.for_stmt(&mut Vec::new(), false)
            }
            Tok::KwCopyin | Tok::KwCompute | Tok::KwCopyout => Err(self.syntax_error(
                "stage blocks cannot nest",
            )),
            Tok::KwSync => Err(self.syntax_error(
                "`sync` is only allowed at kernel top level",
            )),
            Tok::Ident(_) => Ok(Stmt::Prim(self.prim_call()?)),
            other => Err(self.syntax_error(&format!(
                "expected a statement, found {}",
                other.describe()
            ))),
        }
    }

    // for := 'for' IDENT 'in' 0 '..' int_expr '{' stmts '}'
    fn for_stmt(&mut self, labels: &mut Vec<String>, kernel_level: bool) -> PResult<Stmt> {
        let start = self.expect(Tok::KwFor, "")?;
        let (var, _) = self.expect_ident("as loop variable")?;
        self.expect(Tok::KwIn, "after loop variable")?;
        match self.peek() {
            Tok::Int(0) => {
                self.bump();
            }
            _ => {
                return Err(self.syntax_error("counted loops start at 0 (write `for i in 0..n`)"));
            }
        }
        self.expect(Tok::DotDot, "in loop range")?;
        let bound = self.int_expr()?;
        self.expect(Tok::LBrace, "to open the loop body")?;
        let mut body = Vec::new();
        while self.peek() != &Tok::RBrace && self.peek() != &Tok::Eof {
            let stmt = if kernel_level {
                self.loop_stmt(labels)?
            } else {
                self.block_stmt()?
            };
            body.push(stmt);
        }
        let end = self.expect(Tok::RBrace, "to close the loop body")?;
        Ok(Stmt::For {
            var,
            bound,
            body,
            span: start.merge(end),
        })
    }

    fn stage_block(&mut self, labels: &mut Vec<String>) -> PResult<StageBlock> {
        let (kind, start) = match self.peek() {
            Tok::KwCopyin => (StageKind::CopyIn, self.bump().span),
            Tok::KwCompute => (StageKind::Compute, self.bump().span),
            _ => (StageKind::CopyOut, self.bump().span),
        };
        let (label, label_span) = self.expect_ident("as stage block label")?;
        if labels.contains(&label) {
            return Err(Diagnostic::error(
                rules::PAR_DUP,
                label_span,
                format!("stage block label `{label}` is already used; labels are unique within a kernel"),
            ));
        }
        labels.push(label.clone());
        self.expect(Tok::LBrace, "to open the stage block")?;
        let mut stmts = Vec::new();
        while self.peek() != &Tok::RBrace && self.peek() != &Tok::Eof {
            stmts.push(self.block_stmt()?);
        }
        let end = self.expect(Tok::RBrace, "to close the stage block")?;
        Ok(StageBlock {
            kind,
            label,
            stmts,
            span: start.merge(end),
        })
    }

    fn prim_call(&mut self) -> PResult<PrimCall> {
        let (name, start) = self.expect_ident("")?;
        let op = PrimOp::from_name(&name).ok_or_else(|| {
            Diagnostic::error(
                rules::PAR_SYNTAX,
                start,
                format!("unknown primitive `{name}`; see the primitive table in docs/grammar.md"),
            )
        })?;
        self.expect(Tok::LParen, "to open primitive arguments")?;
        let sigs = op.signatures();
        let max_arity = sigs.iter().map(|s| s.len()).max().unwrap();
        let mut args = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                let idx = args.len();
                if idx >= max_arity {
                    return Err(Diagnostic::error(
                        rules::PAR_SYNTAX,
                        self.here(),
                        format!("too many arguments for `{}`", op.name()),
                    ));
                }
                // Signatures that share a prefix agree on argument kinds, so
                // take the kind from any signature long enough.
                let kind = sigs
                    .iter()
                    .find(|s| s.len() > idx)
                    .map(|s| s[idx])
                    .unwrap();
                let arg = match kind {
                    ArgKind::Local | ArgKind::Global => Arg::Slice(self.slice_ref()?),
                    ArgKind::Int => Arg::Int(self.int_expr()?),
                    ArgKind::Float => Arg::Float(self.float_expr()?),
                };
                args.push(arg);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let end = self.expect(Tok::RParen, "to close primitive arguments")?;
        if !sigs.iter().any(|s| s.len() == args.len()) {
            let expected: Vec<String> = sigs.iter().map(|s| s.len().to_string()).collect();
            return Err(Diagnostic::error(
                rules::PAR_SYNTAX,
                start.merge(end),
                format!(
                    "`{}` expects {} argument(s), got {}",
                    op.name(),
                    expected.join(" or "),
                    args.len()
                ),
            ));
        }
        self.eat_semi();
        Ok(PrimCall {
            op,
            args,
            span: start.merge(end),
        })
    }

    // slice := IDENT '[' int_expr ':' int_expr ']'
    fn slice_ref(&mut self) -> PResult<SliceRef> {
        let (base, start) = self.expect_ident("as slice base")?;
        self.expect(Tok::LBracket, "to open the slice (write `buf[offset : count]`)")?;
        let offset = self.int_expr()?;
        self.expect(Tok::Colon, "between slice offset and count")?;
        let count = self.int_expr()?;
        let end = self.expect(Tok::RBracket, "to close the slice")?;
        Ok(SliceRef {
            base,
            offset,
            count,
            span: start.merge(end),
        })
    }

    // Integer expressions: + - over * / %, unary minus, builtin calls.
    fn int_expr(&mut self) -> PResult<IntExpr> {
        let lhs = self.int_term()?;
        self.int_bin_rhs(lhs, 1)
    }

    fn int_bin_rhs(&mut self, mut lhs: IntExpr, min_prec: u8) -> PResult<IntExpr> {
        loop {
            let op = match self.peek() {
                Tok::Plus => IntBinOp::Add,
                Tok::Minus => IntBinOp::Sub,
                Tok::Star => IntBinOp::Mul,
                Tok::Slash => IntBinOp::Div,
                Tok::Percent => IntBinOp::Mod,
                _ => return Ok(lhs),
            };
            if op.precedence() < min_prec {
                return Ok(lhs);
            }
            self.bump();
            let mut rhs = self.int_term()?;
            while let Some(next) = self.peek_int_op() {
                if next.precedence() > op.precedence() {
                    rhs = self.int_bin_rhs(rhs, op.precedence() + 1)?;
                } else {
                    break;
                }
            }
            let span = lhs.span().merge(rhs.span());
            lhs = IntExpr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
    }

    fn peek_int_op(&self) -> Option<IntBinOp> {
        match self.peek() {
            Tok::Plus => Some(IntBinOp::Add),
            Tok::Minus => Some(IntBinOp::Sub),
            Tok::Star => Some(IntBinOp::Mul),
            Tok::Slash => Some(IntBinOp::Div),
            Tok::Percent => Some(IntBinOp::Mod),
            _ => None,
        }
    }

    fn int_term(&mut self) -> PResult<IntExpr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                let span = self.bump().span;
                Ok(IntExpr::Lit(v, span))
            }
            Tok::Minus => {
                let start = self.bump().span;
                let inner = self.int_term()?;
                let span = start.merge(inner.span());
                Ok(IntExpr::Neg(Box::new(inner), span))
            }
            Tok::LParen => {
                self.bump();
                let e = self.int_expr()?;
                self.expect(Tok::RParen, "to close the parenthesized expression")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                // Only builtin names form calls; a plain identifier followed
                // by `(` ends the expression (e.g. `over R (args)`).
                if self.peek2() == &Tok::LParen && Builtin::from_name(&name).is_some() {
                    let func = Builtin::from_name(&name).unwrap();
                    let start = self.bump().span;
                    self.expect(Tok::LParen, "")?;
                    let mut args = Vec::new();
                    if self.peek() != &Tok::RParen {
                        loop {
                            args.push(self.int_expr()?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    let end = self.expect(Tok::RParen, "to close the call")?;
                    if args.len() != func.arity() {
                        return Err(Diagnostic::error(
                            rules::PAR_SYNTAX,
                            start.merge(end),
                            format!(
                                "`{}` expects {} arguments, got {}",
                                func.name(),
                                func.arity(),
                                args.len()
                            ),
                        ));
                    }
                    Ok(IntExpr::Call {
                        func,
                        args,
                        span: start.merge(end),
                    })
                } else {
                    let span = self.bump().span;
                    Ok(IntExpr::Ident(name, span))
                }
            }
            other => Err(self.syntax_error(&format!(
                "expected integer expression, found {}",
                other.describe()
            ))),
        }
    }

    // Float immediates: literals, float(int_expr), + - * /, unary minus.
    fn float_expr(&mut self) -> PResult<FloatExpr> {
        let lhs = self.float_term()?;
        self.float_bin_rhs(lhs, 1)
    }

    fn float_bin_rhs(&mut self, mut lhs: FloatExpr, min_prec: u8) -> PResult<FloatExpr> {
        loop {
            let op = match self.peek() {
                Tok::Plus => FloatBinOp::Add,
                Tok::Minus => FloatBinOp::Sub,
                Tok::Star => FloatBinOp::Mul,
                Tok::Slash => FloatBinOp::Div,
                _ => return Ok(lhs),
            };
            if op.precedence() < min_prec {
                return Ok(lhs);
            }
            self.bump();
            let mut rhs = self.float_term()?;
            while let Some(next) = self.peek_float_op() {
                if next.precedence() > op.precedence() {
                    rhs = self.float_bin_rhs(rhs, op.precedence() + 1)?;
                } else {
                    break;
                }
            }
            let span = lhs.span().merge(rhs.span());
            lhs = FloatExpr::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
    }

    fn peek_float_op(&self) -> Option<FloatBinOp> {
        match self.peek() {
            Tok::Plus => Some(FloatBinOp::Add),
            Tok::Minus => Some(FloatBinOp::Sub),
            Tok::Star => Some(FloatBinOp::Mul),
            Tok::Slash => Some(FloatBinOp::Div),
            _ => None,
        }
    }

    fn float_term(&mut self) -> PResult<FloatExpr> {
        match self.peek().clone() {
            Tok::Float(v) => {
                let span = self.bump().span;
                Ok(FloatExpr::Lit(v, span))
            }
            Tok::Minus => {
                let start = self.bump().span;
                let inner = self.float_term()?;
                let span = start.merge(inner.span());
                Ok(FloatExpr::Neg(Box::new(inner), span))
            }
            Tok::LParen => {
                self.bump();
                let e = self.float_expr()?;
                self.expect(Tok::RParen, "to close the parenthesized expression")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "float" => {
                let start = self.bump().span;
                self.expect(Tok::LParen, "after `float`")?;
                let inner = self.int_expr()?;
                let end = self.expect(Tok::RParen, "to close `float(...)`")?;
                Ok(FloatExpr::FromInt(Box::new(inner), start.merge(end)))
            }
            Tok::Int(_) => Err(self.syntax_error(
                "float immediates require float syntax (write `1.0`, not `1`) or `float(expr)`",
            )),
            other => Err(self.syntax_error(&format!(
                "expected float immediate, found {}",
                other.describe()
            ))),
        }
    }

    #[allow(dead_code)]
    fn unexpected(&self) -> Diagnostic {
        self.syntax_error(&format!("unexpected {}", self.peek().describe()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "host h(x:[64]f32){launch k<1>(x)} kernel k(x){ }";

    #[test]
    fn minimal_program_parses() {
        let p = parse_program(MINIMAL).expect("minimal program must parse");
        assert_eq!(p.name, "h");
        assert_eq!(p.host.params.len(), 1);
        assert_eq!(p.host.params[0].dims, vec![DimDecl::Lit(64)]);
        assert!(matches!(p.host.launch.num_blocks, IntExpr::Lit(1, _)));
        assert!(p.kernel.body.is_empty());
        assert!(p.kernel.buffers.is_empty());
    }

    #[test]
    fn prim_outside_block_parses() {
        // Placement is a semantic rule, not syntax.
        let src = "host h(x:[8]f32){launch k<1>(x)}
                   kernel k(x){ alloc_ub b: f32[8] stream_in; copy_g2l(b[0:8], x[0:8]) }";
        let p = parse_program(src).expect("must parse");
        assert!(matches!(p.kernel.body[0], Stmt::Prim(_)));
    }

    #[test]
    fn duplicate_label_rejected() {
        let src = "host h(x:[8]f32){launch k<1>(x)}
                   kernel k(x){ compute a { } compute a { } }";
        let err = parse_program(src).unwrap_err();
        assert_eq!(err[0].rule_id, "PAR-DUP");
    }

    #[test]
    fn second_kernel_rejected_as_duplicate() {
        let src = "host h(x:[8]f32){launch k<1>(x)} kernel k(x){} kernel j(x){}";
        let err = parse_program(src).unwrap_err();
        assert_eq!(err[0].rule_id, "PAR-DUP");
    }

    #[test]
    fn loop_must_start_at_zero() {
        let src = "host h(x:[8]f32){launch k<1>(x)} kernel k(x){ for i in 1..4 { } }";
        let err = parse_program(src).unwrap_err();
        assert_eq!(err[0].rule_id, "PAR-SYNTAX");
        assert!(err[0].message.contains("start at 0"));
    }

    #[test]
    fn missing_rationale_rejected() {
        let src = "host h(x:[8]f32){tiling t = 4 launch k<1>(x)} kernel k(x){}";
        let err = parse_program(src).unwrap_err();
        assert!(err[0].message.contains("rationale"));
    }

    #[test]
    fn launch_over_and_symbolic_dims() {
        let src = "host h(x:[R=64,C=32]f32, out y:[R=64,C=32]f32){
                     tiling rows = ceil_div(R, 4) @ \"rows per block\";
                     launch k<4> over R (x, y, rows, C);
                   }
                   kernel k(x, y, rows, cols){ }";
        let p = parse_program(src).expect("must parse");
        assert!(p.host.launch.workload.is_some());
        assert_eq!(p.host.launch.args.len(), 4);
        assert!(matches!(p.host.launch.args[0], LaunchArg::Tensor(..)));
        assert!(matches!(p.host.launch.args[2], LaunchArg::Scalar(_)));
        assert!(p.host.params[1].is_out);
    }

    #[test]
    fn copy_strided_form_parses() {
        let src = "host h(x:[64]f32){launch k<1>(x)}
                   kernel k(x){ alloc_ub b: f32[64] stream_in;
                     copyin c { copy_g2l(b[0:16], x[0:16], 4, 16) } }";
        parse_program(src).expect("strided copy must parse");
    }

    #[test]
    fn float_immediate_forms() {
        let src = "host h(x:[8]f32){launch k<1>(x, 8)}
                   kernel k(x, n){ alloc_ub b: f32[8] temp;
                     compute c { muls(b[0:8], b[0:8], 1.0/float(n)) } }";
        parse_program(src).expect("float expr must parse");
    }

    #[test]
    fn parser_is_total_on_garbage() {
        for src in ["", "host", "kernel k", "host h(x:[0]f32){launch k<1>(x)} kernel k(x){}", "}{"] {
            let _ = parse_program(src); // must not panic
        }
    }
}
