//! Canonical text rendering of a [`Program`].
//!
//! The output re-parses to a structurally identical AST: whitespace is
//! normalized, semicolons are emitted, rationale strings are preserved
//! verbatim, and expression parentheses follow operator precedence.

use crate::ast::*;
use std::fmt::Write;

pub fn render_program(p: &Program) -> String {
    let mut out = String::new();
    render_host(&mut out, &p.host);
    out.push('\n');
    render_kernel(&mut out, &p.kernel);
    out
}

fn render_host(out: &mut String, host: &HostFn) {
    write!(out, "host {}(", host.name).unwrap();
    for (i, param) in host.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        if param.is_out {
            out.push_str("out ");
        }
        write!(out, "{}: [", param.name).unwrap();
        for (j, dim) in param.dims.iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            match dim {
                DimDecl::Lit(v) => write!(out, "{v}").unwrap(),
                DimDecl::Sym { name, default } => write!(out, "{name}={default}").unwrap(),
            }
        }
        write!(out, "] {}", param.dtype.name()).unwrap();
    }
    out.push_str(") {\n");
    for t in &host.tiling {
        write!(
            out,
            "    tiling {} = {} @ {};\n",
            t.name,
            int_expr(&t.expr),
            quote(&t.rationale)
        )
        .unwrap();
    }
    let launch = &host.launch;
    write!(
        out,
        "    launch {}<{}>",
        launch.kernel,
        int_expr(&launch.num_blocks)
    )
    .unwrap();
    if let Some(w) = &launch.workload {
        write!(out, " over {}", int_expr(w)).unwrap();
    }
    out.push_str(" (");
    for (i, arg) in launch.args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match arg {
            LaunchArg::Tensor(name, _) => out.push_str(name),
            LaunchArg::Scalar(e) => out.push_str(&int_expr(e)),
        }
    }
    out.push_str(");\n}\n");
}

fn render_kernel(out: &mut String, kernel: &KernelFn) {
    write!(out, "kernel {}(", kernel.name).unwrap();
    for (i, (name, _)) in kernel.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(name);
    }
    out.push_str(") {\n");
    for b in &kernel.buffers {
        write!(
            out,
            "    {} {}: {}[{}] {};\n",
            b.space.keyword(),
            b.name,
            b.dtype.name(),
            int_expr(&b.capacity),
            b.role.keyword()
        )
        .unwrap();
    }
    render_stmts(out, &kernel.body, 1);
    out.push_str("}\n");
}

fn render_stmts(out: &mut String, stmts: &[Stmt], depth: usize) {
    let pad = "    ".repeat(depth);
    for stmt in stmts {
        match stmt {
            Stmt::Let { name, expr, .. } => {
                write!(out, "{pad}let {name} = {};\n", int_expr(expr)).unwrap();
            }
            Stmt::For { var, bound, body, .. } => {
                write!(out, "{pad}for {var} in 0..{} {{\n", int_expr(bound)).unwrap();
                render_stmts(out, body, depth + 1);
                write!(out, "{pad}}}\n").unwrap();
            }
            Stmt::Stage(block) => {
                write!(out, "{pad}{} {} {{\n", block.kind.keyword(), block.label).unwrap();
                render_stmts(out, &block.stmts, depth + 1);
                write!(out, "{pad}}}\n").unwrap();
            }
            Stmt::Sync { .. } => {
                write!(out, "{pad}sync;\n").unwrap();
            }
            Stmt::Prim(call) => {
                write!(out, "{pad}{}(", call.op.name()).unwrap();
                for (i, arg) in call.args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    match arg {
                        Arg::Slice(s) => {
                            write!(
                                out,
                                "{}[{} : {}]",
                                s.base,
                                int_expr(&s.offset),
                                int_expr(&s.count)
                            )
                            .unwrap();
                        }
                        Arg::Int(e) => out.push_str(&int_expr(e)),
                        Arg::Float(e) => out.push_str(&float_expr(e)),
                    }
                }
                out.push_str(");\n");
            }
        }
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            other => out.push(other),
        }
    }
    out.push('"');
    out
}

/// Render an integer expression with minimal parentheses.
pub fn int_expr(e: &IntExpr) -> String {
    int_expr_prec(e, 0)
}

fn int_expr_prec(e: &IntExpr, parent_prec: u8) -> String {
    match e {
        IntExpr::Lit(v, _) => v.to_string(),
        IntExpr::Ident(name, _) => name.clone(),
        IntExpr::Neg(inner, _) => format!("-{}", int_expr_prec(inner, 3)),
        IntExpr::Bin { op, lhs, rhs, .. } => {
            let prec = op.precedence();
            // Right operand of -, /, % needs parens at equal precedence.
            let body = format!(
                "{} {} {}",
                int_expr_prec(lhs, prec),
                op.symbol(),
                int_expr_prec(rhs, prec + 1)
            );
            if prec < parent_prec {
                format!("({body})")
            } else {
                body
            }
        }
        IntExpr::Call { func, args, .. } => {
            let rendered: Vec<String> = args.iter().map(|a| int_expr_prec(a, 0)).collect();
            format!("{}({})", func.name(), rendered.join(", "))
        }
    }
}

/// Render a float immediate with round-trip-exact literals.
pub fn float_expr(e: &FloatExpr) -> String {
    float_expr_prec(e, 0)
}

fn float_expr_prec(e: &FloatExpr, parent_prec: u8) -> String {
    match e {
        FloatExpr::Lit(v, _) => {
            // `{:?}` prints the shortest representation that round-trips,
            // and always includes a decimal point or exponent.
            format!("{v:?}")
        }
        FloatExpr::FromInt(inner, _) => format!("float({})", int_expr(inner)),
        FloatExpr::Neg(inner, _) => format!("-{}", float_expr_prec(inner, 3)),
        FloatExpr::Bin { op, lhs, rhs, .. } => {
            let prec = op.precedence();
            let body = format!(
                "{} {} {}",
                float_expr_prec(lhs, prec),
                op.symbol(),
                float_expr_prec(rhs, prec + 1)
            );
            if prec < parent_prec {
                format!("({body})")
            } else {
                body
            }
        }
    }
}
