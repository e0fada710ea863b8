//! Checked evaluation of integer and float immediate expressions.
//!
//! Integer arithmetic is 64-bit signed with division-by-zero and overflow as
//! checked faults. Float immediates evaluate in f32, matching scalar-unit
//! arithmetic on the modeled hardware.

use crate::ast::{Builtin, FloatBinOp, FloatExpr, IntBinOp, IntExpr};
use crate::diag::Span;
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    Undefined { name: String, span: Span },
    DivByZero { span: Span },
    Overflow { span: Span },
    Domain { message: String, span: Span },
}

impl EvalError {
    pub fn span(&self) -> Span {
        match self {
            EvalError::Undefined { span, .. }
            | EvalError::DivByZero { span }
            | EvalError::Overflow { span }
            | EvalError::Domain { span, .. } => *span,
        }
    }

    pub fn message(&self) -> String {
        match self {
            EvalError::Undefined { name, .. } => format!("`{name}` is not defined here"),
            EvalError::DivByZero { .. } => "division by zero".to_string(),
            EvalError::Overflow { .. } => "integer overflow".to_string(),
            EvalError::Domain { message, .. } => message.clone(),
        }
    }
}

/// Flat scalar environment. Scoping is resolved before evaluation, so a
/// plain map suffices.
#[derive(Debug, Clone, Default)]
pub struct Env {
    vars: HashMap<String, i64>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn bind(&mut self, name: &str, value: i64) {
        self.vars.insert(name.to_string(), value);
    }

    pub fn unbind(&mut self, name: &str) {
        self.vars.remove(name);
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.vars.get(name).copied()
    }
}

/// Start of part `idx` when splitting `total` items into `parts` parts with
/// the remainder going one-each to the lowest-index parts.
pub fn chunk_off(total: i64, parts: i64, idx: i64) -> i64 {
    let base = total / parts;
    let rem = total % parts;
    idx * base + idx.min(rem)
}

/// Length of part `idx` under the same split policy.
pub fn chunk_len(total: i64, parts: i64, idx: i64) -> i64 {
    let base = total / parts;
    let rem = total % parts;
    base + if idx < rem { 1 } else { 0 }
}

pub fn eval_int(expr: &IntExpr, env: &Env) -> Result<i64, EvalError> {
    match expr {
        IntExpr::Lit(v, _) => Ok(*v),
        IntExpr::Ident(name, span) => env.get(name).ok_or_else(|| EvalError::Undefined {
            name: name.clone(),
            span: *span,
        }),
        IntExpr::Neg(inner, span) => eval_int(inner, env)?
            .checked_neg()
            .ok_or(EvalError::Overflow { span: *span }),
        IntExpr::Bin { op, lhs, rhs, span } => {
            let l = eval_int(lhs, env)?;
            let r = eval_int(rhs, env)?;
            let out = match op {
                IntBinOp::Add => l.checked_add(r),
                IntBinOp::Sub => l.checked_sub(r),
                IntBinOp::Mul => l.checked_mul(r),
                IntBinOp::Div => {
                    if r == 0 {
                        return Err(EvalError::DivByZero { span: *span });
                    }
                    l.checked_div(r)
                }
                IntBinOp::Mod => {
                    if r == 0 {
                        return Err(EvalError::DivByZero { span: *span });
                    }
                    l.checked_rem(r)
                }
            };
            out.ok_or(EvalError::Overflow { span: *span })
        }
        IntExpr::Call { func, args, span } => {
            let vals: Vec<i64> = args
                .iter()
                .map(|a| eval_int(a, env))
                .collect::<Result<_, _>>()?;
            match func {
                Builtin::Min => Ok(vals[0].min(vals[1])),
                Builtin::Max => Ok(vals[0].max(vals[1])),
                Builtin::CeilDiv => {
                    let (a, b) = (vals[0], vals[1]);
                    if b <= 0 {
                        return Err(EvalError::Domain {
                            message: format!("ceil_div divisor must be positive, got {b}"),
                            span: *span,
                        });
                    }
                    if a < 0 {
                        return Err(EvalError::Domain {
                            message: format!("ceil_div dividend must be non-negative, got {a}"),
                            span: *span,
                        });
                    }
                    a.checked_add(b - 1)
                        .map(|n| n / b)
                        .ok_or(EvalError::Overflow { span: *span })
                }
                Builtin::ChunkOff | Builtin::ChunkLen => {
                    let (total, parts, idx) = (vals[0], vals[1], vals[2]);
                    if parts <= 0 {
                        return Err(EvalError::Domain {
                            message: format!("chunk parts must be positive, got {parts}"),
                            span: *span,
                        });
                    }
                    if total < 0 {
                        return Err(EvalError::Domain {
                            message: format!("chunk total must be non-negative, got {total}"),
                            span: *span,
                        });
                    }
                    if idx < 0 || idx > parts {
                        return Err(EvalError::Domain {
                            message: format!("chunk index {idx} outside [0, {parts}]"),
                            span: *span,
                        });
                    }
                    match func {
                        Builtin::ChunkOff => Ok(chunk_off(total, parts, idx)),
                        _ => {
                            if idx == parts {
                                return Err(EvalError::Domain {
                                    message: format!("chunk index {idx} outside [0, {parts})"),
                                    span: *span,
                                });
                            }
                            Ok(chunk_len(total, parts, idx))
                        }
                    }
                }
            }
        }
    }
}

/// Float immediates evaluate in f32 at every step.
pub fn eval_float(expr: &FloatExpr, env: &Env) -> Result<f32, EvalError> {
    match expr {
        FloatExpr::Lit(v, _) => Ok(*v as f32),
        FloatExpr::FromInt(inner, _) => Ok(eval_int(inner, env)? as f32),
        FloatExpr::Neg(inner, _) => Ok(-eval_float(inner, env)?),
        FloatExpr::Bin { op, lhs, rhs, .. } => {
            let l = eval_float(lhs, env)?;
            let r = eval_float(rhs, env)?;
            Ok(match op {
                FloatBinOp::Add => l + r,
                FloatBinOp::Sub => l - r,
                FloatBinOp::Mul => l * r,
                FloatBinOp::Div => l / r,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn eval_str(expr_src: &str, env: &Env) -> Result<i64, EvalError> {
        // Ride the program parser by embedding the expression in a tiling decl.
        let src = format!(
            "host h(x:[8]f32){{ tiling t = {expr_src} @ \"t\"; launch k<1>(x) }} kernel k(x){{}}"
        );
        let p = parse_program(&src).expect("expression must parse");
        eval_int(&p.host.tiling[0].expr, env)
    }

    #[test]
    fn precedence_and_builtins() {
        let env = Env::new();
        assert_eq!(eval_str("2 + 3 * 4", &env).unwrap(), 14);
        assert_eq!(eval_str("(2 + 3) * 4", &env).unwrap(), 20);
        assert_eq!(eval_str("10 - 4 - 3", &env).unwrap(), 3);
        assert_eq!(eval_str("ceil_div(10, 4)", &env).unwrap(), 3);
        assert_eq!(eval_str("min(3, max(5, 1))", &env).unwrap(), 3);
        assert_eq!(eval_str("-7 % 3", &env).unwrap(), -1);
    }

    #[test]
    fn chunk_split_policy() {
        // 1000 over 8: even 125s. 1001 over 8: block 0 gets the extra.
        assert_eq!(chunk_len(1000, 8, 0), 125);
        assert_eq!(chunk_len(1000, 8, 7), 125);
        assert_eq!(chunk_len(1001, 8, 0), 126);
        assert_eq!(chunk_len(1001, 8, 1), 125);
        assert_eq!(chunk_off(1001, 8, 1), 126);
        assert_eq!(chunk_off(1001, 8, 8), 1001);
        // Parts beyond the total get empty chunks.
        assert_eq!(chunk_len(3, 8, 5), 0);
        assert_eq!(chunk_off(3, 8, 5), 3);
    }

    #[test]
    fn faults_are_checked() {
        let env = Env::new();
        assert!(matches!(
            eval_str("1 / 0", &env),
            Err(EvalError::DivByZero { .. })
        ));
        assert!(matches!(
            eval_str("9223372036854775807 + 1", &env),
            Err(EvalError::Overflow { .. })
        ));
        assert!(matches!(
            eval_str("undefined_sym", &env),
            Err(EvalError::Undefined { .. })
        ));
        assert!(matches!(
            eval_str("ceil_div(4, 0)", &env),
            Err(EvalError::Domain { .. })
        ));
    }

    #[test]
    fn float_eval_is_f32() {
        let env = Env::new();
        let p = parse_program(
            "host h(x:[8]f32){launch k<1>(x, 3)}
             kernel k(x, n){ alloc_ub b: f32[8] temp; compute c { muls(b[0:8], b[0:8], 1.0/float(n)) } }",
        )
        .unwrap();
        fn find_float(stmts: &[crate::ast::Stmt]) -> Option<&FloatExpr> {
            for s in stmts {
                match s {
                    crate::ast::Stmt::Prim(p) => {
                        for a in &p.args {
                            if let crate::ast::Arg::Float(f) = a {
                                return Some(f);
                            }
                        }
                    }
                    crate::ast::Stmt::Stage(b) => {
                        if let Some(f) = find_float(&b.stmts) {
                            return Some(f);
                        }
                    }
                    crate::ast::Stmt::For { body, .. } => {
                        if let Some(f) = find_float(body) {
                            return Some(f);
                        }
                    }
                    _ => {}
                }
            }
            None
        }
        let mut env2 = env;
        env2.bind("n", 3);
        let f = find_float(&p.kernel.body).unwrap();
        assert_eq!(eval_float(f, &env2).unwrap(), 1.0f32 / 3.0f32);
    }
}
