//! Element-level operation kernels shared by the DSL interpreter and the
//! target-IR interpreter, so the two agree bitwise by construction.
//!
//! The independent reference oracle deliberately does NOT use this module.
//!
//! f16 semantics: each primitive computes in f32 and rounds to f16
//! (round-to-nearest-even) on store. Reductions accumulate in the source
//! dtype: an f16 reduction rounds after every step.

use crate::ast::Dtype;
use crate::vm::tensor::{f16_bits_to_f32, f32_to_f16_bits, TensorData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Exp,
    Ln,
    Abs,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImmOp {
    Adds,
    Muls,
    Maxs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedOp {
    Sum,
    Max,
}

/// Kernel-level failures indicate a checker gap, not a user error.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFault(pub String);

type KResult<T> = Result<T, KernelFault>;

pub fn read_slice(buf: &TensorData, off: usize, n: usize) -> KResult<TensorData> {
    if off + n > buf.len() {
        return Err(KernelFault(format!(
            "slice [{off}..{}) exceeds storage of {} elements",
            off + n,
            buf.len()
        )));
    }
    Ok(match buf {
        TensorData::F16(v) => TensorData::F16(v[off..off + n].to_vec()),
        TensorData::F32(v) => TensorData::F32(v[off..off + n].to_vec()),
        TensorData::I32(v) => TensorData::I32(v[off..off + n].to_vec()),
        TensorData::U8(v) => TensorData::U8(v[off..off + n].to_vec()),
    })
}

pub fn write_slice(buf: &mut TensorData, off: usize, vals: &TensorData) -> KResult<()> {
    let n = vals.len();
    if off + n > buf.len() {
        return Err(KernelFault(format!(
            "write [{off}..{}) exceeds storage of {} elements",
            off + n,
            buf.len()
        )));
    }
    match (buf, vals) {
        (TensorData::F16(d), TensorData::F16(s)) => d[off..off + n].copy_from_slice(s),
        (TensorData::F32(d), TensorData::F32(s)) => d[off..off + n].copy_from_slice(s),
        (TensorData::I32(d), TensorData::I32(s)) => d[off..off + n].copy_from_slice(s),
        (TensorData::U8(d), TensorData::U8(s)) => d[off..off + n].copy_from_slice(s),
        _ => return Err(KernelFault("dtype mismatch on write".into())),
    }
    Ok(())
}

fn float_map2(a: &TensorData, b: &TensorData, f: impl Fn(f32, f32) -> f32) -> KResult<TensorData> {
    match (a, b) {
        (TensorData::F32(x), TensorData::F32(y)) => Ok(TensorData::F32(
            x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect(),
        )),
        (TensorData::F16(x), TensorData::F16(y)) => Ok(TensorData::F16(
            x.iter()
                .zip(y)
                .map(|(&p, &q)| f32_to_f16_bits(f(f16_bits_to_f32(p), f16_bits_to_f32(q))))
                .collect(),
        )),
        _ => Err(KernelFault("dtype mismatch in float binary op".into())),
    }
}

pub fn binary(op: BinOp, a: &TensorData, b: &TensorData) -> KResult<TensorData> {
    if a.len() != b.len() {
        return Err(KernelFault("operand length mismatch".into()));
    }
    match (op, a, b) {
        (BinOp::Add, TensorData::I32(x), TensorData::I32(y)) => Ok(TensorData::I32(
            x.iter().zip(y).map(|(&p, &q)| p.wrapping_add(q)).collect(),
        )),
        (BinOp::Sub, TensorData::I32(x), TensorData::I32(y)) => Ok(TensorData::I32(
            x.iter().zip(y).map(|(&p, &q)| p.wrapping_sub(q)).collect(),
        )),
        (BinOp::Mul, TensorData::I32(x), TensorData::I32(y)) => Ok(TensorData::I32(
            x.iter().zip(y).map(|(&p, &q)| p.wrapping_mul(q)).collect(),
        )),
        (BinOp::Max, TensorData::I32(x), TensorData::I32(y)) => Ok(TensorData::I32(
            x.iter().zip(y).map(|(&p, &q)| p.max(q)).collect(),
        )),
        (BinOp::Min, TensorData::I32(x), TensorData::I32(y)) => Ok(TensorData::I32(
            x.iter().zip(y).map(|(&p, &q)| p.min(q)).collect(),
        )),
        (BinOp::Add, ..) => float_map2(a, b, |p, q| p + q),
        (BinOp::Sub, ..) => float_map2(a, b, |p, q| p - q),
        (BinOp::Mul, ..) => float_map2(a, b, |p, q| p * q),
        (BinOp::Div, ..) => float_map2(a, b, |p, q| p / q),
        (BinOp::Max, ..) => float_map2(a, b, f32::max),
        (BinOp::Min, ..) => float_map2(a, b, f32::min),
    }
}

fn float_map1(a: &TensorData, f: impl Fn(f32) -> f32) -> KResult<TensorData> {
    match a {
        TensorData::F32(x) => Ok(TensorData::F32(x.iter().map(|&p| f(p)).collect())),
        TensorData::F16(x) => Ok(TensorData::F16(
            x.iter()
                .map(|&p| f32_to_f16_bits(f(f16_bits_to_f32(p))))
                .collect(),
        )),
        _ => Err(KernelFault("dtype mismatch in float unary op".into())),
    }
}

pub fn unary(op: UnOp, a: &TensorData) -> KResult<TensorData> {
    match (op, a) {
        (UnOp::Abs, TensorData::I32(x)) => Ok(TensorData::I32(
            x.iter().map(|&p| p.wrapping_abs()).collect(),
        )),
        (UnOp::Exp, _) => float_map1(a, f32::exp),
        (UnOp::Ln, _) => float_map1(a, f32::ln),
        (UnOp::Abs, _) => float_map1(a, f32::abs),
        (UnOp::Relu, _) => float_map1(a, |p| p.max(0.0)),
    }
}

pub fn immediate(op: ImmOp, a: &TensorData, imm: f32) -> KResult<TensorData> {
    match op {
        ImmOp::Adds => float_map1(a, |p| p + imm),
        ImmOp::Muls => float_map1(a, |p| p * imm),
        ImmOp::Maxs => float_map1(a, |p| p.max(imm)),
    }
}

pub fn select(mask: &TensorData, a: &TensorData, b: &TensorData) -> KResult<TensorData> {
    let m = match mask {
        TensorData::U8(m) => m,
        _ => return Err(KernelFault("vsel mask must be u8".into())),
    };
    if m.len() != a.len() || a.len() != b.len() {
        return Err(KernelFault("operand length mismatch".into()));
    }
    match (a, b) {
        (TensorData::F32(x), TensorData::F32(y)) => Ok(TensorData::F32(
            m.iter()
                .zip(x.iter().zip(y))
                .map(|(&mm, (&p, &q))| if mm != 0 { p } else { q })
                .collect(),
        )),
        (TensorData::F16(x), TensorData::F16(y)) => Ok(TensorData::F16(
            m.iter()
                .zip(x.iter().zip(y))
                .map(|(&mm, (&p, &q))| if mm != 0 { p } else { q })
                .collect(),
        )),
        (TensorData::I32(x), TensorData::I32(y)) => Ok(TensorData::I32(
            m.iter()
                .zip(x.iter().zip(y))
                .map(|(&mm, (&p, &q))| if mm != 0 { p } else { q })
                .collect(),
        )),
        _ => Err(KernelFault("dtype mismatch in vsel".into())),
    }
}

/// Sequential reduction in the source dtype; f16 rounds after every step.
pub fn reduce(op: RedOp, a: &TensorData) -> KResult<TensorData> {
    match a {
        TensorData::F32(x) => {
            let out = match op {
                RedOp::Sum => x.iter().fold(0.0f32, |acc, &v| acc + v),
                RedOp::Max => x.iter().copied().fold(f32::NEG_INFINITY, f32::max),
            };
            Ok(TensorData::F32(vec![out]))
        }
        TensorData::F16(x) => {
            let out = match op {
                RedOp::Sum => {
                    let mut acc = 0u16; // +0.0
                    for &v in x {
                        acc = f32_to_f16_bits(f16_bits_to_f32(acc) + f16_bits_to_f32(v));
                    }
                    acc
                }
                RedOp::Max => {
                    let mut acc = f32_to_f16_bits(f32::NEG_INFINITY);
                    for &v in x {
                        if f16_bits_to_f32(v) > f16_bits_to_f32(acc) {
                            acc = v;
                        }
                    }
                    acc
                }
            };
            Ok(TensorData::F16(vec![out]))
        }
        _ => Err(KernelFault("reduction requires a float dtype".into())),
    }
}

pub fn broadcast(src: &TensorData, n: usize) -> KResult<TensorData> {
    if src.len() != 1 {
        return Err(KernelFault("broadcast source must be one element".into()));
    }
    Ok(match src {
        TensorData::F16(v) => TensorData::F16(vec![v[0]; n]),
        TensorData::F32(v) => TensorData::F32(vec![v[0]; n]),
        TensorData::I32(v) => TensorData::I32(vec![v[0]; n]),
        TensorData::U8(v) => TensorData::U8(vec![v[0]; n]),
    })
}

pub fn fill(dtype: Dtype, imm: f32, n: usize) -> KResult<TensorData> {
    match dtype {
        Dtype::F32 => Ok(TensorData::F32(vec![imm; n])),
        Dtype::F16 => Ok(TensorData::F16(vec![f32_to_f16_bits(imm); n])),
        _ => Err(KernelFault("memset requires a float buffer".into())),
    }
}

fn round_ties_even_f32(v: f32) -> f32 {
    // Round half to even without relying on newer std APIs.
    let floor = v.floor();
    let diff = v - floor;
    if diff > 0.5 {
        floor + 1.0
    } else if diff < 0.5 {
        floor
    } else if (floor as i64) % 2 == 0 {
        floor
    } else {
        floor + 1.0
    }
}

fn f32_to_i32_rne(v: f32) -> i32 {
    if v.is_nan() {
        return 0;
    }
    let r = round_ties_even_f32(v);
    if r >= i32::MAX as f32 {
        i32::MAX
    } else if r <= i32::MIN as f32 {
        i32::MIN
    } else {
        r as i32
    }
}

fn f32_to_u8_rne(v: f32) -> u8 {
    if v.is_nan() {
        return 0;
    }
    round_ties_even_f32(v).clamp(0.0, 255.0) as u8
}

/// Dtype conversion. Float targets round to nearest even; integer targets
/// round to nearest even and saturate.
pub fn cast(dst: Dtype, a: &TensorData) -> KResult<TensorData> {
    let as_f32 = |a: &TensorData| -> Vec<f32> {
        match a {
            TensorData::F16(v) => v.iter().map(|&b| f16_bits_to_f32(b)).collect(),
            TensorData::F32(v) => v.clone(),
            TensorData::I32(v) => v.iter().map(|&b| b as f32).collect(),
            TensorData::U8(v) => v.iter().map(|&b| b as f32).collect(),
        }
    };
    Ok(match dst {
        Dtype::F32 => TensorData::F32(as_f32(a)),
        Dtype::F16 => TensorData::F16(as_f32(a).iter().map(|&v| f32_to_f16_bits(v)).collect()),
        Dtype::I32 => match a {
            TensorData::I32(v) => TensorData::I32(v.clone()),
            TensorData::U8(v) => TensorData::I32(v.iter().map(|&b| b as i32).collect()),
            _ => TensorData::I32(as_f32(a).iter().map(|&v| f32_to_i32_rne(v)).collect()),
        },
        Dtype::U8 => match a {
            TensorData::I32(v) => {
                TensorData::U8(v.iter().map(|&b| b.clamp(0, 255) as u8).collect())
            }
            TensorData::U8(v) => TensorData::U8(v.clone()),
            _ => TensorData::U8(as_f32(a).iter().map(|&v| f32_to_u8_rne(v)).collect()),
        },
    })
}
