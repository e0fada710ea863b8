//! Independent reference oracle for the operator fixtures.
//!
//! Every operator is evaluated densely from its plain mathematical formula
//! in f64, then cast to the output dtype. This module deliberately shares
//! no kernels with the interpreters; it is the correctness reference they
//! are judged against.
//!
//! Operator constants are frozen here and mirrored by the fixture sources:
//! sgd lr = 0.1; adam lr = 0.001, beta1 = 0.9, beta2 = 0.999, eps = 1e-8,
//! t = 1; layernorm eps = 1e-5; clip bounds [-0.5, 0.5]; pooling window 4;
//! dequantize scale 0.25; smooth_l1 beta = 1.

use crate::ast::Dtype;
use crate::vm::tensor::{f64_to_f16_bits, TensorData, TensorValue};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("unknown oracle `{0}`")]
    Unknown(String),
    #[error("oracle `{oracle}` missing input `{input}`")]
    MissingInput { oracle: String, input: String },
    #[error("oracle `{oracle}`: {message}")]
    Shape { oracle: String, message: String },
}

type Inputs<'a> = &'a BTreeMap<String, TensorValue>;
type Outputs = BTreeMap<String, TensorValue>;

pub const ORACLE_IDS: [&str; 17] = [
    "relu",
    "sigmoid",
    "masked_relu",
    "mse_loss",
    "smooth_l1",
    "cumsum",
    "mean_center",
    "clip",
    "dequantize",
    "softmax",
    "layernorm",
    "sgd_step",
    "adam_step",
    "row_sum",
    "row_max",
    "avgpool1d",
    "maxpool1d",
];

/// Evaluate the named operator on the given inputs. Output keys use the
/// fixtures' output parameter names.
pub fn reference_eval(oracle_id: &str, inputs: Inputs) -> Result<Outputs, OracleError> {
    match oracle_id {
        "relu" => elementwise_f32(oracle_id, inputs, "x", "y", |v| v.max(0.0)),
        "sigmoid" => {
            let x = get(oracle_id, inputs, "x")?;
            let vals: Vec<f64> = to_f64(x).iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
            let mut out = Outputs::new();
            out.insert("y".into(), from_f64(x.shape.clone(), &vals, x.dtype()));
            Ok(out)
        }
        "masked_relu" => {
            let x = get(oracle_id, inputs, "x")?;
            let mask = get(oracle_id, inputs, "mask")?;
            same_shape(oracle_id, x, mask)?;
            let xv = to_f64(x);
            let mv = to_f64(mask);
            let vals: Vec<f64> = xv
                .iter()
                .zip(mv.iter())
                .map(|(&v, &m)| if m != 0.0 { v.max(0.0) } else { 0.0 })
                .collect();
            let mut out = Outputs::new();
            out.insert("y".into(), from_f64(x.shape.clone(), &vals, x.dtype()));
            Ok(out)
        }
        "mse_loss" => {
            let pred = get(oracle_id, inputs, "pred")?;
            let target = get(oracle_id, inputs, "target")?;
            same_shape(oracle_id, pred, target)?;
            let p = to_f64(pred);
            let t = to_f64(target);
            let n = p.len().max(1) as f64;
            let loss = p
                .iter()
                .zip(t.iter())
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<f64>()
                / n;
            let mut out = Outputs::new();
            out.insert("loss".into(), from_f64(vec![1], &[loss], pred.dtype()));
            Ok(out)
        }
        "smooth_l1" => {
            let pred = get(oracle_id, inputs, "pred")?;
            let target = get(oracle_id, inputs, "target")?;
            same_shape(oracle_id, pred, target)?;
            let p = to_f64(pred);
            let t = to_f64(target);
            let vals: Vec<f64> = p
                .iter()
                .zip(t.iter())
                .map(|(&a, &b)| {
                    let d = (a - b).abs();
                    if d < 1.0 {
                        0.5 * d * d
                    } else {
                        d - 0.5
                    }
                })
                .collect();
            let mut out = Outputs::new();
            out.insert("y".into(), from_f64(pred.shape.clone(), &vals, pred.dtype()));
            Ok(out)
        }
        "cumsum" => {
            let x = get(oracle_id, inputs, "x")?;
            let (rows, cols) = rows_cols(oracle_id, x)?;
            let xv = to_f64(x);
            let mut vals = vec![0.0f64; xv.len()];
            for r in 0..rows {
                let mut acc = 0.0f64;
                for c in 0..cols {
                    acc += xv[r * cols + c];
                    vals[r * cols + c] = acc;
                }
            }
            let mut out = Outputs::new();
            out.insert("y".into(), from_f64(x.shape.clone(), &vals, x.dtype()));
            Ok(out)
        }
        "mean_center" => {
            let x = get(oracle_id, inputs, "x")?;
            let xv = to_f64(x);
            let mean = xv.iter().sum::<f64>() / xv.len().max(1) as f64;
            let vals: Vec<f64> = xv.iter().map(|&v| v - mean).collect();
            let mut out = Outputs::new();
            out.insert("y".into(), from_f64(x.shape.clone(), &vals, x.dtype()));
            Ok(out)
        }
        "clip" => elementwise_f32(oracle_id, inputs, "x", "y", |v| v.clamp(-0.5, 0.5)),
        "dequantize" => {
            let q = get(oracle_id, inputs, "q")?;
            let vals: Vec<f64> = to_f64(q).iter().map(|&v| v * 0.25).collect();
            let mut out = Outputs::new();
            out.insert("y".into(), from_f64(q.shape.clone(), &vals, Dtype::F32));
            Ok(out)
        }
        "softmax" => {
            let x = get(oracle_id, inputs, "x")?;
            let (rows, cols) = rows_cols(oracle_id, x)?;
            let xv = to_f64(x);
            let mut vals = vec![0.0f64; xv.len()];
            for r in 0..rows {
                let row = &xv[r * cols..(r + 1) * cols];
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = row.iter().map(|&v| (v - m).exp()).collect();
                let sum: f64 = exps.iter().sum();
                for c in 0..cols {
                    vals[r * cols + c] = exps[c] / sum;
                }
            }
            let mut out = Outputs::new();
            out.insert("y".into(), from_f64(x.shape.clone(), &vals, x.dtype()));
            Ok(out)
        }
        "layernorm" => {
            let x = get(oracle_id, inputs, "x")?;
            let gamma = get(oracle_id, inputs, "gamma")?;
            let beta = get(oracle_id, inputs, "beta")?;
            let (rows, cols) = rows_cols(oracle_id, x)?;
            if gamma.numel() != cols || beta.numel() != cols {
                return Err(OracleError::Shape {
                    oracle: oracle_id.into(),
                    message: format!("gamma/beta must have {cols} elements"),
                });
            }
            let eps = 1e-5f64;
            let xv = to_f64(x);
            let gv = to_f64(gamma);
            let bv = to_f64(beta);
            let mut vals = vec![0.0f64; xv.len()];
            for r in 0..rows {
                let row = &xv[r * cols..(r + 1) * cols];
                let mean = row.iter().sum::<f64>() / cols as f64;
                let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
                let inv_std = 1.0 / (var + eps).sqrt();
                for c in 0..cols {
                    vals[r * cols + c] = (row[c] - mean) * inv_std * gv[c] + bv[c];
                }
            }
            let mut out = Outputs::new();
            out.insert("y".into(), from_f64(x.shape.clone(), &vals, x.dtype()));
            Ok(out)
        }
        "sgd_step" => {
            let theta = get(oracle_id, inputs, "theta")?;
            let grad = get(oracle_id, inputs, "grad")?;
            same_shape(oracle_id, theta, grad)?;
            let lr = 0.1f64;
            let vals: Vec<f64> = to_f64(theta)
                .iter()
                .zip(to_f64(grad).iter())
                .map(|(&t, &g)| t - lr * g)
                .collect();
            let mut out = Outputs::new();
            out.insert(
                "theta_out".into(),
                from_f64(theta.shape.clone(), &vals, theta.dtype()),
            );
            Ok(out)
        }
        "adam_step" => {
            let theta = get(oracle_id, inputs, "theta")?;
            let m = get(oracle_id, inputs, "m")?;
            let v = get(oracle_id, inputs, "v")?;
            let grad = get(oracle_id, inputs, "grad")?;
            same_shape(oracle_id, theta, grad)?;
            same_shape(oracle_id, theta, m)?;
            same_shape(oracle_id, theta, v)?;
            let (lr, b1, b2, eps) = (0.001f64, 0.9f64, 0.999f64, 1e-8f64);
            let tv = to_f64(theta);
            let mv = to_f64(m);
            let vv = to_f64(v);
            let gv = to_f64(grad);
            let n = tv.len();
            let mut m_out = vec![0.0; n];
            let mut v_out = vec![0.0; n];
            let mut t_out = vec![0.0; n];
            for i in 0..n {
                m_out[i] = b1 * mv[i] + (1.0 - b1) * gv[i];
                v_out[i] = b2 * vv[i] + (1.0 - b2) * gv[i] * gv[i];
                // Bias correction at t = 1.
                let m_hat = m_out[i] / (1.0 - b1);
                let v_hat = v_out[i] / (1.0 - b2);
                t_out[i] = tv[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
            let mut out = Outputs::new();
            out.insert(
                "theta_out".into(),
                from_f64(theta.shape.clone(), &t_out, theta.dtype()),
            );
            out.insert("m_out".into(), from_f64(theta.shape.clone(), &m_out, theta.dtype()));
            out.insert("v_out".into(), from_f64(theta.shape.clone(), &v_out, theta.dtype()));
            Ok(out)
        }
        "row_sum" | "row_max" => {
            let x = get(oracle_id, inputs, "x")?;
            let (rows, cols) = rows_cols(oracle_id, x)?;
            let xv = to_f64(x);
            let vals: Vec<f64> = (0..rows)
                .map(|r| {
                    let row = &xv[r * cols..(r + 1) * cols];
                    if oracle_id == "row_sum" {
                        row.iter().sum::<f64>()
                    } else {
                        row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    }
                })
                .collect();
            let mut out = Outputs::new();
            out.insert("y".into(), from_f64(vec![rows], &vals, x.dtype()));
            Ok(out)
        }
        "avgpool1d" | "maxpool1d" => {
            let x = get(oracle_id, inputs, "x")?;
            let (rows, cols) = rows_cols(oracle_id, x)?;
            let k = 4usize;
            if cols % k != 0 {
                return Err(OracleError::Shape {
                    oracle: oracle_id.into(),
                    message: format!("columns {cols} must be divisible by window {k}"),
                });
            }
            let out_cols = cols / k;
            let xv = to_f64(x);
            let mut vals = vec![0.0f64; rows * out_cols];
            for r in 0..rows {
                for j in 0..out_cols {
                    let window = &xv[r * cols + j * k..r * cols + j * k + k];
                    vals[r * out_cols + j] = if oracle_id == "avgpool1d" {
                        window.iter().sum::<f64>() / k as f64
                    } else {
                        window.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    };
                }
            }
            let mut out = Outputs::new();
            out.insert("y".into(), from_f64(vec![rows, out_cols], &vals, x.dtype()));
            Ok(out)
        }
        other => Err(OracleError::Unknown(other.to_string())),
    }
}

fn get<'a>(oracle: &str, inputs: Inputs<'a>, name: &str) -> Result<&'a TensorValue, OracleError> {
    inputs.get(name).ok_or_else(|| OracleError::MissingInput {
        oracle: oracle.to_string(),
        input: name.to_string(),
    })
}

fn same_shape(oracle: &str, a: &TensorValue, b: &TensorValue) -> Result<(), OracleError> {
    if a.shape != b.shape {
        return Err(OracleError::Shape {
            oracle: oracle.to_string(),
            message: format!("shape mismatch {:?} vs {:?}", a.shape, b.shape),
        });
    }
    Ok(())
}

/// Interpret the tensor as rows x cols (rank 1 means one row).
fn rows_cols(oracle: &str, t: &TensorValue) -> Result<(usize, usize), OracleError> {
    match t.shape.len() {
        1 => Ok((1, t.shape[0])),
        2 => Ok((t.shape[0], t.shape[1])),
        r => Err(OracleError::Shape {
            oracle: oracle.to_string(),
            message: format!("expected rank 1 or 2, got rank {r}"),
        }),
    }
}

fn to_f64(t: &TensorValue) -> Vec<f64> {
    (0..t.numel()).map(|i| t.data.get_f64(i)).collect()
}

fn from_f64(shape: Vec<usize>, vals: &[f64], dtype: Dtype) -> TensorValue {
    let data = match dtype {
        Dtype::F32 => TensorData::F32(vals.iter().map(|&v| v as f32).collect()),
        Dtype::F16 => TensorData::F16(vals.iter().map(|&v| f64_to_f16_bits(v)).collect()),
        Dtype::I32 => TensorData::I32(vals.iter().map(|&v| v as i32).collect()),
        Dtype::U8 => TensorData::U8(vals.iter().map(|&v| v as u8).collect()),
    };
    TensorValue::new(shape, data).expect("oracle output shape consistent")
}

fn elementwise_f32(
    oracle: &str,
    inputs: Inputs,
    in_name: &str,
    out_name: &str,
    f: impl Fn(f64) -> f64,
) -> Result<Outputs, OracleError> {
    let x = get(oracle, inputs, in_name)?;
    let vals: Vec<f64> = to_f64(x).iter().map(|&v| f(v)).collect();
    let mut out = Outputs::new();
    out.insert(out_name.into(), from_f64(x.shape.clone(), &vals, x.dtype()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(name: &str, t: TensorValue) -> BTreeMap<String, TensorValue> {
        let mut m = BTreeMap::new();
        m.insert(name.to_string(), t);
        m
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = TensorValue::from_f32(vec![4, 16], (0..64).map(|i| (i % 7) as f32).collect())
            .unwrap();
        let out = reference_eval("softmax", &single("x", x)).unwrap();
        let y = &out["y"];
        for r in 0..4 {
            let sum: f64 = (0..16).map(|c| y.data.get_f64(r * 16 + c)).sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn layernorm_constant_input_is_zero() {
        let mut inputs = BTreeMap::new();
        inputs.insert(
            "x".to_string(),
            TensorValue::from_f32(vec![2, 8], vec![3.5; 16]).unwrap(),
        );
        inputs.insert(
            "gamma".to_string(),
            TensorValue::from_f32(vec![8], vec![1.0; 8]).unwrap(),
        );
        inputs.insert(
            "beta".to_string(),
            TensorValue::from_f32(vec![8], vec![0.0; 8]).unwrap(),
        );
        let out = reference_eval("layernorm", &inputs).unwrap();
        for i in 0..16 {
            assert_eq!(out["y"].data.get_f64(i), 0.0);
        }
    }

    #[test]
    fn sgd_step_example() {
        let mut inputs = BTreeMap::new();
        inputs.insert(
            "theta".to_string(),
            TensorValue::from_f32(vec![2], vec![1.0, 2.0]).unwrap(),
        );
        inputs.insert(
            "grad".to_string(),
            TensorValue::from_f32(vec![2], vec![1.0, 1.0]).unwrap(),
        );
        let out = reference_eval("sgd_step", &inputs).unwrap();
        let y = &out["theta_out"];
        assert!((y.data.get_f64(0) - 0.9).abs() < 1e-7);
        assert!((y.data.get_f64(1) - 1.9).abs() < 1e-7);
    }

    #[test]
    fn pooling_shapes() {
        let x = TensorValue::from_f32(vec![2, 8], (0..16).map(|i| i as f32).collect()).unwrap();
        let avg = reference_eval("avgpool1d", &single("x", x.clone())).unwrap();
        assert_eq!(avg["y"].shape, vec![2, 2]);
        assert_eq!(avg["y"].data.get_f64(0), 1.5);
        let max = reference_eval("maxpool1d", &single("x", x)).unwrap();
        assert_eq!(max["y"].data.get_f64(0), 3.0);
    }

    #[test]
    fn unknown_oracle_rejected() {
        assert!(reference_eval("nope", &BTreeMap::new()).is_err());
    }
}
