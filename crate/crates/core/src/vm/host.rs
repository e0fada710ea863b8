//! Host-side evaluation: shape binding, tiling parameters, and the launch
//! plan with per-block workload ranges.

use crate::ast::{DimDecl, LaunchArg, Program};
use crate::diag::{rules, Diagnostic, Span};
use crate::eval::{chunk_len, chunk_off, eval_int, Env, EvalError};
use crate::vm::tensor::TensorValue;
use std::collections::BTreeMap;

/// Rebinds named shape dimensions (e.g. `{R: 64, C: 512}`); omitted symbols
/// keep their declared defaults.
pub type ShapeMap = BTreeMap<String, i64>;

/// Resolved dimension symbols and concrete per-tensor shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Bindings {
    pub dims: BTreeMap<String, i64>,
    pub tensor_shapes: BTreeMap<String, Vec<i64>>,
}

impl Bindings {
    pub fn numel(&self, tensor: &str) -> Option<i64> {
        self.tensor_shapes
            .get(tensor)
            .map(|dims| dims.iter().product())
    }
}

/// Everything the kernel needs from the host side.
#[derive(Debug, Clone, PartialEq)]
pub struct LaunchPlan {
    pub num_blocks: i64,
    pub tiling_values: BTreeMap<String, i64>,
    /// Workload size partitioned across blocks (`over` clause; defaults to
    /// `num_blocks`).
    pub workload: i64,
    /// Half-open `(start, end)` per block under the remainder-to-lowest
    /// split policy.
    pub per_block_ranges: Vec<(i64, i64)>,
    /// Kernel parameter bindings, position-wise: either a tensor (host
    /// parameter name) or an evaluated scalar.
    pub kernel_args: Vec<(String, KernelArgValue)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelArgValue {
    Tensor(String),
    Scalar(i64),
}

impl LaunchPlan {
    /// Scalar environment for one kernel block: scalar params plus
    /// `block_idx`.
    pub fn block_env(&self, block_idx: i64) -> Env {
        let mut env = Env::new();
        for (name, value) in &self.kernel_args {
            if let KernelArgValue::Scalar(v) = value {
                env.bind(name, *v);
            }
        }
        env.bind("block_idx", block_idx);
        env
    }

    /// Kernel tensor-parameter name → host tensor name.
    pub fn tensor_params(&self) -> BTreeMap<String, String> {
        self.kernel_args
            .iter()
            .filter_map(|(name, v)| match v {
                KernelArgValue::Tensor(host) => Some((name.clone(), host.clone())),
                KernelArgValue::Scalar(_) => None,
            })
            .collect()
    }
}

fn eval_fault(err: EvalError) -> Diagnostic {
    Diagnostic::error(rules::TIL_NONPOS, err.span(), err.message())
}

/// Resolve dimension symbols against a shape map; defaults fill the rest.
pub fn bind_shapes(program: &Program, overrides: &ShapeMap) -> Result<Bindings, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut dims: BTreeMap<String, i64> = BTreeMap::new();
    let mut known: BTreeMap<String, Span> = BTreeMap::new();
    for param in &program.host.params {
        for dim in &param.dims {
            if let DimDecl::Sym { name, default } = dim {
                known.entry(name.clone()).or_insert(param.span);
                let value = overrides.get(name).copied().unwrap_or(*default);
                dims.entry(name.clone()).or_insert(value);
            }
        }
    }
    for name in overrides.keys() {
        if !known.contains_key(name) {
            diags.push(Diagnostic::error(
                rules::SEM_SHAPE,
                Span::default(),
                format!("shape map names unknown dimension symbol `{name}`"),
            ));
        }
    }
    for (name, value) in &dims {
        if *value < 0 {
            diags.push(Diagnostic::error(
                rules::SEM_SHAPE,
                known.get(name).copied().unwrap_or_default(),
                format!("dimension `{name}` bound to negative value {value}"),
            ));
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let mut tensor_shapes = BTreeMap::new();
    for param in &program.host.params {
        let resolved: Vec<i64> = param
            .dims
            .iter()
            .map(|d| match d {
                DimDecl::Lit(v) => *v,
                DimDecl::Sym { name, .. } => dims[name],
            })
            .collect();
        tensor_shapes.insert(param.name.clone(), resolved);
    }
    Ok(Bindings {
        dims,
        tensor_shapes,
    })
}

/// Derive a shape map from actual input tensors, checking both literal dims
/// and symbol consistency. Output parameters need not be provided.
pub fn bind_shapes_from_inputs(
    program: &Program,
    inputs: &BTreeMap<String, TensorValue>,
) -> Result<ShapeMap, Vec<Diagnostic>> {
    let mut map = ShapeMap::new();
    let mut diags = Vec::new();
    for param in &program.host.params {
        let tensor = match inputs.get(&param.name) {
            Some(t) => t,
            None if param.is_out => continue,
            None => {
                diags.push(Diagnostic::error(
                    rules::SEM_SHAPE,
                    param.span,
                    format!("missing input tensor `{}`", param.name),
                ));
                continue;
            }
        };
        if tensor.dtype() != param.dtype {
            diags.push(Diagnostic::error(
                rules::SEM_SHAPE,
                param.span,
                format!(
                    "tensor `{}` has dtype {}, declared {}",
                    param.name,
                    tensor.dtype().name(),
                    param.dtype.name()
                ),
            ));
            continue;
        }
        if tensor.shape.len() != param.dims.len() {
            diags.push(Diagnostic::error(
                rules::SEM_SHAPE,
                param.span,
                format!(
                    "tensor `{}` has rank {}, declared rank {}",
                    param.name,
                    tensor.shape.len(),
                    param.dims.len()
                ),
            ));
            continue;
        }
        for (decl, &actual) in param.dims.iter().zip(tensor.shape.iter()) {
            let actual = actual as i64;
            match decl {
                DimDecl::Lit(v) => {
                    if *v != actual {
                        diags.push(Diagnostic::error(
                            rules::SEM_SHAPE,
                            param.span,
                            format!(
                                "tensor `{}` dimension is {actual}, declared {v}",
                                param.name
                            ),
                        ));
                    }
                }
                DimDecl::Sym { name, .. } => match map.get(name) {
                    Some(&bound) if bound != actual => {
                        diags.push(Diagnostic::error(
                            rules::SEM_SHAPE,
                            param.span,
                            format!(
                                "dimension `{name}` is {bound} elsewhere but {actual} in `{}`",
                                param.name
                            ),
                        ));
                    }
                    Some(_) => {}
                    None => {
                        map.insert(name.clone(), actual);
                    }
                },
            }
        }
    }
    for name in inputs.keys() {
        if !program.host.params.iter().any(|p| &p.name == name) {
            diags.push(Diagnostic::error(
                rules::SEM_SHAPE,
                Span::default(),
                format!("input tensor `{name}` does not match any parameter"),
            ));
        }
    }
    if diags.is_empty() {
        Ok(map)
    } else {
        Err(diags)
    }
}

/// Evaluate the host function: tiling parameters in declaration order, the
/// block count, the workload split, and kernel argument binding.
pub fn eval_host(program: &Program, shapes: &ShapeMap) -> Result<LaunchPlan, Vec<Diagnostic>> {
    let bindings = bind_shapes(program, shapes)?;
    eval_host_bound(program, &bindings)
}

/// As [`eval_host`] but with shapes already resolved.
pub fn eval_host_bound(
    program: &Program,
    bindings: &Bindings,
) -> Result<LaunchPlan, Vec<Diagnostic>> {
    let mut env = Env::new();
    for (name, value) in &bindings.dims {
        env.bind(name, *value);
    }

    let mut tiling_values = BTreeMap::new();
    for decl in &program.host.tiling {
        let value = eval_int(&decl.expr, &env).map_err(|e| vec![eval_fault(e)])?;
        if value <= 0 {
            return Err(vec![Diagnostic::error(
                rules::TIL_NONPOS,
                decl.span,
                format!("tiling parameter `{}` evaluates to {value}; must be positive", decl.name),
            )]);
        }
        env.bind(&decl.name, value);
        tiling_values.insert(decl.name.clone(), value);
    }

    let launch = &program.host.launch;
    let num_blocks = eval_int(&launch.num_blocks, &env).map_err(|e| vec![eval_fault(e)])?;
    if num_blocks <= 0 {
        return Err(vec![Diagnostic::error(
            rules::TIL_NONPOS,
            launch.num_blocks.span(),
            format!("block count evaluates to {num_blocks}; must be positive"),
        )]);
    }
    let workload = match &launch.workload {
        Some(expr) => {
            let w = eval_int(expr, &env).map_err(|e| vec![eval_fault(e)])?;
            if w < 0 {
                return Err(vec![Diagnostic::error(
                    rules::TIL_NONPOS,
                    expr.span(),
                    format!("workload evaluates to {w}; must be non-negative"),
                )]);
            }
            w
        }
        None => num_blocks,
    };

    let per_block_ranges: Vec<(i64, i64)> = (0..num_blocks)
        .map(|b| {
            let start = chunk_off(workload, num_blocks, b);
            (start, start + chunk_len(workload, num_blocks, b))
        })
        .collect();

    let mut kernel_args = Vec::new();
    for (idx, (param_name, _)) in program.kernel.params.iter().enumerate() {
        match launch.args.get(idx) {
            Some(LaunchArg::Tensor(host_name, _)) => {
                kernel_args.push((param_name.clone(), KernelArgValue::Tensor(host_name.clone())));
            }
            Some(LaunchArg::Scalar(expr)) => {
                let v = eval_int(expr, &env).map_err(|e| vec![eval_fault(e)])?;
                kernel_args.push((param_name.clone(), KernelArgValue::Scalar(v)));
            }
            None => {
                // Arity mismatches are reported by symbol resolution; keep
                // this total for callers that skip it.
                return Err(vec![Diagnostic::error(
                    rules::SEM_ARITY,
                    launch.span,
                    format!(
                        "launch passes {} arguments but kernel `{}` declares {}",
                        launch.args.len(),
                        program.kernel.name,
                        program.kernel.params.len()
                    ),
                )]);
            }
        }
    }

    Ok(LaunchPlan {
        num_blocks,
        tiling_values,
        workload,
        per_block_ranges,
        kernel_args,
    })
}
