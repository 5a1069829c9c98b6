//! AST to configuration IR.

use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

use super::types::*;
use crate::dsl::{
    Arg, Binding, BindingName, DslProgram, EpilogueOp, Expr, KernelExpr, OpKind, Stage, Value,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct LowerError {
    /// Binding or stage the error refers to, e.g. `with_tile` or `transpose`.
    pub binding: String,
    pub message: String,
}

impl LowerError {
    fn new(binding: impl Into<String>, message: impl Into<String>) -> Self {
        LowerError { binding: binding.into(), message: message.into() }
    }
}

type LResult<T> = Result<T, LowerError>;

pub fn lower(program: &DslProgram) -> LResult<Config> {
    lower_expr(&program.root)
}

pub fn lower_expr(expr: &Expr) -> LResult<Config> {
    match expr {
        Expr::Kernel(k) => lower_kernel(k).map(Config::Kernel),
        Expr::Pipeline(p) => {
            let mut pre = Vec::new();
            let mut post = Vec::new();
            let mut kernel = None;
            for stage in &p.stages {
                match stage {
                    Stage::Transpose(args) => {
                        let t = lower_transpose(args)?;
                        if kernel.is_some() {
                            post.push(t);
                        } else {
                            pre.push(t);
                        }
                    }
                    Stage::Kernel(k) => {
                        if kernel.is_some() {
                            return Err(LowerError::new(
                                "pipeline",
                                "a pipeline holds exactly one kernel stage",
                            ));
                        }
                        kernel = Some(lower_kernel(k)?);
                    }
                }
            }
            let kernel = kernel
                .ok_or_else(|| LowerError::new("pipeline", "a pipeline holds exactly one kernel stage"))?;
            Ok(Config::Pipeline(PipelineConfig { pre_transforms: pre, kernel, post_transforms: post }))
        }
    }
}

fn lower_transpose(args: &[Arg]) -> LResult<TransformStage> {
    let [dtype] = slots("transpose", args, &["dtype"])?;
    let convert_dtype = dtype.map(|v| keyword::<DType>("transpose", "dtype", v)).transpose()?;
    Ok(TransformStage { convert_dtype })
}

pub fn lower_kernel(k: &KernelExpr) -> LResult<KernelConfig> {
    let mut cfg = KernelConfig::new(k.op);
    for b in &k.bindings {
        apply_binding(&mut cfg, b)?;
    }
    cfg.epilogue = k.epilogue.iter().map(lower_epilogue).collect();
    Ok(cfg)
}

fn apply_binding(cfg: &mut KernelConfig, b: &Binding) -> LResult<()> {
    let name = b.name.as_str();
    let args = &b.args;
    match b.name {
        BindingName::Dtype => {
            let [i, a, o] = slots(name, args, &["input", "acc", "output"])?;
            let get = |v: Option<&Value>, key| v.map(|v| keyword::<DType>(name, key, v)).transpose();
            cfg.dtypes = DTypes {
                input: get(i, "input")?.unwrap_or(DEFAULT_DTYPE),
                acc: get(a, "acc")?.unwrap_or(DEFAULT_DTYPE),
                output: get(o, "output")?.unwrap_or(DEFAULT_DTYPE),
            };
        }
        BindingName::Layout => {
            let [a, bb, c] = slots(name, args, &["A", "B", "C"])?;
            let default = default_layout(cfg.op_kind);
            let get = |v: Option<&Value>, key| -> LResult<Layout> {
                let Some(v) = v else { return Ok(default) };
                let layout = keyword::<Layout>(name, key, v)?;
                check_layout(cfg.op_kind, key, layout)?;
                Ok(layout)
            };
            cfg.layouts = Layouts { a: get(a, "A")?, b: get(bb, "B")?, c: get(c, "C")? };
        }
        BindingName::Arch => {
            let [v] = required(name, args, &["arch"])?;
            cfg.arch = keyword(name, "arch", v)?;
        }
        BindingName::Alignment => {
            if let [Arg { key: None, value }] = args.as_slice() {
                let n = uint(name, "alignment", value)?;
                cfg.alignment = Alignment { a: n, b: n, c: n };
            } else {
                let [a, bb, c] = slots(name, args, &["A", "B", "C"])?;
                let get = |v: Option<&Value>, key| {
                    v.map(|v| uint(name, key, v)).transpose().map(|n| n.unwrap_or(DEFAULT_ALIGNMENT))
                };
                cfg.alignment = Alignment { a: get(a, "A")?, b: get(bb, "B")?, c: get(c, "C")? };
            }
        }
        BindingName::Stages => {
            let [v] = required(name, args, &["stages"])?;
            cfg.stages = positive(name, "stages", v)?;
        }
        BindingName::Tile => cfg.tile = Some(tile_shape(name, args)?),
        BindingName::ThreadblockShape => cfg.threadblock_shape = Some(tile_shape(name, args)?),
        BindingName::Cluster => {
            let [x, y, z] = slots(name, args, &["x", "y", "z"])?;
            let get = |v: Option<&Value>, key| v.map(|v| positive(name, key, v)).transpose().map(|n| n.unwrap_or(1));
            cfg.cluster = Some(ClusterShape { x: get(x, "x")?, y: get(y, "y")?, z: get(z, "z")? });
        }
        BindingName::Scheduler => {
            let [k, e] = slots(name, args, &["kernel", "epilogue"])?;
            cfg.scheduler = Some(Scheduler {
                kernel: k.map(|v| keyword(name, "kernel", v)).transpose()?.unwrap_or(KernelSchedule::Default),
                epilogue: e
                    .map(|v| keyword(name, "epilogue", v))
                    .transpose()?
                    .unwrap_or(EpilogueSchedule::Default),
            });
        }
        BindingName::Swizzle => {
            let [v] = required(name, args, &["swizzle"])?;
            cfg.swizzle = Some(uint(name, "swizzle", v)?);
        }
        BindingName::Iterator => {
            conv_only(cfg.op_kind, name)?;
            let [v] = required(name, args, &["algorithm"])?;
            cfg.iterator = Some(keyword(name, "algorithm", v)?);
        }
        BindingName::SplitK => {
            conv_only(cfg.op_kind, name)?;
            let [v] = required(name, args, &["slices"])?;
            cfg.split_k = Some(SplitK { slices: positive(name, "slices", v)? });
        }
        BindingName::OperandSwap => {
            let [v] = required(name, args, &["enabled"])?;
            match v {
                Value::Bool(b) => cfg.operand_swap = Some(*b),
                other => return Err(type_error(name, "enabled", "boolean", other)),
            }
        }
    }
    Ok(())
}

fn conv_only(op: OpKind, binding: &str) -> LResult<()> {
    if op.is_conv() {
        Ok(())
    } else {
        Err(LowerError::new(
            binding,
            format!("{binding} applies only to conv operators; remove it from this {op} program"),
        ))
    }
}

fn check_layout(op: OpKind, key: &str, layout: Layout) -> LResult<()> {
    let ok = if op.is_gemm_family() {
        matches!(layout, Layout::RowMajor | Layout::ColMajor)
    } else {
        layout == default_layout(op)
    };
    if ok {
        return Ok(());
    }
    let legal = if op.is_gemm_family() { "RowMajor or ColMajor".to_string() } else { default_layout(op).to_string() };
    Err(LowerError::new(
        "with_layout",
        format!("with_layout {key}={layout} is not a layout of {op}; use {legal}"),
    ))
}

fn tile_shape(binding: &str, args: &[Arg]) -> LResult<TileShape> {
    let [m, n, k] = required(binding, args, &["m", "n", "k"])?;
    Ok(TileShape { m: positive(binding, "m", m)?, n: positive(binding, "n", n)?, k: positive(binding, "k", k)? })
}

/// Matches positional args (in order) and keyed args onto `keys`.
fn slots<'a, const N: usize>(binding: &str, args: &'a [Arg], keys: &[&str; N]) -> LResult<[Option<&'a Value>; N]> {
    let mut out: [Option<&Value>; N] = [None; N];
    let mut seen_keyed = false;
    for (i, arg) in args.iter().enumerate() {
        let idx = match &arg.key {
            None => {
                if seen_keyed {
                    return Err(LowerError::new(binding, format!("{binding}: positional argument after keyed argument")));
                }
                if i >= N {
                    return Err(LowerError::new(
                        binding,
                        format!("{binding} takes at most {N} argument(s), got {}", args.len()),
                    ));
                }
                i
            }
            Some(k) => {
                seen_keyed = true;
                keys.iter().position(|key| key == k).ok_or_else(|| {
                    LowerError::new(binding, format!("{binding}: unknown key `{k}` (expected one of: {})", keys.join(", ")))
                })?
            }
        };
        if out[idx].is_some() {
            return Err(LowerError::new(binding, format!("{binding}: `{}` given twice", keys[idx])));
        }
        out[idx] = Some(&arg.value);
    }
    Ok(out)
}

fn required<'a, const N: usize>(binding: &str, args: &'a [Arg], keys: &[&str; N]) -> LResult<[&'a Value; N]> {
    let got = slots(binding, args, keys)?;
    let mut out = Vec::with_capacity(N);
    for (v, key) in got.into_iter().zip(keys) {
        out.push(v.ok_or_else(|| LowerError::new(binding, format!("{binding}: missing required argument `{key}`")))?);
    }
    Ok(out.try_into().unwrap_or_else(|_| unreachable!()))
}

fn type_error(binding: &str, key: &str, want: &str, got: &Value) -> LowerError {
    LowerError::new(binding, format!("{binding}: `{key}` expects {want}, got {} `{got}`", got.kind_name()))
}

fn keyword<T: FromStr<Err = String>>(binding: &str, key: &str, v: &Value) -> LResult<T> {
    match v {
        Value::Ident(s) => s.parse().map_err(|e: String| LowerError::new(binding, format!("{binding}: `{key}`: {e}"))),
        other => Err(type_error(binding, key, "an identifier", other)),
    }
}

fn uint(binding: &str, key: &str, v: &Value) -> LResult<u32> {
    match v {
        Value::Int(i) => u32::try_from(*i)
            .map_err(|_| LowerError::new(binding, format!("{binding}: `{key}` must be a non-negative integer below 2^32, got {i}"))),
        other => Err(type_error(binding, key, "an integer", other)),
    }
}

fn positive(binding: &str, key: &str, v: &Value) -> LResult<u32> {
    let n = uint(binding, key, v)?;
    if n == 0 {
        return Err(LowerError::new(binding, format!("{binding}: `{key}` must be at least 1, got 0")));
    }
    Ok(n)
}

/// Epilogue params keep their raw values; integral floats collapse to ints
/// so that `clip(min=0.0)` and `clip(min=0)` lower identically.
pub(crate) fn canonical_value(v: &Value) -> Value {
    match *v {
        Value::Float(x) if x.fract() == 0.0 && x.abs() < 9.007_199_254_740_992e15 => Value::Int(x as i64),
        ref other => other.clone(),
    }
}

fn lower_epilogue(e: &EpilogueOp) -> EpilogueNode {
    let mut params = BTreeMap::new();
    for arg in &e.args {
        let key = arg.key.clone().unwrap_or_default();
        params.insert(key, canonical_value(&arg.value));
    }
    EpilogueNode {
        name: e.name,
        params,
        custom_expr: e.custom_expr.clone(),
        custom_inputs: e.custom_inputs.as_ref().map(|v| v.iter().cloned().collect()),
    }
}
