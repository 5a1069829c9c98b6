//! Configuration IR back to DSL.
//!
//! Every field is spelled out, defaults included, so that lowering the
//! printed program reproduces the config exactly.

use super::types::*;
use crate::dsl::{self, Arg, Binding, BindingName, EpilogueOp, Expr, KernelExpr, PipelineExpr, Stage, Value};

pub fn to_expr(config: &Config) -> Expr {
    match config {
        Config::Kernel(k) => Expr::Kernel(kernel_expr(k)),
        Config::Pipeline(p) => {
            let mut stages: Vec<Stage> = p.pre_transforms.iter().map(transpose).collect();
            stages.push(Stage::Kernel(kernel_expr(&p.kernel)));
            stages.extend(p.post_transforms.iter().map(transpose));
            Expr::Pipeline(PipelineExpr { stages })
        }
    }
}

/// Pretty-printed DSL text for `config`.
pub fn unparse(config: &Config) -> String {
    dsl::print(&to_expr(config))
}

fn transpose(t: &TransformStage) -> Stage {
    Stage::Transpose(t.convert_dtype.map(|d| vec![kw("dtype", d.as_str())]).unwrap_or_default())
}

fn ident(s: &str) -> Value {
    Value::Ident(s.to_string())
}

fn kw(key: &str, s: &str) -> Arg {
    Arg::keyed(key, ident(s))
}

fn int(key: &str, n: u32) -> Arg {
    Arg::keyed(key, Value::Int(i64::from(n)))
}

fn kernel_expr(k: &KernelConfig) -> KernelExpr {
    let mut b = Vec::new();
    let mut push = |name, args| b.push(Binding { name, args });
    push(
        BindingName::Dtype,
        vec![kw("input", k.dtypes.input.as_str()), kw("acc", k.dtypes.acc.as_str()), kw("output", k.dtypes.output.as_str())],
    );
    push(
        BindingName::Layout,
        vec![kw("A", k.layouts.a.as_str()), kw("B", k.layouts.b.as_str()), kw("C", k.layouts.c.as_str())],
    );
    push(BindingName::Arch, vec![Arg::positional(ident(k.arch.as_str()))]);
    if let Some(t) = k.tile {
        push(BindingName::Tile, vec![int("m", t.m), int("n", t.n), int("k", t.k)]);
    }
    if let Some(t) = k.threadblock_shape {
        push(BindingName::ThreadblockShape, vec![int("m", t.m), int("n", t.n), int("k", t.k)]);
    }
    if let Some(c) = k.cluster {
        push(BindingName::Cluster, vec![int("x", c.x), int("y", c.y), int("z", c.z)]);
    }
    push(BindingName::Stages, vec![Arg::positional(Value::Int(i64::from(k.stages)))]);
    push(BindingName::Alignment, vec![int("A", k.alignment.a), int("B", k.alignment.b), int("C", k.alignment.c)]);
    if let Some(s) = k.scheduler {
        push(BindingName::Scheduler, vec![kw("kernel", s.kernel.as_str()), kw("epilogue", s.epilogue.as_str())]);
    }
    if let Some(s) = k.swizzle {
        push(BindingName::Swizzle, vec![Arg::positional(Value::Int(i64::from(s)))]);
    }
    if let Some(i) = k.iterator {
        push(BindingName::Iterator, vec![Arg::positional(ident(i.as_str()))]);
    }
    if let Some(s) = k.split_k {
        push(BindingName::SplitK, vec![int("slices", s.slices)]);
    }
    if let Some(swap) = k.operand_swap {
        push(BindingName::OperandSwap, vec![Arg::positional(Value::Bool(swap))]);
    }
    let epilogue = k
        .epilogue
        .iter()
        .map(|e| EpilogueOp {
            name: e.name,
            args: e.params.iter().map(|(key, v)| Arg::keyed(key.clone(), v.clone())).collect(),
            custom_expr: e.custom_expr.clone(),
            custom_inputs: e.custom_inputs.as_ref().map(|m| m.iter().map(|(a, b)| (a.clone(), b.clone())).collect()),
        })
        .collect();
    KernelExpr { op: k.op_kind, bindings: b, epilogue }
}
