use std::fmt::Write;

use super::ast::*;

/// Pretty-prints an expression in the fluent multi-line style.
/// `parse(print(e))` yields a tree equal to `e`.
pub fn print(expr: &Expr) -> String {
    let mut out = String::new();
    match expr {
        Expr::Kernel(k) => write_kernel(&mut out, k, ""),
        Expr::Pipeline(p) => {
            out.push_str("pipeline(\n");
            for (i, stage) in p.stages.iter().enumerate() {
                out.push_str("  ");
                match stage {
                    Stage::Transpose(args) => {
                        let _ = write!(out, "transpose({})", args_text(args));
                    }
                    Stage::Kernel(k) => write_kernel(&mut out, k, "  "),
                }
                if i + 1 < p.stages.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push(')');
        }
    }
    out
}

fn write_kernel(out: &mut String, k: &KernelExpr, indent: &str) {
    let _ = write!(out, "{}()", k.op);
    for b in &k.bindings {
        let _ = write!(out, "\n{indent}  .{}({})", b.name, args_text(&b.args));
    }
    if !k.epilogue.is_empty() {
        let _ = write!(out, "\n{indent}  ");
        for (i, e) in k.epilogue.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, ">> {}", epilogue_text(e));
        }
    }
}

pub(crate) fn args_text(args: &[Arg]) -> String {
    args.iter()
        .map(|a| match &a.key {
            Some(k) => format!("{k}={}", a.value),
            None => a.value.to_string(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn epilogue_text(e: &EpilogueOp) -> String {
    if e.name == EpilogueName::Custom {
        let expr = e.custom_expr.as_deref().unwrap_or_default();
        let mut s = format!("custom({}", quote(expr));
        if let Some(inputs) = e.custom_inputs.as_ref().filter(|i| !i.is_empty()) {
            let body = inputs.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join(", ");
            let _ = write!(s, ", inputs={{{body}}}");
        }
        s.push(')');
        s
    } else {
        format!("{}({})", e.name, args_text(&e.args))
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}
