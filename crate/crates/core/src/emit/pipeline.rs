//! Multi-stage drivers: pre-transforms, the kernel stage, post-transforms.

use std::fmt::Write;

use super::tables::torch_dtype;
use super::{aux_params, Signature};
use crate::ir::{PipelineConfig, TransformStage};

/// Function name of the transform at `index` in the source stage list.
pub fn stage_name(index: usize) -> String {
    format!("transpose_stage_{index}")
}

/// Swaps the memory order of the last two axes while keeping the logical
/// shape, optionally converting dtype.
fn convert(var: &str, t: &TransformStage) -> String {
    let mut s = format!("{var}.transpose(-2, -1).contiguous().transpose(-2, -1)");
    if let Some(dt) = t.convert_dtype {
        let _ = write!(s, ".to({})", torch_dtype(dt));
    }
    s
}

fn describe(t: &TransformStage) -> String {
    match t.convert_dtype {
        Some(dt) => format!("transpose + convert to {dt}"),
        None => "transpose".to_string(),
    }
}

pub(super) fn emit_driver(p: &PipelineConfig, out: &mut String) -> Vec<String> {
    let sig = Signature::for_kernel(&p.kernel, &aux_params(&p.kernel.epilogue));
    let grouped = sig.tensor != "at::Tensor";
    let tensor = &sig.tensor;
    let mut names = Vec::new();
    out.push('\n');
    let kernel_index = p.pre_transforms.len();

    for (i, t) in p.pre_transforms.iter().enumerate() {
        let name = stage_name(i);
        let _ = writeln!(out, "// stage {i}: {} of A and B", describe(t));
        let _ = writeln!(out, "inline std::tuple<{tensor}, {tensor}> {name}(const {tensor}& A, const {tensor}& B) {{");
        if grouped {
            let _ = writeln!(out, "  {tensor} A_out, B_out;");
            let _ = writeln!(out, "  for (const auto& a : A) A_out.push_back({});", convert("a", t));
            let _ = writeln!(out, "  for (const auto& b : B) B_out.push_back({});", convert("b", t));
            out.push_str("  return {A_out, B_out};\n");
        } else {
            let _ = writeln!(out, "  return {{{}, {}}};", convert("A", t), convert("B", t));
        }
        out.push_str("}\n\n");
        names.push(name);
    }
    for (j, t) in p.post_transforms.iter().enumerate() {
        let idx = kernel_index + 1 + j;
        let name = stage_name(idx);
        let _ = writeln!(out, "// stage {idx}: {} of D", describe(t));
        let _ = writeln!(out, "inline {tensor} {name}(const {tensor}& D) {{");
        if grouped {
            let _ = writeln!(out, "  {tensor} D_out;");
            let _ = writeln!(out, "  for (const auto& d : D) D_out.push_back({});", convert("d", t));
            out.push_str("  return D_out;\n");
        } else {
            let _ = writeln!(out, "  return {};", convert("D", t));
        }
        out.push_str("}\n\n");
        names.push(name);
    }

    let mut order: Vec<String> = (0..kernel_index).map(stage_name).collect();
    order.push("main_kernel_ex".into());
    order.extend((0..p.post_transforms.len()).map(|j| stage_name(kernel_index + 1 + j)));
    let _ = writeln!(out, "// Driver: {}", order.join(" -> "));
    let mut body = String::new();
    let (mut a, mut b) = ("A".to_string(), "B".to_string());
    for i in 0..kernel_index {
        let _ = writeln!(body, "  auto [A{i}, B{i}] = {}({a}, {b});", stage_name(i));
        a = format!("A{i}");
        b = format!("B{i}");
    }
    let mut args = vec![a, b, "C".into(), "alpha".into(), "beta".into()];
    args.extend(sig.extra_names());
    let _ = writeln!(body, "  {tensor} D = main_kernel_ex({});", args.join(", "));
    for j in 0..p.post_transforms.len() {
        let _ = writeln!(body, "  D = {}(D);", stage_name(kernel_index + 1 + j));
    }
    body.push_str("  return D;\n");
    out.push_str(&sig.definition("kernel_kernel_ex", &body));
    out.push('\n');
    out.push_str(&sig.delegate("kernel_kernel", "kernel_kernel_ex"));
    names.push("kernel_kernel".into());
    names.push("kernel_kernel_ex".into());
    names
}
