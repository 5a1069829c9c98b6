use std::fmt::Write;

use super::gemm::{legacy_epilogue, legacy_shapes};
use super::tables::*;
use super::{chain_text, Backend, Param};
use crate::dsl::{EpilogueName, OpKind};
use crate::ir::KernelConfig;

#[derive(Clone, Copy, PartialEq, Eq)]
enum ConvOperator {
    Fprop,
    Dgrad,
    Wgrad,
}

impl ConvOperator {
    fn of(op: OpKind) -> Self {
        match op {
            OpKind::Conv2dDgrad | OpKind::Conv3dDgrad => ConvOperator::Dgrad,
            OpKind::Conv2dWgrad | OpKind::Conv3dWgrad => ConvOperator::Wgrad,
            _ => ConvOperator::Fprop,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            ConvOperator::Fprop => "cutlass::conv::Operator::kFprop",
            ConvOperator::Dgrad => "cutlass::conv::Operator::kDgrad",
            ConvOperator::Wgrad => "cutlass::conv::Operator::kWgrad",
        }
    }
}

/// Spatial axes as seen by the caller: conv1d has one, 2D ops two, 3D three.
fn axes(op: OpKind) -> &'static [&'static str] {
    if op == OpKind::Conv1d {
        &[""]
    } else if op.is_3d_conv() {
        &["d", "h", "w"]
    } else {
        &["h", "w"]
    }
}

fn param_name(base: &str, axis: &str) -> String {
    if axis.is_empty() {
        base.to_string()
    } else {
        format!("{base}_{axis}")
    }
}

pub(super) fn extra_params(op: OpKind) -> Vec<Param> {
    if op.is_gemm_family() {
        return Vec::new();
    }
    let mut v = Vec::new();
    for (base, default) in [("stride", "1"), ("pad", "0"), ("dilation", "1")] {
        for axis in axes(op) {
            v.push(Param { ty: "int64_t".into(), name: param_name(base, axis), default: default.into() });
        }
    }
    if op == OpKind::GroupedConv {
        v.push(Param { ty: "int64_t".into(), name: "groups".into(), default: "1".into() });
    }
    v
}

fn conv_aliases(k: &KernelConfig, out: &mut String) {
    let d = k.dtypes;
    let _ = writeln!(out, "using ElementA = {};", element(d.input));
    let _ = writeln!(out, "using ElementB = {};", element(d.input));
    let _ = writeln!(out, "using ElementC = {};", element(d.output));
    let _ = writeln!(out, "using ElementD = {};", element(d.output));
    let _ = writeln!(out, "using ElementAccumulator = {};", compute_element(d.acc));
    let _ = writeln!(out, "using ElementCompute = {};", compute_element(d.acc));
    let _ = writeln!(out, "using LayoutA = {};", layout(k.layouts.a));
    let _ = writeln!(out, "using LayoutB = {};", layout(k.layouts.b));
    let _ = writeln!(out, "using LayoutC = {};", layout(k.layouts.c));
    let _ = writeln!(out, "constexpr int AlignmentA = {};", k.alignment.a);
    let _ = writeln!(out, "constexpr int AlignmentB = {};", k.alignment.b);
    let _ = writeln!(out, "constexpr int AlignmentC = {};", k.alignment.c);
    let _ = writeln!(out, "constexpr int Stages = {};", k.stages);
}

pub(super) fn legacy(k: &KernelConfig, out: &mut String) {
    if k.op_kind == OpKind::Conv1d {
        out.push_str("// conv1d runs as conv2d with H = 1 and R = 1.\n");
    }
    conv_aliases(k, out);
    legacy_shapes(k, out);
    let iterator = k.iterator.unwrap_or(DEFAULT_ITERATOR);
    let _ = writeln!(out, "constexpr cutlass::conv::IteratorAlgorithm kIteratorAlgorithm = {};", iterator_algorithm(iterator));
    let slices = k.split_k.map(|s| s.slices).unwrap_or(1);
    let mode = if slices > 1 { "kParallel" } else { "kSerial" };
    let _ = writeln!(out, "constexpr cutlass::conv::SplitKMode kSplitKMode = cutlass::conv::SplitKMode::{mode};");
    let _ = writeln!(out, "constexpr int kSplitKSlices = {slices};");
    let _ = writeln!(out, "constexpr cutlass::conv::Operator kConvOperator = {};\n", ConvOperator::of(k.op_kind).tag());
    legacy_epilogue(k, out);
    let template = conv_kernel_template(k.op_kind);
    let group_mode = if k.op_kind == OpKind::GroupedConv { ",\n    cutlass::conv::GroupMode::kMultipleGroup" } else { "" };
    let _ = writeln!(
        out,
        "using ConvKernel = typename {template}<\n    \
         ElementA, LayoutA, ElementB, LayoutB, ElementC, LayoutC,\n    \
         ElementAccumulator, OperatorClass, ArchTag,\n    \
         ThreadblockShape, WarpShape, InstructionShape,\n    \
         EpilogueOutputOp, ThreadblockSwizzle, Stages,\n    \
         cutlass::arch::OpMultiplyAdd, kIteratorAlgorithm{group_mode},\n    \
         cutlass::conv::StrideSupport::kStrided, AlignmentA, AlignmentB>::Kernel;"
    );
    let _ = writeln!(out, "using DeviceKernel = {CONV_DEVICE}<ConvKernel>;\n");
}

pub(super) fn cute_depthwise(k: &KernelConfig, out: &mut String) {
    out.push_str("// CuTe depthwise backend: stride <= 2, dilation 1, relu-only epilogue.\n");
    conv_aliases(k, out);
    let _ = writeln!(out, "using ArchTag = {};\n", arch_tag(k.arch));
    let _ = writeln!(out, "// Epilogue chain (fused, applied in order): {}", chain_text(&k.epilogue));
    let activation = if k.epilogue.iter().any(|e| e.name == EpilogueName::Relu) {
        "cutlass::epilogue::thread::ReLu<ElementCompute>"
    } else {
        "cutlass::epilogue::thread::Identity<ElementCompute>"
    };
    let _ = writeln!(out, "using Activation = {activation};");
    let _ = writeln!(
        out,
        "using DepthwiseKernel = {CUTE_DEPTHWISE_KERNEL}<\n    \
         ArchTag, ElementA, ElementB, ElementC, ElementAccumulator, ElementCompute,\n    \
         Stages, AlignmentA, AlignmentC, Activation>;"
    );
    let _ = writeln!(out, "using DeviceKernel = {CUTE_DEPTHWISE_DEVICE}<DepthwiseKernel>;\n");
}

/// Names of the input, filter and output spatial extents per axis.
fn dims(axis: &str) -> (&'static str, &'static str, &'static str) {
    match axis {
        "d" => ("Di", "T", "Z"),
        "h" => ("Hi", "R", "P"),
        _ => ("Wi", "S", "Q"),
    }
}

pub(super) fn entry_body(k: &KernelConfig, backend: Backend) -> String {
    let op = k.op_kind;
    let oper = ConvOperator::of(op);
    let ax = axes(op);
    let rank = ax.len() + 2;
    let mut b = String::new();
    b.push_str("  TORCH_CHECK(A.is_cuda() && B.is_cuda(), \"A and B must be CUDA tensors\");\n");
    let _ = writeln!(b, "  TORCH_CHECK(A.dim() == {rank} && B.dim() == {rank}, \"A and B must be {rank}-d channels-last tensors\");");
    let _ = writeln!(
        b,
        "  TORCH_CHECK(A.scalar_type() == {0} && B.scalar_type() == {0}, \"A and B must be {1}\");",
        torch_dtype(k.dtypes.input),
        k.dtypes.input
    );
    b.push_str("  TORCH_CHECK(A.is_contiguous() && B.is_contiguous(), \"A and B must be contiguous channels-last tensors\");\n");
    if backend == Backend::CuteDepthwise {
        let dil: Vec<String> = ax.iter().map(|a| format!("{} == 1", param_name("dilation", a))).collect();
        let st: Vec<String> = ax.iter().map(|a| format!("{} <= 2", param_name("stride", a))).collect();
        let _ = writeln!(b, "  TORCH_CHECK({}, \"the SM90 depthwise backend supports dilation 1 only\");", dil.join(" && "));
        let _ = writeln!(b, "  TORCH_CHECK({}, \"the SM90 depthwise backend supports stride 1 or 2 only\");", st.join(" && "));
    }
    let groups = match op {
        OpKind::GroupedConv => "groups",
        OpKind::DepthwiseConv => "Cin",
        _ => "1",
    };
    let last = rank - 1;
    // A: activation (fprop) or output gradient (dgrad/wgrad).
    let _ = writeln!(b, "  const int64_t N = A.size(0);");
    match oper {
        ConvOperator::Fprop => {
            for (i, a) in ax.iter().enumerate() {
                let (inp, filt, _) = dims(a);
                let _ = writeln!(b, "  const int64_t {inp} = A.size({});", i + 1);
                let _ = writeln!(b, "  const int64_t {filt} = B.size({});", i + 1);
            }
            let _ = writeln!(b, "  const int64_t Cin = A.size({last});");
            if op == OpKind::DepthwiseConv {
                b.push_str("  const int64_t K = Cin;\n");
                b.push_str("  TORCH_CHECK(B.size(0) == Cin, \"depthwise filters need one filter per channel\");\n");
                let _ = writeln!(b, "  TORCH_CHECK(B.size({last}) == 1, \"depthwise filters have a single input channel\");");
            } else {
                b.push_str("  const int64_t K = B.size(0);\n");
                let _ = writeln!(b, "  TORCH_CHECK(B.size({last}) * {groups} == Cin, \"filter channels do not match the input\");");
            }
            for a in ax {
                let (inp, filt, outp) = dims(a);
                let _ = writeln!(
                    b,
                    "  const int64_t {outp} = ({inp} + 2 * {pad} - {dil} * ({filt} - 1) - 1) / {st} + 1;",
                    pad = param_name("pad", a),
                    dil = param_name("dilation", a),
                    st = param_name("stride", a)
                );
            }
        }
        ConvOperator::Dgrad => {
            for (i, a) in ax.iter().enumerate() {
                let (inp, filt, outp) = dims(a);
                let _ = writeln!(b, "  const int64_t {outp} = A.size({});", i + 1);
                let _ = writeln!(b, "  const int64_t {filt} = B.size({});", i + 1);
                let _ = writeln!(
                    b,
                    "  const int64_t {inp} = ({outp} - 1) * {st} - 2 * {pad} + {dil} * ({filt} - 1) + 1;",
                    pad = param_name("pad", a),
                    dil = param_name("dilation", a),
                    st = param_name("stride", a)
                );
            }
            let _ = writeln!(b, "  const int64_t K = A.size({last});");
            let _ = writeln!(b, "  const int64_t Cin = B.size({last});");
            b.push_str("  TORCH_CHECK(B.size(0) == K, \"filter count does not match the gradient channels\");\n");
        }
        ConvOperator::Wgrad => {
            for (i, a) in ax.iter().enumerate() {
                let (inp, filt, outp) = dims(a);
                let _ = writeln!(b, "  const int64_t {outp} = A.size({});", i + 1);
                let _ = writeln!(b, "  const int64_t {inp} = B.size({});", i + 1);
                let _ = writeln!(
                    b,
                    "  const int64_t {filt} = ({inp} + 2 * {pad} - ({outp} - 1) * {st} - 1) / {dil} + 1;",
                    pad = param_name("pad", a),
                    dil = param_name("dilation", a),
                    st = param_name("stride", a)
                );
            }
            let _ = writeln!(b, "  const int64_t K = A.size({last});");
            let _ = writeln!(b, "  const int64_t Cin = B.size({last});");
            b.push_str("  TORCH_CHECK(B.size(0) == N, \"activation batch does not match the gradient batch\");\n");
        }
    }
    let shape = |names: Vec<String>| format!("{{{}}}", names.join(", "));
    let spatial = |pick: fn(&str) -> &'static str| ax.iter().map(|a| pick(a).to_string()).collect::<Vec<_>>();
    let out_shape = match oper {
        ConvOperator::Fprop => {
            let mut v = vec!["N".to_string()];
            v.extend(spatial(|a| dims(a).2));
            v.push("K".into());
            v
        }
        ConvOperator::Dgrad => {
            let mut v = vec!["N".to_string()];
            v.extend(spatial(|a| dims(a).0));
            v.push("Cin".into());
            v
        }
        ConvOperator::Wgrad => {
            let mut v = vec!["K".to_string()];
            v.extend(spatial(|a| dims(a).1));
            v.push(format!("Cin / {groups}"));
            v
        }
    };
    let _ = writeln!(b, "  at::Tensor D = at::empty({}, A.options().dtype({}));", shape(out_shape), torch_dtype(k.dtypes.output));

    let bias_first = k.epilogue.first().is_some_and(|e| e.name == EpilogueName::Bias) && backend == Backend::LegacyTemplate;
    if bias_first {
        b.push_str("  TORCH_CHECK(!(C.has_value() && bias.has_value()), \"pass either C or bias, not both\");\n");
        b.push_str("  auto* ptr_C = reinterpret_cast<ElementC*>(bias.has_value() ? bias->data_ptr() : (C.has_value() ? C->data_ptr() : nullptr));\n");
        b.push_str("  if (bias.has_value()) { beta = 1.0; } else if (!C.has_value()) { beta = 0.0; }\n");
    } else {
        b.push_str("  auto* ptr_C = reinterpret_cast<ElementC*>(C.has_value() ? C->data_ptr() : nullptr);\n");
        b.push_str("  if (!C.has_value()) { beta = 0.0; }\n");
    }
    b.push_str("  auto* ptr_A = reinterpret_cast<ElementA*>(A.data_ptr());\n");
    b.push_str("  auto* ptr_B = reinterpret_cast<ElementB*>(B.data_ptr());\n");
    b.push_str("  auto* ptr_D = reinterpret_cast<ElementD*>(D.data_ptr());\n");

    // Problem size, in the activation/filter/output convention of fprop.
    let v = |name: &str, axis: &str| if axis.is_empty() && matches!(name, "Hi" | "R" | "P") { "1".to_string() } else { name.to_string() };
    let p = |base: &str, axis: &str, unit: &str| {
        if ax == [""] && axis == "h" {
            unit.to_string()
        } else if ax == [""] {
            base.to_string()
        } else {
            param_name(base, axis)
        }
    };
    let full: &[&str] = if op.is_3d_conv() { &["d", "h", "w"] } else { &["h", "w"] };
    let ext = |pick: fn(&str) -> &'static str| -> Vec<String> {
        full.iter().map(|a| if ax == [""] { v(pick(a), "") } else { pick(a).to_string() }).collect()
    };
    let mut act = vec!["N".to_string()];
    act.extend(ext(|a| dims(a).0));
    act.push("Cin".into());
    let mut filt = vec!["K".to_string()];
    filt.extend(ext(|a| dims(a).1));
    filt.push(format!("Cin / {groups}"));
    let mut outp = vec!["N".to_string()];
    outp.extend(ext(|a| dims(a).2));
    outp.push("K".into());
    let per_axis = |base: &str, unit: &str| -> Vec<String> { full.iter().map(|a| p(base, a, unit)).collect() };
    let int = |xs: Vec<String>| xs.iter().map(|x| format!("int({x})")).collect::<Vec<_>>().join(", ");
    let pads: Vec<String> = per_axis("pad", "0").into_iter().flat_map(|x| [x.clone(), x]).collect();
    if op.is_3d_conv() {
        let _ = writeln!(
            b,
            "  cutlass::conv::Conv3dProblemSize problem_size(\n      \
             cutlass::Tensor5DCoord({}),\n      \
             cutlass::Tensor5DCoord({}),\n      \
             cutlass::Coord<3>({{{}}}),\n      \
             cutlass::Coord<3>({{{}}}),\n      \
             cutlass::Coord<3>({{{}}}),\n      \
             cutlass::Tensor5DCoord({}),\n      \
             cutlass::conv::Mode::kCrossCorrelation, kSplitKSlices);",
            int(act),
            int(filt),
            int(per_axis("pad", "0")),
            int(per_axis("stride", "1")),
            int(per_axis("dilation", "1")),
            int(outp)
        );
    } else {
        let split = if backend == Backend::CuteDepthwise { "1" } else { "kSplitKSlices" };
        let _ = writeln!(
            b,
            "  cutlass::conv::Conv2dProblemSize problem_size(\n      \
             cutlass::Tensor4DCoord({}),\n      \
             cutlass::Tensor4DCoord({}),\n      \
             cutlass::Tensor4DCoord({}),\n      \
             cutlass::MatrixCoord({}),\n      \
             cutlass::MatrixCoord({}),\n      \
             cutlass::Tensor4DCoord({}),\n      \
             cutlass::conv::Mode::kCrossCorrelation, {split}, int({groups}));",
            int(act),
            int(filt),
            int(pads),
            int(per_axis("stride", "1")),
            int(per_axis("dilation", "1")),
            int(outp)
        );
    }
    b.push_str("  // build arguments\n");
    if backend == Backend::CuteDepthwise {
        b.push_str(
            "  typename DeviceKernel::Arguments arguments{\n      \
             problem_size, ptr_A, ptr_B, ptr_C, ptr_D,\n      \
             {static_cast<ElementCompute>(alpha), static_cast<ElementCompute>(beta)}};\n",
        );
    } else {
        let c_layout = if bias_first {
            "bias.has_value() ? LayoutC(LayoutC::Stride(0)) : LayoutC::packed(cutlass::conv::implicit_gemm_tensor_c_extent(kConvOperator, problem_size))"
        } else {
            "LayoutC::packed(cutlass::conv::implicit_gemm_tensor_c_extent(kConvOperator, problem_size))"
        };
        let _ = writeln!(
            b,
            "  typename DeviceKernel::Arguments arguments{{\n      \
             problem_size,\n      \
             {{ptr_A, LayoutA::packed(cutlass::conv::implicit_gemm_tensor_a_extent(kConvOperator, problem_size))}},\n      \
             {{ptr_B, LayoutB::packed(cutlass::conv::implicit_gemm_tensor_b_extent(kConvOperator, problem_size))}},\n      \
             {{ptr_C, {c_layout}}},\n      \
             {{ptr_D, LayoutC::packed(cutlass::conv::implicit_gemm_tensor_c_extent(kConvOperator, problem_size))}},\n      \
             {{static_cast<ElementCompute>(alpha), static_cast<ElementCompute>(beta)}},\n      \
             kSplitKMode}};"
        );
    }
    b.push_str(
        "  // allocate workspace and run on the current PyTorch CUDA stream\n  \
         DeviceKernel op;\n  \
         const size_t workspace_size = op.get_workspace_size(arguments);\n  \
         at::Tensor workspace = at::empty({static_cast<int64_t>(workspace_size)}, A.options().dtype(at::kByte));\n  \
         cudaStream_t stream = at::cuda::getCurrentCUDAStream();\n  \
         TORCH_CHECK(op.can_implement(arguments) == cutlass::Status::kSuccess, \"kernel cannot implement this problem\");\n  \
         TORCH_CHECK(op.initialize(arguments, workspace.data_ptr(), stream) == cutlass::Status::kSuccess, \"kernel initialization failed\");\n  \
         TORCH_CHECK(op(stream) == cutlass::Status::kSuccess, \"kernel launch failed\");\n",
    );
    b.push_str("  return D;\n");
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extra_params_per_family() {
        let names = |op| extra_params(op).into_iter().map(|p| p.name).collect::<Vec<_>>();
        assert_eq!(names(OpKind::Conv1d), ["stride", "pad", "dilation"]);
        assert_eq!(names(OpKind::Conv2d).len(), 6);
        assert_eq!(names(OpKind::Conv3dWgrad).len(), 9);
        assert_eq!(names(OpKind::GroupedConv).last().unwrap(), "groups");
        assert!(names(OpKind::Gemm).is_empty());
    }
}
