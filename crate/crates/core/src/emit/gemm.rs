use std::fmt::Write;

use super::tables::*;
use super::{chain_text, evt, AuxParam, Backend};
use crate::dsl::{EpilogueName, OpKind};
use crate::ir::{EpilogueSchedule, KernelConfig, KernelSchedule, Layout};

fn element_aliases(k: &KernelConfig, out: &mut String) {
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
    let _ = writeln!(out, "using LayoutD = LayoutC;");
    let _ = writeln!(out, "constexpr int AlignmentA = {};", k.alignment.a);
    let _ = writeln!(out, "constexpr int AlignmentB = {};", k.alignment.b);
    let _ = writeln!(out, "constexpr int AlignmentC = {};", k.alignment.c);
    let _ = writeln!(out, "constexpr int AlignmentD = AlignmentC;");
    let _ = writeln!(out, "constexpr int Stages = {};", k.stages);
}

fn cute_shape(dims: [u32; 3]) -> String {
    format!("cute::Shape<cute::_{}, cute::_{}, cute::_{}>", dims[0], dims[1], dims[2])
}

pub(super) fn collective(k: &KernelConfig, aux: &[AuxParam], out: &mut String) {
    let grouped = k.op_kind == OpKind::GroupedGemm;
    let swap = k.operand_swap == Some(true);
    element_aliases(k, out);
    let tb = k.threadblock_shape.map(|t| [t.m, t.n, t.k]).unwrap_or(DEFAULT_SM90_TILE);
    let cluster = k.cluster.map(|c| [c.x, c.y, c.z]).unwrap_or([1, 1, 1]);
    let sched = k.scheduler.map(|s| (s.kernel, s.epilogue)).unwrap_or((KernelSchedule::Default, EpilogueSchedule::Default));
    let _ = writeln!(out, "using ArchTag = {};", arch_tag(k.arch));
    let _ = writeln!(out, "using OperatorClass = {};", op_class(k.arch, k.dtypes.input));
    let _ = writeln!(out, "using TileShape = {};", cute_shape(tb));
    let _ = writeln!(out, "using ClusterShape = {};", cute_shape(cluster));
    let _ = writeln!(out, "using KernelSchedule = {};", kernel_schedule(sched.0, grouped));
    let _ = writeln!(out, "using EpilogueSchedule = {};", epilogue_schedule(sched.1, grouped));
    out.push('\n');

    evt::custom_functors(&k.epilogue, out);
    let _ = writeln!(out, "// Epilogue chain (fused, applied in order): {}", chain_text(&k.epilogue));
    out.push_str("using FusionOperation =\n");
    evt::build(&k.epilogue, aux).render_type(1, out);
    out.push_str(";\n\n");

    let (pc, pd) = if grouped { ("LayoutC*", "LayoutD*") } else { ("LayoutC", "LayoutD") };
    let _ = writeln!(
        out,
        "using CollectiveEpilogue = typename {EPILOGUE_BUILDER}<\n    \
         ArchTag, OperatorClass, TileShape, ClusterShape,\n    \
         cutlass::epilogue::collective::EpilogueTileAuto,\n    \
         ElementAccumulator, ElementCompute,\n    \
         ElementC, {pc}, AlignmentC,\n    \
         ElementD, {pd}, AlignmentD,\n    \
         EpilogueSchedule, FusionOperation>::CollectiveOp;\n"
    );
    let (first, second) = if swap {
        let _ = writeln!(out, "// Operand swap: the mainloop computes D^T = B^T * A^T, which requires M == N.");
        let _ = writeln!(out, "using LayoutAT = {};", layout(transposed(k.layouts.a)));
        let _ = writeln!(out, "using LayoutBT = {};", layout(transposed(k.layouts.b)));
        (("ElementB", "LayoutBT", "AlignmentB"), ("ElementA", "LayoutAT", "AlignmentA"))
    } else {
        (("ElementA", "LayoutA", "AlignmentA"), ("ElementB", "LayoutB", "AlignmentB"))
    };
    let ptr = if grouped { "*" } else { "" };
    let _ = writeln!(
        out,
        "using CollectiveMainloop = typename {MAINLOOP_BUILDER}<\n    \
         ArchTag, OperatorClass,\n    \
         {}, {}{ptr}, {},\n    \
         {}, {}{ptr}, {},\n    \
         ElementAccumulator, TileShape, ClusterShape,\n    \
         cutlass::gemm::collective::StageCount<Stages>,\n    \
         KernelSchedule>::CollectiveOp;\n",
        first.0, first.1, first.2, second.0, second.1, second.2
    );
    let problem = if grouped {
        "cutlass::gemm::GroupProblemShape<cute::Shape<int, int, int>>"
    } else {
        "cute::Shape<int, int, int, int>"
    };
    let _ = writeln!(out, "using ProblemShape = {problem};");
    let _ = writeln!(out, "using GemmKernel = {GEMM_KERNEL_3X}<ProblemShape, CollectiveMainloop, CollectiveEpilogue>;");
    let _ = writeln!(out, "using DeviceKernel = {GEMM_ADAPTER}<GemmKernel>;\n");
}

/// Warp tile for a 2x2 warp arrangement.
fn warp_shape(tile: [u32; 3]) -> [u32; 3] {
    [(tile[0] / 2).max(16), (tile[1] / 2).max(8), tile[2]]
}

pub(super) fn legacy_shapes(k: &KernelConfig, out: &mut String) {
    let tile = k.tile.or(k.threadblock_shape).map(|t| [t.m, t.n, t.k]).unwrap_or(DEFAULT_LEGACY_TILE);
    let warp = warp_shape(tile);
    let inst = instruction_shape(k.arch, k.dtypes.input);
    let gemm_shape = |s: [u32; 3]| format!("cutlass::gemm::GemmShape<{}, {}, {}>", s[0], s[1], s[2]);
    let _ = writeln!(out, "using ArchTag = {};", legacy_arch_tag(k.arch));
    let _ = writeln!(out, "using OperatorClass = {};", op_class(k.arch, k.dtypes.input));
    let _ = writeln!(out, "using ThreadblockShape = {};", gemm_shape(tile));
    let _ = writeln!(out, "using WarpShape = {};", gemm_shape(warp));
    let _ = writeln!(out, "using InstructionShape = {};", gemm_shape(inst));
    let _ = writeln!(out, "using ThreadblockSwizzle = {};", gemm_swizzle(k.swizzle.unwrap_or(1)));
}

/// Emits `EpilogueOutputOp`, one linear-combination clause covering the
/// whole chain. A leading bias rides in through the source operand.
pub(super) fn legacy_epilogue(k: &KernelConfig, out: &mut String) {
    let chain = &k.epilogue;
    let steps: Vec<_> = chain.iter().filter(|e| e.name != EpilogueName::Bias).collect();
    let _ = writeln!(out, "// Epilogue chain (linear combination, applied in order): {}", chain_text(chain));
    if chain.first().is_some_and(|e| e.name == EpilogueName::Bias) {
        out.push_str("// bias enters as the source operand C with a zero row stride and beta = 1.\n");
    }
    let direct = match steps.as_slice() {
        [] => legacy_linear_combination(None),
        [one] if one.params.is_empty() => legacy_linear_combination(Some(one.name)),
        _ => None,
    };
    let op = match direct {
        Some(op) => format!("{op}<\n    ElementC, AlignmentC, ElementAccumulator, ElementCompute>"),
        None => {
            out.push_str("template <class T>\nstruct EpilogueChain {\n  static const bool kIsHeavy = true;\n");
            out.push_str("  CUTLASS_HOST_DEVICE T operator()(T x) const {\n");
            for node in &steps {
                let p = |key: &str, default: &str| super::cpp_param(node, key, default);
                let _ = writeln!(out, "    x = {};  // {}", legacy_step(node.name, &p), node.name);
            }
            out.push_str("    return x;\n  }\n};\n");
            format!("{LEGACY_GENERIC}<\n    EpilogueChain, ElementC, AlignmentC, ElementAccumulator, ElementCompute>")
        }
    };
    let _ = writeln!(out, "using EpilogueOutputOp = {op};\n");
}

pub(super) fn legacy(k: &KernelConfig, out: &mut String) {
    element_aliases(k, out);
    legacy_shapes(k, out);
    out.push('\n');
    legacy_epilogue(k, out);
    if k.op_kind == OpKind::GroupedGemm {
        let _ = writeln!(
            out,
            "using GemmKernel = typename {DEFAULT_GEMM_GROUPED}<\n    \
             ElementA, LayoutA, cutlass::ComplexTransform::kNone, AlignmentA,\n    \
             ElementB, LayoutB, cutlass::ComplexTransform::kNone, AlignmentB,\n    \
             ElementC, LayoutC, ElementAccumulator, OperatorClass, ArchTag,\n    \
             ThreadblockShape, WarpShape, InstructionShape, EpilogueOutputOp,\n    \
             ThreadblockSwizzle, Stages>::GemmKernel;"
        );
        let _ = writeln!(out, "using DeviceKernel = {GEMM_GROUPED_LEGACY}<GemmKernel>;\n");
    } else {
        let _ = writeln!(
            out,
            "using DeviceKernel = {GEMM_UNIVERSAL_LEGACY}<\n    \
             ElementA, LayoutA, ElementB, LayoutB, ElementC, LayoutC,\n    \
             ElementAccumulator, OperatorClass, ArchTag,\n    \
             ThreadblockShape, WarpShape, InstructionShape,\n    \
             EpilogueOutputOp, ThreadblockSwizzle, Stages,\n    \
             AlignmentA, AlignmentB>;\n"
        );
    }
}

fn layout_check(var: &str, l: Layout) -> String {
    match l {
        Layout::ColMajor => format!("  TORCH_CHECK({var}.t().is_contiguous(), \"{var} must be column-major\");\n"),
        _ => format!("  TORCH_CHECK({var}.is_contiguous(), \"{var} must be row-major and contiguous\");\n"),
    }
}

fn leading_dim(l: Layout, rows: &str, cols: &str) -> String {
    match l {
        Layout::ColMajor => rows.to_string(),
        _ => cols.to_string(),
    }
}

/// Body of the extended GEMM entry point: shape checks, stride packing,
/// argument building, workspace allocation and launch on the current stream.
pub(super) fn entry_body(k: &KernelConfig, aux: &[AuxParam], backend: Backend) -> String {
    if k.op_kind == OpKind::GroupedGemm {
        return grouped_body(k, aux, backend);
    }
    let mut b = String::new();
    b.push_str("  TORCH_CHECK(A.is_cuda() && B.is_cuda(), \"A and B must be CUDA tensors\");\n");
    b.push_str("  TORCH_CHECK(A.dim() == 2 && B.dim() == 2, \"A and B must be matrices\");\n");
    b.push_str("  const int M = static_cast<int>(A.size(0));\n");
    b.push_str("  const int K = static_cast<int>(A.size(1));\n");
    b.push_str("  const int N = static_cast<int>(B.size(1));\n");
    b.push_str("  TORCH_CHECK(B.size(0) == K, \"inner dimensions of A and B differ\");\n");
    if k.operand_swap == Some(true) {
        b.push_str("  TORCH_CHECK(M == N, \"with_operand_swap(true) requires M == N\");\n");
    }
    let _ = writeln!(
        b,
        "  TORCH_CHECK(A.scalar_type() == {0} && B.scalar_type() == {0}, \"A and B must be {1}\");",
        torch_dtype(k.dtypes.input),
        k.dtypes.input
    );
    b.push_str(&layout_check("A", k.layouts.a));
    b.push_str(&layout_check("B", k.layouts.b));
    let _ = writeln!(b, "  at::Tensor D = at::empty({{M, N}}, A.options().dtype({}));", torch_dtype(k.dtypes.output));
    b.push_str(&aux_pointers(aux, "ElementCompute"));
    b.push_str("  auto* ptr_A = reinterpret_cast<ElementA const*>(A.data_ptr());\n");
    b.push_str("  auto* ptr_B = reinterpret_cast<ElementB const*>(B.data_ptr());\n");
    b.push_str("  auto* ptr_D = reinterpret_cast<ElementD*>(D.data_ptr());\n");
    let bias_first = backend == Backend::LegacyTemplate && k.epilogue.first().is_some_and(|e| e.name == EpilogueName::Bias);
    if bias_first {
        let bias = &aux[0].name;
        let _ = writeln!(b, "  TORCH_CHECK(!(C.has_value() && {bias}.has_value()), \"pass either C or {bias}, not both\");");
        let _ = writeln!(
            b,
            "  auto* ptr_C = reinterpret_cast<ElementC const*>({bias}.has_value() ? {bias}->data_ptr() : (C.has_value() ? C->data_ptr() : nullptr));"
        );
        let _ = writeln!(b, "  if ({bias}.has_value()) {{ beta = 1.0; }} else if (!C.has_value()) {{ beta = 0.0; }}");
    } else {
        b.push_str("  auto* ptr_C = reinterpret_cast<ElementC const*>(C.has_value() ? C->data_ptr() : nullptr);\n");
        b.push_str("  if (!C.has_value()) { beta = 0.0; }\n");
    }
    b.push_str("  // pack strides\n");
    match backend {
        Backend::CollectiveBuilder => {
            b.push_str("  using StrideA = typename GemmKernel::StrideA;\n");
            b.push_str("  using StrideB = typename GemmKernel::StrideB;\n");
            b.push_str("  using StrideC = typename GemmKernel::StrideC;\n");
            b.push_str("  using StrideD = typename GemmKernel::StrideD;\n");
            let (ma, mb) = if k.operand_swap == Some(true) { ("N, K", "M, K") } else { ("M, K", "N, K") };
            let _ = writeln!(b, "  auto stride_A = cutlass::make_cute_packed_stride(StrideA{{}}, cute::make_shape({ma}, 1));");
            let _ = writeln!(b, "  auto stride_B = cutlass::make_cute_packed_stride(StrideB{{}}, cute::make_shape({mb}, 1));");
            b.push_str("  auto stride_C = cutlass::make_cute_packed_stride(StrideC{}, cute::make_shape(M, N, 1));\n");
            b.push_str("  auto stride_D = cutlass::make_cute_packed_stride(StrideD{}, cute::make_shape(M, N, 1));\n");
            b.push_str("  const auto alpha_ = static_cast<ElementCompute>(alpha);\n");
            b.push_str("  const auto beta_ = static_cast<ElementCompute>(beta);\n");
            b.push_str("  // build arguments\n");
            b.push_str("  typename FusionOperation::Arguments fusion_args =\n");
            evt::build(&k.epilogue, aux).render_args(1, &mut b);
            b.push_str(";\n");
            let (pa, pb, sa, sb, shape) = if k.operand_swap == Some(true) {
                ("ptr_B", "ptr_A", "stride_B", "stride_A", "N, M, K, 1")
            } else {
                ("ptr_A", "ptr_B", "stride_A", "stride_B", "M, N, K, 1")
            };
            let _ = writeln!(
                b,
                "  typename DeviceKernel::Arguments arguments{{\n      \
                 cutlass::gemm::GemmUniversalMode::kGemm,\n      \
                 {{{shape}}},\n      \
                 {{{pa}, {sa}, {pb}, {sb}}},\n      \
                 {{fusion_args, ptr_C, stride_C, ptr_D, stride_D}}}};"
            );
        }
        _ => {
            let lda = leading_dim(k.layouts.a, "M", "K");
            let ldb = leading_dim(k.layouts.b, "K", "N");
            let ldc = leading_dim(k.layouts.c, "M", "N");
            if bias_first {
                let _ = writeln!(b, "  const int64_t ldc = {}.has_value() ? 0 : {ldc};", aux[0].name);
            } else {
                let _ = writeln!(b, "  const int64_t ldc = {ldc};");
            }
            b.push_str("  // build arguments\n");
            let _ = writeln!(
                b,
                "  typename DeviceKernel::Arguments arguments{{\n      \
                 cutlass::gemm::GemmUniversalMode::kGemm,\n      \
                 {{M, N, K}},\n      \
                 1,\n      \
                 {{static_cast<ElementCompute>(alpha), static_cast<ElementCompute>(beta)}},\n      \
                 ptr_A, ptr_B, ptr_C, ptr_D,\n      \
                 int64_t(M) * K, int64_t(K) * N, int64_t(M) * N, int64_t(M) * N,\n      \
                 {lda}, {ldb}, ldc, {ldd}}};",
                ldd = leading_dim(k.layouts.c, "M", "N")
            );
        }
    }
    b.push_str(&launch("A"));
    b.push_str("  return D;\n");
    b
}

fn aux_pointers(aux: &[AuxParam], elem: &str) -> String {
    let mut b = String::new();
    for p in aux {
        let cty = if p.source == EpilogueName::AuxStore { elem.to_string() } else { format!("{elem} const") };
        let _ = writeln!(
            b,
            "  auto* {} = {n}.has_value() ? reinterpret_cast<{cty}*>({n}->data_ptr()) : nullptr;",
            p.device_ptr(),
            n = p.name
        );
    }
    b
}

fn launch(options_from: &str) -> String {
    format!(
        "  // allocate workspace and run on the current PyTorch CUDA stream\n  \
         DeviceKernel op;\n  \
         const size_t workspace_size = DeviceKernel::get_workspace_size(arguments);\n  \
         at::Tensor workspace = at::empty({{static_cast<int64_t>(workspace_size)}}, {options_from}.options().dtype(at::kByte));\n  \
         cudaStream_t stream = at::cuda::getCurrentCUDAStream();\n  \
         TORCH_CHECK(op.can_implement(arguments) == cutlass::Status::kSuccess, \"kernel cannot implement this problem\");\n  \
         TORCH_CHECK(op.initialize(arguments, workspace.data_ptr(), stream) == cutlass::Status::kSuccess, \"kernel initialization failed\");\n  \
         TORCH_CHECK(op.run(stream) == cutlass::Status::kSuccess, \"kernel launch failed\");\n"
    )
}

fn grouped_body(k: &KernelConfig, aux: &[AuxParam], backend: Backend) -> String {
    let mut b = String::new();
    b.push_str("  TORCH_CHECK(A.size() == B.size(), \"A and B must hold the same number of groups\");\n");
    b.push_str("  const int groups = static_cast<int>(A.size());\n");
    b.push_str("  std::vector<at::Tensor> D;\n");
    b.push_str("  D.reserve(groups);\n");
    let problem = if backend == Backend::CollectiveBuilder {
        "typename ProblemShape::UnderlyingProblemShape"
    } else {
        "cutlass::gemm::GemmCoord"
    };
    let _ = writeln!(b, "  std::vector<{problem}> problems;");
    b.push_str("  std::vector<ElementA const*> ptr_A;\n  std::vector<ElementB const*> ptr_B;\n");
    b.push_str("  std::vector<ElementC const*> ptr_C;\n  std::vector<ElementD*> ptr_D;\n");
    b.push_str("  for (int g = 0; g < groups; ++g) {\n");
    b.push_str("    const int M = static_cast<int>(A[g].size(0));\n");
    b.push_str("    const int K = static_cast<int>(A[g].size(1));\n");
    b.push_str("    const int N = static_cast<int>(B[g].size(1));\n");
    b.push_str("    TORCH_CHECK(B[g].size(0) == K, \"inner dimensions of A and B differ in a group\");\n");
    let _ = writeln!(b, "    D.push_back(at::empty({{M, N}}, A[g].options().dtype({})));", torch_dtype(k.dtypes.output));
    b.push_str("    problems.push_back({M, N, K});\n");
    b.push_str("    ptr_A.push_back(reinterpret_cast<ElementA const*>(A[g].data_ptr()));\n");
    b.push_str("    ptr_B.push_back(reinterpret_cast<ElementB const*>(B[g].data_ptr()));\n");
    b.push_str("    ptr_C.push_back(C.has_value() ? reinterpret_cast<ElementC const*>((*C)[g].data_ptr()) : nullptr);\n");
    b.push_str("    ptr_D.push_back(reinterpret_cast<ElementD*>(D.back().data_ptr()));\n");
    b.push_str("  }\n");
    b.push_str("  if (!C.has_value()) { beta = 0.0; }\n");
    b.push_str(&aux_pointers(aux, "ElementCompute"));
    b.push_str("  // build arguments (device copies of the per-group arrays are made by the adapter)\n");
    if backend == Backend::CollectiveBuilder {
        b.push_str("  const auto alpha_ = static_cast<ElementCompute>(alpha);\n");
        b.push_str("  const auto beta_ = static_cast<ElementCompute>(beta);\n");
        b.push_str("  typename FusionOperation::Arguments fusion_args =\n");
        evt::build(&k.epilogue, aux).render_args(1, &mut b);
        b.push_str(";\n");
        b.push_str(
            "  typename DeviceKernel::Arguments arguments{\n      \
             cutlass::gemm::GemmUniversalMode::kGrouped,\n      \
             {groups, problems.data(), nullptr},\n      \
             {ptr_A.data(), nullptr, ptr_B.data(), nullptr},\n      \
             {fusion_args, ptr_C.data(), nullptr, ptr_D.data(), nullptr}};\n",
        );
    } else {
        b.push_str(
            "  typename DeviceKernel::Arguments arguments{\n      \
             problems.data(), groups, DeviceKernel::sufficient(problems.data(), groups),\n      \
             {static_cast<ElementCompute>(alpha), static_cast<ElementCompute>(beta)},\n      \
             ptr_A.data(), ptr_B.data(), ptr_C.data(), ptr_D.data(),\n      \
             nullptr, nullptr, nullptr, nullptr};\n",
        );
    }
    b.push_str(&launch("A[0]"));
    b.push_str("  return D;\n");
    b
}
