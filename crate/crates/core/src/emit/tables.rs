//! CUTLASS spellings. Everything that names a CUTLASS or PyTorch symbol
//! lives here so API renames touch one file.

use crate::dsl::{EpilogueName, OpKind};
use crate::ir::{Arch, DType, EpilogueSchedule, IteratorAlgorithm, KernelSchedule, Layout};

pub const COMMON_INCLUDES: &[&str] = &[
    "<ATen/ATen.h>",
    "<ATen/cuda/CUDAContext.h>",
    "<c10/util/Optional.h>",
    "<torch/extension.h>",
    "\"cutlass/cutlass.h\"",
    "\"cutlass/numeric_types.h\"",
];

pub const COLLECTIVE_INCLUDES: &[&str] = &[
    "\"cute/tensor.hpp\"",
    "\"cutlass/gemm/device/gemm_universal_adapter.h\"",
    "\"cutlass/gemm/kernel/gemm_universal.hpp\"",
    "\"cutlass/gemm/collective/collective_builder.hpp\"",
    "\"cutlass/epilogue/collective/collective_builder.hpp\"",
    "\"cutlass/epilogue/fusion/sm90_visitor_tma_warpspecialized.hpp\"",
    "\"cutlass/epilogue/fusion/sm90_visitor_compute_tma_warpspecialized.hpp\"",
    "\"cutlass/epilogue/fusion/sm90_visitor_load_tma_warpspecialized.hpp\"",
    "\"cutlass/epilogue/fusion/sm90_visitor_store_tma_warpspecialized.hpp\"",
    "\"cutlass/util/packed_stride.hpp\"",
];

pub const LEGACY_GEMM_INCLUDES: &[&str] = &[
    "\"cutlass/gemm/device/gemm_universal.h\"",
    "\"cutlass/gemm/device/gemm_grouped.h\"",
    "\"cutlass/gemm/kernel/default_gemm_grouped.h\"",
    "\"cutlass/epilogue/thread/linear_combination.h\"",
    "\"cutlass/epilogue/thread/linear_combination_generic.h\"",
    "\"cutlass/epilogue/thread/activation.h\"",
];

pub const LEGACY_CONV_INCLUDES: &[&str] = &[
    "\"cutlass/conv/convolution.h\"",
    "\"cutlass/conv/conv2d_problem_size.h\"",
    "\"cutlass/conv/conv3d_problem_size.h\"",
    "\"cutlass/conv/device/implicit_gemm_convolution.h\"",
    "\"cutlass/conv/kernel/default_conv2d_fprop.h\"",
    "\"cutlass/conv/kernel/default_conv2d_dgrad.h\"",
    "\"cutlass/conv/kernel/default_conv2d_wgrad.h\"",
    "\"cutlass/conv/kernel/default_conv3d_fprop.h\"",
    "\"cutlass/conv/kernel/default_conv3d_dgrad.h\"",
    "\"cutlass/conv/kernel/default_conv3d_wgrad.h\"",
    "\"cutlass/conv/kernel/default_depthwise_fprop.h\"",
    "\"cutlass/conv/kernel/default_conv2d_group_fprop.h\"",
    "\"cutlass/epilogue/thread/linear_combination.h\"",
    "\"cutlass/epilogue/thread/linear_combination_generic.h\"",
    "\"cutlass/epilogue/thread/activation.h\"",
];

pub const CUTE_DEPTHWISE_INCLUDES: &[&str] = &[
    "\"cute/tensor.hpp\"",
    "\"cutlass/conv/convolution.h\"",
    "\"cutlass/conv/conv2d_problem_size.h\"",
    "\"cutlass/epilogue/thread/activation.h\"",
    "\"ucutlass/cute_depthwise_fprop.hpp\"",
];

pub fn element(dt: DType) -> &'static str {
    match dt {
        DType::Fp64 => "double",
        DType::Fp32 => "float",
        DType::Fp16 => "cutlass::half_t",
        DType::Bf16 => "cutlass::bfloat16_t",
        DType::Fp8 => "cutlass::float_e4m3_t",
        DType::Int8 => "int8_t",
    }
}

/// Accumulator-side compute element; integer GEMMs accumulate in int32.
pub fn compute_element(acc: DType) -> &'static str {
    match acc {
        DType::Int8 => "int32_t",
        other => element(other),
    }
}

pub fn torch_dtype(dt: DType) -> &'static str {
    match dt {
        DType::Fp64 => "at::kDouble",
        DType::Fp32 => "at::kFloat",
        DType::Fp16 => "at::kHalf",
        DType::Bf16 => "at::kBFloat16",
        DType::Fp8 => "at::kFloat8_e4m3fn",
        DType::Int8 => "at::kChar",
    }
}

pub fn layout(l: Layout) -> &'static str {
    match l {
        Layout::RowMajor => "cutlass::layout::RowMajor",
        Layout::ColMajor => "cutlass::layout::ColumnMajor",
        Layout::Nhwc => "cutlass::layout::TensorNHWC",
        Layout::Ndhwc => "cutlass::layout::TensorNDHWC",
    }
}

pub fn transposed(l: Layout) -> Layout {
    match l {
        Layout::RowMajor => Layout::ColMajor,
        Layout::ColMajor => Layout::RowMajor,
        other => other,
    }
}

pub fn arch_tag(arch: Arch) -> &'static str {
    match arch {
        Arch::Sm70 => "cutlass::arch::Sm70",
        Arch::Sm75 => "cutlass::arch::Sm75",
        Arch::Sm80 => "cutlass::arch::Sm80",
        Arch::Sm86 => "cutlass::arch::Sm86",
        Arch::Sm89 => "cutlass::arch::Sm89",
        Arch::Sm90 | Arch::Sm90a => "cutlass::arch::Sm90",
    }
}

/// Tag for the 2.x templates; Hopper runs the Ampere kernels.
pub fn legacy_arch_tag(arch: Arch) -> &'static str {
    if arch.is_sm90_plus() {
        arch_tag(Arch::Sm80)
    } else {
        arch_tag(arch)
    }
}

pub fn op_class(arch: Arch, input: DType) -> &'static str {
    if arch == Arch::Sm70 && !matches!(input, DType::Fp16) {
        "cutlass::arch::OpClassSimt"
    } else {
        "cutlass::arch::OpClassTensorOp"
    }
}

pub fn instruction_shape(arch: Arch, input: DType) -> [u32; 3] {
    match (arch.capability(), input) {
        (70, _) => [8, 8, 4],
        (75, DType::Int8) => [8, 8, 16],
        (75, _) => [16, 8, 8],
        (_, DType::Fp64) => [8, 8, 4],
        (_, DType::Fp32) => [16, 8, 8],
        (_, DType::Int8 | DType::Fp8) => [16, 8, 32],
        _ => [16, 8, 16],
    }
}

pub fn kernel_schedule(s: KernelSchedule, grouped: bool) -> &'static str {
    match (s, grouped) {
        (KernelSchedule::Tma, false) => "cutlass::gemm::KernelTmaWarpSpecialized",
        (KernelSchedule::Cooperative, false) => "cutlass::gemm::KernelTmaWarpSpecializedCooperative",
        (KernelSchedule::Pingpong, false) => "cutlass::gemm::KernelTmaWarpSpecializedPingpong",
        (KernelSchedule::Tma | KernelSchedule::Cooperative, true) => {
            "cutlass::gemm::KernelPtrArrayTmaWarpSpecializedCooperative"
        }
        (KernelSchedule::Pingpong, true) => "cutlass::gemm::KernelPtrArrayTmaWarpSpecializedPingpong",
        (KernelSchedule::Default, _) => "cutlass::gemm::collective::KernelScheduleAuto",
    }
}

pub fn epilogue_schedule(s: EpilogueSchedule, grouped: bool) -> &'static str {
    match (s, grouped) {
        (EpilogueSchedule::Tma, false) => "cutlass::epilogue::TmaWarpSpecialized",
        (EpilogueSchedule::Tma, true) => "cutlass::epilogue::PtrArrayTmaWarpSpecializedCooperative",
        (EpilogueSchedule::Default, _) => "cutlass::epilogue::collective::EpilogueScheduleAuto",
    }
}

pub fn iterator_algorithm(i: IteratorAlgorithm) -> &'static str {
    match i {
        IteratorAlgorithm::Analytic => "cutlass::conv::IteratorAlgorithm::kAnalytic",
        IteratorAlgorithm::Optimized => "cutlass::conv::IteratorAlgorithm::kOptimized",
    }
}

pub const DEFAULT_ITERATOR: IteratorAlgorithm = IteratorAlgorithm::Optimized;
pub const DEFAULT_LEGACY_TILE: [u32; 3] = [128, 128, 32];
pub const DEFAULT_SM90_TILE: [u32; 3] = [128, 128, 64];

pub fn gemm_swizzle(n: u32) -> String {
    format!("cutlass::gemm::threadblock::GemmIdentityThreadblockSwizzle<{n}>")
}

pub fn conv_kernel_template(op: OpKind) -> &'static str {
    match op {
        OpKind::Conv1d | OpKind::Conv2d => "cutlass::conv::kernel::DefaultConv2dFprop",
        OpKind::Conv2dDgrad => "cutlass::conv::kernel::DefaultConv2dDgrad",
        OpKind::Conv2dWgrad => "cutlass::conv::kernel::DefaultConv2dWgrad",
        OpKind::Conv3d => "cutlass::conv::kernel::DefaultConv3dFprop",
        OpKind::Conv3dDgrad => "cutlass::conv::kernel::DefaultConv3dDgrad",
        OpKind::Conv3dWgrad => "cutlass::conv::kernel::DefaultConv3dWgrad",
        OpKind::DepthwiseConv => "cutlass::conv::kernel::DefaultDepthwiseFprop",
        OpKind::GroupedConv => "cutlass::conv::kernel::DefaultConv2dGroupFprop",
        OpKind::Gemm | OpKind::GroupedGemm => unreachable!("{op} is not a convolution"),
    }
}

pub const CONV_DEVICE: &str = "cutlass::conv::device::ImplicitGemmConvolution";
pub const GEMM_UNIVERSAL_LEGACY: &str = "cutlass::gemm::device::GemmUniversal";
pub const GEMM_GROUPED_LEGACY: &str = "cutlass::gemm::device::GemmGrouped";
pub const DEFAULT_GEMM_GROUPED: &str = "cutlass::gemm::kernel::DefaultGemmGrouped";
pub const GEMM_ADAPTER: &str = "cutlass::gemm::device::GemmUniversalAdapter";
pub const GEMM_KERNEL_3X: &str = "cutlass::gemm::kernel::GemmUniversal";
pub const MAINLOOP_BUILDER: &str = "cutlass::gemm::collective::CollectiveBuilder";
pub const EPILOGUE_BUILDER: &str = "cutlass::epilogue::collective::CollectiveBuilder";
pub const CUTE_DEPTHWISE_KERNEL: &str = "ucutlass::cute::DepthwiseConv2dFprop";
pub const CUTE_DEPTHWISE_DEVICE: &str = "ucutlass::cute::DepthwiseConvolutionAdapter";

/// Visitor-tree functor for a unary or binary epilogue step.
pub fn evt_functor(name: EpilogueName) -> &'static str {
    use EpilogueName::*;
    match name {
        Relu => "cutlass::epilogue::thread::ReLu",
        Gelu => "cutlass::epilogue::thread::GELU",
        Silu => "cutlass::epilogue::thread::SiLu",
        Sigmoid => "cutlass::epilogue::thread::Sigmoid",
        Tanh => "cutlass::epilogue::thread::Tanh",
        Mish => "cutlass::epilogue::thread::Mish",
        Hardswish => "cutlass::epilogue::thread::HardSwish",
        LeakyRelu => "cutlass::epilogue::thread::LeakyReLU",
        Elu => "cutlass::epilogue::thread::ELU",
        Clip | Clamp => "cutlass::epilogue::thread::Clamp",
        Bias | AuxLoad => "cutlass::plus",
        PerChannelScale | PerRowScale | PerColScale | Scale => "cutlass::multiplies",
        AuxStore | Custom => unreachable!("{name} is not a compute node"),
    }
}

pub const EVT: &str = "cutlass::epilogue::fusion::Sm90EVT";
pub const EVT_COMPUTE: &str = "cutlass::epilogue::fusion::Sm90Compute";
pub const EVT_ACC: &str = "cutlass::epilogue::fusion::Sm90AccFetch";
pub const EVT_SRC: &str = "cutlass::epilogue::fusion::Sm90SrcFetch";
pub const EVT_SCALAR: &str = "cutlass::epilogue::fusion::Sm90ScalarBroadcast";
pub const EVT_ROW: &str = "cutlass::epilogue::fusion::Sm90RowBroadcast";
pub const EVT_COL: &str = "cutlass::epilogue::fusion::Sm90ColBroadcast";
pub const EVT_AUX_LOAD: &str = "cutlass::epilogue::fusion::Sm90AuxLoad";
pub const EVT_AUX_STORE: &str = "cutlass::epilogue::fusion::Sm90AuxStore";
pub const EVT_MUL: &str = "cutlass::multiplies";
pub const EVT_FMA: &str = "cutlass::homogeneous_multiply_add";
pub const ROUND_STYLE: &str = "cutlass::FloatRoundStyle::round_to_nearest";

/// Single-op linear-combination epilogues of the 2.x templates.
pub fn legacy_linear_combination(name: Option<EpilogueName>) -> Option<&'static str> {
    use EpilogueName::*;
    Some(match name {
        None => "cutlass::epilogue::thread::LinearCombination",
        Some(Relu) => "cutlass::epilogue::thread::LinearCombinationRelu",
        Some(Gelu) => "cutlass::epilogue::thread::LinearCombinationGELU",
        Some(Silu) => "cutlass::epilogue::thread::LinearCombinationSilu",
        Some(Sigmoid) => "cutlass::epilogue::thread::LinearCombinationSigmoid",
        Some(Hardswish) => "cutlass::epilogue::thread::LinearCombinationHardSwish",
        Some(_) => return None,
    })
}

pub const LEGACY_GENERIC: &str = "cutlass::epilogue::thread::LinearCombinationGeneric";

/// Device-side expression of one elementwise step applied to `x` of type `T`.
pub fn legacy_step(name: EpilogueName, p: &dyn Fn(&str, &str) -> String) -> String {
    use EpilogueName::*;
    match name {
        Relu => "cutlass::epilogue::thread::ReLu<T>{}(x)".into(),
        Gelu => "cutlass::epilogue::thread::GELU<T>{}(x)".into(),
        Silu => "cutlass::epilogue::thread::SiLu<T>{}(x)".into(),
        Sigmoid => "cutlass::epilogue::thread::Sigmoid<T>{}(x)".into(),
        Tanh => "cutlass::epilogue::thread::Tanh<T>{}(x)".into(),
        Hardswish => "cutlass::epilogue::thread::HardSwish<T>{}(x)".into(),
        Mish => "x * cutlass::fast_tanh(cutlass::fast_log(T(1) + cutlass::fast_exp(x)))".into(),
        LeakyRelu => format!("x > T(0) ? x : T({}) * x", p("slope", "0.01")),
        Elu => format!("x > T(0) ? x : T({}) * (cutlass::fast_exp(x) - T(1))", p("alpha", "1.0")),
        Clip | Clamp => format!("cutlass::fast_min(cutlass::fast_max(x, T({})), T({}))", p("min", "0"), p("max", "0")),
        Scale => format!("x * T({})", p("value", "1.0")),
        Bias | PerChannelScale | PerRowScale | PerColScale | AuxStore | AuxLoad | Custom => {
            unreachable!("{name} has no elementwise form")
        }
    }
}
