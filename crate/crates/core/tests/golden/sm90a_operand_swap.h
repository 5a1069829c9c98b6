// ucutlass_0c58b3c3cfd85b72.h: generated by ucutlass, do not edit.
// config sha256: 0c58b3c3cfd85b726a10dba6814150538108e5e55006f2fbe275015859425be5
// backend: collective_builder
#pragma once

#include <tuple>
#include <vector>

#include <ATen/ATen.h>
#include <ATen/cuda/CUDAContext.h>
#include <c10/util/Optional.h>
#include <torch/extension.h>
#include "cutlass/cutlass.h"
#include "cutlass/numeric_types.h"
#include "cute/tensor.hpp"
#include "cutlass/gemm/device/gemm_universal_adapter.h"
#include "cutlass/gemm/kernel/gemm_universal.hpp"
#include "cutlass/gemm/collective/collective_builder.hpp"
#include "cutlass/epilogue/collective/collective_builder.hpp"
#include "cutlass/epilogue/fusion/sm90_visitor_tma_warpspecialized.hpp"
#include "cutlass/epilogue/fusion/sm90_visitor_compute_tma_warpspecialized.hpp"
#include "cutlass/epilogue/fusion/sm90_visitor_load_tma_warpspecialized.hpp"
#include "cutlass/epilogue/fusion/sm90_visitor_store_tma_warpspecialized.hpp"
#include "cutlass/util/packed_stride.hpp"

namespace ucutlass_0c58b3c3cfd85b72 {

/* Original DSL:
gemm().with_dtype(input=fp32, acc=fp32, output=fp32).with_arch(sm_90a).with_operand_swap(true)
*/

// Resolved configuration (defaults included):
//   op=gemm arch=sm_90a stages=2
//   dtypes input=fp32 acc=fp32 output=fp32
//   layouts A=RowMajor B=RowMajor C=RowMajor
//   alignment A=1 B=1 C=1
//   operand_swap true

using ElementA = float;
using ElementB = float;
using ElementC = float;
using ElementD = float;
using ElementAccumulator = float;
using ElementCompute = float;
using LayoutA = cutlass::layout::RowMajor;
using LayoutB = cutlass::layout::RowMajor;
using LayoutC = cutlass::layout::RowMajor;
using LayoutD = LayoutC;
constexpr int AlignmentA = 1;
constexpr int AlignmentB = 1;
constexpr int AlignmentC = 1;
constexpr int AlignmentD = AlignmentC;
constexpr int Stages = 2;
using ArchTag = cutlass::arch::Sm90;
using OperatorClass = cutlass::arch::OpClassTensorOp;
using TileShape = cute::Shape<cute::_128, cute::_128, cute::_64>;
using ClusterShape = cute::Shape<cute::_1, cute::_1, cute::_1>;
using KernelSchedule = cutlass::gemm::collective::KernelScheduleAuto;
using EpilogueSchedule = cutlass::epilogue::collective::EpilogueScheduleAuto;

// Epilogue chain (fused, applied in order): (none)
using FusionOperation =
  cutlass::epilogue::fusion::Sm90EVT<
    cutlass::epilogue::fusion::Sm90Compute<cutlass::homogeneous_multiply_add, ElementCompute, ElementCompute, cutlass::FloatRoundStyle::round_to_nearest>,
    cutlass::epilogue::fusion::Sm90ScalarBroadcast<ElementCompute>,
    cutlass::epilogue::fusion::Sm90SrcFetch<ElementC>,
    cutlass::epilogue::fusion::Sm90EVT<
      cutlass::epilogue::fusion::Sm90Compute<cutlass::multiplies, ElementCompute, ElementCompute, cutlass::FloatRoundStyle::round_to_nearest>,
      cutlass::epilogue::fusion::Sm90ScalarBroadcast<ElementCompute>,
      cutlass::epilogue::fusion::Sm90AccFetch
    >
  >;

using CollectiveEpilogue = typename cutlass::epilogue::collective::CollectiveBuilder<
    ArchTag, OperatorClass, TileShape, ClusterShape,
    cutlass::epilogue::collective::EpilogueTileAuto,
    ElementAccumulator, ElementCompute,
    ElementC, LayoutC, AlignmentC,
    ElementD, LayoutD, AlignmentD,
    EpilogueSchedule, FusionOperation>::CollectiveOp;

// Operand swap: the mainloop computes D^T = B^T * A^T, which requires M == N.
using LayoutAT = cutlass::layout::ColumnMajor;
using LayoutBT = cutlass::layout::ColumnMajor;
using CollectiveMainloop = typename cutlass::gemm::collective::CollectiveBuilder<
    ArchTag, OperatorClass,
    ElementB, LayoutBT, AlignmentB,
    ElementA, LayoutAT, AlignmentA,
    ElementAccumulator, TileShape, ClusterShape,
    cutlass::gemm::collective::StageCount<Stages>,
    KernelSchedule>::CollectiveOp;

using ProblemShape = cute::Shape<int, int, int, int>;
using GemmKernel = cutlass::gemm::kernel::GemmUniversal<ProblemShape, CollectiveMainloop, CollectiveEpilogue>;
using DeviceKernel = cutlass::gemm::device::GemmUniversalAdapter<GemmKernel>;

inline at::Tensor kernel_kernel_ex(
    const at::Tensor& A,
    const at::Tensor& B,
    const c10::optional<at::Tensor>& C,
    double alpha,
    double beta) {
  TORCH_CHECK(A.is_cuda() && B.is_cuda(), "A and B must be CUDA tensors");
  TORCH_CHECK(A.dim() == 2 && B.dim() == 2, "A and B must be matrices");
  const int M = static_cast<int>(A.size(0));
  const int K = static_cast<int>(A.size(1));
  const int N = static_cast<int>(B.size(1));
  TORCH_CHECK(B.size(0) == K, "inner dimensions of A and B differ");
  TORCH_CHECK(M == N, "with_operand_swap(true) requires M == N");
  TORCH_CHECK(A.scalar_type() == at::kFloat && B.scalar_type() == at::kFloat, "A and B must be fp32");
  TORCH_CHECK(A.is_contiguous(), "A must be row-major and contiguous");
  TORCH_CHECK(B.is_contiguous(), "B must be row-major and contiguous");
  at::Tensor D = at::empty({M, N}, A.options().dtype(at::kFloat));
  auto* ptr_A = reinterpret_cast<ElementA const*>(A.data_ptr());
  auto* ptr_B = reinterpret_cast<ElementB const*>(B.data_ptr());
  auto* ptr_D = reinterpret_cast<ElementD*>(D.data_ptr());
  auto* ptr_C = reinterpret_cast<ElementC const*>(C.has_value() ? C->data_ptr() : nullptr);
  if (!C.has_value()) { beta = 0.0; }
  // pack strides
  using StrideA = typename GemmKernel::StrideA;
  using StrideB = typename GemmKernel::StrideB;
  using StrideC = typename GemmKernel::StrideC;
  using StrideD = typename GemmKernel::StrideD;
  auto stride_A = cutlass::make_cute_packed_stride(StrideA{}, cute::make_shape(N, K, 1));
  auto stride_B = cutlass::make_cute_packed_stride(StrideB{}, cute::make_shape(M, K, 1));
  auto stride_C = cutlass::make_cute_packed_stride(StrideC{}, cute::make_shape(M, N, 1));
  auto stride_D = cutlass::make_cute_packed_stride(StrideD{}, cute::make_shape(M, N, 1));
  const auto alpha_ = static_cast<ElementCompute>(alpha);
  const auto beta_ = static_cast<ElementCompute>(beta);
  // build arguments
  typename FusionOperation::Arguments fusion_args =
  {
    {{beta_}},
    {},
    {
      {{alpha_}},
      {},
      {}  // node op
    },
    {}  // node op
  };
  typename DeviceKernel::Arguments arguments{
      cutlass::gemm::GemmUniversalMode::kGemm,
      {N, M, K, 1},
      {ptr_B, stride_B, ptr_A, stride_A},
      {fusion_args, ptr_C, stride_C, ptr_D, stride_D}};
  // allocate workspace and run on the current PyTorch CUDA stream
  DeviceKernel op;
  const size_t workspace_size = DeviceKernel::get_workspace_size(arguments);
  at::Tensor workspace = at::empty({static_cast<int64_t>(workspace_size)}, A.options().dtype(at::kByte));
  cudaStream_t stream = at::cuda::getCurrentCUDAStream();
  TORCH_CHECK(op.can_implement(arguments) == cutlass::Status::kSuccess, "kernel cannot implement this problem");
  TORCH_CHECK(op.initialize(arguments, workspace.data_ptr(), stream) == cutlass::Status::kSuccess, "kernel initialization failed");
  TORCH_CHECK(op.run(stream) == cutlass::Status::kSuccess, "kernel launch failed");
  return D;
}

inline at::Tensor kernel_kernel(const at::Tensor& A, const at::Tensor& B, const c10::optional<at::Tensor>& C, double alpha, double beta) {
  return kernel_kernel_ex(A, B, C, alpha, beta);
}

}  // namespace ucutlass_0c58b3c3cfd85b72

using ucutlass_0c58b3c3cfd85b72::kernel_kernel;
