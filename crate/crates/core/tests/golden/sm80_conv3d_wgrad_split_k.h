// ucutlass_43140b666f778e26.h: generated by ucutlass, do not edit.
// config sha256: 43140b666f778e262880b1cecb017e67606abb87d611c559606d9cfe3cef4f36
// backend: legacy_template
#pragma once

#include <tuple>
#include <vector>

#include <ATen/ATen.h>
#include <ATen/cuda/CUDAContext.h>
#include <c10/util/Optional.h>
#include <torch/extension.h>
#include "cutlass/cutlass.h"
#include "cutlass/numeric_types.h"
#include "cutlass/conv/convolution.h"
#include "cutlass/conv/conv2d_problem_size.h"
#include "cutlass/conv/conv3d_problem_size.h"
#include "cutlass/conv/device/implicit_gemm_convolution.h"
#include "cutlass/conv/kernel/default_conv2d_fprop.h"
#include "cutlass/conv/kernel/default_conv2d_dgrad.h"
#include "cutlass/conv/kernel/default_conv2d_wgrad.h"
#include "cutlass/conv/kernel/default_conv3d_fprop.h"
#include "cutlass/conv/kernel/default_conv3d_dgrad.h"
#include "cutlass/conv/kernel/default_conv3d_wgrad.h"
#include "cutlass/conv/kernel/default_depthwise_fprop.h"
#include "cutlass/conv/kernel/default_conv2d_group_fprop.h"
#include "cutlass/epilogue/thread/linear_combination.h"
#include "cutlass/epilogue/thread/linear_combination_generic.h"
#include "cutlass/epilogue/thread/activation.h"

namespace ucutlass_43140b666f778e26 {

/* Original DSL:
conv3d_wgrad().with_arch(sm_80).with_split_k(4).with_iterator(analytic)
*/

// Resolved configuration (defaults included):
//   op=conv3d_wgrad arch=sm_80 stages=2
//   dtypes input=fp32 acc=fp32 output=fp32
//   layouts A=NDHWC B=NDHWC C=NDHWC
//   alignment A=1 B=1 C=1
//   iterator analytic
//   split_k slices=4

using ElementA = float;
using ElementB = float;
using ElementC = float;
using ElementD = float;
using ElementAccumulator = float;
using ElementCompute = float;
using LayoutA = cutlass::layout::TensorNDHWC;
using LayoutB = cutlass::layout::TensorNDHWC;
using LayoutC = cutlass::layout::TensorNDHWC;
constexpr int AlignmentA = 1;
constexpr int AlignmentB = 1;
constexpr int AlignmentC = 1;
constexpr int Stages = 2;
using ArchTag = cutlass::arch::Sm80;
using OperatorClass = cutlass::arch::OpClassTensorOp;
using ThreadblockShape = cutlass::gemm::GemmShape<128, 128, 32>;
using WarpShape = cutlass::gemm::GemmShape<64, 64, 32>;
using InstructionShape = cutlass::gemm::GemmShape<16, 8, 8>;
using ThreadblockSwizzle = cutlass::gemm::threadblock::GemmIdentityThreadblockSwizzle<1>;
constexpr cutlass::conv::IteratorAlgorithm kIteratorAlgorithm = cutlass::conv::IteratorAlgorithm::kAnalytic;
constexpr cutlass::conv::SplitKMode kSplitKMode = cutlass::conv::SplitKMode::kParallel;
constexpr int kSplitKSlices = 4;
constexpr cutlass::conv::Operator kConvOperator = cutlass::conv::Operator::kWgrad;

// Epilogue chain (linear combination, applied in order): (none)
using EpilogueOutputOp = cutlass::epilogue::thread::LinearCombination<
    ElementC, AlignmentC, ElementAccumulator, ElementCompute>;

using ConvKernel = typename cutlass::conv::kernel::DefaultConv3dWgrad<
    ElementA, LayoutA, ElementB, LayoutB, ElementC, LayoutC,
    ElementAccumulator, OperatorClass, ArchTag,
    ThreadblockShape, WarpShape, InstructionShape,
    EpilogueOutputOp, ThreadblockSwizzle, Stages,
    cutlass::arch::OpMultiplyAdd, kIteratorAlgorithm,
    cutlass::conv::StrideSupport::kStrided, AlignmentA, AlignmentB>::Kernel;
using DeviceKernel = cutlass::conv::device::ImplicitGemmConvolution<ConvKernel>;

inline at::Tensor kernel_kernel_ex(
    const at::Tensor& A,
    const at::Tensor& B,
    const c10::optional<at::Tensor>& C,
    double alpha,
    double beta,
    int64_t stride_d,
    int64_t stride_h,
    int64_t stride_w,
    int64_t pad_d,
    int64_t pad_h,
    int64_t pad_w,
    int64_t dilation_d,
    int64_t dilation_h,
    int64_t dilation_w) {
  TORCH_CHECK(A.is_cuda() && B.is_cuda(), "A and B must be CUDA tensors");
  TORCH_CHECK(A.dim() == 5 && B.dim() == 5, "A and B must be 5-d channels-last tensors");
  TORCH_CHECK(A.scalar_type() == at::kFloat && B.scalar_type() == at::kFloat, "A and B must be fp32");
  TORCH_CHECK(A.is_contiguous() && B.is_contiguous(), "A and B must be contiguous channels-last tensors");
  const int64_t N = A.size(0);
  const int64_t Z = A.size(1);
  const int64_t Di = B.size(1);
  const int64_t T = (Di + 2 * pad_d - (Z - 1) * stride_d - 1) / dilation_d + 1;
  const int64_t P = A.size(2);
  const int64_t Hi = B.size(2);
  const int64_t R = (Hi + 2 * pad_h - (P - 1) * stride_h - 1) / dilation_h + 1;
  const int64_t Q = A.size(3);
  const int64_t Wi = B.size(3);
  const int64_t S = (Wi + 2 * pad_w - (Q - 1) * stride_w - 1) / dilation_w + 1;
  const int64_t K = A.size(4);
  const int64_t Cin = B.size(4);
  TORCH_CHECK(B.size(0) == N, "activation batch does not match the gradient batch");
  at::Tensor D = at::empty({K, T, R, S, Cin / 1}, A.options().dtype(at::kFloat));
  auto* ptr_C = reinterpret_cast<ElementC*>(C.has_value() ? C->data_ptr() : nullptr);
  if (!C.has_value()) { beta = 0.0; }
  auto* ptr_A = reinterpret_cast<ElementA*>(A.data_ptr());
  auto* ptr_B = reinterpret_cast<ElementB*>(B.data_ptr());
  auto* ptr_D = reinterpret_cast<ElementD*>(D.data_ptr());
  cutlass::conv::Conv3dProblemSize problem_size(
      cutlass::Tensor5DCoord(int(N), int(Di), int(Hi), int(Wi), int(Cin)),
      cutlass::Tensor5DCoord(int(K), int(T), int(R), int(S), int(Cin / 1)),
      cutlass::Coord<3>({int(pad_d), int(pad_h), int(pad_w)}),
      cutlass::Coord<3>({int(stride_d), int(stride_h), int(stride_w)}),
      cutlass::Coord<3>({int(dilation_d), int(dilation_h), int(dilation_w)}),
      cutlass::Tensor5DCoord(int(N), int(Z), int(P), int(Q), int(K)),
      cutlass::conv::Mode::kCrossCorrelation, kSplitKSlices);
  // build arguments
  typename DeviceKernel::Arguments arguments{
      problem_size,
      {ptr_A, LayoutA::packed(cutlass::conv::implicit_gemm_tensor_a_extent(kConvOperator, problem_size))},
      {ptr_B, LayoutB::packed(cutlass::conv::implicit_gemm_tensor_b_extent(kConvOperator, problem_size))},
      {ptr_C, LayoutC::packed(cutlass::conv::implicit_gemm_tensor_c_extent(kConvOperator, problem_size))},
      {ptr_D, LayoutC::packed(cutlass::conv::implicit_gemm_tensor_c_extent(kConvOperator, problem_size))},
      {static_cast<ElementCompute>(alpha), static_cast<ElementCompute>(beta)},
      kSplitKMode};
  // allocate workspace and run on the current PyTorch CUDA stream
  DeviceKernel op;
  const size_t workspace_size = op.get_workspace_size(arguments);
  at::Tensor workspace = at::empty({static_cast<int64_t>(workspace_size)}, A.options().dtype(at::kByte));
  cudaStream_t stream = at::cuda::getCurrentCUDAStream();
  TORCH_CHECK(op.can_implement(arguments) == cutlass::Status::kSuccess, "kernel cannot implement this problem");
  TORCH_CHECK(op.initialize(arguments, workspace.data_ptr(), stream) == cutlass::Status::kSuccess, "kernel initialization failed");
  TORCH_CHECK(op(stream) == cutlass::Status::kSuccess, "kernel launch failed");
  return D;
}

inline at::Tensor kernel_kernel(const at::Tensor& A, const at::Tensor& B, const c10::optional<at::Tensor>& C, double alpha, double beta) {
  return kernel_kernel_ex(A, B, C, alpha, beta, 1, 1, 1, 0, 0, 0, 1, 1, 1);
}

}  // namespace ucutlass_43140b666f778e26

using ucutlass_43140b666f778e26::kernel_kernel;
