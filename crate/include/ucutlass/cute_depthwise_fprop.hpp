// Support header for generated SM90 depthwise convolution headers.
//
// A direct NHWC depthwise forward convolution: one thread per output element,
// fp32 (or wider) accumulation, then D = act(alpha * acc + beta * C).
// Filters are laid out as [C, R, S, 1].
#pragma once

#include <cuda_runtime.h>

#include "cutlass/cutlass.h"
#include "cutlass/numeric_conversion.h"
#include "cutlass/conv/conv2d_problem_size.h"

namespace ucutlass {
namespace cute {

template <
    class ArchTag_, class ElementA_, class ElementB_, class ElementC_,
    class ElementAccumulator_, class ElementCompute_,
    int Stages_, int AlignmentA_, int AlignmentC_, class Activation_>
struct DepthwiseConv2dFprop {
  using ArchTag = ArchTag_;
  using ElementA = ElementA_;
  using ElementB = ElementB_;
  using ElementC = ElementC_;
  using ElementAccumulator = ElementAccumulator_;
  using ElementCompute = ElementCompute_;
  using Activation = Activation_;
  static constexpr int kStages = Stages_;
  static constexpr int kAlignmentA = AlignmentA_;
  static constexpr int kAlignmentC = AlignmentC_;

  struct EpilogueParams {
    ElementCompute alpha;
    ElementCompute beta;
  };

  struct Params {
    cutlass::conv::Conv2dProblemSize problem_size;
    ElementA const* ptr_A;
    ElementB const* ptr_B;
    ElementC const* ptr_C;
    ElementC* ptr_D;
    EpilogueParams epilogue;
  };
};

template <class Kernel>
__global__ void depthwise_conv2d_fprop_kernel(typename Kernel::Params params) {
  using ElementAccumulator = typename Kernel::ElementAccumulator;
  using ElementCompute = typename Kernel::ElementCompute;
  auto const& ps = params.problem_size;
  int64_t const total = int64_t(ps.N) * ps.P * ps.Q * ps.K;
  int64_t const idx = int64_t(blockIdx.x) * blockDim.x + threadIdx.x;
  if (idx >= total) {
    return;
  }
  int const k = int(idx % ps.K);
  int const q = int((idx / ps.K) % ps.Q);
  int const p = int((idx / (int64_t(ps.K) * ps.Q)) % ps.P);
  int const n = int(idx / (int64_t(ps.K) * ps.Q * ps.P));

  cutlass::NumericConverter<ElementAccumulator, typename Kernel::ElementA> cvt_a;
  cutlass::NumericConverter<ElementAccumulator, typename Kernel::ElementB> cvt_b;
  ElementAccumulator acc = ElementAccumulator(0);
  for (int r = 0; r < ps.R; ++r) {
    int const h = p * ps.stride_h - ps.pad_h + r * ps.dilation_h;
    if (h < 0 || h >= ps.H) {
      continue;
    }
    for (int s = 0; s < ps.S; ++s) {
      int const w = q * ps.stride_w - ps.pad_w + s * ps.dilation_w;
      if (w < 0 || w >= ps.W) {
        continue;
      }
      int64_t const a_off = ((int64_t(n) * ps.H + h) * ps.W + w) * ps.C + k;
      int64_t const b_off = (int64_t(k) * ps.R + r) * ps.S + s;
      acc += cvt_a(params.ptr_A[a_off]) * cvt_b(params.ptr_B[b_off]);
    }
  }

  ElementCompute v = params.epilogue.alpha * ElementCompute(acc);
  if (params.ptr_C != nullptr && params.epilogue.beta != ElementCompute(0)) {
    cutlass::NumericConverter<ElementCompute, typename Kernel::ElementC> cvt_c;
    v += params.epilogue.beta * cvt_c(params.ptr_C[idx]);
  }
  typename Kernel::Activation act;
  cutlass::NumericConverter<typename Kernel::ElementC, ElementCompute> cvt_d;
  params.ptr_D[idx] = cvt_d(act(v));
}

template <class Kernel_>
class DepthwiseConvolutionAdapter {
 public:
  using Kernel = Kernel_;
  using ElementA = typename Kernel::ElementA;
  using ElementB = typename Kernel::ElementB;
  using ElementC = typename Kernel::ElementC;
  using ElementCompute = typename Kernel::ElementCompute;

  struct Arguments {
    cutlass::conv::Conv2dProblemSize problem_size;
    ElementA* ptr_A;
    ElementB* ptr_B;
    ElementC* ptr_C;
    ElementC* ptr_D;
    typename Kernel::EpilogueParams epilogue;
  };

  static constexpr int kThreads = 256;

  size_t get_workspace_size(Arguments const&) const { return 0; }

  cutlass::Status can_implement(Arguments const& args) const {
    auto const& ps = args.problem_size;
    if (ps.groups != ps.C || ps.K != ps.C) {
      return cutlass::Status::kErrorInvalidProblem;
    }
    if (ps.stride_h > 2 || ps.stride_w > 2 || ps.dilation_h != 1 || ps.dilation_w != 1) {
      return cutlass::Status::kErrorNotSupported;
    }
    return cutlass::Status::kSuccess;
  }

  cutlass::Status initialize(Arguments const& args, void* = nullptr, cudaStream_t stream = nullptr) {
    params_ = {args.problem_size, args.ptr_A, args.ptr_B, args.ptr_C, args.ptr_D, args.epilogue};
    stream_ = stream;
    return cutlass::Status::kSuccess;
  }

  cutlass::Status operator()(cudaStream_t stream) {
    auto const& ps = params_.problem_size;
    int64_t const total = int64_t(ps.N) * ps.P * ps.Q * ps.K;
    if (total == 0) {
      return cutlass::Status::kSuccess;
    }
    dim3 grid(unsigned((total + kThreads - 1) / kThreads));
    depthwise_conv2d_fprop_kernel<Kernel><<<grid, kThreads, 0, stream>>>(params_);
    return cudaGetLastError() == cudaSuccess ? cutlass::Status::kSuccess : cutlass::Status::kErrorInternal;
  }

 private:
  typename Kernel::Params params_{};
  cudaStream_t stream_ = nullptr;
};

}  // namespace cute
}  // namespace ucutlass
