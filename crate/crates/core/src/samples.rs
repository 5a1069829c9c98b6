//! Reference DSL programs shared by tests, docs and the CLI.

/// SM90a GEMM with a fused bias, GELU and clip epilogue.
pub const SM90A_GEMM_EVT: &str = "gemm()
  .with_dtype(input=fp16, acc=fp32, output=fp16)
  .with_layout(A=RowMajor, B=RowMajor, C=RowMajor)
  .with_arch(sm_90a)
  .with_threadblockshape(m=128, n=128, k=64)
  .with_stages(2)
  .with_alignment(A=8, B=8, C=8)
  .with_scheduler(kernel=tma, epilogue=tma)
  >> bias() >> gelu() >> clip(min=0, max=6)";

/// Ampere conv2d forward with a ReLU epilogue.
pub const SM80_CONV2D: &str = "conv2d()
  .with_dtype(input=fp16, acc=fp32, output=fp16)
  .with_arch(sm_80)
  .with_tile(m=128, n=128, k=32)
  .with_stages(3)
  .with_alignment(8)
  .with_iterator(optimized)
  >> relu()";

/// fp32 GEMM wrapped in transposes that convert to fp16 and back.
pub const SM90A_TRANSPOSE_PIPELINE: &str = "pipeline(
  transpose(dtype=fp16),
  gemm()
    .with_dtype(input=fp16, acc=fp32, output=fp16)
    .with_arch(sm_90a)
    .with_threadblockshape(m=128, n=256, k=64)
    .with_alignment(8)
    >> bias() >> relu(),
  transpose(dtype=fp32)
)";
