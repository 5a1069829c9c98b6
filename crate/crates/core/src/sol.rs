//! Analytical speed-of-light (roofline) bounds.
//!
//! Four steps: characterize the problem (FLOPs, best-case DRAM bytes), scale
//! the hardware peaks by clock, take `t_sol = max(t_compute, t_mem)`, and
//! classify the bottleneck by comparing arithmetic intensity to the ridge
//! point.
//!
//! Byte counting assumes perfect caching: each unique external input element
//! is read once and each final output element is written once. Intermediates
//! between chained ops are free under `fusion = "perfect"` and round-trip
//! through DRAM under `fusion = "none"`.

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::DType;

pub const DEFAULT_CLOCK_MHZ: f64 = 1500.0;

/// Caveats printed with every report.
pub const CAVEATS: &[&str] = &[
    "perfect caching assumed: re-fetches caused by limited on-chip storage are not modeled, so the bound may be too tight",
    "input-value sparsity is not modeled",
    "reduced-precision math beyond the assumed precision can beat this bound",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolError {
    #[error("invalid problem spec: {0}")]
    Spec(String),
    #[error("invalid hardware spec: {0}")]
    Hw(String),
    #[error("cannot parse {what}: {message}")]
    Parse { what: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    Perfect,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GemmDims {
    pub m: u64,
    pub n: u64,
    pub k: u64,
}

fn one() -> u64 {
    1
}

/// Convolution dims. `spatial` and `kernel` hold one entry per spatial axis;
/// `stride`, `pad` and `dilation` may be empty (defaults 1, 0, 1) or have one
/// entry per axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvDims {
    pub n: u64,
    /// Input channels.
    pub c: u64,
    /// Output channels.
    pub k: u64,
    pub spatial: Vec<u64>,
    pub kernel: Vec<u64>,
    #[serde(default)]
    pub stride: Vec<u64>,
    #[serde(default)]
    pub pad: Vec<u64>,
    #[serde(default)]
    pub dilation: Vec<u64>,
    #[serde(default = "one")]
    pub groups: u64,
}

impl ConvDims {
    fn axis(v: &[u64], i: usize, default: u64) -> u64 {
        v.get(i).copied().unwrap_or(default)
    }

    pub fn output_spatial(&self) -> Result<Vec<u64>, SolError> {
        (0..self.spatial.len())
            .map(|i| {
                let size = self.spatial[i] + 2 * Self::axis(&self.pad, i, 0);
                let dil = Self::axis(&self.dilation, i, 1);
                let reach = dil * (self.kernel[i] - 1) + 1;
                if reach > size {
                    return Err(SolError::Spec(format!(
                        "conv axis {i}: kernel reach {reach} exceeds padded input {size}"
                    )));
                }
                Ok((size - reach) / Self::axis(&self.stride, i, 1) + 1)
            })
            .collect()
    }
}

/// One operator of the reference computation. `elems` counts the elements of
/// the op's main input; `axis` is the length of the reduced/normalized axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpNode {
    Gemm(GemmDims),
    BatchedGemm {
        batch: u64,
        m: u64,
        n: u64,
        k: u64,
    },
    GroupedGemm {
        problems: Vec<GemmDims>,
    },
    Conv1d(ConvDims),
    Conv2d(ConvDims),
    Conv3d(ConvDims),
    Elementwise {
        elems: u64,
        #[serde(default = "one")]
        flops_per_elem: u64,
        /// Elements of additional external operands (a bias vector, a
        /// residual tensor).
        #[serde(default)]
        extra_input_elems: u64,
    },
    Reduction {
        elems: u64,
        axis: u64,
    },
    Softmax {
        elems: u64,
        axis: u64,
    },
    Layernorm {
        elems: u64,
        axis: u64,
    },
    Rmsnorm {
        elems: u64,
        axis: u64,
    },
    CumulativeScan {
        elems: u64,
        axis: u64,
    },
}

/// FLOPs per element for the ops without a closed-form count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlopConventions {
    pub reduction: u64,
    pub softmax: u64,
    pub layernorm: u64,
    pub rmsnorm: u64,
    pub cumulative_scan: u64,
}

impl Default for FlopConventions {
    fn default() -> Self {
        FlopConventions { reduction: 1, softmax: 5, layernorm: 7, rmsnorm: 4, cumulative_scan: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub ops: Vec<OpNode>,
    pub fusion: Fusion,
    pub io_dtype: DType,
    #[serde(default)]
    pub conventions: FlopConventions,
}

impl ProblemSpec {
    pub fn from_toml_str(s: &str) -> Result<Self, SolError> {
        toml::from_str(s).map_err(|e| SolError::Parse { what: "problem spec", message: e.to_string() })
    }
}

/// Element traffic of one op, before fusion is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Traffic {
    flops: u64,
    /// Main input: fed by the previous op when chained.
    main_in: u64,
    /// Weights and other operands that always come from DRAM.
    side_in: u64,
    out: u64,
}

fn mul(parts: &[u64]) -> Result<u64, SolError> {
    parts
        .iter()
        .try_fold(1u64, |acc, &p| acc.checked_mul(p))
        .ok_or_else(|| SolError::Spec("element or FLOP count overflows 64 bits".into()))
}

fn add(a: u64, b: u64) -> Result<u64, SolError> {
    a.checked_add(b).ok_or_else(|| SolError::Spec("element or FLOP count overflows 64 bits".into()))
}

fn positive(what: &str, v: u64) -> Result<(), SolError> {
    if v == 0 {
        return Err(SolError::Spec(format!("{what} must be >= 1")));
    }
    Ok(())
}

impl OpNode {
    pub fn kind(&self) -> &'static str {
        match self {
            OpNode::Gemm(_) => "gemm",
            OpNode::BatchedGemm { .. } => "batched_gemm",
            OpNode::GroupedGemm { .. } => "grouped_gemm",
            OpNode::Conv1d(_) => "conv1d",
            OpNode::Conv2d(_) => "conv2d",
            OpNode::Conv3d(_) => "conv3d",
            OpNode::Elementwise { .. } => "elementwise",
            OpNode::Reduction { .. } => "reduction",
            OpNode::Softmax { .. } => "softmax",
            OpNode::Layernorm { .. } => "layernorm",
            OpNode::Rmsnorm { .. } => "rmsnorm",
            OpNode::CumulativeScan { .. } => "cumulative_scan",
        }
    }

    fn traffic(&self, conv: &FlopConventions) -> Result<Traffic, SolError> {
        let gemm = |b: u64, g: &GemmDims| -> Result<Traffic, SolError> {
            positive("batch", b)?;
            positive("m", g.m)?;
            positive("n", g.n)?;
            positive("k", g.k)?;
            Ok(Traffic {
                flops: mul(&[2, b, g.m, g.n, g.k])?,
                main_in: mul(&[b, g.m, g.k])?,
                side_in: mul(&[b, g.k, g.n])?,
                out: mul(&[b, g.m, g.n])?,
            })
        };
        let axis_op = |elems: u64, axis: u64, per_elem: u64, reduces: bool, weights: u64| {
            positive("elems", elems)?;
            positive("axis", axis)?;
            if elems % axis != 0 {
                return Err(SolError::Spec(format!("axis length {axis} does not divide elems {elems}")));
            }
            Ok(Traffic {
                flops: mul(&[per_elem, elems])?,
                main_in: elems,
                side_in: mul(&[weights, axis])?,
                out: if reduces { elems / axis } else { elems },
            })
        };
        match self {
            OpNode::Gemm(g) => gemm(1, g),
            OpNode::BatchedGemm { batch, m, n, k } => gemm(*batch, &GemmDims { m: *m, n: *n, k: *k }),
            OpNode::GroupedGemm { problems } => {
                if problems.is_empty() {
                    return Err(SolError::Spec("grouped_gemm needs at least one problem".into()));
                }
                let mut t = Traffic { flops: 0, main_in: 0, side_in: 0, out: 0 };
                for g in problems {
                    let p = gemm(1, g)?;
                    t.flops = add(t.flops, p.flops)?;
                    t.main_in = add(t.main_in, p.main_in)?;
                    t.side_in = add(t.side_in, p.side_in)?;
                    t.out = add(t.out, p.out)?;
                }
                Ok(t)
            }
            OpNode::Conv1d(c) => conv_traffic(c, 1),
            OpNode::Conv2d(c) => conv_traffic(c, 2),
            OpNode::Conv3d(c) => conv_traffic(c, 3),
            OpNode::Elementwise { elems, flops_per_elem, extra_input_elems } => {
                positive("elems", *elems)?;
                positive("flops_per_elem", *flops_per_elem)?;
                Ok(Traffic {
                    flops: mul(&[*elems, *flops_per_elem])?,
                    main_in: *elems,
                    side_in: *extra_input_elems,
                    out: *elems,
                })
            }
            OpNode::Reduction { elems, axis } => axis_op(*elems, *axis, conv.reduction, true, 0),
            OpNode::Softmax { elems, axis } => axis_op(*elems, *axis, conv.softmax, false, 0),
            OpNode::Layernorm { elems, axis } => axis_op(*elems, *axis, conv.layernorm, false, 2),
            OpNode::Rmsnorm { elems, axis } => axis_op(*elems, *axis, conv.rmsnorm, false, 1),
            OpNode::CumulativeScan { elems, axis } => axis_op(*elems, *axis, conv.cumulative_scan, false, 0),
        }
    }
}

fn conv_traffic(c: &ConvDims, rank: usize) -> Result<Traffic, SolError> {
    if c.spatial.len() != rank || c.kernel.len() != rank {
        return Err(SolError::Spec(format!("conv{rank}d needs {rank} spatial and kernel extents")));
    }
    for (what, v) in [("stride", &c.stride), ("pad", &c.pad), ("dilation", &c.dilation)] {
        if !v.is_empty() && v.len() != rank {
            return Err(SolError::Spec(format!("conv{rank}d {what} needs 0 or {rank} entries")));
        }
    }
    for (what, v) in [("n", c.n), ("c", c.c), ("k", c.k), ("groups", c.groups)] {
        positive(what, v)?;
    }
    for &v in c.spatial.iter().chain(&c.kernel).chain(&c.stride).chain(&c.dilation) {
        positive("conv extents, strides and dilations", v)?;
    }
    if c.c % c.groups != 0 || c.k % c.groups != 0 {
        return Err(SolError::Spec(format!("groups {} must divide c {} and k {}", c.groups, c.c, c.k)));
    }
    let out_spatial = c.output_spatial()?;
    let out = mul(&[&[c.n, c.k][..], &out_spatial].concat())?;
    let kvol = mul(&c.kernel)?;
    Ok(Traffic {
        flops: mul(&[2, out, c.c / c.groups, kvol])?,
        main_in: mul(&[&[c.n, c.c][..], &c.spatial].concat())?,
        side_in: mul(&[c.k, c.c / c.groups, kvol])?,
        out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCost {
    pub index: usize,
    pub flops: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Characterization {
    pub flops: u64,
    pub bytes: u64,
    pub per_op: Vec<OpCost>,
}

/// Total FLOPs and best-case DRAM bytes. Per-op bytes sum to the total: under
/// perfect fusion an op is charged for the external operands it reads, and
/// the last op also for the final output.
pub fn characterize(spec: &ProblemSpec) -> Result<Characterization, SolError> {
    if spec.ops.is_empty() {
        return Err(SolError::Spec("problem has no ops".into()));
    }
    let size = spec.io_dtype.size_bytes();
    let mut per_op = Vec::with_capacity(spec.ops.len());
    let (mut flops, mut bytes) = (0u64, 0u64);
    let mut prev_out: Option<(u64, &OpNode)> = None;
    let last = spec.ops.len() - 1;
    for (index, op) in spec.ops.iter().enumerate() {
        let t = op.traffic(&spec.conventions).map_err(|e| match e {
            SolError::Spec(m) => SolError::Spec(format!("op {index} ({}): {m}", op.kind())),
            other => other,
        })?;
        if let Some((out, prev)) = prev_out {
            if t.main_in != out {
                return Err(SolError::Spec(format!(
                    "op {index} ({}) reads {} elements but op {} ({}) produces {out}",
                    op.kind(),
                    t.main_in,
                    index - 1,
                    prev.kind()
                )));
            }
        }
        let elems = match spec.fusion {
            Fusion::None => add(add(t.main_in, t.side_in)?, t.out)?,
            Fusion::Perfect => {
                let mut e = t.side_in;
                if index == 0 {
                    e = add(e, t.main_in)?;
                }
                if index == last {
                    e = add(e, t.out)?;
                }
                e
            }
        };
        let op_bytes = mul(&[elems, size])?;
        per_op.push(OpCost { index, flops: t.flops, bytes: op_bytes });
        flops = add(flops, t.flops)?;
        bytes = add(bytes, op_bytes)?;
        prev_out = Some((t.out, op));
    }
    Ok(Characterization { flops, bytes, per_op })
}

fn default_clock() -> f64 {
    DEFAULT_CLOCK_MHZ
}

/// Published peaks at `reference_clock_mhz`. The `fp32` entry holds the
/// TF32 tensor-core rate used for FP32 problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareSpec {
    pub name: String,
    pub peak_flops: BTreeMap<DType, f64>,
    pub peak_bw: f64,
    pub reference_clock_mhz: f64,
    #[serde(default = "default_clock")]
    pub current_clock_mhz: f64,
    #[serde(default)]
    pub bw_clock_scaling: bool,
}

impl HardwareSpec {
    pub fn from_toml_str(s: &str) -> Result<Self, SolError> {
        let hw: HardwareSpec =
            toml::from_str(s).map_err(|e| SolError::Parse { what: "hardware spec", message: e.to_string() })?;
        hw.check()?;
        Ok(hw)
    }

    pub fn check(&self) -> Result<(), SolError> {
        let bad = |v: f64| !(v.is_finite() && v > 0.0);
        if bad(self.peak_bw) {
            return Err(SolError::Hw(format!("peak_bw must be positive, got {}", self.peak_bw)));
        }
        if bad(self.reference_clock_mhz) || bad(self.current_clock_mhz) {
            return Err(SolError::Hw("clocks must be positive".into()));
        }
        if let Some((dt, v)) = self.peak_flops.iter().find(|(_, v)| bad(**v)) {
            return Err(SolError::Hw(format!("peak_flops.{dt} must be positive, got {v}")));
        }
        Ok(())
    }

    pub fn clock_ratio(&self) -> f64 {
        self.current_clock_mhz / self.reference_clock_mhz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub peak_flops_eff: f64,
    pub peak_bw_eff: f64,
}

pub fn effective_limits(hw: &HardwareSpec, dtype: DType) -> Result<Limits, SolError> {
    hw.check()?;
    let peak = hw
        .peak_flops
        .get(&dtype)
        .ok_or_else(|| SolError::Hw(format!("{} has no peak_flops entry for {dtype}", hw.name)))?;
    let ratio = hw.clock_ratio();
    Ok(Limits {
        peak_flops_eff: peak * ratio,
        peak_bw_eff: if hw.bw_clock_scaling { hw.peak_bw * ratio } else { hw.peak_bw },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bottleneck {
    ComputeBound,
    MemoryBound,
}

impl fmt::Display for Bottleneck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bottleneck::ComputeBound => "compute_bound",
            Bottleneck::MemoryBound => "memory_bound",
        })
    }
}

/// Ties go to compute-bound.
pub fn classify(arithmetic_intensity: f64, ridge_point: f64) -> Bottleneck {
    if arithmetic_intensity >= ridge_point {
        Bottleneck::ComputeBound
    } else {
        Bottleneck::MemoryBound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolReport {
    pub problem: String,
    pub hardware: String,
    pub fusion: Fusion,
    pub io_dtype: DType,
    pub assumption_dtype: DType,
    pub flops: u64,
    pub bytes: u64,
    pub arithmetic_intensity: f64,
    pub clock_ratio: f64,
    pub peak_flops_eff: f64,
    pub peak_bw_eff: f64,
    pub t_compute: f64,
    pub t_mem: f64,
    pub t_sol: f64,
    pub ridge_point: f64,
    pub bottleneck: Bottleneck,
    pub per_op_breakdown: Vec<OpCost>,
    pub caveats: Vec<String>,
}

/// SOL bound with math costed at `dtype` peak; bytes stay at the problem's
/// io dtype.
pub fn sol(spec: &ProblemSpec, hw: &HardwareSpec, dtype: DType) -> Result<SolReport, SolError> {
    let ch = characterize(spec)?;
    let lim = effective_limits(hw, dtype)?;
    let (flops, bytes) = (ch.flops as f64, ch.bytes as f64);
    let t_compute = flops / lim.peak_flops_eff;
    let t_mem = bytes / lim.peak_bw_eff;
    let arithmetic_intensity = flops / bytes;
    let ridge_point = lim.peak_flops_eff / lim.peak_bw_eff;
    Ok(SolReport {
        problem: spec.name.clone(),
        hardware: hw.name.clone(),
        fusion: spec.fusion,
        io_dtype: spec.io_dtype,
        assumption_dtype: dtype,
        flops: ch.flops,
        bytes: ch.bytes,
        arithmetic_intensity,
        clock_ratio: hw.clock_ratio(),
        peak_flops_eff: lim.peak_flops_eff,
        peak_bw_eff: lim.peak_bw_eff,
        t_compute,
        t_mem,
        t_sol: t_compute.max(t_mem),
        ridge_point,
        bottleneck: classify(arithmetic_intensity, ridge_point),
        per_op_breakdown: ch.per_op,
        caveats: CAVEATS.iter().map(|s| s.to_string()).collect(),
    })
}

/// The tighter bound used for scheduling and integrity checks.
pub fn sol_fp16_variant(spec: &ProblemSpec, hw: &HardwareSpec) -> Result<SolReport, SolError> {
    sol(spec, hw, DType::Fp16)
}

fn si(v: f64, unit: &str) -> String {
    let (scale, prefix) = [(1e15, "P"), (1e12, "T"), (1e9, "G"), (1e6, "M"), (1e3, "k")]
        .into_iter()
        .find(|(s, _)| v.abs() >= *s)
        .unwrap_or((1.0, ""));
    format!("{:.3} {prefix}{unit}", v / scale)
}

fn seconds(v: f64) -> String {
    if v >= 1.0 {
        format!("{v:.3} s")
    } else if v >= 1e-3 {
        format!("{:.3} ms", v * 1e3)
    } else {
        format!("{:.3} us", v * 1e6)
    }
}

impl SolReport {
    /// Recomputes the derived fields from the stored counts and peaks.
    pub fn is_consistent(&self) -> bool {
        let ai = self.flops as f64 / self.bytes as f64;
        let ridge = self.peak_flops_eff / self.peak_bw_eff;
        let tc = self.flops as f64 / self.peak_flops_eff;
        let tm = self.bytes as f64 / self.peak_bw_eff;
        ai == self.arithmetic_intensity
            && ridge == self.ridge_point
            && tc == self.t_compute
            && tm == self.t_mem
            && self.t_sol == tc.max(tm)
            && self.bottleneck == classify(ai, ridge)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "SOL report: {} on {}", self.problem, self.hardware);
        s.push_str("\n## Problem characterization\n");
        let _ = writeln!(s, "io dtype: {}   fusion: {:?}", self.io_dtype, self.fusion);
        let _ = writeln!(s, "total FLOPs: {} ({})", self.flops, si(self.flops as f64, "FLOP"));
        let _ = writeln!(s, "best-case DRAM bytes: {} ({})", self.bytes, si(self.bytes as f64, "B"));
        for op in &self.per_op_breakdown {
            let _ = writeln!(s, "  op {}: {} FLOPs, {} bytes", op.index, op.flops, op.bytes);
        }
        s.push_str("\n## Hardware limits\n");
        let _ = writeln!(s, "math precision assumed: {}", self.assumption_dtype);
        let _ = writeln!(s, "clock scale: {:.4}", self.clock_ratio);
        let _ = writeln!(s, "peak compute: {}", si(self.peak_flops_eff, "FLOP/s"));
        let _ = writeln!(s, "peak bandwidth: {}", si(self.peak_bw_eff, "B/s"));
        s.push_str("\n## Roofline bound\n");
        let _ = writeln!(s, "arithmetic intensity: {:.3} FLOP/B", self.arithmetic_intensity);
        let _ = writeln!(s, "T_compute: {}", seconds(self.t_compute));
        let _ = writeln!(s, "T_mem: {}", seconds(self.t_mem));
        let _ = writeln!(s, "t_SOL = max(T_compute, T_mem) = {}", seconds(self.t_sol));
        s.push_str("\n## Bottleneck classification\n");
        let rel = if self.bottleneck == Bottleneck::ComputeBound { ">=" } else { "<" };
        let _ = writeln!(
            s,
            "{}: arithmetic intensity {:.3} {rel} ridge point {:.3} FLOP/B",
            self.bottleneck, self.arithmetic_intensity, self.ridge_point
        );
        s.push_str("\n## Assumptions\n");
        for c in &self.caveats {
            let _ = writeln!(s, "- {c}");
        }
        s
    }
}
