use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dsl::{EpilogueName, OpKind, Value};

keyword_enum! {
    /// Element data types.
    pub enum DType {
        Fp64 => "fp64",
        Fp32 => "fp32",
        Fp16 => "fp16",
        Bf16 => "bf16",
        Fp8 => "fp8",
        Int8 => "int8",
    }
}

impl DType {
    pub fn size_bytes(self) -> u64 {
        match self {
            DType::Fp64 => 8,
            DType::Fp32 => 4,
            DType::Fp16 | DType::Bf16 => 2,
            DType::Fp8 | DType::Int8 => 1,
        }
    }
}

keyword_enum! {
    pub enum Layout {
        RowMajor => "RowMajor",
        ColMajor => "ColMajor",
        Nhwc => "NHWC",
        Ndhwc => "NDHWC",
    }
}

keyword_enum! {
    /// Target GPU architectures, ordered oldest first.
    pub enum Arch {
        Sm70 => "sm_70",
        Sm75 => "sm_75",
        Sm80 => "sm_80",
        Sm86 => "sm_86",
        Sm89 => "sm_89",
        Sm90 => "sm_90",
        Sm90a => "sm_90a",
    }
}

impl Arch {
    /// Compute capability as an integer, e.g. 86 for `sm_86`.
    pub fn capability(self) -> u32 {
        match self {
            Arch::Sm70 => 70,
            Arch::Sm75 => 75,
            Arch::Sm80 => 80,
            Arch::Sm86 => 86,
            Arch::Sm89 => 89,
            Arch::Sm90 | Arch::Sm90a => 90,
        }
    }

    pub fn is_sm90_plus(self) -> bool {
        self.capability() >= 90
    }

    /// The SM70–89 band served by the pre-Hopper templates.
    pub fn is_pre_sm90(self) -> bool {
        !self.is_sm90_plus()
    }

    pub fn is_sm80_to_89(self) -> bool {
        (80..90).contains(&self.capability())
    }
}

keyword_enum! {
    pub enum KernelSchedule {
        Tma => "tma",
        Cooperative => "cooperative",
        Pingpong => "pingpong",
        Default => "default",
    }
}

keyword_enum! {
    pub enum EpilogueSchedule {
        Tma => "tma",
        Default => "default",
    }
}

keyword_enum! {
    pub enum IteratorAlgorithm {
        Analytic => "analytic",
        Optimized => "optimized",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DTypes {
    pub input: DType,
    pub acc: DType,
    pub output: DType,
}

impl DTypes {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, DType)> {
        [("input", self.input), ("acc", self.acc), ("output", self.output)].into_iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layouts {
    pub a: Layout,
    pub b: Layout,
    pub c: Layout,
}

/// Per-operand alignment, in elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alignment {
    pub a: u32,
    pub b: u32,
    pub c: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileShape {
    pub m: u32,
    pub n: u32,
    pub k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterShape {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scheduler {
    pub kernel: KernelSchedule,
    pub epilogue: EpilogueSchedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitK {
    pub slices: u32,
}

/// One fused epilogue operation with canonicalized (key-sorted) parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpilogueNode {
    pub name: EpilogueName,
    pub params: BTreeMap<String, Value>,
    pub custom_expr: Option<String>,
    pub custom_inputs: Option<BTreeMap<String, String>>,
}

impl EpilogueNode {
    pub fn new(name: EpilogueName) -> Self {
        EpilogueNode { name, params: BTreeMap::new(), custom_expr: None, custom_inputs: None }
    }

    pub fn with_param(mut self, key: &str, value: Value) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn param_f64(&self, key: &str) -> Option<f64> {
        self.params.get(key).and_then(Value::as_f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub op_kind: OpKind,
    pub dtypes: DTypes,
    pub layouts: Layouts,
    pub arch: Arch,
    pub alignment: Alignment,
    pub stages: u32,
    pub tile: Option<TileShape>,
    pub threadblock_shape: Option<TileShape>,
    pub cluster: Option<ClusterShape>,
    pub scheduler: Option<Scheduler>,
    pub swizzle: Option<u32>,
    pub iterator: Option<IteratorAlgorithm>,
    pub split_k: Option<SplitK>,
    pub operand_swap: Option<bool>,
    pub epilogue: Vec<EpilogueNode>,
}

pub const DEFAULT_ARCH: Arch = Arch::Sm90a;
pub const DEFAULT_STAGES: u32 = 2;
pub const DEFAULT_DTYPE: DType = DType::Fp32;
pub const DEFAULT_ALIGNMENT: u32 = 1;

/// Activation layout of conv operators; GEMMs default to row-major.
pub fn default_layout(op: OpKind) -> Layout {
    if op.is_gemm_family() {
        Layout::RowMajor
    } else if op.is_3d_conv() {
        Layout::Ndhwc
    } else {
        Layout::Nhwc
    }
}

impl KernelConfig {
    /// A config with every binding absent: the documented defaults only.
    pub fn new(op_kind: OpKind) -> Self {
        let layout = default_layout(op_kind);
        KernelConfig {
            op_kind,
            dtypes: DTypes { input: DEFAULT_DTYPE, acc: DEFAULT_DTYPE, output: DEFAULT_DTYPE },
            layouts: Layouts { a: layout, b: layout, c: layout },
            arch: DEFAULT_ARCH,
            alignment: Alignment { a: DEFAULT_ALIGNMENT, b: DEFAULT_ALIGNMENT, c: DEFAULT_ALIGNMENT },
            stages: DEFAULT_STAGES,
            tile: None,
            threadblock_shape: None,
            cluster: None,
            scheduler: None,
            swizzle: None,
            iterator: None,
            split_k: None,
            operand_swap: None,
            epilogue: Vec::new(),
        }
    }

    pub fn with_arch(mut self, arch: Arch) -> Self {
        self.arch = arch;
        self
    }
}

/// A transpose stage, optionally fused with a dtype conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransformStage {
    pub convert_dtype: Option<DType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub pre_transforms: Vec<TransformStage>,
    pub kernel: KernelConfig,
    pub post_transforms: Vec<TransformStage>,
}

/// Result of lowering: a single kernel or a pipeline around one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Config {
    Kernel(KernelConfig),
    Pipeline(PipelineConfig),
}

impl Config {
    pub fn kernel(&self) -> &KernelConfig {
        match self {
            Config::Kernel(k) => k,
            Config::Pipeline(p) => &p.kernel,
        }
    }

    pub fn kernel_mut(&mut self) -> &mut KernelConfig {
        match self {
            Config::Kernel(k) => k,
            Config::Pipeline(p) => &mut p.kernel,
        }
    }
}

impl From<KernelConfig> for Config {
    fn from(k: KernelConfig) -> Self {
        Config::Kernel(k)
    }
}

impl From<PipelineConfig> for Config {
    fn from(p: PipelineConfig) -> Self {
        Config::Pipeline(p)
    }
}
