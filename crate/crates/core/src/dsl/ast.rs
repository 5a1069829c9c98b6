//! Syntax tree for DSL programs.
//!
//! The tree carries no source spans so that structurally identical programs
//! compare equal regardless of formatting. Spans live on errors only.

use std::fmt;

use serde::{Deserialize, Serialize};

keyword_enum! {
    /// Operator families that can head a kernel expression.
    pub enum OpKind {
        Gemm => "gemm",
        GroupedGemm => "grouped_gemm",
        Conv1d => "conv1d",
        Conv2d => "conv2d",
        Conv3d => "conv3d",
        Conv2dDgrad => "conv2d_dgrad",
        Conv2dWgrad => "conv2d_wgrad",
        Conv3dDgrad => "conv3d_dgrad",
        Conv3dWgrad => "conv3d_wgrad",
        DepthwiseConv => "depthwise_conv",
        GroupedConv => "grouped_conv",
    }
}

impl OpKind {
    pub fn is_gemm_family(self) -> bool {
        matches!(self, OpKind::Gemm | OpKind::GroupedGemm)
    }

    pub fn is_conv(self) -> bool {
        !self.is_gemm_family()
    }

    /// Conv operators over 3D (NDHWC) activations.
    pub fn is_3d_conv(self) -> bool {
        matches!(self, OpKind::Conv3d | OpKind::Conv3dDgrad | OpKind::Conv3dWgrad)
    }
}

keyword_enum! {
    /// Fluent `.with_*` bindings.
    pub enum BindingName {
        Dtype => "with_dtype",
        Layout => "with_layout",
        Arch => "with_arch",
        Alignment => "with_alignment",
        Stages => "with_stages",
        Tile => "with_tile",
        ThreadblockShape => "with_threadblockshape",
        Cluster => "with_cluster",
        Scheduler => "with_scheduler",
        Swizzle => "with_swizzle",
        Iterator => "with_iterator",
        SplitK => "with_split_k",
        OperandSwap => "with_operand_swap",
    }
}

keyword_enum! {
    /// Epilogue operations composable with `>>`.
    pub enum EpilogueName {
        Relu => "relu",
        Gelu => "gelu",
        Silu => "silu",
        Sigmoid => "sigmoid",
        Tanh => "tanh",
        Mish => "mish",
        Hardswish => "hardswish",
        LeakyRelu => "leaky_relu",
        Elu => "elu",
        Clip => "clip",
        Clamp => "clamp",
        Bias => "bias",
        PerChannelScale => "per_channel_scale",
        PerRowScale => "per_row_scale",
        PerColScale => "per_col_scale",
        Scale => "scale",
        AuxStore => "aux_store",
        AuxLoad => "aux_load",
        Custom => "custom",
    }
}

/// A literal argument value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Ident(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Float(x) => Some(x),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "boolean",
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Ident(_) => "identifier",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => {
                // Display never uses an exponent; keep a '.' so it relexes as a float.
                let s = x.to_string();
                if s.contains('.') {
                    f.write_str(&s)
                } else {
                    write!(f, "{s}.0")
                }
            }
            Value::Ident(s) => f.write_str(s),
        }
    }
}

/// One argument: `key=value` or a bare positional value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arg {
    pub key: Option<String>,
    pub value: Value,
}

impl Arg {
    pub fn keyed(key: impl Into<String>, value: Value) -> Self {
        Arg { key: Some(key.into()), value }
    }

    pub fn positional(value: Value) -> Self {
        Arg { key: None, value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub name: BindingName,
    pub args: Vec<Arg>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpilogueOp {
    pub name: EpilogueName,
    pub args: Vec<Arg>,
    /// Opaque expression text; present iff `name == Custom`.
    pub custom_expr: Option<String>,
    /// `inputs={name: ident, ...}` of a custom epilogue, in source order.
    pub custom_inputs: Option<Vec<(String, String)>>,
}

impl EpilogueOp {
    pub fn builtin(name: EpilogueName, args: Vec<Arg>) -> Self {
        EpilogueOp { name, args, custom_expr: None, custom_inputs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelExpr {
    pub op: OpKind,
    pub bindings: Vec<Binding>,
    pub epilogue: Vec<EpilogueOp>,
}

impl KernelExpr {
    pub fn binding(&self, name: BindingName) -> Option<&Binding> {
        self.bindings.iter().find(|b| b.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stage {
    Transpose(Vec<Arg>),
    Kernel(KernelExpr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineExpr {
    pub stages: Vec<Stage>,
}

impl PipelineExpr {
    pub fn kernel(&self) -> &KernelExpr {
        self.stages
            .iter()
            .find_map(|s| match s {
                Stage::Kernel(k) => Some(k),
                Stage::Transpose(_) => None,
            })
            .expect("pipeline holds exactly one kernel stage")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Kernel(KernelExpr),
    Pipeline(PipelineExpr),
}

/// A parsed program together with its verbatim source.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DslProgram {
    pub root: Expr,
    pub source_text: String,
}
