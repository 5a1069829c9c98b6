//! Static validation of lowered configurations.
//!
//! Every rule runs on every config; a report lists all violations, not just
//! the first. Rules:
//!
//! | id | checks |
//! |----|--------|
//! | R1 | operator family vs. architecture |
//! | R2 | binding/feature vs. architecture and operator |
//! | R3 | dtype vs. architecture |
//! | R4 | `with_tile` and `with_threadblockshape` are exclusive |
//! | R5 | epilogue parameters |
//! | R6 | depthwise conv on SM90+ (CuTe backend) restrictions |
//! | R7 | pipeline dtype chain |
//! | R8 | operand alignment |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::{EpilogueName, OpKind, Value};
use crate::emit::{backend_for, legacy_epilogue_conflict, Backend};
use crate::ir::{Arch, Config, DType, EpilogueNode, KernelConfig, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule_id: RuleId,
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}] {}: {}", self.rule_id, self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Warning)
    }

    pub fn has_rule(&self, rule: RuleId, severity: Severity) -> bool {
        self.diagnostics.iter().any(|d| d.rule_id == rule && d.severity == severity)
    }

    /// One JSON object per line, one line per diagnostic.
    pub fn to_jsonl(&self) -> String {
        self.diagnostics
            .iter()
            .map(|d| serde_json::to_string(d).expect("diagnostic serializes") + "\n")
            .collect()
    }
}

/// How an operator family is served on a given architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpSupport {
    Native,
    /// Depthwise conv on SM90+, routed to the CuTe backend.
    CuteBackend,
    Unsupported,
}

pub fn op_support(op: OpKind, arch: Arch) -> OpSupport {
    let cc = arch.capability();
    let ok = match op {
        OpKind::GroupedGemm => cc >= 80,
        OpKind::Conv3dWgrad => cc < 90,
        OpKind::GroupedConv => (80..90).contains(&cc),
        OpKind::DepthwiseConv if cc >= 90 => return OpSupport::CuteBackend,
        _ => true,
    };
    if ok {
        OpSupport::Native
    } else {
        OpSupport::Unsupported
    }
}

pub fn validate(config: &Config) -> ValidationReport {
    let mut v = Validator::default();
    match config {
        Config::Kernel(k) => v.kernel(k),
        Config::Pipeline(p) => v.pipeline(p),
    }
    let ok = !v.out.iter().any(|d| d.severity == Severity::Error);
    ValidationReport { ok, diagnostics: v.out }
}

#[derive(Default)]
struct Validator {
    out: Vec<Diagnostic>,
}

impl Validator {
    fn push(&mut self, rule_id: RuleId, severity: Severity, field: impl Into<String>, message: impl Into<String>) {
        self.out.push(Diagnostic { rule_id, severity, field: field.into(), message: message.into() });
    }

    fn error(&mut self, rule: RuleId, field: impl Into<String>, message: impl Into<String>) {
        self.push(rule, Severity::Error, field, message);
    }

    fn warn(&mut self, rule: RuleId, field: impl Into<String>, message: impl Into<String>) {
        self.push(rule, Severity::Warning, field, message);
    }

    fn pipeline(&mut self, p: &PipelineConfig) {
        self.kernel(&p.kernel);
        let arch = p.kernel.arch;
        let stages = p.pre_transforms.iter().map(|t| ("pre_transforms", t)).enumerate();
        let post = p.post_transforms.iter().map(|t| ("post_transforms", t)).enumerate();
        for (i, (side, t)) in stages.chain(post) {
            if t.convert_dtype == Some(DType::Fp8) && !arch.is_sm90_plus() {
                self.error(
                    RuleId::R3,
                    format!("{side}[{i}].convert_dtype"),
                    format!("fp8 conversion requires SM90+ but the pipeline targets {arch}; convert to fp16 or bf16, or target sm_90a"),
                );
            }
        }
        if let Some(want) = p.pre_transforms.last().and_then(|t| t.convert_dtype) {
            let got = p.kernel.dtypes.input;
            if want != got {
                self.error(
                    RuleId::R7,
                    "dtypes.input",
                    format!(
                        "the last pre-transform converts to {want} but the kernel reads {got} inputs, so the stages do not chain; set with_dtype(input={want}) or transpose(dtype={got})"
                    ),
                );
            }
        }
    }

    fn kernel(&mut self, k: &KernelConfig) {
        self.r1_op_arch(k);
        self.r2_features(k);
        self.r3_dtypes(k);
        self.r4_shape_exclusive(k);
        for (i, node) in k.epilogue.iter().enumerate() {
            self.r5_epilogue(i, node);
        }
        self.r6_depthwise(k);
        self.r8_alignment(k);
    }

    fn r1_op_arch(&mut self, k: &KernelConfig) {
        let (op, arch) = (k.op_kind, k.arch);
        if op_support(op, arch) != OpSupport::Unsupported {
            return;
        }
        let msg = match op {
            OpKind::Conv3dWgrad => format!(
                "Conv3d wgrad unsupported on SM90+: no SM90 kernel exists for conv3d_wgrad, so {arch} cannot run it; target sm_89 or earlier"
            ),
            OpKind::GroupedConv => format!(
                "grouped_conv is available on SM80-89 only and {arch} is outside that range; target sm_80, sm_86 or sm_89"
            ),
            OpKind::GroupedGemm => {
                format!("grouped_gemm requires SM80+ and {arch} is older; target sm_80 or newer, or issue one gemm per group")
            }
            _ => unreachable!("{op} is supported on every architecture"),
        };
        self.error(RuleId::R1, "op_kind", msg);
    }

    fn r2_features(&mut self, k: &KernelConfig) {
        let arch = k.arch;
        let pre = arch.is_pre_sm90();
        if k.tile.is_some() && !pre {
            self.error(
                RuleId::R2,
                "tile",
                format!("with_tile configures pre-SM90 kernels and {arch} is SM90+; use with_threadblockshape(m, n, k) instead"),
            );
        }
        if k.threadblock_shape.is_some() && pre {
            self.error(
                RuleId::R2,
                "threadblock_shape",
                format!("with_threadblockshape configures SM90+ collectives and {arch} is pre-SM90; use with_tile(m, n, k) instead"),
            );
        }
        if k.cluster.is_some() && pre {
            self.error(
                RuleId::R2,
                "cluster",
                format!("with_cluster needs thread block clusters, which {arch} lacks; remove it or target sm_90a"),
            );
        }
        if k.scheduler.is_some() && pre {
            self.error(
                RuleId::R2,
                "scheduler",
                format!("with_scheduler selects SM90+ kernel schedules and {arch} is pre-SM90; remove it or target sm_90a"),
            );
        }
        if k.swizzle.is_some() && !pre {
            self.error(
                RuleId::R2,
                "swizzle",
                format!("with_swizzle applies to pre-SM90 kernels and {arch} is SM90+; remove it (SM90 collectives pick their own tile order)"),
            );
        }
        for (field, set, binding) in [
            ("iterator", k.iterator.is_some(), "with_iterator"),
            ("split_k", k.split_k.is_some(), "with_split_k"),
        ] {
            if !set {
                continue;
            }
            if !k.op_kind.is_conv() {
                self.error(RuleId::R2, field, format!("{binding} applies only to conv operators; remove it from this {} program", k.op_kind));
            } else if !pre {
                self.error(
                    RuleId::R2,
                    field,
                    format!("{binding} is available on SM70-89 only and {arch} is SM90+; remove it or target sm_89 or earlier"),
                );
            }
        }
        for (i, node) in k.epilogue.iter().enumerate() {
            if node.name == EpilogueName::Custom && arch != Arch::Sm90a {
                self.error(
                    RuleId::R2,
                    format!("epilogue[{i}]"),
                    format!("custom epilogues compile to an SM90a visitor tree and {arch} is not sm_90a; target sm_90a or use built-in epilogues"),
                );
            }
        }
        let backend = backend_for(k);
        if !pre && backend != Backend::CollectiveBuilder {
            let mut unused = Vec::new();
            if k.cluster.is_some() {
                unused.push(("cluster", "with_cluster"));
            }
            if k.scheduler.is_some() {
                unused.push(("scheduler", "with_scheduler"));
            }
            if k.threadblock_shape.is_some() && backend == Backend::CuteDepthwise {
                unused.push(("threadblock_shape", "with_threadblockshape"));
            }
            for (field, binding) in unused {
                self.warn(
                    RuleId::R2,
                    field,
                    format!("{binding} has no effect on {} with the {backend} backend; it only shapes SM90 GEMM collectives", k.op_kind),
                );
            }
        }
        if backend == Backend::LegacyTemplate {
            if let Some((i, why)) = legacy_epilogue_conflict(&k.epilogue) {
                let name = k.epilogue[i].name;
                self.error(
                    RuleId::R2,
                    format!("epilogue[{i}]"),
                    format!(
                        "{name} cannot be fused into the linear-combination epilogue used for {} on {arch}: {why}; use gemm on sm_90a for visitor-tree fusion{}",
                        k.op_kind,
                        if name == EpilogueName::Bias { " or move bias to the front of the chain" } else { "" }
                    ),
                );
            }
        }
        if k.operand_swap == Some(true) {
            let mut reasons = Vec::new();
            if pre {
                reasons.push(format!("{arch} is pre-SM90"));
            }
            if k.op_kind != OpKind::Gemm {
                reasons.push(format!("the operator is {}", k.op_kind));
            }
            if k.dtypes.input != DType::Fp32 {
                reasons.push(format!("the input dtype is {}", k.dtypes.input));
            }
            if reasons.is_empty() {
                self.warn(
                    RuleId::R2,
                    "operand_swap",
                    "with_operand_swap(true) requires M == N, which cannot be checked before launch; the generated wrapper asserts it at run time",
                );
            } else {
                self.error(
                    RuleId::R2,
                    "operand_swap",
                    format!(
                        "with_operand_swap(true) applies to SM90+ fp32 gemm only, but {}; drop the binding or use gemm with input=fp32 on sm_90a",
                        reasons.join(" and ")
                    ),
                );
            }
        }
    }

    fn r3_dtypes(&mut self, k: &KernelConfig) {
        if k.arch.is_sm90_plus() {
            return;
        }
        for (name, dt) in k.dtypes.iter() {
            if dt == DType::Fp8 {
                self.error(
                    RuleId::R3,
                    format!("dtypes.{name}"),
                    format!("fp8 requires SM90+ tensor cores and {} is older; use fp16 or bf16, or target sm_90a", k.arch),
                );
            }
        }
    }

    fn r4_shape_exclusive(&mut self, k: &KernelConfig) {
        if k.tile.is_some() && k.threadblock_shape.is_some() {
            let keep = if k.arch.is_sm90_plus() { "with_threadblockshape" } else { "with_tile" };
            self.error(
                RuleId::R4,
                "tile",
                format!("with_tile and with_threadblockshape both set the CTA shape, so only one may be given; keep {keep} for {}", k.arch),
            );
        }
    }

    fn r5_epilogue(&mut self, i: usize, node: &EpilogueNode) {
        use EpilogueName::*;
        let field = |key: &str| format!("epilogue[{i}].{key}");
        let name = node.name;
        let (required, optional): (&[&str], &[&str]) = match name {
            Clip | Clamp => (&["min", "max"], &[]),
            LeakyRelu => (&["slope"], &[]),
            Elu => (&[], &["alpha"]),
            Scale => (&[], &["value"]),
            AuxStore | AuxLoad => (&[], &["name"]),
            _ => (&[], &[]),
        };
        for key in required {
            if !node.params.contains_key(*key) {
                self.error(RuleId::R5, field(key), format!("{name} needs `{key}`; write e.g. {}", example(name)));
            }
        }
        for (key, value) in &node.params {
            if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
                let accepted: Vec<&str> = required.iter().chain(optional).copied().collect();
                let alt = if accepted.is_empty() {
                    format!("{name} takes no parameters; write {name}()")
                } else {
                    format!("{name} accepts {}", accepted.join(", "))
                };
                self.error(RuleId::R5, field(key), format!("unknown parameter `{key}` for {name}; {alt}"));
                continue;
            }
            let want_ident = key == "name";
            let good = if want_ident { matches!(value, Value::Ident(_)) } else { value.as_f64().is_some() };
            if !good {
                let want = if want_ident { "an identifier" } else { "a number" };
                self.error(
                    RuleId::R5,
                    field(key),
                    format!("{name} `{key}` must be {want}, got {} `{value}`; write e.g. {}", value.kind_name(), example(name)),
                );
            }
        }
        if let (Some(lo), Some(hi)) = (node.param_f64("min"), node.param_f64("max")) {
            if lo > hi {
                self.error(
                    RuleId::R5,
                    field("min"),
                    format!("{name} has min={lo} above max={hi}, which leaves an empty range; swap the bounds"),
                );
            }
        }
        if name == Custom {
            if let Some(problem) = custom_expr_problem(node) {
                self.error(RuleId::R5, field("expr"), format!("{problem}; write e.g. custom('acc * x', inputs={{x: scale}})"));
            }
        }
    }

    fn r6_depthwise(&mut self, k: &KernelConfig) {
        if op_support(k.op_kind, k.arch) != OpSupport::CuteBackend {
            return;
        }
        self.warn(
            RuleId::R6,
            "op_kind",
            format!("depthwise_conv on {} routes to the CuTe backend, with limited stride/dilation and epilogue support", k.arch),
        );
        for (i, node) in k.epilogue.iter().enumerate() {
            if node.name != EpilogueName::Relu {
                self.error(
                    RuleId::R6,
                    format!("epilogue[{i}]"),
                    format!(
                        "the SM90+ depthwise backend fuses relu only and cannot apply {}; drop it or target sm_89 for the full epilogue set",
                        node.name
                    ),
                );
            }
        }
    }

    fn r8_alignment(&mut self, k: &KernelConfig) {
        let a = k.alignment;
        for (operand, n, dt) in [("A", a.a, k.dtypes.input), ("B", a.b, k.dtypes.input), ("C", a.c, k.dtypes.output)] {
            let field = format!("alignment.{operand}");
            if n == 0 {
                self.error(RuleId::R8, field, format!("alignment {operand}=0 is meaningless since accesses need at least one element; use 1"));
                continue;
            }
            if !n.is_power_of_two() || n > 16 {
                let near = nearest_legal_alignment(n);
                self.warn(
                    RuleId::R8,
                    field.clone(),
                    format!("alignment {operand}={n} is not a power of two no larger than 16, so vectorized access will not match; use {near}"),
                );
            }
            if dt == DType::Fp32 && n > 8 && n <= 16 && n.is_power_of_two() {
                self.warn(
                    RuleId::R8,
                    field,
                    format!("alignment {operand}={n} for fp32 exceeds the widest 128-bit fp32 access; use 4 or 8"),
                );
            }
        }
    }
}

/// Custom expressions are pasted into generated C++ as a single `return`
/// expression, so they must be one balanced expression with no statements.
fn custom_expr_problem(node: &EpilogueNode) -> Option<String> {
    let expr = node.custom_expr.as_deref().unwrap_or_default();
    if expr.trim().is_empty() {
        return Some("custom epilogue expression is empty".into());
    }
    if let Some(c) = expr.chars().find(|c| matches!(c, ';' | '{' | '}' | '"' | '\'' | '\\' | '\n' | '#')) {
        return Some(format!("custom expression contains `{}`, which cannot appear in a single C++ expression", c.escape_default()));
    }
    if expr.contains("//") || expr.contains("/*") || expr.contains("*/") {
        return Some("custom expression contains a comment marker".into());
    }
    let mut depth: i32 = 0;
    for c in expr.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            break;
        }
    }
    if depth != 0 {
        return Some("custom expression has unbalanced brackets".into());
    }
    if let Some(inputs) = &node.custom_inputs {
        if inputs.contains_key("acc") {
            return Some("custom input name `acc` is reserved for the incoming value".into());
        }
    }
    None
}

fn example(name: EpilogueName) -> &'static str {
    match name {
        EpilogueName::Clip => "clip(min=0, max=6)",
        EpilogueName::Clamp => "clamp(min=-1, max=1)",
        EpilogueName::LeakyRelu => "leaky_relu(slope=0.01)",
        EpilogueName::Elu => "elu(alpha=1.0)",
        EpilogueName::Scale => "scale(value=0.5)",
        EpilogueName::AuxStore => "aux_store(name=aux0)",
        EpilogueName::AuxLoad => "aux_load(name=aux0)",
        _ => "relu()",
    }
}

fn nearest_legal_alignment(n: u32) -> u32 {
    let mut best = 1;
    for p in [1u32, 2, 4, 8, 16] {
        if n.abs_diff(p) < n.abs_diff(best) {
            best = p;
        }
    }
    best
}
