//! CUTLASS header emission.
//!
//! Output is plain C++ text; nothing here compiles or runs it. The layout of
//! every header is:
//!
//! ```text
//! banner + includes
//! namespace ucutlass_<hash> {
//! /* Original DSL: ... */
//! type aliases, DeviceKernel, entry points
//! }  // namespace ucutlass_<hash>
//! using ucutlass_<hash>::kernel_kernel;
//! ```

mod conv;
mod evt;
mod gemm;
pub mod lint;
mod pipeline;
pub mod tables;

use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{EpilogueName, OpKind, Value};
use crate::ir::{Config, ConfigHash, EpilogueNode, KernelConfig, PipelineConfig};
use crate::validate::{validate, Diagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// CUTLASS 3.x collective builders, SM90+ GEMM.
    CollectiveBuilder,
    /// CUTLASS 2.x device templates: SM70-89, and every convolution.
    LegacyTemplate,
    /// CuTe depthwise kernel for SM90+.
    CuteDepthwise,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::CollectiveBuilder => "collective_builder",
            Backend::LegacyTemplate => "legacy_template",
            Backend::CuteDepthwise => "cute_depthwise",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn backend_for(k: &KernelConfig) -> Backend {
    match (k.op_kind, k.arch.is_sm90_plus()) {
        (OpKind::DepthwiseConv, true) => Backend::CuteDepthwise,
        (OpKind::Gemm | OpKind::GroupedGemm, true) => Backend::CollectiveBuilder,
        _ => Backend::LegacyTemplate,
    }
}

/// First epilogue step the 2.x linear-combination epilogue cannot express,
/// with the reason. `None` when the whole chain fits.
pub fn legacy_epilogue_conflict(epilogue: &[EpilogueNode]) -> Option<(usize, String)> {
    use EpilogueName::*;
    for (i, node) in epilogue.iter().enumerate() {
        let why = match node.name {
            Bias if i > 0 => "bias is folded into the source operand, so it must come first in the chain",
            PerChannelScale | PerRowScale | PerColScale => "per-vector scales need a broadcast operand",
            AuxStore | AuxLoad => "auxiliary tensors need an extra epilogue operand",
            Custom => "custom expressions need the visitor-tree epilogue",
            _ => continue,
        };
        return Some((i, why.to_string()));
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedArtifact {
    pub filename: String,
    pub text: String,
    pub backend: Backend,
    pub entrypoints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("refusing to emit an invalid configuration ({} error(s)); run validation first", .0.len())]
    Invalid(Vec<Diagnostic>),
}

fn guard(config: &Config) -> Result<(), EmitError> {
    let report = validate(config);
    if report.ok {
        Ok(())
    } else {
        Err(EmitError::Invalid(report.errors().cloned().collect()))
    }
}

pub fn emit_config(config: &Config, hash: &ConfigHash, source_text: &str) -> Result<EmittedArtifact, EmitError> {
    match config {
        Config::Kernel(k) => emit(k, hash, source_text),
        Config::Pipeline(p) => emit_pipeline(p, hash, source_text),
    }
}

pub fn emit(config: &KernelConfig, hash: &ConfigHash, source_text: &str) -> Result<EmittedArtifact, EmitError> {
    guard(&Config::Kernel(config.clone()))?;
    let mut body = String::new();
    let entry = kernel_stage(config, &mut body, "kernel_kernel");
    Ok(assemble(config, hash, source_text, body, entry))
}

pub fn emit_pipeline(p: &PipelineConfig, hash: &ConfigHash, source_text: &str) -> Result<EmittedArtifact, EmitError> {
    guard(&Config::Pipeline(p.clone()))?;
    let mut body = String::new();
    let mut entry = kernel_stage(&p.kernel, &mut body, "main_kernel");
    entry.extend(pipeline::emit_driver(p, &mut body));
    Ok(assemble(&p.kernel, hash, source_text, body, entry))
}

/// Type aliases, DeviceKernel and `<prefix>` / `<prefix>_ex` entry points.
fn kernel_stage(k: &KernelConfig, out: &mut String, prefix: &str) -> Vec<String> {
    let aux = aux_params(&k.epilogue);
    match backend_for(k) {
        Backend::CollectiveBuilder => gemm::collective(k, &aux, out),
        Backend::LegacyTemplate if k.op_kind.is_gemm_family() => gemm::legacy(k, out),
        Backend::LegacyTemplate => conv::legacy(k, out),
        Backend::CuteDepthwise => conv::cute_depthwise(k, out),
    }
    let sig = Signature::for_kernel(k, &aux);
    let body = if k.op_kind.is_gemm_family() {
        gemm::entry_body(k, &aux, backend_for(k))
    } else {
        conv::entry_body(k, backend_for(k))
    };
    out.push_str(&sig.definition(&format!("{prefix}_ex"), &body));
    out.push('\n');
    out.push_str(&sig.delegate(prefix, &format!("{prefix}_ex")));
    vec![prefix.to_string(), format!("{prefix}_ex")]
}

fn assemble(k: &KernelConfig, hash: &ConfigHash, source: &str, body: String, entrypoints: Vec<String>) -> EmittedArtifact {
    let backend = backend_for(k);
    let ns = &hash.namespace;
    let mut out = String::new();
    let _ = writeln!(out, "// {}: generated by ucutlass, do not edit.", hash.filename());
    let _ = writeln!(out, "// config sha256: {}", hash.hex);
    let _ = writeln!(out, "// backend: {backend}");
    out.push_str("#pragma once\n\n");
    let backend_includes = match backend {
        Backend::CollectiveBuilder => tables::COLLECTIVE_INCLUDES,
        Backend::LegacyTemplate if k.op_kind.is_gemm_family() => tables::LEGACY_GEMM_INCLUDES,
        Backend::LegacyTemplate => tables::LEGACY_CONV_INCLUDES,
        Backend::CuteDepthwise => tables::CUTE_DEPTHWISE_INCLUDES,
    };
    out.push_str("#include <tuple>\n#include <vector>\n\n");
    for inc in tables::COMMON_INCLUDES.iter().chain(backend_includes) {
        let _ = writeln!(out, "#include {inc}");
    }
    let _ = writeln!(out, "\nnamespace {ns} {{\n");
    let _ = writeln!(out, "/* Original DSL:\n{}\n*/\n", escape_comment(source));
    let _ = writeln!(out, "// Resolved configuration (defaults included):");
    for line in resolved_summary(k) {
        let _ = writeln!(out, "//   {line}");
    }
    out.push('\n');
    out.push_str(&body);
    let _ = writeln!(out, "\n}}  // namespace {ns}\n");
    let _ = writeln!(out, "using {ns}::kernel_kernel;");
    EmittedArtifact { filename: hash.filename(), text: out, backend, entrypoints }
}

fn resolved_summary(k: &KernelConfig) -> Vec<String> {
    let mut v = vec![
        format!("op={} arch={} stages={}", k.op_kind, k.arch, k.stages),
        format!("dtypes input={} acc={} output={}", k.dtypes.input, k.dtypes.acc, k.dtypes.output),
        format!("layouts A={} B={} C={}", k.layouts.a, k.layouts.b, k.layouts.c),
        format!("alignment A={} B={} C={}", k.alignment.a, k.alignment.b, k.alignment.c),
    ];
    if let Some(t) = k.tile {
        v.push(format!("tile m={} n={} k={}", t.m, t.n, t.k));
    }
    if let Some(t) = k.threadblock_shape {
        v.push(format!("threadblock m={} n={} k={}", t.m, t.n, t.k));
    }
    if let Some(c) = k.cluster {
        v.push(format!("cluster x={} y={} z={}", c.x, c.y, c.z));
    }
    if let Some(s) = k.scheduler {
        v.push(format!("scheduler kernel={} epilogue={}", s.kernel, s.epilogue));
    }
    if let Some(s) = k.swizzle {
        v.push(format!("swizzle {s}"));
    }
    if let Some(i) = k.iterator {
        v.push(format!("iterator {i}"));
    }
    if let Some(s) = k.split_k {
        v.push(format!("split_k slices={}", s.slices));
    }
    if let Some(s) = k.operand_swap {
        v.push(format!("operand_swap {s}"));
    }
    v
}

pub(crate) fn chain_text(epilogue: &[EpilogueNode]) -> String {
    if epilogue.is_empty() {
        "(none)".to_string()
    } else {
        epilogue.iter().map(|e| e.name.as_str()).collect::<Vec<_>>().join(" >> ")
    }
}

/// Marker written before the embedded program.
pub const SOURCE_MARKER: &str = "/* Original DSL:\n";

/// Makes `s` safe inside a block comment. After a `*`, a following `/` or
/// `\` gets a backslash inserted; `unescape_comment` reverses it exactly.
pub fn escape_comment(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut prev_star = false;
    for c in s.chars() {
        if prev_star && (c == '/' || c == '\\') {
            out.push('\\');
        }
        out.push(c);
        prev_star = c == '*';
    }
    out
}

pub fn unescape_comment(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        out.push(c);
        if c == '*' && chars.get(i + 1) == Some(&'\\') && matches!(chars.get(i + 2), Some('/' | '\\')) {
            out.push(chars[i + 2]);
            i += 3;
            continue;
        }
        i += 1;
    }
    out
}

/// Recovers the DSL program embedded in a generated header.
pub fn extract_source(header: &str) -> Option<String> {
    let start = header.find(SOURCE_MARKER)? + SOURCE_MARKER.len();
    let len = header[start..].find("\n*/")?;
    Some(unescape_comment(&header[start..start + len]))
}

/// A tensor the extended entry point takes for the epilogue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct AuxParam {
    pub name: String,
    pub source: EpilogueName,
}

impl AuxParam {
    pub fn device_ptr(&self) -> String {
        format!("{}_ptr", self.name)
    }
}

const RESERVED: &[&str] = &["A", "B", "C", "D", "M", "N", "K", "alpha", "beta", "workspace", "stream", "arguments", "op"];

pub(crate) fn aux_params(epilogue: &[EpilogueNode]) -> Vec<AuxParam> {
    use EpilogueName::*;
    let mut out: Vec<AuxParam> = Vec::new();
    let mut add = |base: String, source: EpilogueName| {
        let mut name = if RESERVED.contains(&base.as_str()) { format!("aux_{base}") } else { base };
        let stem = name.clone();
        let mut n = 1;
        while out.iter().any(|p| p.name == name) {
            name = format!("{stem}_{n}");
            n += 1;
        }
        out.push(AuxParam { name, source });
    };
    for node in epilogue {
        let named = |default: &str| match node.params.get("name") {
            Some(Value::Ident(s)) => s.clone(),
            _ => default.to_string(),
        };
        match node.name {
            Bias => add("bias".into(), Bias),
            PerChannelScale => add("channel_scale".into(), PerChannelScale),
            PerRowScale => add("row_scale".into(), PerRowScale),
            PerColScale => add("col_scale".into(), PerColScale),
            AuxStore => add(named("aux_out"), AuxStore),
            AuxLoad => add(named("aux_in"), AuxLoad),
            Custom => {
                for tensor in node.custom_inputs.iter().flat_map(|m| m.values()) {
                    add(tensor.clone(), Custom);
                }
            }
            _ => {}
        }
    }
    out
}

/// C++ literal for an epilogue parameter.
pub(crate) fn cpp_param(node: &EpilogueNode, key: &str, default: &str) -> String {
    match node.params.get(key) {
        Some(Value::Int(i)) => i.to_string(),
        Some(Value::Float(x)) => format!("{x:?}"),
        _ => default.to_string(),
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Param {
    pub ty: String,
    pub name: String,
    /// Value passed by the plain entry point.
    pub default: String,
}

/// Parameters of an `_ex` entry point: A, B, C, alpha, beta, then extras.
#[derive(Debug, Clone)]
pub(crate) struct Signature {
    pub ret: String,
    pub tensor: String,
    pub extra: Vec<Param>,
}

impl Signature {
    fn for_kernel(k: &KernelConfig, aux: &[AuxParam]) -> Self {
        let tensor = if k.op_kind == OpKind::GroupedGemm { "std::vector<at::Tensor>" } else { "at::Tensor" };
        let mut extra: Vec<Param> = aux
            .iter()
            .map(|p| Param { ty: "c10::optional<at::Tensor>".into(), name: p.name.clone(), default: "c10::nullopt".into() })
            .collect();
        extra.extend(conv::extra_params(k.op_kind));
        Signature { ret: tensor.to_string(), tensor: tensor.to_string(), extra }
    }

    pub fn base_params(&self) -> Vec<String> {
        let t = &self.tensor;
        vec![
            format!("const {t}& A"),
            format!("const {t}& B"),
            format!("const c10::optional<{t}>& C"),
            "double alpha".into(),
            "double beta".into(),
        ]
    }

    pub fn all_params(&self) -> Vec<String> {
        let mut v = self.base_params();
        v.extend(self.extra.iter().map(|p| format!("{} {}", p.ty, p.name)));
        v
    }

    pub fn extra_names(&self) -> Vec<String> {
        self.extra.iter().map(|p| p.name.clone()).collect()
    }

    fn definition(&self, name: &str, body: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "inline {} {name}(\n    {}) {{", self.ret, self.all_params().join(",\n    "));
        out.push_str(body);
        out.push_str("}\n");
        out
    }

    fn delegate(&self, name: &str, target: &str) -> String {
        let mut args = vec!["A".to_string(), "B".into(), "C".into(), "alpha".into(), "beta".into()];
        args.extend(self.extra.iter().map(|p| p.default.clone()));
        format!(
            "inline {} {name}({}) {{\n  return {target}({});\n}}\n",
            self.ret,
            self.base_params().join(", "),
            args.join(", ")
        )
    }
}
