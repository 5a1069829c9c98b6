//! Canonical byte serialization and the configuration hash.
//!
//! The byte format is versioned by its first line (`UCL1`) and documented in
//! `docs/canonical-serialization.md`. Changing anything here changes every
//! emitted namespace.

use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::types::*;
use crate::dsl::Value;

pub const FORMAT_TAG: &str = "UCL1";
const ABSENT: &str = "~";

pub fn canonical_serialize(config: &Config) -> Vec<u8> {
    let mut out = String::new();
    line(&mut out, FORMAT_TAG, None);
    match config {
        Config::Kernel(k) => {
            line(&mut out, "kind", Some("kernel"));
            kernel_fields(&mut out, k);
        }
        Config::Pipeline(p) => {
            line(&mut out, "kind", Some("pipeline"));
            kernel_fields(&mut out, &p.kernel);
            transforms(&mut out, "pre", &p.pre_transforms);
            transforms(&mut out, "post", &p.post_transforms);
        }
    }
    out.into_bytes()
}

fn line(out: &mut String, key: &str, value: Option<&str>) {
    match value {
        None if key == FORMAT_TAG => out.push_str(key),
        None => {
            let _ = write!(out, "{key}={ABSENT}");
        }
        Some(v) => {
            let _ = write!(out, "{key}={v}");
        }
    }
    out.push('\n');
}

fn kernel_fields(out: &mut String, k: &KernelConfig) {
    let triple = |a: &dyn fmt::Display, b: &dyn fmt::Display, c: &dyn fmt::Display| format!("{a},{b},{c}");
    line(out, "op", Some(k.op_kind.as_str()));
    line(out, "arch", Some(k.arch.as_str()));
    line(out, "dtypes", Some(&triple(&k.dtypes.input, &k.dtypes.acc, &k.dtypes.output)));
    line(out, "layouts", Some(&triple(&k.layouts.a, &k.layouts.b, &k.layouts.c)));
    let shape = |s: &TileShape| triple(&s.m, &s.n, &s.k);
    line(out, "tile", k.tile.as_ref().map(shape).as_deref());
    line(out, "threadblock", k.threadblock_shape.as_ref().map(shape).as_deref());
    line(out, "cluster", k.cluster.map(|c| triple(&c.x, &c.y, &c.z)).as_deref());
    line(out, "stages", Some(&k.stages.to_string()));
    line(out, "alignment", Some(&triple(&k.alignment.a, &k.alignment.b, &k.alignment.c)));
    line(out, "scheduler", k.scheduler.map(|s| format!("{},{}", s.kernel, s.epilogue)).as_deref());
    line(out, "swizzle", k.swizzle.map(|s| s.to_string()).as_deref());
    line(out, "iterator", k.iterator.map(|i| i.as_str()));
    line(out, "split_k", k.split_k.map(|s| s.slices.to_string()).as_deref());
    line(out, "operand_swap", k.operand_swap.map(|b| if b { "true" } else { "false" }));
    line(out, "epilogue", Some(&k.epilogue.len().to_string()));
    for (i, node) in k.epilogue.iter().enumerate() {
        line(out, &format!("epilogue.{i}"), Some(&epilogue_record(node)));
    }
}

fn epilogue_record(node: &EpilogueNode) -> String {
    let mut s = node.name.as_str().to_string();
    for (key, value) in &node.params {
        let _ = write!(s, ";{key}={}", typed(value));
    }
    if let Some(expr) = &node.custom_expr {
        let _ = write!(s, ";@expr={}", typed(&Value::Ident(expr.clone())));
    }
    if let Some(inputs) = &node.custom_inputs {
        let body: Vec<String> = inputs.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        let _ = write!(s, ";@inputs={}", body.join(","));
    }
    s
}

/// Type-tagged value. Floats are written as raw IEEE-754 bits so the text
/// never depends on float formatting; strings are length-prefixed.
fn typed(v: &Value) -> String {
    match v {
        Value::Bool(b) => format!("b:{b}"),
        Value::Int(i) => format!("i:{i}"),
        Value::Float(x) => format!("f:{:016x}", x.to_bits()),
        Value::Ident(s) => format!("s:{}:{s}", s.len()),
    }
}

fn transforms(out: &mut String, key: &str, stages: &[TransformStage]) {
    line(out, key, Some(&stages.len().to_string()));
    for (i, t) in stages.iter().enumerate() {
        let v = match t.convert_dtype {
            Some(d) => format!("transpose;dtype={d}"),
            None => format!("transpose;dtype={ABSENT}"),
        };
        line(out, &format!("{key}.{i}"), Some(&v));
    }
}

/// SHA-256 of the canonical serialization plus the derived C++ namespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConfigHash {
    pub hex: String,
    pub namespace: String,
}

pub const NAMESPACE_PREFIX: &str = "ucutlass_";
pub const NAMESPACE_HEX_CHARS: usize = 16;

impl ConfigHash {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        let digest = Sha256::digest(bytes);
        let mut hex = String::with_capacity(64);
        for b in digest.iter() {
            let _ = write!(hex, "{b:02x}");
        }
        let namespace = format!("{NAMESPACE_PREFIX}{}", &hex[..NAMESPACE_HEX_CHARS]);
        ConfigHash { hex, namespace }
    }

    /// Header file name, `ucutlass_<16 hex>.h`.
    pub fn filename(&self) -> String {
        format!("{}.h", self.namespace)
    }
}

impl fmt::Display for ConfigHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex)
    }
}

pub fn config_hash(config: &Config) -> ConfigHash {
    ConfigHash::of_bytes(&canonical_serialize(config))
}
