//! Emitted headers are compared byte-for-byte against files in
//! `tests/golden/`. Set `UPDATE_GOLDEN=1` to rewrite them after an
//! intentional change, then review the diff.

use std::fs;
use std::path::PathBuf;

use ucutlass::compile::compile;
use ucutlass::emit::{extract_source, lint};
use ucutlass::samples;

const CASES: &[(&str, &str)] = &[
    ("sm90a_gemm_evt", samples::SM90A_GEMM_EVT),
    ("sm80_conv2d", samples::SM80_CONV2D),
    ("sm90a_transpose_pipeline", samples::SM90A_TRANSPOSE_PIPELINE),
    (
        "sm90a_grouped_gemm_scaled",
        "grouped_gemm().with_dtype(input=fp16, acc=fp32, output=fp16).with_arch(sm_90a)\
         .with_cluster(x=2).with_alignment(8) >> per_col_scale() >> silu()",
    ),
    (
        "sm90a_depthwise",
        "depthwise_conv().with_dtype(input=fp16, acc=fp32, output=fp16).with_arch(sm_90a) >> relu()",
    ),
    (
        "sm80_conv3d_wgrad_split_k",
        "conv3d_wgrad().with_arch(sm_80).with_split_k(4).with_iterator(analytic)",
    ),
    (
        "sm75_gemm_leaky",
        "gemm().with_dtype(input=fp16, acc=fp32, output=fp32).with_arch(sm_75)\
         .with_tile(m=128, n=64, k=32).with_swizzle(4) >> bias() >> leaky_relu(slope=0.1)",
    ),
    (
        "sm90a_custom_aux",
        "gemm().with_arch(sm_90a) >> aux_load(name=residual) >> custom('acc * sigmoid(g)', inputs={g: gate}) \
         >> aux_store(name=pre_act)",
    ),
    (
        "sm90a_operand_swap",
        "gemm().with_dtype(input=fp32, acc=fp32, output=fp32).with_arch(sm_90a).with_operand_swap(true)",
    ),
];

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn headers_match_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut stale = Vec::new();
    for (name, src) in CASES {
        let c = compile(src).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        let text = &c.artifact.text;
        lint::check(text, &c.hash.namespace).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(extract_source(text).as_deref(), Some(*src), "{name}: embedded source");
        let path = golden_dir().join(format!("{name}.h"));
        if update {
            fs::write(&path, text).unwrap();
            continue;
        }
        match fs::read_to_string(&path) {
            Ok(want) if &want == text => {}
            Ok(_) => stale.push(format!("{name}: differs")),
            Err(e) => stale.push(format!("{name}: {e}")),
        }
    }
    assert!(stale.is_empty(), "golden mismatch (rerun with UPDATE_GOLDEN=1 to accept):\n{}", stale.join("\n"));
}

#[test]
fn compile_is_idempotent() {
    for (name, src) in CASES {
        assert_eq!(compile(src).unwrap().artifact, compile(src).unwrap().artifact, "{name}");
    }
}
