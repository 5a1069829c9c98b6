//! Epilogue Visitor Tree construction for the SM90 collective epilogue.
//!
//! The whole chain becomes one nested `Sm90EVT` type; its argument
//! initializer mirrors the tree (children first, node op last).

use std::fmt::Write;

use super::tables::*;
use super::AuxParam;
use crate::dsl::EpilogueName;
use crate::ir::EpilogueNode;

pub(crate) enum Evt {
    Leaf { ty: String, args: String },
    Node { op: String, children: Vec<Evt>, args: String },
}

impl Evt {
    fn leaf(ty: impl Into<String>, args: impl Into<String>) -> Self {
        Evt::Leaf { ty: ty.into(), args: args.into() }
    }

    fn compute(functor: &str, out_elem: &str, children: Vec<Evt>) -> Self {
        Evt::Node {
            op: format!("{EVT_COMPUTE}<{functor}, {out_elem}, ElementCompute, {ROUND_STYLE}>"),
            children,
            args: "{}".into(),
        }
    }

    fn scalar(value: &str) -> Self {
        Evt::leaf(format!("{EVT_SCALAR}<ElementCompute>"), format!("{{{{{value}}}}}"))
    }

    pub(crate) fn render_type(&self, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match self {
            Evt::Leaf { ty, .. } => {
                let _ = write!(out, "{pad}{ty}");
            }
            Evt::Node { op, children, .. } => {
                let _ = writeln!(out, "{pad}{EVT}<");
                let _ = write!(out, "{pad}  {op}");
                for c in children {
                    out.push_str(",\n");
                    c.render_type(indent + 1, out);
                }
                let _ = write!(out, "\n{pad}>");
            }
        }
    }

    pub(crate) fn render_args(&self, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match self {
            Evt::Leaf { args, .. } => {
                let _ = write!(out, "{pad}{args}");
            }
            Evt::Node { children, args, .. } => {
                let _ = writeln!(out, "{pad}{{");
                for c in children {
                    c.render_args(indent + 1, out);
                    out.push_str(",\n");
                }
                let _ = write!(out, "{pad}  {args}  // node op\n{pad}}}");
            }
        }
    }
}

/// `D = beta * C + alpha * acc`, the root every chain builds on.
fn linear_combination() -> Evt {
    let scaled_acc = Evt::compute(EVT_MUL, "ElementCompute", vec![Evt::scalar("alpha_"), Evt::leaf(EVT_ACC, "{}")]);
    Evt::compute(
        EVT_FMA,
        "ElementCompute",
        vec![Evt::scalar("beta_"), Evt::leaf(format!("{EVT_SRC}<ElementC>"), "{}"), scaled_acc],
    )
}

/// Builds the fused tree. The outermost compute node converts to `ElementD`.
pub(crate) fn build(epilogue: &[EpilogueNode], aux: &[AuxParam]) -> Evt {
    use EpilogueName::*;
    let mut tree = linear_combination();
    let n = epilogue.len();
    let mut aux_iter = aux.iter();
    for (i, node) in epilogue.iter().enumerate() {
        let out_elem = if i + 1 == n { "ElementD" } else { "ElementCompute" };
        let param = |key: &str, default: &str| super::cpp_param(node, key, default);
        tree = match node.name {
            Relu | Gelu | Silu | Sigmoid | Tanh | Mish | Hardswish => {
                Evt::compute(evt_functor(node.name), out_elem, vec![tree])
            }
            LeakyRelu => {
                Evt::compute(evt_functor(node.name), out_elem, vec![tree, Evt::scalar(&param("slope", "0.01"))])
            }
            Elu => Evt::compute(evt_functor(node.name), out_elem, vec![tree, Evt::scalar(&param("alpha", "1.0"))]),
            Clip | Clamp => Evt::compute(
                evt_functor(node.name),
                out_elem,
                vec![tree, Evt::scalar(&param("min", "0")), Evt::scalar(&param("max", "0"))],
            ),
            Scale => Evt::compute(evt_functor(node.name), out_elem, vec![tree, Evt::scalar(&param("value", "1.0"))]),
            Bias | PerChannelScale | PerColScale => {
                let p = aux_iter.next().expect("aux param per broadcast node");
                let row = Evt::leaf(
                    format!("{EVT_ROW}<0, TileShape, ElementCompute, ElementCompute>"),
                    format!("{{{}}}", p.device_ptr()),
                );
                Evt::compute(evt_functor(node.name), out_elem, vec![tree, row])
            }
            PerRowScale => {
                let p = aux_iter.next().expect("aux param per broadcast node");
                let col = Evt::leaf(
                    format!("{EVT_COL}<0, TileShape, ElementCompute, ElementCompute>"),
                    format!("{{{}}}", p.device_ptr()),
                );
                Evt::compute(evt_functor(node.name), out_elem, vec![tree, col])
            }
            AuxLoad => {
                let p = aux_iter.next().expect("aux param per aux_load");
                let load = Evt::leaf(
                    format!("{EVT_AUX_LOAD}<0, TileShape, ElementC, cutlass::gemm::TagToStrideC_t<LayoutC>>"),
                    format!("{{{}, stride_C}}", p.device_ptr()),
                );
                Evt::compute(evt_functor(node.name), out_elem, vec![tree, load])
            }
            AuxStore => {
                let p = aux_iter.next().expect("aux param per aux_store");
                Evt::Node {
                    op: format!(
                        "{EVT_AUX_STORE}<0, TileShape, ElementD, {ROUND_STYLE}, cutlass::gemm::TagToStrideC_t<LayoutC>>"
                    ),
                    children: vec![tree],
                    args: format!("{{{}, stride_D}}", p.device_ptr()),
                }
            }
            Custom => {
                let inputs = node.custom_inputs.as_ref().map(|m| m.len()).unwrap_or(0);
                let mut children = vec![tree];
                for _ in 0..inputs {
                    let p = aux_iter.next().expect("aux param per custom input");
                    children.push(Evt::leaf(
                        format!("{EVT_AUX_LOAD}<0, TileShape, ElementCompute, cutlass::gemm::TagToStrideC_t<LayoutC>>"),
                        format!("{{{}, stride_C}}", p.device_ptr()),
                    ));
                }
                Evt::compute(&format!("CustomEpilogue{i}"), out_elem, children)
            }
        };
    }
    tree
}

/// Functor definitions for custom epilogue nodes, in chain order.
pub(crate) fn custom_functors(epilogue: &[EpilogueNode], out: &mut String) {
    for (i, node) in epilogue.iter().enumerate() {
        if node.name != EpilogueName::Custom {
            continue;
        }
        let expr = node.custom_expr.as_deref().unwrap_or_default();
        let mut params = vec!["T const& acc".to_string()];
        if let Some(inputs) = &node.custom_inputs {
            params.extend(inputs.keys().map(|k| format!("T const& {k}")));
        }
        let _ = writeln!(out, "// custom epilogue {i}: `acc` is the value flowing in from the previous step");
        let _ = writeln!(out, "template <class T>");
        let _ = writeln!(out, "struct CustomEpilogue{i} {{");
        let _ = writeln!(out, "  CUTLASS_HOST_DEVICE T operator()({}) const {{", params.join(", "));
        let _ = writeln!(out, "    return {expr};");
        let _ = writeln!(out, "  }}");
        let _ = writeln!(out, "}};");
        out.push('\n');
    }
}
