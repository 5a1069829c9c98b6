use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::sample::select;
use proptest::strategy::ValueTree;

use ucutlass::compile::check;
use ucutlass::dsl::{parse, print};
use ucutlass::integrity::{filter_speedups, review, AttemptEvidence, ReviewerLabel};
use ucutlass::ir::{canonical_serialize, config_hash, lower, unparse, DType};
use ucutlass::metrics::{fast_p, geomean, median, signed_area, SpeedupSet, UnsolvedConvention};
use ucutlass::schedule::{fixed_allocation, replay, AttemptRecord, ProblemLog, SchedulingPolicy};
use ucutlass::sol::{sol, sol_fp16_variant, Fusion, GemmDims, HardwareSpec, OpNode, ProblemSpec};
use ucutlass::triage::{gap_exponent, roi_at_gap, Hypothesis};
use ucutlass::validate::{validate, Severity};

fn kernel_source() -> impl Strategy<Value = String> {
    let op = select(vec!["gemm", "grouped_gemm", "conv2d", "conv3d", "conv2d_dgrad", "conv1d", "depthwise_conv"]);
    let arch = select(vec!["sm_70", "sm_75", "sm_80", "sm_86", "sm_89", "sm_90", "sm_90a"]);
    let dtype = select(vec!["fp16", "bf16", "fp32"]);
    let shape = (select(vec![64u32, 128, 256]), select(vec![64u32, 128]), select(vec![32u32, 64]));
    let step = select(vec!["relu()", "gelu()", "tanh()", "bias()", "scale(value=2)", "clip(min=-1.5, max=3)"]);
    (
        op,
        arch,
        proptest::option::of(dtype),
        proptest::option::of(2u32..6),
        proptest::option::of(shape),
        proptest::option::of(select(vec![1u32, 2, 4, 8])),
        proptest::collection::vec(step, 0..4),
    )
        .prop_map(|(op, arch, dt, stages, shape, align, steps)| {
            let mut s = format!("{op}()\n  .with_arch({arch})");
            if let Some(dt) = dt {
                s += &format!(".with_dtype(input={dt}, acc=fp32, output={dt})");
            }
            if let Some(n) = stages {
                s += &format!("\n  .with_stages( {n} )");
            }
            if let Some((m, n, k)) = shape {
                let binding = if arch.starts_with("sm_90") { "with_threadblockshape" } else { "with_tile" };
                s += &format!(".{binding}(m={m}, n={n}, k={k})");
            }
            if let Some(a) = align {
                s += &format!(".with_alignment({a})");
            }
            for st in steps {
                s += &format!(" >> {st}");
            }
            s
        })
}

fn source() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => kernel_source(),
        1 => (kernel_source(), proptest::option::of(select(vec!["fp16", "fp32"])))
            .prop_map(|(k, dt)| match dt {
                Some(dt) => format!("pipeline(transpose(dtype={dt}), {k}, transpose())"),
                None => format!("pipeline(transpose(), {k})"),
            }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_is_a_parse_fixpoint(src in source()) {
        let first = parse(&src).unwrap();
        let printed = print(&first.root);
        let second = parse(&printed).unwrap();
        prop_assert_eq!(&first.root, &second.root);
        prop_assert_eq!(print(&second.root), printed);
    }

    #[test]
    fn unparse_round_trips_through_lowering(src in source()) {
        let config = lower(&parse(&src).unwrap()).unwrap();
        let again = lower(&parse(&unparse(&config)).unwrap()).unwrap();
        prop_assert_eq!(&config, &again);
        prop_assert_eq!(config_hash(&config), config_hash(&again));
    }

    #[test]
    fn hash_tracks_config_equality(a in source(), b in source()) {
        let ca = lower(&parse(&a).unwrap()).unwrap();
        let cb = lower(&parse(&b).unwrap()).unwrap();
        prop_assert_eq!(ca == cb, canonical_serialize(&ca) == canonical_serialize(&cb));
        prop_assert_eq!(ca == cb, config_hash(&ca) == config_hash(&cb));
    }

    #[test]
    fn validation_is_pure(src in source()) {
        let config = lower(&parse(&src).unwrap()).unwrap();
        prop_assert_eq!(validate(&config), validate(&config.clone()));
    }

    #[test]
    fn each_violation_is_reported(picks in proptest::collection::btree_set(0usize..6, 1..=6)) {
        let bindings = [
            ".with_tile(m=128, n=128, k=32)",
            ".with_swizzle(2)",
            ".with_alignment(A=0, B=4, C=4)",
            ".with_dtype(input=int8, acc=fp32, output=fp32).with_operand_swap(true)",
        ];
        let steps = [" >> clip(min=6, max=0)", " >> custom('(acc')"];
        let mut src = String::from("gemm().with_arch(sm_90a)");
        for &i in picks.iter().filter(|&&i| i < 4) {
            src += bindings[i];
        }
        src += " >> leaky_relu()";
        for &i in picks.iter().filter(|&&i| i >= 4) {
            src += steps[i - 4];
        }
        let config = lower(&parse(&src).unwrap()).unwrap();
        let report = validate(&config);
        let errors = report.diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
        prop_assert!(!report.ok);
        prop_assert!(errors > picks.len(), "{} errors for {} violations plus one epilogue: {}", errors, picks.len(), src);
    }
}

fn h100() -> HardwareSpec {
    let path = format!("{}/../../configs/hardware/h100_sxm.toml", env!("CARGO_MANIFEST_DIR"));
    HardwareSpec::from_toml_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn gemm_chain() -> impl Strategy<Value = ProblemSpec> {
    let d = || (4u32..13).prop_map(|e| 1u64 << e);
    (d(), d(), d(), 0usize..3, select(vec![DType::Fp32, DType::Fp16, DType::Bf16]), any::<bool>()).prop_map(
        |(m, n, k, tail, io, perfect)| {
            let mut ops = vec![OpNode::Gemm(GemmDims { m, n, k })];
            for i in 0..tail {
                ops.push(if i % 2 == 0 {
                    OpNode::Elementwise { elems: m * n, flops_per_elem: 8, extra_input_elems: n }
                } else {
                    OpNode::Layernorm { elems: m * n, axis: n }
                });
            }
            ProblemSpec {
                name: "p".into(),
                ops,
                fusion: if perfect { Fusion::Perfect } else { Fusion::None },
                io_dtype: io,
                conventions: Default::default(),
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sol_report_is_self_consistent(spec in gemm_chain()) {
        let r = sol(&spec, &h100(), DType::Fp32).unwrap();
        prop_assert!(r.is_consistent());
        prop_assert_eq!(r.t_sol, r.t_compute.max(r.t_mem));
        prop_assert!(sol_fp16_variant(&spec, &h100()).unwrap().t_sol <= r.t_sol);
    }

    #[test]
    fn fusion_never_adds_traffic(spec in gemm_chain()) {
        let hw = h100();
        let fused = sol(&ProblemSpec { fusion: Fusion::Perfect, ..spec.clone() }, &hw, DType::Fp32).unwrap();
        let unfused = sol(&ProblemSpec { fusion: Fusion::None, ..spec }, &hw, DType::Fp32).unwrap();
        prop_assert!(fused.bytes <= unfused.bytes);
        prop_assert_eq!(fused.flops, unfused.flops);
        prop_assert!(fused.t_sol <= unfused.t_sol);
    }

    #[test]
    fn more_bandwidth_never_slows_the_bound(spec in gemm_chain(), factor in 1.0f64..8.0) {
        let hw = h100();
        let fast = HardwareSpec { peak_bw: hw.peak_bw * factor, ..hw.clone() };
        prop_assert!(sol(&spec, &fast, DType::Fp32).unwrap().t_sol <= sol(&spec, &hw, DType::Fp32).unwrap().t_sol);
    }

    #[test]
    fn gemm_bound_scales_with_size(m in 16u64..2048, n in 16u64..2048, k in 16u64..2048) {
        let spec = |m, n, k| ProblemSpec {
            name: "g".into(),
            ops: vec![OpNode::Gemm(GemmDims { m, n, k })],
            fusion: Fusion::Perfect,
            io_dtype: DType::Fp32,
            conventions: Default::default(),
        };
        let hw = h100();
        let one = sol(&spec(m, n, k), &hw, DType::Fp32).unwrap();
        let two = sol(&spec(2 * m, 2 * n, 2 * k), &hw, DType::Fp32).unwrap();
        prop_assert_eq!(two.flops, 8 * one.flops);
        prop_assert_eq!(two.bytes, 4 * one.bytes);
        prop_assert!(two.arithmetic_intensity > one.arithmetic_intensity);
    }

    #[test]
    fn gap_exponent_has_a_floor_of_one(g in 1.0f64..1e4) {
        let e = gap_exponent(g);
        prop_assert!(e >= 1.0);
        if g <= 5.0 {
            prop_assert_eq!(e, 1.0);
        }
    }

    #[test]
    fn roi_is_monotone(s in 1.0f64..10.0, ri in 1.0f64..5.0, rp in 1.0f64..5.0, g in 1.0f64..500.0, bump in 1.0f64..2.0) {
        let h = Hypothesis::new("a", s, ri, rp);
        let base = roi_at_gap(&h, g);
        prop_assert!(roi_at_gap(&Hypothesis::new("a", s * bump, ri, rp), g) >= base);
        prop_assert!(roi_at_gap(&Hypothesis::new("a", s, ri * bump, rp), g) <= base);
        prop_assert!(roi_at_gap(&h, g * bump) >= base);
    }
}

fn logs() -> impl Strategy<Value = Vec<ProblemLog>> {
    let attempt = (proptest::option::weighted(0.8, 5.0f64..200.0), 1u64..1000);
    let problem = (proptest::collection::vec(attempt, 0..30), select(vec![50.0, 100.0]), select(vec![5.0, 10.0, 20.0]));
    proptest::collection::vec(problem, 1..6).prop_map(|ps| {
        ps.into_iter()
            .enumerate()
            .map(|(p, (attempts, t_ref, t_sol))| {
                let id = format!("p{p}");
                let attempts = attempts
                    .into_iter()
                    .enumerate()
                    .map(|(i, (rt, tok))| AttemptRecord::new(id.clone(), i as u32 + 1, rt, tok))
                    .collect();
                ProblemLog::new(id, t_ref, t_sol, attempts)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn policies_never_beat_the_full_log(logs in logs(), eps in proptest::option::of(0.0f64..3.0), w in 0u32..12) {
        let r = replay(&logs, &SchedulingPolicy::new(eps, w)).unwrap();
        let fixed = fixed_allocation(&logs);
        for (id, o) in &r.per_problem {
            prop_assert!(o.tokens_consumed <= fixed[id].tokens_consumed);
            prop_assert!(o.speedup_final <= fixed[id].speedup_final);
        }
        prop_assert!(r.retention.geomean <= 1.0 + 1e-12);
        prop_assert!(r.token_ratio <= 1.0 || r.totals.tokens == 0);
    }

    #[test]
    fn looser_thresholds_stop_no_later(logs in logs(), e1 in 0.0f64..3.0, e2 in 0.0f64..3.0, w1 in 0u32..12, w2 in 0u32..12) {
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let strict = replay(&logs, &SchedulingPolicy::new(Some(lo), 0)).unwrap();
        let loose = replay(&logs, &SchedulingPolicy::new(Some(hi), 0)).unwrap();
        prop_assert!(loose.totals.tokens <= strict.totals.tokens);

        let (short, long) = (w1.min(w2).max(1), w1.max(w2).max(1));
        let a = replay(&logs, &SchedulingPolicy::new(None, short)).unwrap();
        let b = replay(&logs, &SchedulingPolicy::new(None, long)).unwrap();
        prop_assert!(a.totals.tokens <= b.totals.tokens);
    }

    #[test]
    fn workers_only_relabel_the_trace(logs in logs(), eps in proptest::option::of(0.0f64..3.0), w in 0u32..12, workers in 1u32..8) {
        let one = replay(&logs, &SchedulingPolicy::new(eps, w)).unwrap();
        let many = replay(&logs, &SchedulingPolicy { workers, ..SchedulingPolicy::new(eps, w) }).unwrap();
        prop_assert_eq!(&one.per_problem, &many.per_problem);
        prop_assert_eq!(one.trace.len(), many.trace.len());
    }
}

fn speedups() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..20.0, 1..60)
}

fn set(values: &[f64]) -> SpeedupSet {
    let entries: BTreeMap<String, f64> = values.iter().enumerate().map(|(i, v)| (format!("p{i:03}"), *v)).collect();
    SpeedupSet::new(entries, UnsolvedConvention::FallbackOne).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn geomean_is_at_most_the_mean(v in speedups()) {
        let g = geomean(&v).unwrap();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!(g <= m * (1.0 + 1e-12));
        let med = median(&v).unwrap();
        prop_assert!(v.iter().cloned().fold(f64::INFINITY, f64::min) <= med);
        prop_assert!(med <= v.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn stats_ignore_order(v in speedups(), seed in any::<u64>()) {
        let mut w = v.clone();
        let n = w.len();
        for i in (1..n).rev() {
            w.swap(i, (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize);
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        prop_assert!(close(geomean(&v).unwrap(), geomean(&w).unwrap()));
        prop_assert_eq!(median(&v), median(&w));
        prop_assert!(close(signed_area(&set(&v), &set(&w)).unwrap(), 0.0));
    }

    #[test]
    fn fast_p_falls_as_the_threshold_rises(v in speedups(), mut rs in proptest::collection::vec(0.0f64..25.0, 2..20)) {
        rs.sort_by(f64::total_cmp);
        let curve = fast_p(&set(&v), &rs).unwrap();
        prop_assert!(curve.values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(curve.values.iter().all(|p| (0.0..=100.0).contains(p)));
    }

    #[test]
    fn rejecting_attempts_never_raises_the_geomean(
        runtimes in proptest::collection::vec(proptest::collection::vec(5.0f64..99.0, 1..10), 1..8),
        gaming in proptest::collection::vec(any::<bool>(), 80),
    ) {
        let mut logs = Vec::new();
        let mut evidence = Vec::new();
        let mut flags = gaming.into_iter().cycle();
        for (p, rts) in runtimes.iter().enumerate() {
            let id = format!("p{p}");
            let attempts: Vec<AttemptRecord> =
                rts.iter().enumerate().map(|(i, t)| AttemptRecord::new(id.clone(), i as u32 + 1, Some(*t), 1)).collect();
            for a in &attempts {
                let reviewer = if flags.next().unwrap() { ReviewerLabel::Gaming(None) } else { ReviewerLabel::NoIssues };
                evidence.push(AttemptEvidence { problem_id: id.clone(), index: a.index, ceiling: false, pytorch_only: false, reviewer: Some(reviewer) });
            }
            logs.push(ProblemLog::new(id, 100.0, 1.0, attempts));
        }
        let filtered = filter_speedups(&logs, &review(&evidence), UnsolvedConvention::FallbackOne).unwrap();
        let unfiltered: Vec<f64> = fixed_allocation(&logs).values().map(|o| o.speedup_final).collect();
        let gf = geomean(&filtered.values().collect::<Vec<_>>()).unwrap();
        prop_assert!(gf <= geomean(&unfiltered).unwrap() * (1.0 + 1e-12));
    }
}

#[test]
fn every_generated_kernel_source_is_checkable() {
    // Not all generated programs validate; they must all get through the
    // parser and lowering so the properties above exercise real configs.
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for _ in 0..200 {
        let src = source().new_tree(&mut runner).unwrap().current();
        match check(&src) {
            Ok(_) | Err(ucutlass::compile::CompileError::Invalid(_)) => {}
            Err(e) => panic!("{src}: {e}"),
        }
    }
}
