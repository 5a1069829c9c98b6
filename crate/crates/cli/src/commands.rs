use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use ucutlass::compile::{self as driver, ErrorRecord};
use ucutlass::integrity::{self, AttemptEvidence, PatternConfig};
use ucutlass::ir::{config_hash, DType};
use ucutlass::metrics::{self, FastPCurve, SpeedupSet, UnsolvedConvention};
use ucutlass::schedule::{self, fmt_eps, Pricing, ProblemLog, ScheduleResult, SchedulingPolicy};
use ucutlass::sol::{self, HardwareSpec, ProblemSpec};
use ucutlass::triage::{self, GapContext};

use crate::{diag, plot, CompileArgs, Failure, MetricsArgs, ReplayArgs, ReviewArgs, SolArgs, SweepArgs, TriageArgs};

type Res = Result<(), Failure>;

fn read(stage: &str, path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::domain(stage, format!("{}: {e}", path.display())))
}

fn open(stage: &str, path: &Path) -> Result<fs::File, Failure> {
    fs::File::open(path).map_err(|e| Failure::domain(stage, format!("{}: {e}", path.display())))
}

fn create(stage: &str, path: &Path) -> Result<fs::File, Failure> {
    fs::File::create(path).map_err(|e| Failure::domain(stage, format!("{}: {e}", path.display())))
}

fn stdout_write(stage: &str, text: &str) -> Res {
    match io::stdout().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::domain(stage, e)),
        _ => Ok(()),
    }
}

fn print_json(v: &impl serde::Serialize) {
    let mut text = serde_json::to_string_pretty(v).expect("serializable");
    text.push('\n');
    let _ = stdout_write("output", &text);
}

fn load_logs(stage: &str, path: &Path) -> Result<Vec<ProblemLog>, Failure> {
    schedule::load_logs(path).map_err(|e| Failure::domain(stage, e))
}

pub fn compile(a: CompileArgs) -> Res {
    let source = match (&a.file, a.text) {
        (Some(p), _) => read("compile", p)?,
        (None, Some(t)) => t,
        (None, None) => return Err(Failure::Usage("one of --file or --text is required".into())),
    };
    if a.check {
        let (config, report) = driver::check(&source).map_err(|e| Failure::records(&e.records()))?;
        report.warnings().for_each(|d| diag(&serde_json::to_value(ErrorRecord::from_diagnostic(d)).unwrap()));
        println!("{}", config_hash(&config).namespace);
        return Ok(());
    }
    let c = driver::compile(&source).map_err(|e| Failure::records(&e.records()))?;
    c.report.warnings().for_each(|d| diag(&serde_json::to_value(ErrorRecord::from_diagnostic(d)).unwrap()));
    match a.out {
        Some(dir) => {
            fs::create_dir_all(&dir).map_err(|e| Failure::domain("compile", format!("{}: {e}", dir.display())))?;
            let path = dir.join(&c.artifact.filename);
            // Skip the write when the content-addressed file is already there.
            if fs::read_to_string(&path).ok().as_deref() != Some(c.artifact.text.as_str()) {
                fs::write(&path, &c.artifact.text)
                    .map_err(|e| Failure::domain("compile", format!("{}: {e}", path.display())))?;
            }
            println!("{}", c.hash.namespace);
        }
        None => {
            stdout_write("compile", &c.artifact.text)?;
            diag(&json!({ "stage": "compile", "severity": "info", "namespace": c.hash.namespace }));
        }
    }
    Ok(())
}

fn parse_dtype(s: &str) -> Result<DType, Failure> {
    s.parse().map_err(Failure::Usage)
}

pub fn sol(a: SolArgs) -> Res {
    let dtype = parse_dtype(&a.precision)?;
    let spec = ProblemSpec::from_toml_str(&read("sol", &a.problem)?).map_err(|e| Failure::domain("sol", e))?;
    let hw = HardwareSpec::from_toml_str(&read("sol", &a.hardware)?).map_err(|e| Failure::domain("sol", e))?;
    let report = sol::sol(&spec, &hw, dtype).map_err(|e| Failure::domain("sol", e))?;
    if a.json {
        println!("{}", report.to_json());
    } else {
        stdout_write("sol", &report.to_text())?;
    }
    Ok(())
}

pub fn triage(a: TriageArgs) -> Res {
    let hs = triage::read_csv(open("triage", &a.hypotheses)?).map_err(|e| Failure::domain("triage", e))?;
    let ctx = GapContext::new(a.t_best, a.t_sol).map_err(|e| Failure::domain("triage", e))?;
    let ranked = triage::rank(&hs, &ctx).map_err(|e| Failure::domain("triage", e))?;
    let g = ctx.gap();
    if a.json {
        print_json(&json!({ "gap": g, "exponent": triage::gap_exponent(g), "ranked": ranked }));
        return Ok(());
    }
    println!("# gap {g:.3}, exponent {:.3}", triage::gap_exponent(g));
    let mut wr = csv::Writer::from_writer(io::stdout());
    let csv_err = |e: csv::Error| Failure::domain("triage", e);
    wr.write_record(["rank", "id", "roi", "est_speedup", "risk_impl", "risk_perf", "description"]).map_err(csv_err)?;
    for r in &ranked {
        let h = &r.hypothesis;
        wr.write_record([
            r.rank.to_string(),
            h.id.clone(),
            format!("{:.6}", r.roi),
            h.est_speedup.to_string(),
            h.risk_impl.to_string(),
            h.risk_perf.to_string(),
            h.description.clone(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(|e| Failure::domain("triage", e))?;
    Ok(())
}

fn parse_epsilon(s: &str) -> Result<Option<f64>, Failure> {
    if s.eq_ignore_ascii_case("off") || s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let v: f64 = s.trim_end_matches('%').parse().map_err(|_| Failure::Usage(format!("bad epsilon `{s}`")))?;
    Ok(Some(if s.ends_with('%') { v / 100.0 } else { v }))
}

fn summary_line(r: &ScheduleResult) -> String {
    format!(
        "policy {}: tokens {} ({:.1}% saved), geomean {:.4}, retention {:.4} (median {:.4}), efficiency gain {:.4}",
        r.policy,
        r.totals.tokens,
        100.0 * r.token_savings(),
        r.geomean_speedup,
        r.retention.geomean,
        r.retention.median,
        r.efficiency_gain
    )
}

pub fn replay(a: ReplayArgs) -> Res {
    let policy = SchedulingPolicy { workers: a.workers, ..SchedulingPolicy::new(parse_epsilon(&a.epsilon)?, a.window) };
    let logs = load_logs("replay", &a.logs)?;
    let r = schedule::replay(&logs, &policy).map_err(|e| Failure::domain("replay", e))?;
    if let Some(path) = &a.out {
        let mut wr = csv::Writer::from_writer(create("replay", path)?);
        let csv_err = |e: csv::Error| Failure::domain("replay", e);
        wr.write_record([
            "epsilon",
            "window",
            "problem_id",
            "attempts_consumed",
            "tokens_consumed",
            "t_best_final",
            "speedup_final",
            "stop_reason",
        ])
        .map_err(csv_err)?;
        schedule::write_result_rows(&mut wr, &r).map_err(csv_err)?;
        wr.flush().map_err(|e| Failure::domain("replay", e))?;
    }
    if a.json {
        print_json(&r);
    } else {
        println!("{}", summary_line(&r));
        println!("token savings {:.4}", r.token_savings());
        println!("retention {:.4}", r.retention.geomean);
    }
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Res {
    let (default_eps, default_w) = schedule::default_grid();
    let eps = if a.epsilons.is_empty() {
        default_eps
    } else {
        a.epsilons.iter().map(|s| parse_epsilon(s)).collect::<Result<_, _>>()?
    };
    let windows = if a.windows.is_empty() { default_w } else { a.windows.clone() };
    let pricing = match &a.pricing {
        Some(p) => Pricing::from_toml_str(&read("sweep", p)?).map_err(|e| Failure::domain("sweep", e))?,
        None => Pricing::default(),
    };
    if let Some(m) = &a.model {
        if !pricing.per_million_tokens.contains_key(m) {
            return Err(Failure::Usage(format!("no price for model `{m}`")));
        }
    }
    let logs = load_logs("sweep", &a.logs)?;
    let s = schedule::sweep(&logs, &eps, &windows).map_err(|e| Failure::domain("sweep", e))?;
    if let Some(p) = &a.cells {
        s.write_cells_csv(create("sweep", p)?).map_err(|e| Failure::domain("sweep", e))?;
    }
    if let Some(p) = &a.pareto {
        s.write_pareto_csv(create("sweep", p)?).map_err(|e| Failure::domain("sweep", e))?;
    }
    if let Some(p) = &a.plot {
        plot::pareto(p, &s).map_err(|e| Failure::domain("plot", e))?;
    }
    let best = s.best(a.min_retention);
    let dollars = |tokens: u64| a.model.as_deref().and_then(|m| pricing.dollars(m, tokens));
    if a.json {
        print_json(&json!({
            "fixed": { "tokens": s.fixed.totals.tokens, "geomean": s.fixed.geomean_speedup, "dollars": dollars(s.fixed.totals.tokens) },
            "frontier": s.frontier,
            "best": best.map(|b| json!({
                "epsilon": b.policy.epsilon,
                "window": b.policy.window,
                "tokens": b.totals.tokens,
                "dollars": dollars(b.totals.tokens),
                "retention": b.retention.geomean,
                "token_ratio": b.token_ratio,
                "efficiency_gain": b.efficiency_gain,
            })),
        }));
        return Ok(());
    }
    println!("fixed: tokens {}, geomean {:.4}", s.fixed.totals.tokens, s.fixed.geomean_speedup);
    println!("{} cells, {} on the frontier", s.cells.len(), s.frontier.len());
    for p in &s.frontier {
        println!("  frontier eps={} w={}: cost {:.4}, geomean {:.4}", fmt_eps(p.epsilon), p.window, p.normalized_cost, p.geomean_speedup);
    }
    match best {
        Some(b) => {
            println!("best with retention >= {}: {}", a.min_retention, summary_line(b));
            if let (Some(fixed), Some(policy)) = (dollars(s.fixed.totals.tokens), dollars(b.totals.tokens)) {
                println!("cost ${policy:.2} vs ${fixed:.2} fixed");
            }
        }
        None => println!("no cell keeps retention >= {}", a.min_retention),
    }
    Ok(())
}

fn load_speedups(path: &Path, convention: UnsolvedConvention) -> Result<SpeedupSet, Failure> {
    metrics::read_speedups_csv(open("metrics", path)?, convention).map_err(|e| Failure::domain("metrics", e))
}

fn label(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn metrics(a: MetricsArgs) -> Res {
    let convention = if a.zero_unsolved { UnsolvedConvention::Zero } else { UnsolvedConvention::FallbackOne };
    let set = load_speedups(&a.speedups, convention)?;
    let other = a.compare.as_ref().map(|p| load_speedups(p, convention)).transpose()?;
    let m = |e: metrics::MetricsError| Failure::domain("metrics", e);
    let summary = metrics::summarize(&set).map_err(m)?;
    if summary.excluded_zero > 0 {
        diag(&json!({
            "stage": "metrics",
            "severity": "warning",
            "message": format!("{} zero speedups left out of the geomean", summary.excluded_zero),
        }));
    }
    let area = other.as_ref().map(|o| metrics::signed_area(&set, o)).transpose().map_err(m)?;

    let curve_for = |s: &SpeedupSet| -> Result<FastPCurve, Failure> {
        if a.exact {
            metrics::fast_p_steps(s).map_err(m)
        } else {
            metrics::fast_p(s, &metrics::plot_thresholds(s.max(), 200)).map_err(m)
        }
    };
    if let Some(p) = &a.curve {
        curve_for(&set)?.write_csv(create("metrics", p)?).map_err(|e| Failure::domain("metrics", e))?;
    }
    if let Some(p) = &a.plot {
        let top = other.as_ref().map_or(set.max(), |o| set.max().max(o.max()));
        let grid = metrics::plot_thresholds(top, 200);
        let mut series = vec![(label(&a.speedups), metrics::fast_p(&set, &grid).map_err(m)?)];
        if let (Some(o), Some(path)) = (&other, &a.compare) {
            series.push((label(path), metrics::fast_p(o, &grid).map_err(m)?));
        }
        plot::fast_p(p, &series).map_err(|e| Failure::domain("plot", e))?;
    }
    let attempt_curve = match &a.logs {
        Some(path) => Some(metrics::attempt_fast_p(&load_logs("metrics", path)?, a.target).map_err(m)?),
        None => None,
    };
    if let (Some(p), Some(curve)) = (&a.attempt_plot, &attempt_curve) {
        plot::attempt_fast_p(p, &[(format!("speedup >= {}", a.target), curve.clone())])
            .map_err(|e| Failure::domain("plot", e))?;
    } else if a.attempt_plot.is_some() {
        return Err(Failure::Usage("--attempt-plot needs --logs".into()));
    }

    if a.json {
        print_json(&json!({
            "summary": summary,
            "signed_area": area,
            "attempt_fast_p": attempt_curve.map(|c| json!({ "target": a.target, "percent": c })),
        }));
        return Ok(());
    }
    println!("problems {}", summary.count);
    println!("geomean {:.4}", summary.geomean);
    println!("median {:.4}", summary.median);
    println!("mean {:.4}", summary.mean);
    for c in &summary.count_ge {
        println!("speedup >= {}: {}", c.r, c.count);
    }
    if let Some(v) = area {
        println!("signed area {v:.6}");
    }
    if let Some(c) = attempt_curve {
        let last = c.last().copied().unwrap_or(0.0);
        println!("attempt fast_{} after {} attempts: {last:.1}%", a.target, c.len());
    }
    Ok(())
}

/// Finds `<dir>/<problem_id>/<index>.*`.
fn profile_path(dir: &Path, problem_id: &str, index: u32) -> Option<PathBuf> {
    let sub = dir.join(problem_id);
    let stem = index.to_string();
    let mut hits: Vec<PathBuf> = fs::read_dir(&sub)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_stem().is_some_and(|s| s.to_string_lossy() == stem))
        .collect();
    hits.sort();
    hits.into_iter().next()
}

pub fn review(a: ReviewArgs) -> Res {
    let logs = load_logs("review", &a.logs)?;
    let labels = match &a.labels {
        Some(p) => integrity::read_labels_csv(open("review", p)?).map_err(|e| Failure::domain("review", e))?,
        None => BTreeMap::new(),
    };
    let patterns = match &a.patterns {
        Some(p) => PatternConfig::from_toml_str(&read("review", p)?).map_err(|e| Failure::domain("review", e))?,
        None => PatternConfig::default(),
    };
    let known: std::collections::BTreeSet<(String, u32)> =
        logs.iter().flat_map(|l| l.attempts.iter().map(|a| (a.problem_id.clone(), a.index))).collect();
    for (id, index) in labels.keys().filter(|k| !known.contains(*k)) {
        diag(&json!({
            "stage": "review",
            "severity": "warning",
            "message": format!("label for unknown attempt {id}#{index} ignored"),
        }));
    }

    let mut evidence = Vec::new();
    for log in &logs {
        for att in &log.attempts {
            let pytorch_only = match a.profiles.as_deref().and_then(|d| profile_path(d, &att.problem_id, att.index)) {
                Some(p) => {
                    let profile = integrity::parse_profile(&read("review", &p)?)
                        .map_err(|e| Failure::domain("review", format!("{}: {e}", p.display())))?;
                    integrity::pytorch_only_check(&profile, &patterns)
                }
                None => false,
            };
            evidence.push(AttemptEvidence {
                problem_id: att.problem_id.clone(),
                index: att.index,
                ceiling: att.runtime_s.is_some_and(|t| integrity::sol_ceiling_check(t, log.t_sol)),
                pytorch_only,
                reviewer: labels.get(&(att.problem_id.clone(), att.index)).copied(),
            });
        }
    }
    let outcomes = integrity::review(&evidence);
    match &a.out {
        Some(p) => integrity::write_outcomes_csv(&outcomes, create("review", p)?),
        None => integrity::write_outcomes_csv(&outcomes, io::stdout()),
    }
    .map_err(|e| Failure::domain("review", e))?;
    if let Some(p) = &a.filtered_logs {
        let filtered = integrity::apply_outcomes(&logs, &outcomes).map_err(|e| Failure::domain("review", e))?;
        schedule::write_jsonl(&filtered, create("review", p)?).map_err(|e| Failure::domain("review", e))?;
    }
    let rejected = outcomes.iter().filter(|o| !o.outcome.accepted).count();
    diag(&json!({
        "stage": "review",
        "severity": "info",
        "message": format!("{rejected} of {} attempts rejected", outcomes.len()),
    }));
    Ok(())
}
