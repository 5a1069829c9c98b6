//! Offline replay of SOL-guided budget scheduling.
//!
//! A run log records every attempt a fixed-allocation run made on each
//! problem. Replay deals work items round-robin over the problems that are
//! still eligible and stops a problem early when, while ahead of PyTorch
//! (`t_best < t_ref`), either
//!
//! * its best runtime is within `(1 + ε)` of the SOL bound, or
//! * `w` consecutive consumed attempts failed to improve `t_best`.
//!
//! A problem behind PyTorch runs until its log is exhausted. Replay can only
//! truncate a log, never extend it.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{geomean, median};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("problem `{id}`: {message}")]
    Problem { id: String, message: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("policy consumed zero tokens; efficiency gain is undefined")]
    ZeroTokens,
    #[error("no logs to replay")]
    Empty,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub problem_id: String,
    /// 1-based position within the problem's log.
    pub index: u32,
    /// Absent when the attempt failed to compile or was incorrect.
    #[serde(default)]
    pub runtime_s: Option<f64>,
    pub correct: bool,
    pub tokens: u64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub excluded_by_integrity: bool,
}

impl AttemptRecord {
    /// A correct attempt when `runtime_s` is set, a failed one otherwise.
    pub fn new(problem_id: impl Into<String>, index: u32, runtime_s: Option<f64>, tokens: u64) -> Self {
        AttemptRecord {
            problem_id: problem_id.into(),
            index,
            runtime_s,
            correct: runtime_s.is_some(),
            tokens,
            excluded_by_integrity: false,
        }
    }

    /// Runtime that may count toward `t_best`.
    pub fn accepted_runtime(&self) -> Option<f64> {
        if self.correct && !self.excluded_by_integrity {
            self.runtime_s
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkUnit {
    #[default]
    Attempt,
    Iteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationShape {
    pub iterations: u32,
    pub hypotheses_per_iter: u32,
    pub attempts_per_hypothesis: u32,
}

impl IterationShape {
    /// 5 iterations x 2 hypotheses x 4 attempts = 40.
    pub const DEFAULT: IterationShape = IterationShape { iterations: 5, hypotheses_per_iter: 2, attempts_per_hypothesis: 4 };

    pub fn attempts_per_iteration(&self) -> usize {
        (self.hypotheses_per_iter * self.attempts_per_hypothesis) as usize
    }

    pub fn budget(&self) -> usize {
        self.iterations as usize * self.attempts_per_iteration()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemLog {
    pub problem_id: String,
    /// PyTorch baseline runtime.
    pub t_ref: f64,
    /// FP16 SOL bound.
    pub t_sol: f64,
    pub attempts: Vec<AttemptRecord>,
    #[serde(default)]
    pub unit: WorkUnit,
    #[serde(default)]
    pub iteration_shape: Option<IterationShape>,
}

impl ProblemLog {
    pub fn new(problem_id: impl Into<String>, t_ref: f64, t_sol: f64, attempts: Vec<AttemptRecord>) -> Self {
        ProblemLog { problem_id: problem_id.into(), t_ref, t_sol, attempts, unit: WorkUnit::Attempt, iteration_shape: None }
    }

    pub fn check(&self) -> Result<(), LogError> {
        let err = |message: String| LogError::Problem { id: self.problem_id.clone(), message };
        for (what, v) in [("t_ref", self.t_ref), ("t_sol", self.t_sol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(err(format!("{what} must be positive, got {v}")));
            }
        }
        let mut prev = 0;
        for a in &self.attempts {
            if a.problem_id != self.problem_id {
                return Err(err(format!("attempt {} belongs to `{}`", a.index, a.problem_id)));
            }
            if a.index <= prev {
                return Err(err(format!("attempt index {} does not increase after {prev}", a.index)));
            }
            prev = a.index;
            match a.runtime_s {
                Some(t) if !(t.is_finite() && t > 0.0) => {
                    return Err(err(format!("attempt {} has runtime {t}", a.index)));
                }
                None if a.correct => return Err(err(format!("attempt {} is correct but has no runtime", a.index))),
                _ => {}
            }
        }
        match (self.unit, self.iteration_shape) {
            (WorkUnit::Iteration, None) => Err(err("unit = iteration needs an iteration_shape".into())),
            (_, Some(s)) if s.attempts_per_iteration() == 0 || s.iterations == 0 => {
                Err(err("iteration_shape entries must be positive".into()))
            }
            (_, Some(s)) if self.attempts.len() > s.budget() => Err(err(format!(
                "{} attempts exceed the {}-attempt iteration budget",
                self.attempts.len(),
                s.budget()
            ))),
            _ => Ok(()),
        }
    }

    fn item_size(&self) -> usize {
        match (self.unit, self.iteration_shape) {
            (WorkUnit::Iteration, Some(s)) => s.attempts_per_iteration(),
            _ => 1,
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.attempts.iter().map(|a| a.tokens).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discipline {
    #[default]
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulingPolicy {
    /// SOL-gap threshold; `None` disables the criterion.
    pub epsilon: Option<f64>,
    /// No-progress window in attempts; 0 disables it.
    pub window: u32,
    #[serde(default)]
    pub discipline: Discipline,
    pub workers: u32,
}

impl SchedulingPolicy {
    pub const FIXED: SchedulingPolicy =
        SchedulingPolicy { epsilon: None, window: 0, discipline: Discipline::RoundRobin, workers: 1 };

    pub fn new(epsilon: Option<f64>, window: u32) -> Self {
        SchedulingPolicy { epsilon, window, ..Self::FIXED }
    }

    pub fn is_fixed(&self) -> bool {
        self.epsilon.is_none() && self.window == 0
    }

    fn check(&self) -> Result<(), ScheduleError> {
        if let Some(e) = self.epsilon {
            if !(e.is_finite() && e >= 0.0) {
                return Err(ScheduleError::Policy(format!("epsilon must be a nonnegative fraction, got {e}")));
            }
        }
        if self.workers == 0 {
            return Err(ScheduleError::Policy("workers must be positive".into()));
        }
        Ok(())
    }
}

impl fmt::Display for SchedulingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.epsilon {
            Some(e) => write!(f, "eps={e}")?,
            None => f.write_str("eps=off")?,
        }
        write!(f, ",w={}", self.window)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BudgetExhausted,
    SolGap,
    NoProgress,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::BudgetExhausted => "budget_exhausted",
            StopReason::SolGap => "sol_gap",
            StopReason::NoProgress => "no_progress",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub attempts_consumed: usize,
    pub tokens_consumed: u64,
    pub t_best_final: Option<f64>,
    /// `t_ref / t_best`, or 1.0 (the PyTorch fallback) when unsolved.
    pub speedup_final: f64,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub tokens: u64,
    pub attempts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Retention {
    pub geomean: f64,
    pub median: f64,
}

/// One dealt work item, in dealing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkItem {
    pub round: usize,
    pub worker: u32,
    pub problem_id: String,
    /// Attempt positions (0-based) consumed by this item.
    pub first: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleResult {
    pub policy: SchedulingPolicy,
    pub per_problem: BTreeMap<String, ProblemOutcome>,
    pub totals: Totals,
    pub geomean_speedup: f64,
    pub median_speedup: f64,
    /// Against the fixed-allocation run of the same logs.
    pub retention: Retention,
    pub token_ratio: f64,
    pub efficiency_gain: f64,
    pub trace: Vec<WorkItem>,
}

impl ScheduleResult {
    pub fn token_savings(&self) -> f64 {
        1.0 - self.token_ratio
    }

    pub fn stop_reasons(&self) -> BTreeMap<&str, StopReason> {
        self.per_problem.iter().map(|(k, v)| (k.as_str(), v.stop_reason)).collect()
    }

    fn speedups(&self) -> Vec<f64> {
        self.per_problem.values().map(|o| o.speedup_final).collect()
    }
}

/// Per-problem replay state.
struct Cursor<'a> {
    log: &'a ProblemLog,
    pos: usize,
    tokens: u64,
    t_best: Option<f64>,
    stall: u32,
    stopped: Option<StopReason>,
}

impl<'a> Cursor<'a> {
    fn new(log: &'a ProblemLog) -> Self {
        Cursor { log, pos: 0, tokens: 0, t_best: None, stall: 0, stopped: None }
    }

    fn ahead(&self) -> bool {
        self.t_best.is_some_and(|t| t < self.log.t_ref)
    }

    fn consume_one(&mut self) {
        let a = &self.log.attempts[self.pos];
        self.pos += 1;
        self.tokens += a.tokens;
        let improved = match (a.accepted_runtime(), self.t_best) {
            (Some(t), Some(b)) => t < b,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if improved {
            self.t_best = a.accepted_runtime();
            self.stall = 0;
        } else if self.ahead() {
            self.stall += 1;
        }
    }

    fn check_stop(&mut self, policy: &SchedulingPolicy) {
        if self.ahead() {
            let t = self.t_best.expect("ahead implies solved");
            if policy.epsilon.is_some_and(|e| t <= (1.0 + e) * self.log.t_sol) {
                self.stopped = Some(StopReason::SolGap);
                return;
            }
            if policy.window > 0 && self.stall >= policy.window {
                self.stopped = Some(StopReason::NoProgress);
                return;
            }
        }
        if self.pos == self.log.attempts.len() {
            self.stopped = Some(StopReason::BudgetExhausted);
        }
    }

    fn outcome(&self) -> ProblemOutcome {
        ProblemOutcome {
            attempts_consumed: self.pos,
            tokens_consumed: self.tokens,
            t_best_final: self.t_best,
            speedup_final: self.t_best.map_or(1.0, |t| self.log.t_ref / t),
            stop_reason: self.stopped.unwrap_or(StopReason::BudgetExhausted),
        }
    }
}

fn check_logs(logs: &[ProblemLog]) -> Result<(), ScheduleError> {
    if logs.is_empty() {
        return Err(ScheduleError::Empty);
    }
    let mut seen = std::collections::BTreeSet::new();
    for log in logs {
        log.check()?;
        if !seen.insert(&log.problem_id) {
            return Err(LogError::Problem { id: log.problem_id.clone(), message: "duplicate problem".into() }.into());
        }
    }
    Ok(())
}

fn simulate(logs: &[ProblemLog], policy: &SchedulingPolicy) -> (BTreeMap<String, ProblemOutcome>, Vec<WorkItem>) {
    let mut order: Vec<&ProblemLog> = logs.iter().collect();
    order.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    let mut cursors: Vec<Cursor> = order.into_iter().map(Cursor::new).collect();
    for c in &mut cursors {
        if c.log.attempts.is_empty() {
            c.stopped = Some(StopReason::BudgetExhausted);
        }
    }
    let mut trace = Vec::new();
    let mut round = 0;
    while cursors.iter().any(|c| c.stopped.is_none()) {
        for c in cursors.iter_mut().filter(|c| c.stopped.is_none()) {
            let first = c.pos;
            let len = c.log.item_size().min(c.log.attempts.len() - first);
            for _ in 0..len {
                c.consume_one();
            }
            c.check_stop(policy);
            let worker = (trace.len() % policy.workers as usize) as u32;
            trace.push(WorkItem { round, worker, problem_id: c.log.problem_id.clone(), first, len });
        }
        round += 1;
    }
    (cursors.iter().map(|c| (c.log.problem_id.clone(), c.outcome())).collect(), trace)
}

/// The full-log outcome of every problem, computed directly from the logs.
pub fn fixed_allocation(logs: &[ProblemLog]) -> BTreeMap<String, ProblemOutcome> {
    logs.iter()
        .map(|log| {
            let t_best = log.attempts.iter().filter_map(AttemptRecord::accepted_runtime).reduce(f64::min);
            let outcome = ProblemOutcome {
                attempts_consumed: log.attempts.len(),
                tokens_consumed: log.total_tokens(),
                t_best_final: t_best,
                speedup_final: t_best.map_or(1.0, |t| log.t_ref / t),
                stop_reason: StopReason::BudgetExhausted,
            };
            (log.problem_id.clone(), outcome)
        })
        .collect()
}

fn assemble(
    policy: SchedulingPolicy,
    per_problem: BTreeMap<String, ProblemOutcome>,
    trace: Vec<WorkItem>,
    fixed: &BTreeMap<String, ProblemOutcome>,
) -> ScheduleResult {
    let speedups: Vec<f64> = per_problem.values().map(|o| o.speedup_final).collect();
    let fixed_speedups: Vec<f64> = fixed.values().map(|o| o.speedup_final).collect();
    let tokens: u64 = per_problem.values().map(|o| o.tokens_consumed).sum();
    let fixed_tokens: u64 = fixed.values().map(|o| o.tokens_consumed).sum();
    let g = geomean(&speedups).unwrap_or(f64::NAN);
    let m = median(&speedups).unwrap_or(f64::NAN);
    let retention = Retention {
        geomean: g / geomean(&fixed_speedups).unwrap_or(f64::NAN),
        median: m / median(&fixed_speedups).unwrap_or(f64::NAN),
    };
    let token_ratio = tokens as f64 / fixed_tokens as f64;
    ScheduleResult {
        policy,
        totals: Totals { tokens, attempts: per_problem.values().map(|o| o.attempts_consumed).sum() },
        per_problem,
        geomean_speedup: g,
        median_speedup: m,
        retention,
        token_ratio,
        efficiency_gain: retention.geomean * (fixed_tokens as f64 / tokens as f64),
        trace,
    }
}

pub fn replay(logs: &[ProblemLog], policy: &SchedulingPolicy) -> Result<ScheduleResult, ScheduleError> {
    policy.check()?;
    check_logs(logs)?;
    let (per_problem, trace) = simulate(logs, policy);
    Ok(assemble(*policy, per_problem, trace, &fixed_allocation(logs)))
}

/// `(g_policy / g_fixed) * (tokens_fixed / tokens_policy)`.
pub fn efficiency_gain(result: &ScheduleResult, fixed: &ScheduleResult) -> Result<f64, ScheduleError> {
    if result.totals.tokens == 0 {
        return Err(ScheduleError::ZeroTokens);
    }
    let g = geomean(&result.speedups()).unwrap_or(f64::NAN);
    let gf = geomean(&fixed.speedups()).unwrap_or(f64::NAN);
    Ok((g / gf) * (fixed.totals.tokens as f64 / result.totals.tokens as f64))
}

/// Per-million-token prices by model name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pricing {
    pub per_million_tokens: BTreeMap<String, f64>,
}

impl Default for Pricing {
    fn default() -> Self {
        Pricing {
            per_million_tokens: BTreeMap::from([
                ("gpt-5-mini".to_string(), 0.25),
                ("gpt-5".to_string(), 1.25),
                ("gpt-5.2".to_string(), 1.75),
            ]),
        }
    }
}

impl Pricing {
    pub fn from_toml_str(s: &str) -> Result<Self, String> {
        toml::from_str(s).map_err(|e| e.to_string())
    }

    pub fn dollars(&self, model: &str, tokens: u64) -> Option<f64> {
        self.per_million_tokens.get(model).map(|p| p * tokens as f64 / 1e6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub epsilon: Option<f64>,
    pub window: u32,
    /// Cost relative to fixed allocation.
    pub normalized_cost: f64,
    pub geomean_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub fixed: ScheduleResult,
    pub cells: Vec<ScheduleResult>,
    pub frontier: Vec<ParetoPoint>,
}

impl Sweep {
    /// Highest efficiency gain among cells retaining at least
    /// `min_retention` of the fixed geomean; ties go to fewer tokens.
    pub fn best(&self, min_retention: f64) -> Option<&ScheduleResult> {
        self.cells
            .iter()
            .filter(|c| c.retention.geomean >= min_retention)
            .max_by(|a, b| {
                a.efficiency_gain
                    .total_cmp(&b.efficiency_gain)
                    .then(b.totals.tokens.cmp(&a.totals.tokens))
            })
    }

    /// One row per (ε, w, problem).
    pub fn write_cells_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "epsilon",
            "window",
            "problem_id",
            "attempts_consumed",
            "tokens_consumed",
            "t_best_final",
            "speedup_final",
            "stop_reason",
        ])?;
        for c in &self.cells {
            write_result_rows(&mut wr, c)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_pareto_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "epsilon",
            "window",
            "normalized_cost",
            "geomean_speedup",
            "retention_geomean",
            "token_savings",
            "efficiency_gain",
            "on_frontier",
        ])?;
        for c in &self.cells {
            let on = self.frontier.iter().any(|p| p.epsilon == c.policy.epsilon && p.window == c.policy.window);
            wr.write_record([
                fmt_eps(c.policy.epsilon),
                c.policy.window.to_string(),
                c.token_ratio.to_string(),
                c.geomean_speedup.to_string(),
                c.retention.geomean.to_string(),
                c.token_savings().to_string(),
                c.efficiency_gain.to_string(),
                on.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn fmt_eps(e: Option<f64>) -> String {
    e.map_or_else(|| "off".to_string(), |e| e.to_string())
}

/// Writes one row per problem of a single result.
pub fn write_result_rows<W: Write>(wr: &mut csv::Writer<W>, c: &ScheduleResult) -> csv::Result<()> {
    for (id, o) in &c.per_problem {
        wr.write_record([
            fmt_eps(c.policy.epsilon),
            c.policy.window.to_string(),
            id.clone(),
            o.attempts_consumed.to_string(),
            o.tokens_consumed.to_string(),
            o.t_best_final.map_or_else(String::new, |t| t.to_string()),
            o.speedup_final.to_string(),
            o.stop_reason.to_string(),
        ])?;
    }
    Ok(())
}

/// Upper convex hull of (cost, speedup), from the cheapest point up to the
/// highest-speedup point.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut pts: Vec<ParetoPoint> =
        points.iter().copied().filter(|p| p.normalized_cost.is_finite() && p.geomean_speedup.is_finite()).collect();
    pts.sort_by(|a, b| {
        a.normalized_cost
            .total_cmp(&b.normalized_cost)
            .then(b.geomean_speedup.total_cmp(&a.geomean_speedup))
    });
    // Same cost: keep the best speedup only.
    pts.dedup_by(|b, a| a.normalized_cost == b.normalized_cost);
    let cross = |o: &ParetoPoint, a: &ParetoPoint, b: &ParetoPoint| {
        (a.normalized_cost - o.normalized_cost) * (b.geomean_speedup - o.geomean_speedup)
            - (a.geomean_speedup - o.geomean_speedup) * (b.normalized_cost - o.normalized_cost)
    };
    let mut hull: Vec<ParetoPoint> = Vec::new();
    for p in pts {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p) >= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let top = hull
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.geomean_speedup.total_cmp(&b.1.geomean_speedup).then(b.0.cmp(&a.0)))
        .map_or(0, |(i, _)| i);
    hull.truncate(top + 1);
    hull
}

/// Replays every (ε, w) combination.
pub fn sweep(logs: &[ProblemLog], epsilons: &[Option<f64>], windows: &[u32]) -> Result<Sweep, ScheduleError> {
    if epsilons.is_empty() || windows.is_empty() {
        return Err(ScheduleError::Policy("sweep grids must be nonempty".into()));
    }
    check_logs(logs)?;
    let fixed_outcomes = fixed_allocation(logs);
    let fixed_policy = SchedulingPolicy::FIXED;
    let (pp, trace) = simulate(logs, &fixed_policy);
    let fixed = assemble(fixed_policy, pp, trace, &fixed_outcomes);
    let mut cells = Vec::with_capacity(epsilons.len() * windows.len());
    for &e in epsilons {
        for &w in windows {
            let policy = SchedulingPolicy::new(e, w);
            policy.check()?;
            let (pp, trace) = simulate(logs, &policy);
            cells.push(assemble(policy, pp, trace, &fixed_outcomes));
        }
    }
    let points: Vec<ParetoPoint> = cells
        .iter()
        .map(|c| ParetoPoint {
            epsilon: c.policy.epsilon,
            window: c.policy.window,
            normalized_cost: c.token_ratio,
            geomean_speedup: c.geomean_speedup,
        })
        .collect();
    let frontier = pareto_frontier(&points);
    Ok(Sweep { fixed, cells, frontier })
}

/// The grids swept in the evaluation: ε from 25% to 300% in 25% steps and
/// w in {0, 4, ..., 20}.
pub fn default_grid() -> (Vec<Option<f64>>, Vec<u32>) {
    let eps = (1..=12).map(|i| Some(i as f64 * 0.25)).collect();
    (eps, vec![0, 4, 8, 12, 16, 20])
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Record {
    Problem {
        problem_id: String,
        t_ref: f64,
        t_sol: f64,
        #[serde(default)]
        unit: WorkUnit,
        #[serde(default)]
        iteration_shape: Option<IterationShape>,
    },
    Attempt(AttemptRecord),
}

/// Reads newline-delimited JSON: one `{"type": "problem", ...}` header per
/// problem and one `{"type": "attempt", ...}` record per attempt, in any
/// interleaving. Attempts are ordered by `index`.
pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<ProblemLog>, LogError> {
    let mut problems: BTreeMap<String, ProblemLog> = BTreeMap::new();
    let mut attempts: Vec<(usize, AttemptRecord)> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| LogError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| LogError::Record { line: i + 1, message: e.to_string() })?;
        match rec {
            Record::Problem { problem_id, t_ref, t_sol, unit, iteration_shape } => {
                if problems.contains_key(&problem_id) {
                    return Err(LogError::Record { line: i + 1, message: format!("duplicate problem `{problem_id}`") });
                }
                let log = ProblemLog { unit, iteration_shape, ..ProblemLog::new(problem_id.clone(), t_ref, t_sol, vec![]) };
                problems.insert(problem_id, log);
            }
            Record::Attempt(a) => attempts.push((i + 1, a)),
        }
    }
    for (line, a) in attempts {
        let log = problems.get_mut(&a.problem_id).ok_or_else(|| LogError::Record {
            line,
            message: format!("attempt for unknown problem `{}`", a.problem_id),
        })?;
        log.attempts.push(a);
    }
    let mut logs: Vec<ProblemLog> = problems.into_values().collect();
    for log in &mut logs {
        log.attempts.sort_by_key(|a| a.index);
        log.check()?;
    }
    Ok(logs)
}

pub fn write_jsonl<W: Write>(logs: &[ProblemLog], mut w: W) -> std::io::Result<()> {
    for log in logs {
        let mut header = serde_json::json!({
            "type": "problem",
            "problem_id": log.problem_id,
            "t_ref": log.t_ref,
            "t_sol": log.t_sol,
            "unit": log.unit,
        });
        if let Some(s) = log.iteration_shape {
            header["iteration_shape"] = serde_json::to_value(s)?;
        }
        writeln!(w, "{header}")?;
        for a in &log.attempts {
            let mut v = serde_json::to_value(a)?;
            v["type"] = "attempt".into();
            writeln!(w, "{v}")?;
        }
    }
    Ok(())
}

/// Loads a `.jsonl` file, or every `.jsonl` file in a directory.
pub fn load_logs(path: &Path) -> Result<Vec<ProblemLog>, LogError> {
    let io = |e: std::io::Error| LogError::Io(format!("{}: {e}", path.display()));
    let mut files = Vec::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path).map_err(io)? {
            let p = entry.map_err(io)?.path();
            if p.extension().is_some_and(|e| e == "jsonl") {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut logs = Vec::new();
    for f in files {
        let file = std::fs::File::open(&f).map_err(|e| LogError::Io(format!("{}: {e}", f.display())))?;
        logs.extend(read_jsonl(std::io::BufReader::new(file))?);
    }
    logs.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    if let Some(w) = logs.windows(2).find(|w| w[0].problem_id == w[1].problem_id) {
        return Err(LogError::Problem { id: w[0].problem_id.clone(), message: "appears in more than one file".into() });
    }
    Ok(logs)
}
