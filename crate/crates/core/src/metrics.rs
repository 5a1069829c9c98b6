//! Speedup metrics: Fast-p and Attempt-Fast-p curves, signed area between
//! curves, geomean/median summaries.
//!
//! Speedups are `t_ref / t_best`. Curves report percentages of problems.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schedule::ProblemLog;

/// Thresholds reported by [`summarize`].
pub const REPORT_THRESHOLDS: [f64; 3] = [1.0, 2.0, 4.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("speedup set is empty")]
    Empty,
    #[error("speedup sets cover different problems: {0}")]
    UniverseMismatch(String),
    #[error("geomean undefined: every speedup is zero")]
    GeomeanDomain,
    #[error("invalid speedup for `{id}`: {value}")]
    BadSpeedup { id: String, value: f64 },
    #[error("thresholds must be finite and ascending")]
    Thresholds,
    #[error("target speedup must be positive, got {0}")]
    Target(f64),
    #[error("cannot read speedups: {0}")]
    Parse(String),
}

/// What an unsolved problem (no accepted, correct attempt) scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnsolvedConvention {
    /// The PyTorch fallback: speedup 1.
    #[default]
    FallbackOne,
    /// Cross-archive comparisons: speedup 0.
    Zero,
}

impl UnsolvedConvention {
    pub fn value(self) -> f64 {
        match self {
            UnsolvedConvention::FallbackOne => 1.0,
            UnsolvedConvention::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupSet {
    pub entries: BTreeMap<String, f64>,
    pub unsolved_convention: UnsolvedConvention,
}

impl SpeedupSet {
    pub fn new(entries: BTreeMap<String, f64>, unsolved_convention: UnsolvedConvention) -> Result<Self, MetricsError> {
        if let Some((id, &value)) = entries.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(MetricsError::BadSpeedup { id: id.clone(), value });
        }
        Ok(SpeedupSet { entries, unsolved_convention })
    }

    /// Builds from `(id, t_ref, t_best)`; `None` marks an unsolved problem.
    pub fn from_times<I, S>(rows: I, convention: UnsolvedConvention) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = (S, f64, Option<f64>)>,
        S: Into<String>,
    {
        let mut entries = BTreeMap::new();
        for (id, t_ref, t_best) in rows {
            let id = id.into();
            let s = match t_best {
                Some(t) if t > 0.0 && t_ref > 0.0 => t_ref / t,
                Some(t) => return Err(MetricsError::BadSpeedup { id, value: t }),
                None => convention.value(),
            };
            entries.insert(id, s);
        }
        SpeedupSet::new(entries, convention)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.values().copied()
    }

    pub fn max(&self) -> f64 {
        self.values().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> Result<f64, MetricsError> {
        if self.is_empty() {
            return Err(MetricsError::Empty);
        }
        Ok(self.values().sum::<f64>() / self.len() as f64)
    }

    /// Percentage of problems with speedup `>= r`.
    pub fn fraction_at_least(&self, r: f64) -> f64 {
        100.0 * self.values().filter(|&s| s >= r).count() as f64 / self.len() as f64
    }
}

/// Geometric mean of positive values; `None` when empty or any value is not
/// positive.
pub fn geomean(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    Some((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastPCurve {
    pub thresholds: Vec<f64>,
    /// Percentages in `[0, 100]`, one per threshold.
    pub values: Vec<f64>,
}

impl FastPCurve {
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["r", "percent"])?;
        for (r, v) in self.thresholds.iter().zip(&self.values) {
            wr.write_record([r.to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn fast_p(set: &SpeedupSet, thresholds: &[f64]) -> Result<FastPCurve, MetricsError> {
    if set.is_empty() {
        return Err(MetricsError::Empty);
    }
    if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(MetricsError::Thresholds);
    }
    Ok(FastPCurve {
        thresholds: thresholds.to_vec(),
        values: thresholds.iter().map(|&r| set.fraction_at_least(r)).collect(),
    })
}

/// `n` log-spaced thresholds from 0.25 up to the set maximum, for plotting.
pub fn plot_thresholds(max: f64, n: usize) -> Vec<f64> {
    let lo: f64 = 0.25;
    let hi = max.max(lo * 1.01);
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Exact step-function form: one `(r, percent)` point per distinct speedup,
/// where the percentage holds on `(previous r, r]`.
pub fn fast_p_steps(set: &SpeedupSet) -> Result<FastPCurve, MetricsError> {
    if set.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut distinct: Vec<f64> = set.values().collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    fast_p(set, &distinct)
}

fn same_universe(a: &SpeedupSet, b: &SpeedupSet) -> Result<(), MetricsError> {
    let ka: BTreeSet<_> = a.entries.keys().collect();
    let kb: BTreeSet<_> = b.entries.keys().collect();
    if ka != kb {
        let only: Vec<String> = ka.symmetric_difference(&kb).take(5).map(|s| s.to_string()).collect();
        return Err(MetricsError::UniverseMismatch(only.join(", ")));
    }
    Ok(())
}

/// `∫ [P_a(r) - P_b(r)] dr` over `r >= 0`, with `P` as a fraction. The area
/// under a Fast-p curve is the arithmetic mean speedup, so this is the
/// difference of means.
pub fn signed_area(a: &SpeedupSet, b: &SpeedupSet) -> Result<f64, MetricsError> {
    same_universe(a, b)?;
    Ok(a.mean()? - b.mean()?)
}

/// Trapezoid integration of the two curves on a uniform grid of `n` points
/// over `[0, max + 1]`, refined around every step so the discontinuities are
/// resolved. A cross-check for [`signed_area`].
pub fn signed_area_by_integration(a: &SpeedupSet, b: &SpeedupSet, n: usize) -> Result<f64, MetricsError> {
    same_universe(a, b)?;
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hi = a.max().max(b.max()) + 1.0;
    let mut grid: Vec<f64> = (0..n.max(2)).map(|i| hi * i as f64 / (n.max(2) - 1) as f64).collect();
    for s in a.values().chain(b.values()) {
        grid.push(s);
        grid.push(s + 1e-12 * s.max(1.0));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let diff = |r: f64| (a.fraction_at_least(r) - b.fraction_at_least(r)) / 100.0;
    Ok(grid.windows(2).map(|w| 0.5 * (diff(w[0]) + diff(w[1])) * (w[1] - w[0])).sum())
}

/// Best-so-far speedup after each attempt. Unsolved-so-far entries are `None`.
pub fn best_so_far(log: &ProblemLog) -> Vec<Option<f64>> {
    let mut best: Option<f64> = None;
    log.attempts
        .iter()
        .map(|a| {
            if let Some(t) = a.accepted_runtime() {
                best = Some(best.map_or(t, |b: f64| b.min(t)));
            }
            best.map(|t| log.t_ref / t)
        })
        .collect()
}

/// Percentage of problems whose best-so-far speedup over attempts `1..=a`
/// reaches `r`, for `a = 1..=longest log`. Problems with shorter logs keep
/// their final best.
pub fn attempt_fast_p(logs: &[ProblemLog], r: f64) -> Result<Vec<f64>, MetricsError> {
    if logs.is_empty() {
        return Err(MetricsError::Empty);
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(MetricsError::Target(r));
    }
    let curves: Vec<_> = logs.iter().map(best_so_far).collect();
    let longest = curves.iter().map(Vec::len).max().unwrap_or(0);
    Ok((0..longest)
        .map(|a| {
            let hit = curves
                .iter()
                .filter(|c| c.get(a).or(c.last()).copied().flatten().is_some_and(|s| s >= r))
                .count();
            100.0 * hit as f64 / logs.len() as f64
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountAtLeast {
    pub r: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub geomean: f64,
    pub median: f64,
    pub mean: f64,
    /// Zero speedups left out of the geomean.
    pub excluded_zero: usize,
    pub count_ge: Vec<CountAtLeast>,
}

pub fn summarize(set: &SpeedupSet) -> Result<Summary, MetricsError> {
    if set.is_empty() {
        return Err(MetricsError::Empty);
    }
    let all: Vec<f64> = set.values().collect();
    let positive: Vec<f64> = all.iter().copied().filter(|&v| v > 0.0).collect();
    let geomean = geomean(&positive).ok_or(MetricsError::GeomeanDomain)?;
    Ok(Summary {
        count: all.len(),
        geomean,
        median: median(&all).expect("nonempty"),
        mean: set.mean()?,
        excluded_zero: all.len() - positive.len(),
        count_ge: REPORT_THRESHOLDS
            .iter()
            .map(|&r| CountAtLeast { r, count: all.iter().filter(|&&s| s >= r).count() })
            .collect(),
    })
}

#[derive(Debug, Deserialize)]
struct TimeRow {
    problem_id: String,
    t_ref: f64,
    t_best: Option<f64>,
}

/// Reads `problem_id,t_ref,t_best` rows; an empty `t_best` is unsolved.
pub fn read_speedups_csv<R: Read>(r: R, convention: UnsolvedConvention) -> Result<SpeedupSet, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let rows = rdr
        .deserialize::<TimeRow>()
        .map(|row| row.map(|t| (t.problem_id, t.t_ref, t.t_best)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| MetricsError::Parse(e.to_string()))?;
    SpeedupSet::from_times(rows, convention)
}
