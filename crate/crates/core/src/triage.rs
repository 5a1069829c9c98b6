//! Gap-aware ranking of optimization hypotheses.
//!
//! `roi(h) = S^(1 + max(0, log10(g / 5))) / (R_impl * R_perf)` with
//! `g = t_best / t_sol`. Below `g = 5` the exponent is 1 and ranking is plain
//! speedup per unit risk; far from SOL, large estimated speedups get
//! amplified.

use std::cmp::Ordering;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gap at which the exponent starts to grow.
pub const GAP_KNEE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TriageError {
    #[error("hypothesis `{id}`: {message}")]
    Hypothesis { id: String, message: String },
    #[error("invalid gap context: {0}")]
    Gap(String),
    #[error("no hypotheses to rank")]
    Empty,
    #[error("cannot read hypotheses: {0}")]
    Parse(String),
}

/// Risk scores have no fixed scale; 1 (safe) to 5 (risky) works well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    pub est_speedup: f64,
    pub risk_impl: f64,
    pub risk_perf: f64,
    #[serde(default)]
    pub description: String,
}

impl Hypothesis {
    pub fn new(id: impl Into<String>, est_speedup: f64, risk_impl: f64, risk_perf: f64) -> Self {
        Hypothesis { id: id.into(), est_speedup, risk_impl, risk_perf, description: String::new() }
    }

    pub fn check(&self) -> Result<(), TriageError> {
        for (name, v) in [("est_speedup", self.est_speedup), ("risk_impl", self.risk_impl), ("risk_perf", self.risk_perf)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TriageError::Hypothesis {
                    id: self.id.clone(),
                    message: format!("{name} must be positive and finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapContext {
    pub t_best: f64,
    pub t_sol: f64,
}

impl GapContext {
    pub fn new(t_best: f64, t_sol: f64) -> Result<Self, TriageError> {
        if !(t_sol.is_finite() && t_sol > 0.0) {
            return Err(TriageError::Gap(format!("t_sol must be positive, got {t_sol}")));
        }
        if !(t_best.is_finite() && t_best >= 0.0) {
            return Err(TriageError::Gap(format!("t_best must be nonnegative, got {t_best}")));
        }
        Ok(GapContext { t_best, t_sol })
    }

    pub fn gap(&self) -> f64 {
        self.t_best / self.t_sol
    }
}

/// `1 + max(0, log10(g / 5))`; `g = 0` gives 1.
pub fn gap_exponent(g: f64) -> f64 {
    if g <= GAP_KNEE {
        1.0
    } else {
        1.0 + (g / GAP_KNEE).log10()
    }
}

pub fn roi_at_gap(h: &Hypothesis, g: f64) -> f64 {
    let e = gap_exponent(g);
    let gain = if e == 1.0 { h.est_speedup } else { h.est_speedup.powf(e) };
    gain / (h.risk_impl * h.risk_perf)
}

pub fn roi(h: &Hypothesis, ctx: &GapContext) -> Result<f64, TriageError> {
    h.check()?;
    Ok(roi_at_gap(h, ctx.gap()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub rank: usize,
    pub roi: f64,
    #[serde(flatten)]
    pub hypothesis: Hypothesis,
}

/// Descending ROI; ties by higher estimated speedup, then by id.
pub fn rank(hypotheses: &[Hypothesis], ctx: &GapContext) -> Result<Vec<Ranked>, TriageError> {
    if hypotheses.is_empty() {
        return Err(TriageError::Empty);
    }
    let mut scored = hypotheses
        .iter()
        .map(|h| Ok((roi(h, ctx)?, h)))
        .collect::<Result<Vec<_>, TriageError>>()?;
    scored.sort_by(|(ra, a), (rb, b)| {
        rb.partial_cmp(ra)
            .unwrap_or(Ordering::Equal)
            .then(b.est_speedup.partial_cmp(&a.est_speedup).unwrap_or(Ordering::Equal))
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (roi, h))| Ranked { rank: i + 1, roi, hypothesis: h.clone() })
        .collect())
}

/// Reads `id,est_speedup,risk_impl,risk_perf[,description]` rows with a header.
pub fn read_csv<R: Read>(r: R) -> Result<Vec<Hypothesis>, TriageError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let h: Hypothesis = row.map_err(|e| TriageError::Parse(e.to_string()))?;
        h.check()?;
        out.push(h);
    }
    Ok(out)
}
