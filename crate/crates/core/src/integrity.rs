//! Integrity review of candidate kernels.
//!
//! Three detectors feed one label per attempt: a runtime ceiling check
//! against the FP16 SOL bound, a profile check for candidates that launch
//! only library kernels, and labels from an external reviewer. Precedence:
//! PyTorch-only, then SOL ceiling, then reviewer gaming (inherited when an
//! earlier attempt on the same problem already gamed), then minor issues.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{SpeedupSet, UnsolvedConvention};
use crate::schedule::ProblemLog;

/// Runtimes below this fraction of the FP16 SOL bound are suspicious.
pub const CEILING_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrityError {
    #[error("cannot parse profile: {0}")]
    ProfileParse(String),
    #[error("unknown reviewer label `{0}` (expected NoIssues, MinorIssues or Gaming)")]
    Label(String),
    #[error("unknown {kind} subcategory `{value}`")]
    Subcategory { kind: &'static str, value: String },
    #[error("attempt {index} of `{problem_id}` has no review outcome")]
    MissingOutcome { problem_id: String, index: u32 },
    #[error("cannot read {what}: {message}")]
    Parse { what: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinorIssue {
    MinorMathApproximation,
    CachedParameter,
    ContiguityAssumption,
    UsesDefaultStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GamingKind {
    BenchmarkInputExploitation,
    ConstantHardcodedOutput,
    SkippedComputationStep,
    FakeTranspose,
    IncompleteComputation,
}

fn parse_snake<T: for<'de> Deserialize<'de>>(kind: &'static str, s: &str) -> Result<T, IntegrityError> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
        .map_err(|_| IntegrityError::Subcategory { kind, value: s.to_string() })
}

fn snake<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Subcategory {
    Minor(MinorIssue),
    Gaming(GamingKind),
}

impl fmt::Display for Subcategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subcategory::Minor(m) => f.write_str(&snake(m)),
            Subcategory::Gaming(g) => f.write_str(&snake(g)),
        }
    }
}

/// What the external reviewer said.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReviewerLabel {
    NoIssues,
    MinorIssues(Option<MinorIssue>),
    Gaming(Option<GamingKind>),
}

impl ReviewerLabel {
    /// Parses a label name plus optional subcategory, as found in label files.
    pub fn parse(label: &str, subcategory: Option<&str>) -> Result<Self, IntegrityError> {
        let sub = subcategory.map(str::trim).filter(|s| !s.is_empty());
        let key: String = label.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "noissues" | "none" | "ok" => Ok(ReviewerLabel::NoIssues),
            "minorissues" | "minor" => Ok(ReviewerLabel::MinorIssues(sub.map(|s| parse_snake("minor", s)).transpose()?)),
            "gaming" => Ok(ReviewerLabel::Gaming(sub.map(|s| parse_snake("gaming", s)).transpose()?)),
            _ => Err(IntegrityError::Label(label.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    NoIssues,
    MinorIssues,
    SolCeiling,
    PyTorchOnly,
    OriginalGaming,
    InheritedGaming,
}

impl Label {
    pub fn accepted(self) -> bool {
        matches!(self, Label::NoIssues | Label::MinorIssues)
    }

    pub fn is_gaming(self) -> bool {
        matches!(self, Label::OriginalGaming | Label::InheritedGaming)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewOutcome {
    pub label: Label,
    pub subcategory: Option<Subcategory>,
    pub accepted: bool,
}

impl ReviewOutcome {
    fn new(label: Label, subcategory: Option<Subcategory>) -> Self {
        ReviewOutcome { label, subcategory, accepted: label.accepted() }
    }
}

/// Strict: exactly `0.9 * t_sol` is not flagged.
pub fn sol_ceiling_check(runtime_s: f64, t_sol_fp16: f64) -> bool {
    runtime_s < CEILING_FRACTION * t_sol_fp16
}

pub fn combine(
    ceiling: bool,
    pytorch_only: bool,
    reviewer: Option<ReviewerLabel>,
    prior_attempt_gaming: bool,
) -> ReviewOutcome {
    if pytorch_only {
        return ReviewOutcome::new(Label::PyTorchOnly, None);
    }
    if ceiling {
        return ReviewOutcome::new(Label::SolCeiling, None);
    }
    match reviewer {
        Some(ReviewerLabel::Gaming(_)) if prior_attempt_gaming => ReviewOutcome::new(Label::InheritedGaming, None),
        Some(ReviewerLabel::Gaming(g)) => ReviewOutcome::new(Label::OriginalGaming, g.map(Subcategory::Gaming)),
        Some(ReviewerLabel::MinorIssues(m)) => ReviewOutcome::new(Label::MinorIssues, m.map(Subcategory::Minor)),
        Some(ReviewerLabel::NoIssues) | None => ReviewOutcome::new(Label::NoIssues, None),
    }
}

/// Case-insensitive substring patterns for library and user kernels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternConfig {
    pub library: Vec<String>,
    pub user: Vec<String>,
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig {
            library: ["at::native::", "cublas", "cudnn", "at::cuda", "vectorized_elementwise", "sgemm", "xmma"]
                .map(String::from)
                .to_vec(),
            user: vec![crate::ir::NAMESPACE_PREFIX.to_string()],
        }
    }
}

impl PatternConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, IntegrityError> {
        toml::from_str(s).map_err(|e| IntegrityError::Parse { what: "pattern config", message: e.to_string() })
    }

    pub fn with_user_kernels<I: IntoIterator<Item = String>>(mut self, names: I) -> Self {
        self.user.extend(names);
        self
    }

    fn matches(patterns: &[String], name: &str) -> bool {
        let lower = name.to_lowercase();
        patterns.iter().any(|p| lower.contains(&p.to_lowercase()))
    }

    pub fn is_library(&self, name: &str) -> bool {
        Self::matches(&self.library, name)
    }

    pub fn is_user(&self, name: &str) -> bool {
        Self::matches(&self.user, name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileLog {
    /// In launch order, repeats kept.
    pub kernel_names: Vec<String>,
    pub raw_text: String,
}

fn launch_header() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(?P<name>\S.*?)\s+\(\d+,\s*\d+,\s*\d+\)x\(\d+,\s*\d+,\s*\d+\),\s*Context\s+\d+,\s*Stream\s+\d+")
            .expect("valid regex")
    })
}

/// Kernel names from a `--csv` export: the `Kernel Name` (or `Name`) column.
fn csv_names(text: &str) -> Option<Vec<String>> {
    let start = text.lines().position(|l| l.starts_with('"') && (l.contains("\"Kernel Name\"") || l.contains("\"Name\"")))?;
    let body: String = text.lines().skip(start).collect::<Vec<_>>().join("\n");
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(body.as_bytes());
    let headers = rdr.headers().ok()?.clone();
    let col = headers.iter().position(|h| h == "Kernel Name").or_else(|| headers.iter().position(|h| h == "Name"))?;
    let mut names = Vec::new();
    let mut last_id: Option<String> = None;
    let id_col = headers.iter().position(|h| h == "ID");
    for rec in rdr.records().flatten() {
        // Metric-per-row exports repeat the kernel for every metric.
        let id = id_col.and_then(|c| rec.get(c)).map(str::to_string);
        if id.is_some() && id == last_id {
            continue;
        }
        last_id = id;
        if let Some(n) = rec.get(col).map(str::trim).filter(|n| !n.is_empty()) {
            names.push(n.to_string());
        }
    }
    Some(names)
}

/// Kernel names from a whitespace-aligned summary table whose last column is
/// `Name`. Header cells are separated by two or more spaces; data cells
/// before the name contain no spaces.
fn table_names(text: &str) -> Vec<String> {
    static SEP: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let sep = SEP.get_or_init(|| Regex::new(r"\s{2,}").expect("valid regex"));
    let mut names = Vec::new();
    let mut leading: Option<usize> = None;
    for line in text.lines() {
        let t = line.trim();
        if let Some(k) = leading {
            if t.is_empty() {
                if !names.is_empty() {
                    leading = None;
                }
                continue;
            }
            if t.chars().all(|ch| ch == '-' || ch == ' ') {
                continue;
            }
            let mut rest = t;
            for _ in 0..k {
                rest = rest.split_once(char::is_whitespace).map_or("", |(_, r)| r.trim_start());
            }
            if !rest.is_empty() {
                names.push(rest.to_string());
            }
        } else if t.ends_with("Name") && t.contains("Time") {
            leading = Some(sep.split(t).count() - 1);
        }
    }
    names
}

/// Extracts kernel names from Nsight Compute text output. Understands the
/// per-launch headers of the default report (`name (grid)x(block), Context
/// N, Stream N, ...`), `--csv` exports, and summary tables with a trailing
/// `Name` column.
pub fn parse_profile(text: &str) -> Result<ProfileLog, IntegrityError> {
    let mut names: Vec<String> = text
        .lines()
        .filter_map(|l| launch_header().captures(l))
        .map(|c| c["name"].to_string())
        .collect();
    if names.is_empty() {
        names = csv_names(text).unwrap_or_default();
    }
    if names.is_empty() {
        names = table_names(text);
    }
    if names.is_empty() {
        return Err(IntegrityError::ProfileParse("no kernel launches found".into()));
    }
    Ok(ProfileLog { kernel_names: names, raw_text: text.to_string() })
}

/// Flags a profile whose every kernel is a library kernel and none is a user
/// kernel.
pub fn pytorch_only_check(profile: &ProfileLog, patterns: &PatternConfig) -> bool {
    !profile.kernel_names.is_empty()
        && profile.kernel_names.iter().all(|n| patterns.is_library(n))
        && !profile.kernel_names.iter().any(|n| patterns.is_user(n))
}

/// Detector inputs for one attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptEvidence {
    pub problem_id: String,
    pub index: u32,
    pub ceiling: bool,
    pub pytorch_only: bool,
    pub reviewer: Option<ReviewerLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptOutcome {
    pub problem_id: String,
    pub index: u32,
    pub ceiling: bool,
    pub pytorch_only: bool,
    pub outcome: ReviewOutcome,
}

/// Combines evidence attempt by attempt. Within a problem, attempts are taken
/// in index order so that gaming after an earlier gaming outcome is
/// inherited.
pub fn review(evidence: &[AttemptEvidence]) -> Vec<AttemptOutcome> {
    let mut ordered: Vec<&AttemptEvidence> = evidence.iter().collect();
    ordered.sort_by(|a, b| a.problem_id.cmp(&b.problem_id).then(a.index.cmp(&b.index)));
    let mut gamed: BTreeMap<&str, bool> = BTreeMap::new();
    ordered
        .into_iter()
        .map(|e| {
            let prior = gamed.get(e.problem_id.as_str()).copied().unwrap_or(false);
            let outcome = combine(e.ceiling, e.pytorch_only, e.reviewer, prior);
            if outcome.label.is_gaming() {
                gamed.insert(&e.problem_id, true);
            }
            AttemptOutcome {
                problem_id: e.problem_id.clone(),
                index: e.index,
                ceiling: e.ceiling,
                pytorch_only: e.pytorch_only,
                outcome,
            }
        })
        .collect()
}

/// Marks rejected attempts as excluded.
pub fn apply_outcomes(logs: &[ProblemLog], outcomes: &[AttemptOutcome]) -> Result<Vec<ProblemLog>, IntegrityError> {
    let table: BTreeMap<(&str, u32), &ReviewOutcome> =
        outcomes.iter().map(|o| ((o.problem_id.as_str(), o.index), &o.outcome)).collect();
    logs.iter()
        .map(|log| {
            let mut log = log.clone();
            for a in &mut log.attempts {
                let o = table.get(&(a.problem_id.as_str(), a.index)).ok_or_else(|| IntegrityError::MissingOutcome {
                    problem_id: a.problem_id.clone(),
                    index: a.index,
                })?;
                a.excluded_by_integrity = !o.accepted;
            }
            Ok(log)
        })
        .collect()
}

/// Best speedup per problem over accepted, correct attempts only.
pub fn filter_speedups(
    logs: &[ProblemLog],
    outcomes: &[AttemptOutcome],
    convention: UnsolvedConvention,
) -> Result<SpeedupSet, IntegrityError> {
    let filtered = apply_outcomes(logs, outcomes)?;
    let rows = filtered.iter().map(|log| {
        let t_best = log.attempts.iter().filter_map(|a| a.accepted_runtime()).reduce(f64::min);
        (log.problem_id.clone(), log.t_ref, t_best)
    });
    SpeedupSet::from_times(rows, convention).map_err(|e| IntegrityError::Parse { what: "speedups", message: e.to_string() })
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    problem_id: String,
    index: u32,
    label: String,
    #[serde(default)]
    subcategory: Option<String>,
}

/// Reads `problem_id,index,label[,subcategory]` reviewer rows.
pub fn read_labels_csv<R: Read>(r: R) -> Result<BTreeMap<(String, u32), ReviewerLabel>, IntegrityError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(r);
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<LabelRow>() {
        let row = row.map_err(|e| IntegrityError::Parse { what: "reviewer labels", message: e.to_string() })?;
        let label = ReviewerLabel::parse(&row.label, row.subcategory.as_deref())?;
        out.insert((row.problem_id, row.index), label);
    }
    Ok(out)
}

pub fn write_outcomes_csv<W: Write>(outcomes: &[AttemptOutcome], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["problem_id", "index", "label", "subcategory", "accepted", "sol_ceiling", "pytorch_only"])?;
    for o in outcomes {
        wr.write_record([
            o.problem_id.clone(),
            o.index.to_string(),
            o.outcome.label.to_string(),
            o.outcome.subcategory.map_or_else(String::new, |s| s.to_string()),
            o.outcome.accepted.to_string(),
            o.ceiling.to_string(),
            o.pytorch_only.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::summarize;
    use crate::schedule::AttemptRecord;

    #[test]
    fn ceiling_is_strict() {
        assert!(!sol_ceiling_check(1.0, 1.0));
        assert!(sol_ceiling_check(0.89, 1.0));
        assert!(!sol_ceiling_check(0.9 * 3.0, 3.0));
    }

    #[test]
    fn precedence() {
        let gaming = Some(ReviewerLabel::Gaming(Some(GamingKind::FakeTranspose)));
        assert_eq!(combine(false, true, gaming, false).label, Label::PyTorchOnly);
        assert_eq!(combine(true, false, gaming, false).label, Label::SolCeiling);
        assert_eq!(combine(false, false, gaming, true).label, Label::InheritedGaming);
        let orig = combine(false, false, gaming, false);
        assert_eq!(orig.label, Label::OriginalGaming);
        assert_eq!(orig.subcategory, Some(Subcategory::Gaming(GamingKind::FakeTranspose)));
        assert!(!orig.accepted);
        let minor = combine(false, false, Some(ReviewerLabel::MinorIssues(Some(MinorIssue::CachedParameter))), true);
        assert!(minor.accepted);
        assert_eq!(combine(false, false, None, false), ReviewOutcome::new(Label::NoIssues, None));
    }

    #[test]
    fn label_parsing() {
        assert_eq!(ReviewerLabel::parse("No Issues", None).unwrap(), ReviewerLabel::NoIssues);
        assert_eq!(
            ReviewerLabel::parse("gaming", Some("constant_hardcoded_output")).unwrap(),
            ReviewerLabel::Gaming(Some(GamingKind::ConstantHardcodedOutput))
        );
        assert!(matches!(ReviewerLabel::parse("weird", None), Err(IntegrityError::Label(_))));
        assert!(ReviewerLabel::parse("minor", Some("bogus")).is_err());
    }

    const NCU: &str = "==PROF== Connected to process 4242\n\
[4242] python3@127.0.0.1\n\
  ampere_sgemm_128x64_nn (128, 1, 1)x(256, 1, 1), Context 1, Stream 7, Device 0, CC 9.0\n\
    Section: GPU Speed Of Light Throughput\n\
    DRAM Frequency      cycle/nsecond   2.62\n\
  void at::native::vectorized_elementwise_kernel<4, at::native::GeluCUDAKernelImpl>(int, T1, T2) (4096, 1, 1)x(128, 1, 1), Context 1, Stream 7, Device 0, CC 9.0\n\
    Section: GPU Speed Of Light Throughput\n";

    #[test]
    fn parses_launch_headers() {
        let p = parse_profile(NCU).unwrap();
        assert_eq!(p.kernel_names.len(), 2);
        assert_eq!(p.kernel_names[0], "ampere_sgemm_128x64_nn");
        assert!(p.kernel_names[1].starts_with("void at::native::vectorized_elementwise_kernel<4"));
        assert!(pytorch_only_check(&p, &PatternConfig::default()));
        let cfg = PatternConfig { library: vec!["at::native::".into()], ..PatternConfig::default() };
        assert!(!pytorch_only_check(&p, &cfg), "sgemm is unknown to this pattern set");
    }

    #[test]
    fn parses_csv_and_tables() {
        let csv = "==PROF== Disconnected\n\"ID\",\"Kernel Name\",\"Metric Name\"\n\"0\",\"cublasLt::gemm\",\"a\"\n\"0\",\"cublasLt::gemm\",\"b\"\n\"1\",\"cudnn::conv\",\"a\"\n";
        assert_eq!(parse_profile(csv).unwrap().kernel_names, ["cublasLt::gemm", "cudnn::conv"]);
        let table = " Time (%)  Total Time (ns)  Instances  Name\n --------  ---------------  ---------  ----\n     90.0           1000          1  ucutlass_0123456789abcdef::device_kernel<Gemm>\n     10.0            100          1  at::native::reduce_kernel\n\n";
        let p = parse_profile(table).unwrap();
        assert_eq!(p.kernel_names, ["ucutlass_0123456789abcdef::device_kernel<Gemm>", "at::native::reduce_kernel"]);
        assert!(!pytorch_only_check(&p, &PatternConfig::default()));
        assert!(matches!(parse_profile("nothing here"), Err(IntegrityError::ProfileParse(_))));
    }

    #[test]
    fn library_only_profile_is_flagged() {
        let p = ProfileLog { kernel_names: vec!["CUBLAS_gemm_kernel".into(), "cudnn_conv".into()], raw_text: String::new() };
        assert!(pytorch_only_check(&p, &PatternConfig::default()));
        let custom = PatternConfig::default().with_user_kernels(["cudnn_conv".to_string()]);
        assert!(!pytorch_only_check(&p, &custom));
        let cfg = PatternConfig::from_toml_str("library = [\"cutlass\"]\n").unwrap();
        assert_eq!(cfg.user, PatternConfig::default().user);
    }

    fn ev(problem: &str, index: u32, reviewer: Option<ReviewerLabel>, pytorch_only: bool) -> AttemptEvidence {
        AttemptEvidence { problem_id: problem.into(), index, ceiling: false, pytorch_only, reviewer }
    }

    #[test]
    fn inheritance_follows_outcomes() {
        let g = Some(ReviewerLabel::Gaming(None));
        let out = review(&[ev("a", 2, g, false), ev("a", 1, g, true), ev("a", 3, g, false), ev("b", 1, g, false)]);
        let labels: Vec<_> = out.iter().map(|o| (o.problem_id.as_str(), o.index, o.outcome.label)).collect();
        assert_eq!(
            labels,
            [
                ("a", 1, Label::PyTorchOnly),
                ("a", 2, Label::OriginalGaming),
                ("a", 3, Label::InheritedGaming),
                ("b", 1, Label::OriginalGaming),
            ]
        );
    }

    #[test]
    fn filtering_drops_rejected_fastest() {
        let attempts = vec![
            AttemptRecord::new("p", 1, Some(4.0), 1),
            AttemptRecord::new("p", 2, Some(1.0), 1),
            AttemptRecord::new("p", 3, Some(5.0), 1),
        ];
        let logs = [ProblemLog::new("p", 10.0, 2.0, attempts), ProblemLog::new("q", 10.0, 2.0, vec![AttemptRecord::new("q", 1, Some(5.0), 1)])];
        let mut evidence = vec![
            ev("p", 1, None, false),
            ev("p", 2, Some(ReviewerLabel::Gaming(None)), false),
            ev("p", 3, None, false),
            ev("q", 1, None, false),
        ];
        let out = review(&evidence);
        let s = filter_speedups(&logs, &out, UnsolvedConvention::FallbackOne).unwrap();
        assert_eq!(s.entries["p"], 2.5);
        evidence[1].reviewer = None;
        let all = filter_speedups(&logs, &review(&evidence), UnsolvedConvention::FallbackOne).unwrap();
        assert_eq!(all.entries["p"], 10.0);
        assert!(summarize(&s).unwrap().geomean < summarize(&all).unwrap().geomean);
        assert!(matches!(filter_speedups(&logs, &out[..1], UnsolvedConvention::Zero), Err(IntegrityError::MissingOutcome { .. })));

        let rejected: Vec<_> = evidence.iter().map(|e| AttemptEvidence { pytorch_only: true, ..e.clone() }).collect();
        let none = filter_speedups(&logs, &review(&rejected), UnsolvedConvention::Zero).unwrap();
        assert_eq!(none.entries["p"], 0.0);
    }

    #[test]
    fn label_file() {
        let text = "problem_id,index,label,subcategory\na,1,Gaming,fake_transpose\na,2,MinorIssues,\nb,1,NoIssues\n";
        let labels = read_labels_csv(text.as_bytes()).unwrap();
        assert_eq!(labels[&("a".to_string(), 1)], ReviewerLabel::Gaming(Some(GamingKind::FakeTranspose)));
        assert_eq!(labels[&("a".to_string(), 2)], ReviewerLabel::MinorIssues(None));
        assert_eq!(labels.len(), 3);
    }
}
