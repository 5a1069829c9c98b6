//! Source-to-header driver: parse, lower, validate, hash, emit.

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{self, Span, SyntaxError};
use crate::emit::{emit_config, EmitError, EmittedArtifact};
use crate::ir::{config_hash, lower, Config, ConfigHash, LowerError};
use crate::validate::{validate, Diagnostic, ValidationReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{}: {}", .0.binding, .0.message)]
    Lower(#[from] LowerError),
    #[error("validation failed with {} error(s)", .0.errors().count())]
    Invalid(ValidationReport),
}

/// One machine-readable line per problem, for agents parsing stderr.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub stage: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
    pub severity: &'static str,
    pub field: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub col: Option<u32>,
}

impl ErrorRecord {
    fn at(stage: &'static str, span: Option<Span>, message: String) -> Self {
        ErrorRecord {
            stage,
            rule_id: None,
            severity: "error",
            field: String::new(),
            message,
            line: span.map(|s| s.line),
            col: span.map(|s| s.col),
        }
    }

    pub fn from_diagnostic(d: &Diagnostic) -> Self {
        ErrorRecord {
            stage: "validate",
            rule_id: Some(d.rule_id.to_string()),
            severity: match d.severity {
                crate::validate::Severity::Error => "error",
                crate::validate::Severity::Warning => "warning",
            },
            field: d.field.clone(),
            message: d.message.clone(),
            line: None,
            col: None,
        }
    }
}

impl CompileError {
    pub fn records(&self) -> Vec<ErrorRecord> {
        match self {
            CompileError::Syntax(SyntaxError::Lex(e)) => vec![ErrorRecord::at("lex", Some(e.span), e.message.clone())],
            CompileError::Syntax(SyntaxError::Parse(e)) => {
                let mut msg = e.message.clone();
                if !e.expected.is_empty() {
                    msg.push_str(&format!(" (expected {})", e.expected.join(", ")));
                }
                vec![ErrorRecord::at("parse", Some(e.span), msg)]
            }
            CompileError::Lower(e) => {
                vec![ErrorRecord { field: e.binding.clone(), ..ErrorRecord::at("lower", None, e.message.clone()) }]
            }
            CompileError::Invalid(r) => r.diagnostics.iter().map(ErrorRecord::from_diagnostic).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compilation {
    pub config: Config,
    pub hash: ConfigHash,
    /// Carries warnings; errors abort compilation.
    pub report: ValidationReport,
    pub artifact: EmittedArtifact,
}

/// Parses, lowers and validates without emitting.
pub fn check(source: &str) -> Result<(Config, ValidationReport), CompileError> {
    let program = dsl::parse(source)?;
    let config = lower(&program)?;
    let report = validate(&config);
    if !report.ok {
        return Err(CompileError::Invalid(report));
    }
    Ok((config, report))
}

pub fn compile(source: &str) -> Result<Compilation, CompileError> {
    let (config, report) = check(source)?;
    let hash = config_hash(&config);
    let artifact = emit_config(&config, &hash, source).map_err(|e| match e {
        EmitError::Invalid(d) => CompileError::Invalid(ValidationReport { ok: false, diagnostics: d }),
    })?;
    Ok(Compilation { config, hash, report, artifact })
}
