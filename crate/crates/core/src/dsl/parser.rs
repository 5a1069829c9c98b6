//! Recursive-descent parser.
//!
//! ```text
//! program        := pipeline | kernel_expr
//! kernel_expr    := op_name "(" ")" binding* epilogue_chain?
//! binding        := "." binding_name "(" args? ")"
//! epilogue_chain := (">>" epi_call)+
//! epi_call       := epi_name "(" kwargs? ")"
//!                 | "custom" "(" STRING ("," "inputs" "=" map)? ")"
//! pipeline       := "pipeline" "(" stage ("," stage)* ")"
//! stage          := "transpose" "(" kwargs? ")" | kernel_expr
//! args           := arg ("," arg)*
//! arg            := IDENT "=" value | value
//! map            := "{" (IDENT ":" IDENT ("," IDENT ":" IDENT)*)? "}"
//! value          := IDENT | INT | FLOAT | "true" | "false"
//! ```

use std::collections::HashSet;

use thiserror::Error;

use super::ast::*;
use super::lexer::{tokenize, LexError, Span, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: Span,
    pub message: String,
    /// Token descriptions that would have been accepted at `span`.
    pub expected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("lex error at {0}")]
    Lex(#[from] LexError),
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
}

impl SyntaxError {
    pub fn span(&self) -> Span {
        match self {
            SyntaxError::Lex(e) => e.span,
            SyntaxError::Parse(e) => e.span,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            SyntaxError::Lex(e) => &e.message,
            SyntaxError::Parse(e) => &e.message,
        }
    }
}

/// Parses DSL text into a program. The source is kept verbatim.
pub fn parse(source: &str) -> Result<DslProgram, SyntaxError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0, src_len: source.len() };
    let root = parser.program()?;
    Ok(DslProgram { root, source_text: source.to_string() })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    src_len: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self, offset: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn current_span(&self) -> Span {
        match self.peek() {
            Some(t) => t.span,
            None => {
                let (line, col) = self
                    .tokens
                    .last()
                    .map(|t| (t.span.line, t.span.col + (t.span.end - t.span.start) as u32))
                    .unwrap_or((1, 1));
                Span { start: self.src_len, end: self.src_len, line, col }
            }
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let found = self.peek().map(|t| t.kind.describe()).unwrap_or_else(|| "end of input".into());
        let expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        ParseError {
            span: self.current_span(),
            message: format!("expected {}, found {found}", expected.join(" or ")),
            expected,
        }
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        self.pos += 1;
        t
    }

    fn expect(&mut self, kind: TokenKind, label: &str) -> PResult<Token> {
        match self.peek() {
            Some(t) if t.kind == kind => Ok(self.advance()),
            _ => Err(self.unexpected(&[label])),
        }
    }

    fn ident(&mut self, label: &str) -> PResult<(String, Span)> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident(s), span }) => {
                let out = (s.clone(), *span);
                self.pos += 1;
                Ok(out)
            }
            _ => Err(self.unexpected(&[label])),
        }
    }

    fn program(&mut self) -> PResult<Expr> {
        let root = match self.peek_kind(0) {
            Some(TokenKind::Ident(s)) if s == "pipeline" => Expr::Pipeline(self.pipeline()?),
            _ => Expr::Kernel(self.kernel_expr()?),
        };
        if self.peek().is_some() {
            let expected: &[&str] = match root {
                Expr::Kernel(_) => &["`.`", "`>>`", "end of input"],
                Expr::Pipeline(_) => &["end of input"],
            };
            return Err(self.unexpected(expected));
        }
        Ok(root)
    }

    fn pipeline(&mut self) -> PResult<PipelineExpr> {
        let (_, head) = self.ident("`pipeline`")?;
        self.expect(TokenKind::LParen, "`(`")?;
        let mut stages = Vec::new();
        loop {
            let stage_span = self.current_span();
            let stage = match self.peek_kind(0) {
                Some(TokenKind::Ident(s)) if s == "transpose" => {
                    self.advance();
                    self.expect(TokenKind::LParen, "`(`")?;
                    let args = self.args(TokenKind::RParen, false)?;
                    self.expect(TokenKind::RParen, "`)`")?;
                    Stage::Transpose(args)
                }
                _ => Stage::Kernel(self.kernel_expr()?),
            };
            if matches!(stage, Stage::Kernel(_)) && stages.iter().any(|s| matches!(s, Stage::Kernel(_))) {
                return Err(ParseError {
                    span: stage_span,
                    message: "pipeline permits exactly one kernel stage; found a second one".into(),
                    expected: vec!["`transpose`".into()],
                });
            }
            stages.push(stage);
            match self.peek_kind(0) {
                Some(TokenKind::Comma) => {
                    self.advance();
                }
                Some(TokenKind::RParen) => {
                    self.advance();
                    break;
                }
                _ => return Err(self.unexpected(&["`,`", "`)`"])),
            }
        }
        if !stages.iter().any(|s| matches!(s, Stage::Kernel(_))) {
            return Err(ParseError {
                span: head,
                message: "pipeline requires exactly one kernel stage; found none".into(),
                expected: vec!["operator name".into()],
            });
        }
        Ok(PipelineExpr { stages })
    }

    fn kernel_expr(&mut self) -> PResult<KernelExpr> {
        let (name, span) = self.ident("operator name")?;
        let op = OpKind::from_keyword(&name).ok_or_else(|| ParseError {
            span,
            message: format!("unknown operator `{name}`"),
            expected: OpKind::ALL.iter().map(|o| o.as_str().to_string()).collect(),
        })?;
        self.expect(TokenKind::LParen, "`(`")?;
        self.expect(TokenKind::RParen, "`)`")?;

        let mut bindings: Vec<Binding> = Vec::new();
        while self.peek_kind(0) == Some(&TokenKind::Dot) {
            self.advance();
            let (bname, bspan) = self.ident("binding name")?;
            let name = BindingName::from_keyword(&bname).ok_or_else(|| ParseError {
                span: bspan,
                message: format!("unknown binding `{bname}`"),
                expected: BindingName::ALL.iter().map(|b| b.as_str().to_string()).collect(),
            })?;
            if bindings.iter().any(|b| b.name == name) {
                return Err(ParseError {
                    span: bspan,
                    message: format!("duplicate binding {bname}"),
                    expected: vec![],
                });
            }
            self.expect(TokenKind::LParen, "`(`")?;
            let args = self.args(TokenKind::RParen, true)?;
            self.expect(TokenKind::RParen, "`)`")?;
            bindings.push(Binding { name, args });
        }

        let mut epilogue = Vec::new();
        while self.peek_kind(0) == Some(&TokenKind::Chain) {
            self.advance();
            epilogue.push(self.epilogue_call()?);
        }
        Ok(KernelExpr { op, bindings, epilogue })
    }

    fn epilogue_call(&mut self) -> PResult<EpilogueOp> {
        let (ename, espan) = self.ident("epilogue name")?;
        let name = EpilogueName::from_keyword(&ename).ok_or_else(|| ParseError {
            span: espan,
            message: format!("unknown epilogue `{ename}`"),
            expected: EpilogueName::ALL.iter().map(|e| e.as_str().to_string()).collect(),
        })?;
        self.expect(TokenKind::LParen, "`(`")?;
        if name != EpilogueName::Custom {
            let args = self.args(TokenKind::RParen, false)?;
            self.expect(TokenKind::RParen, "`)`")?;
            return Ok(EpilogueOp::builtin(name, args));
        }

        let expr = match self.peek() {
            Some(Token { kind: TokenKind::Str(s), .. }) => {
                let s = s.clone();
                self.advance();
                s
            }
            _ => return Err(self.unexpected(&["string literal"])),
        };
        let mut inputs = None;
        if self.peek_kind(0) == Some(&TokenKind::Comma) {
            self.advance();
            let (key, kspan) = self.ident("`inputs`")?;
            if key != "inputs" {
                return Err(ParseError {
                    span: kspan,
                    message: format!("custom epilogue accepts only `inputs=`, found `{key}`"),
                    expected: vec!["`inputs`".into()],
                });
            }
            self.expect(TokenKind::Eq, "`=`")?;
            inputs = Some(self.input_map()?);
        }
        self.expect(TokenKind::RParen, "`)`")?;
        Ok(EpilogueOp {
            name,
            args: Vec::new(),
            custom_expr: Some(expr),
            custom_inputs: Some(inputs.unwrap_or_default()),
        })
    }

    fn input_map(&mut self) -> PResult<Vec<(String, String)>> {
        self.expect(TokenKind::LBrace, "`{`")?;
        let mut entries: Vec<(String, String)> = Vec::new();
        if self.peek_kind(0) == Some(&TokenKind::RBrace) {
            self.advance();
            return Ok(entries);
        }
        loop {
            let (key, kspan) = self.ident("input name")?;
            if entries.iter().any(|(k, _)| *k == key) {
                return Err(ParseError {
                    span: kspan,
                    message: format!("duplicate custom input `{key}`"),
                    expected: vec![],
                });
            }
            self.expect(TokenKind::Colon, "`:`")?;
            let (val, _) = self.ident("identifier")?;
            entries.push((key, val));
            match self.peek_kind(0) {
                Some(TokenKind::Comma) => {
                    self.advance();
                }
                Some(TokenKind::RBrace) => {
                    self.advance();
                    return Ok(entries);
                }
                _ => return Err(self.unexpected(&["`,`", "`}`"])),
            }
        }
    }

    /// Comma-separated args up to (not consuming) `close`.
    fn args(&mut self, close: TokenKind, allow_positional: bool) -> PResult<Vec<Arg>> {
        let mut args: Vec<Arg> = Vec::new();
        let mut seen = HashSet::new();
        if self.peek_kind(0) == Some(&close) {
            return Ok(args);
        }
        loop {
            let span = self.current_span();
            let keyed = matches!(
                (self.peek_kind(0), self.peek_kind(1)),
                (Some(TokenKind::Ident(_)), Some(TokenKind::Eq))
            );
            let arg = if keyed {
                let (key, _) = self.ident("argument name")?;
                self.advance();
                if !seen.insert(key.clone()) {
                    return Err(ParseError {
                        span,
                        message: format!("duplicate argument `{key}`"),
                        expected: vec![],
                    });
                }
                Arg::keyed(key, self.value()?)
            } else if allow_positional {
                Arg::positional(self.value()?)
            } else {
                return Err(self.unexpected(&["`name=value` argument"]));
            };
            args.push(arg);
            match self.peek_kind(0) {
                Some(TokenKind::Comma) => {
                    self.advance();
                }
                Some(k) if *k == close => return Ok(args),
                _ => return Err(self.unexpected(&["`,`", "`)`"])),
            }
        }
    }

    fn value(&mut self) -> PResult<Value> {
        let v = match self.peek_kind(0) {
            Some(TokenKind::Ident(s)) if s == "true" => Value::Bool(true),
            Some(TokenKind::Ident(s)) if s == "false" => Value::Bool(false),
            Some(TokenKind::Ident(s)) => Value::Ident(s.clone()),
            Some(TokenKind::Int(i)) => Value::Int(*i),
            Some(TokenKind::Float(x)) => Value::Float(*x),
            _ => return Err(self.unexpected(&["identifier", "integer", "number", "`true`", "`false`"])),
        };
        self.advance();
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::samples::SM90A_GEMM_EVT as FIG1;

    fn kernel(src: &str) -> KernelExpr {
        match parse(src).unwrap().root {
            Expr::Kernel(k) => k,
            other => panic!("expected kernel, got {other:?}"),
        }
    }

    #[test]
    fn fused_sample_program() {
        let k = kernel(FIG1);
        assert_eq!(k.op, OpKind::Gemm);
        let names: Vec<_> = k.bindings.iter().map(|b| b.name).collect();
        assert_eq!(
            names,
            vec![
                BindingName::Dtype,
                BindingName::Layout,
                BindingName::Arch,
                BindingName::ThreadblockShape,
                BindingName::Stages,
                BindingName::Alignment,
                BindingName::Scheduler
            ]
        );
        let epi: Vec<_> = k.epilogue.iter().map(|e| e.name).collect();
        assert_eq!(epi, vec![EpilogueName::Bias, EpilogueName::Gelu, EpilogueName::Clip]);
        assert_eq!(
            k.epilogue[2].args,
            vec![Arg::keyed("min", Value::Int(0)), Arg::keyed("max", Value::Int(6))]
        );
    }

    #[test]
    fn bare_operator() {
        let k = kernel("gemm()");
        assert_eq!(k, KernelExpr { op: OpKind::Gemm, bindings: vec![], epilogue: vec![] });
    }

    #[test]
    fn duplicate_binding_is_named() {
        let err = parse("gemm().with_stages(2).with_stages(3)").unwrap_err();
        assert!(err.message().contains("duplicate binding with_stages"), "{err}");
        assert_eq!(err.span().col, 23);
    }

    #[test]
    fn custom_epilogue_surface() {
        let k = kernel("gemm() >> custom('x * sigmoid(y) + z', inputs={y: aux0, z: bias0})");
        let op = &k.epilogue[0];
        assert_eq!(op.name, EpilogueName::Custom);
        assert_eq!(op.custom_expr.as_deref(), Some("x * sigmoid(y) + z"));
        assert_eq!(
            op.custom_inputs.as_deref(),
            Some(&[("y".to_string(), "aux0".to_string()), ("z".to_string(), "bias0".to_string())][..])
        );
    }

    #[test]
    fn pipeline_with_transforms() {
        let p = parse("pipeline(transpose(dtype=fp16), gemm().with_dtype(input=fp16) >> relu(), transpose())")
            .unwrap();
        let Expr::Pipeline(p) = p.root else { panic!() };
        assert_eq!(p.stages.len(), 3);
        assert_eq!(p.kernel().epilogue.len(), 1);
        assert!(matches!(&p.stages[2], Stage::Transpose(a) if a.is_empty()));
    }

    #[test]
    fn pipeline_kernel_count_enforced() {
        let none = parse("pipeline(transpose())").unwrap_err();
        assert!(none.message().contains("found none"));
        let two = parse("pipeline(gemm(), conv2d())").unwrap_err();
        assert!(two.message().contains("second"));
    }

    #[test]
    fn errors_report_expected_sets() {
        let SyntaxError::Parse(e) = parse("gemm(").unwrap_err() else { panic!() };
        assert_eq!(e.expected, vec!["`)`"]);
        assert_eq!(e.span.start, 5);

        let SyntaxError::Parse(e) = parse("matmul()").unwrap_err() else { panic!() };
        assert!(e.expected.contains(&"gemm".to_string()));

        let SyntaxError::Parse(e) = parse("gemm().with_bogus(1)").unwrap_err() else { panic!() };
        assert!(e.message.contains("unknown binding"));

        let SyntaxError::Parse(e) = parse("gemm() >> relu(1)").unwrap_err() else { panic!() };
        assert!(e.message.contains("name=value"));

        let SyntaxError::Parse(e) = parse("gemm().with_tile(m=1, m=2)").unwrap_err() else { panic!() };
        assert!(e.message.contains("duplicate argument `m`"));

        assert!(parse("gemm().with_stages(2,)").is_err());
        assert!(parse("gemm() gemm()").is_err());
        assert!(parse("").is_err());
    }
}
