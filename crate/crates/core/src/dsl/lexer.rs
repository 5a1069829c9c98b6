use std::fmt;

use thiserror::Error;

/// Byte range plus 1-based line/column of its first character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Float(f64),
    /// Single-quoted string, escapes already resolved.
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Eq,
    Colon,
    Dot,
    /// `>>`
    Chain,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Int(i) => format!("integer `{i}`"),
            TokenKind::Float(x) => format!("number `{x}`"),
            TokenKind::Str(_) => "string literal".to_string(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Eq => "`=`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Dot => "`.`".into(),
            TokenKind::Chain => "`>>`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

/// Splits DSL source into tokens. Whitespace and `//` comments are skipped.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(source).run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, bytes: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.bytes.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src[self.pos..].chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error_here(&self, start: usize, line: u32, col: u32, message: String) -> LexError {
        let end = (self.pos.max(start + 1)).min(self.src.len()).max(start);
        LexError { span: Span { start, end, line, col }, message }
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut tokens = Vec::new();
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.bump();
                continue;
            }
            if b == b'/' && self.peek_at(1) == Some(b'/') {
                while let Some(c) = self.peek() {
                    if c == b'\n' {
                        break;
                    }
                    self.bump();
                }
                continue;
            }

            let (start, line, col) = (self.pos, self.line, self.col);
            let kind = match b {
                b'(' => self.single(TokenKind::LParen),
                b')' => self.single(TokenKind::RParen),
                b'{' => self.single(TokenKind::LBrace),
                b'}' => self.single(TokenKind::RBrace),
                b',' => self.single(TokenKind::Comma),
                b'=' => self.single(TokenKind::Eq),
                b':' => self.single(TokenKind::Colon),
                b'.' => self.single(TokenKind::Dot),
                b'>' => {
                    self.bump();
                    if self.peek() == Some(b'>') {
                        self.bump();
                        TokenKind::Chain
                    } else {
                        return Err(self.error_here(
                            start,
                            line,
                            col,
                            "unexpected `>`; epilogues are chained with `>>`".into(),
                        ));
                    }
                }
                b'\'' => self.string(start, line, col)?,
                b'-' | b'0'..=b'9' => self.number(start, line, col)?,
                b if b.is_ascii_alphabetic() || b == b'_' => {
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                        self.bump();
                    }
                    TokenKind::Ident(self.src[start..self.pos].to_string())
                }
                _ => {
                    let c = self.bump().unwrap_or('?');
                    return Err(self.error_here(start, line, col, format!("unexpected character {c:?}")));
                }
            };
            tokens.push(Token { kind, span: Span { start, end: self.pos, line, col } });
        }
        Ok(tokens)
    }

    fn single(&mut self, kind: TokenKind) -> TokenKind {
        self.bump();
        kind
    }

    fn string(&mut self, start: usize, line: u32, col: u32) -> Result<TokenKind, LexError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(self.error_here(start, line, col, "unterminated string literal".into()))
                }
                Some('\'') => return Ok(TokenKind::Str(out)),
                Some('\\') => match self.bump() {
                    Some('\'') => out.push('\''),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some(other) => {
                        return Err(self.error_here(
                            start,
                            line,
                            col,
                            format!("unknown escape `\\{other}` in string literal"),
                        ))
                    }
                    None => {
                        return Err(self.error_here(start, line, col, "unterminated string literal".into()))
                    }
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn number(&mut self, start: usize, line: u32, col: u32) -> Result<TokenKind, LexError> {
        if self.peek() == Some(b'-') {
            self.bump();
            if !matches!(self.peek(), Some(b'0'..=b'9')) {
                return Err(self.error_here(start, line, col, "`-` must be followed by a digit".into()));
            }
        }
        self.digits();
        let mut is_float = false;
        if self.peek() == Some(b'.') && matches!(self.peek_at(1), Some(b'0'..=b'9')) {
            is_float = true;
            self.bump();
            self.digits();
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let sign = usize::from(matches!(self.peek_at(1), Some(b'+' | b'-')));
            if matches!(self.peek_at(1 + sign), Some(b'0'..=b'9')) {
                is_float = true;
                self.bump();
                if sign == 1 {
                    self.bump();
                }
                self.digits();
            }
        }
        if matches!(self.peek(), Some(c) if c.is_ascii_alphabetic() || c == b'_') {
            return Err(self.error_here(start, line, col, "identifiers cannot start with a digit".into()));
        }
        let text = &self.src[start..self.pos];
        if is_float {
            text.parse::<f64>()
                .map(TokenKind::Float)
                .map_err(|e| self.error_here(start, line, col, format!("invalid number `{text}`: {e}")))
        } else {
            text.parse::<i64>()
                .map(TokenKind::Int)
                .map_err(|e| self.error_here(start, line, col, format!("invalid integer `{text}`: {e}")))
        }
    }

    fn digits(&mut self) {
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.bump();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn bare_operator() {
        assert_eq!(
            kinds("gemm()"),
            vec![TokenKind::Ident("gemm".into()), TokenKind::LParen, TokenKind::RParen]
        );
    }

    #[test]
    fn chain_operator() {
        assert_eq!(
            kinds(">> bias()"),
            vec![TokenKind::Chain, TokenKind::Ident("bias".into()), TokenKind::LParen, TokenKind::RParen]
        );
    }

    #[test]
    fn integer_literal() {
        assert_eq!(
            kinds("with_stages(2)"),
            vec![
                TokenKind::Ident("with_stages".into()),
                TokenKind::LParen,
                TokenKind::Int(2),
                TokenKind::RParen
            ]
        );
    }

    #[test]
    fn numbers_and_strings() {
        assert_eq!(
            kinds("-3 0.01 1e-3 'a\\'b'"),
            vec![
                TokenKind::Int(-3),
                TokenKind::Float(0.01),
                TokenKind::Float(1e-3),
                TokenKind::Str("a'b".into())
            ]
        );
    }

    #[test]
    fn comments_are_skipped_and_spans_track_lines() {
        let toks = tokenize("// header\n  gemm() // trailing\n>> relu()").unwrap();
        assert_eq!(toks[0].span, Span { start: 12, end: 16, line: 2, col: 3 });
        assert_eq!(toks[3].kind, TokenKind::Chain);
        assert_eq!(toks[3].span.line, 3);
    }

    #[test]
    fn rejects_characters_outside_alphabet() {
        let err = tokenize("gemm() + relu()").unwrap_err();
        assert_eq!((err.span.line, err.span.col, err.span.start), (1, 8, 7));
        assert!(tokenize("gemm() > relu()").is_err());
        assert!(tokenize("custom('open").is_err());
        assert!(tokenize("gemm()\n  .with_stages(2x)").is_err());
        assert!(tokenize("é").unwrap_err().span.end <= "é".len());
    }
}
