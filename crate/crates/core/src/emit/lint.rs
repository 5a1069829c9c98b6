//! Lightweight structural checks on generated C++ text. Not a parser: it
//! strips comments and literals, then checks bracket balance and the
//! namespace block.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LintError {
    #[error("unbalanced `{found}` at byte {offset}")]
    Unbalanced { found: char, offset: usize },
    #[error("unclosed `{open}` opened at byte {offset}")]
    Unclosed { open: char, offset: usize },
    #[error("unterminated {what} starting at byte {offset}")]
    Unterminated { what: &'static str, offset: usize },
    #[error("expected exactly one namespace block, found {0}")]
    NamespaceCount(usize),
    #[error("namespace is `{found}`, expected `{expected}`")]
    NamespaceName { found: String, expected: String },
    #[error("missing closing `}}  // namespace {0}` line")]
    MissingClose(String),
}

/// Replaces comments and string/char literals with spaces, keeping byte offsets.
pub fn strip(text: &str) -> Result<String, LintError> {
    let bytes = text.as_bytes();
    let mut out = bytes.to_vec();
    let mut i = 0;
    let blank = |out: &mut Vec<u8>, from: usize, to: usize| {
        for b in &mut out[from..to] {
            if *b != b'\n' {
                *b = b' ';
            }
        }
    };
    while i < bytes.len() {
        match bytes[i] {
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                let end = text[i..].find('\n').map_or(bytes.len(), |n| i + n);
                blank(&mut out, i, end);
                i = end;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let end = text[i + 2..]
                    .find("*/")
                    .map(|n| i + 2 + n + 2)
                    .ok_or(LintError::Unterminated { what: "block comment", offset: i })?;
                blank(&mut out, i, end);
                i = end;
            }
            q @ (b'"' | b'\'') => {
                let start = i;
                i += 1;
                loop {
                    match bytes.get(i) {
                        None | Some(b'\n') => {
                            let what = if q == b'"' { "string literal" } else { "char literal" };
                            return Err(LintError::Unterminated { what, offset: start });
                        }
                        Some(b'\\') => i += 2,
                        Some(&c) if c == q => {
                            i += 1;
                            break;
                        }
                        _ => i += 1,
                    }
                }
                blank(&mut out, start, i);
            }
            _ => i += 1,
        }
    }
    Ok(String::from_utf8(out).expect("only ASCII bytes were replaced"))
}

/// Checks `{}`, `()` and `[]` balance outside comments and literals.
pub fn check_balance(text: &str) -> Result<(), LintError> {
    let code = strip(text)?;
    let mut stack: Vec<(char, usize)> = Vec::new();
    for (offset, c) in code.char_indices() {
        match c {
            '{' | '(' | '[' => stack.push((c, offset)),
            '}' | ')' | ']' => {
                let want = match c {
                    '}' => '{',
                    ')' => '(',
                    _ => '[',
                };
                match stack.pop() {
                    Some((open, _)) if open == want => {}
                    _ => return Err(LintError::Unbalanced { found: c, offset }),
                }
            }
            _ => {}
        }
    }
    match stack.pop() {
        Some((open, offset)) => Err(LintError::Unclosed { open, offset }),
        None => Ok(()),
    }
}

/// Full header check: balance plus exactly one `namespace <expected> {`
/// block closed by `}  // namespace <expected>`.
pub fn check(text: &str, expected_namespace: &str) -> Result<(), LintError> {
    check_balance(text)?;
    let code = strip(text)?;
    let opens: Vec<&str> = code
        .lines()
        .filter_map(|l| l.trim().strip_prefix("namespace "))
        .filter_map(|rest| rest.trim_end().strip_suffix('{'))
        .map(str::trim)
        .collect();
    if opens.len() != 1 {
        return Err(LintError::NamespaceCount(opens.len()));
    }
    if opens[0] != expected_namespace {
        return Err(LintError::NamespaceName { found: opens[0].to_string(), expected: expected_namespace.to_string() });
    }
    let close = format!("}}  // namespace {expected_namespace}");
    if !text.lines().any(|l| l == close) {
        return Err(LintError::MissingClose(expected_namespace.to_string()));
    }
    Ok(())
}
