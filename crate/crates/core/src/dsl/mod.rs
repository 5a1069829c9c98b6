//! DSL frontend: tokenizer, parser and pretty-printer.

mod ast;
mod lexer;
mod parser;
mod printer;

pub use ast::*;
pub use lexer::{tokenize, LexError, Span, Token, TokenKind};
pub use parser::{parse, ParseError, SyntaxError};
pub use printer::print;
