//! Line-oriented lexer for the mini-language.

use super::source::SourceProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexKind {
    Ident,
    Int(i64),
    Keyword,
    Operator,
    Newline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexeme {
    pub kind: LexKind,
    pub text: String,
    pub line: u32,
    /// Byte offset of the lexeme within its line.
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: u32,
    pub lexeme: String,
}

const KEYWORDS: [&str; 5] = ["if", "else", "while", "end", "return"];
const TWO_CHAR_OPS: [&str; 4] = ["<=", ">=", "==", "!="];
const ONE_CHAR_OPS: &str = "=+-*/%<>()";

/// Splits `source` into lexemes; every line (blank ones included) is
/// terminated by a `Newline` lexeme.
pub fn lex(source: &SourceProgram) -> Result<Vec<Lexeme>, LexError> {
    lex_impl(source, false)
}

/// Like [`lex`] but silently drops characters outside the language.
/// Used by the style judge, which must score unparseable text too.
pub fn lex_lenient(source: &SourceProgram) -> Vec<Lexeme> {
    lex_impl(source, true).unwrap_or_default()
}

fn lex_impl(source: &SourceProgram, lenient: bool) -> Result<Vec<Lexeme>, LexError> {
    let mut out = Vec::new();
    for line in source.lines() {
        let bytes = line.text.as_bytes();
        let mut pos = 0;
        while pos < bytes.len() {
            let c = bytes[pos];
            if c == b' ' || c == b'\t' || c == b'\r' {
                pos += 1;
                continue;
            }
            let start = pos;
            let kind;
            if c.is_ascii_lowercase() || c == b'_' {
                while pos < bytes.len()
                    && (bytes[pos].is_ascii_lowercase() || bytes[pos].is_ascii_digit() || bytes[pos] == b'_')
                {
                    pos += 1;
                }
                let word = &line.text[start..pos];
                kind = if KEYWORDS.contains(&word) { LexKind::Keyword } else { LexKind::Ident };
            } else if c.is_ascii_digit() {
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                match line.text[start..pos].parse::<i64>() {
                    Ok(v) => kind = LexKind::Int(v),
                    Err(_) if lenient => continue,
                    Err(_) => return Err(LexError { line: line.number, lexeme: line.text[start..pos].to_string() }),
                }
            } else if pos + 1 < bytes.len() && TWO_CHAR_OPS.contains(&&line.text[pos..pos + 2]) {
                pos += 2;
                kind = LexKind::Operator;
            } else if ONE_CHAR_OPS.as_bytes().contains(&c) {
                pos += 1;
                kind = LexKind::Operator;
            } else {
                let ch = line.text[start..].chars().next().unwrap_or('?');
                pos += ch.len_utf8();
                if lenient {
                    continue;
                }
                return Err(LexError { line: line.number, lexeme: ch.to_string() });
            }
            out.push(Lexeme { kind, text: line.text[start..pos].to_string(), line: line.number, column: start });
        }
        out.push(Lexeme { kind: LexKind::Newline, text: "\n".to_string(), line: line.number, column: bytes.len() });
    }
    Ok(out)
}
