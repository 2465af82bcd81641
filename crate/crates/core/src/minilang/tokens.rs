use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexer::{lex, LexKind};
use super::source::SourceProgram;
use super::vocab::{TokenId, TokenKind, Vocab};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizeError {
    #[error("unknown lexeme {lexeme:?} on line {line}")]
    UnknownLexeme { lexeme: String, line: u32 },
}

/// A token sequence together with its rendered source and the source line of
/// every token. Always terminated by exactly one `EOS`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    source: SourceProgram,
    tokens: Vec<TokenId>,
    lines: Vec<u32>,
}

impl Program {
    /// Builds a program from generated tokens. Anything after the first
    /// `EOS` is dropped and a missing `EOS` is appended.
    pub fn from_tokens(tokens: &[TokenId], vocab: &Vocab) -> Self {
        let mut tokens: Vec<TokenId> = tokens.iter().copied().take_while(|&t| t != Vocab::EOS).collect();
        tokens.push(Vocab::EOS);
        let source = detokenize(&tokens, vocab);
        let lines = token_lines(&tokens);
        Self { source, tokens, lines }
    }

    pub fn source(&self) -> &SourceProgram {
        &self.source
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    /// 1-based source line of each token; `EOS` sits one past the last line.
    pub fn token_lines(&self) -> &[u32] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Line annotation for a token sequence: every `NEWLINE` closes a line.
pub fn token_lines(tokens: &[TokenId]) -> Vec<u32> {
    let mut line = 1;
    tokens
        .iter()
        .map(|&t| {
            let here = line;
            if t == Vocab::NEWLINE {
                line += 1;
            }
            here
        })
        .collect()
}

pub fn tokenize(source: &SourceProgram, vocab: &Vocab) -> Result<Program, TokenizeError> {
    let lexemes = lex(source).map_err(|e| TokenizeError::UnknownLexeme { lexeme: e.lexeme, line: e.line })?;
    let mut tokens = Vec::with_capacity(lexemes.len() + 1);
    let mut lines = Vec::with_capacity(lexemes.len() + 1);
    for l in &lexemes {
        let id = match l.kind {
            LexKind::Newline => Some(Vocab::NEWLINE),
            _ => vocab.lookup(&l.text),
        }
        .ok_or_else(|| TokenizeError::UnknownLexeme { lexeme: l.text.clone(), line: l.line })?;
        tokens.push(id);
        lines.push(l.line);
    }
    tokens.push(Vocab::EOS);
    lines.push(source.line_count() + 1);
    Ok(Program { source: source.clone(), tokens, lines })
}

const INDENT: &str = "    ";

/// Renders tokens in canonical form: single spaces between tokens, none
/// inside parentheses or after a unary minus, four-space block indentation.
/// Rendering stops at the first `EOS`.
pub fn detokenize(tokens: &[TokenId], vocab: &Vocab) -> SourceProgram {
    let body: Vec<TokenId> = tokens.iter().copied().take_while(|&t| t != Vocab::EOS).collect();
    let mut rendered = Vec::new();
    let mut depth = 0usize;
    let mut lines: Vec<&[TokenId]> = body.split(|&t| t == Vocab::NEWLINE).collect();
    // `split` yields a trailing empty slice after a final NEWLINE
    if body.last() == Some(&Vocab::NEWLINE) {
        lines.pop();
    }
    for line in lines {
        let first = line.first().map(|&t| vocab.text(t));
        let line_depth = match first {
            Some("end") | Some("else") => depth.saturating_sub(1),
            _ => depth,
        };
        depth = match first {
            Some("if") | Some("while") | Some("else") => line_depth + 1,
            Some("end") => line_depth,
            _ => depth,
        };
        if line.is_empty() {
            rendered.push(String::new());
            continue;
        }
        let mut text = INDENT.repeat(line_depth);
        text.push_str(&render_line(line, vocab));
        rendered.push(text);
    }
    SourceProgram::from_lines(rendered.iter().map(String::as_str))
}

fn render_line(line: &[TokenId], vocab: &Vocab) -> String {
    let mut out = String::new();
    let mut prev: Option<TokenId> = None;
    let mut prev_unary = false;
    for &t in line {
        let text = vocab.text(t);
        if let Some(p) = prev {
            let glue = vocab.text(p) == "(" || text == ")" || prev_unary;
            if !glue {
                out.push(' ');
            }
        }
        prev_unary = text == "-" && minus_is_unary(prev, vocab);
        out.push_str(text);
        prev = Some(t);
    }
    out
}

/// A minus is unary at line start or after an operator other than `)`, or
/// after a keyword.
pub(crate) fn minus_is_unary(prev: Option<TokenId>, vocab: &Vocab) -> bool {
    match prev {
        None => true,
        Some(p) => match vocab.kind(p) {
            TokenKind::Keyword => true,
            TokenKind::Operator => vocab.text(p) != ")",
            _ => false,
        },
    }
}
