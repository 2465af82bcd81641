//! Closed token vocabulary shared by the tokenizer and the policy.

use std::fmt;

/// Index of a token in [`Vocab`].
pub type TokenId = usize;

/// Largest integer literal representable as a single token.
pub const MAX_INT_LITERAL: i64 = 10;

/// Name of the read-only variable bound to the test input.
pub const INPUT_VAR: &str = "n";

/// Variable names available to programs that go through the tokenizer.
pub const IDENTIFIERS: [&str; 16] =
    ["n", "a", "b", "c", "i", "j", "k", "x", "y", "z", "acc", "total", "count", "result", "step", "prod"];

const KEYWORDS: [&str; 5] = ["if", "else", "while", "end", "return"];

const OPERATORS: [&str; 14] = ["=", "+", "-", "*", "/", "%", "<", ">", "<=", ">=", "==", "!=", "(", ")"];

/// The syntactic class of a vocabulary entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Eos,
    Newline,
    Keyword,
    Operator,
    Ident,
    Int(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    kind: TokenKind,
    text: &'static str,
}

/// The fixed token vocabulary of the mini-language.
///
/// Ids are stable: `EOS` is 0 and `NEWLINE` is 1, followed by keywords,
/// operators, identifiers and integer literals `0..=10`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    entries: Vec<Entry>,
}

const INT_TEXT: [&str; 11] = ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "10"];

impl Vocab {
    pub const EOS: TokenId = 0;
    pub const NEWLINE: TokenId = 1;

    pub fn new() -> Self {
        let mut entries =
            vec![Entry { kind: TokenKind::Eos, text: "<eos>" }, Entry { kind: TokenKind::Newline, text: "\n" }];
        entries.extend(KEYWORDS.iter().map(|&text| Entry { kind: TokenKind::Keyword, text }));
        entries.extend(OPERATORS.iter().map(|&text| Entry { kind: TokenKind::Operator, text }));
        entries.extend(IDENTIFIERS.iter().map(|&text| Entry { kind: TokenKind::Ident, text }));
        entries.extend(INT_TEXT.iter().enumerate().map(|(v, &text)| Entry { kind: TokenKind::Int(v as i64), text }));
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn kind(&self, id: TokenId) -> TokenKind {
        self.entries[id].kind
    }

    /// Surface text of a token (`<eos>` for the terminator).
    pub fn text(&self, id: TokenId) -> &'static str {
        self.entries[id].text
    }

    pub fn lookup(&self, lexeme: &str) -> Option<TokenId> {
        if lexeme == "\n" {
            return Some(Self::NEWLINE);
        }
        self.entries.iter().skip(2).position(|e| e.text == lexeme).map(|p| p + 2)
    }

    /// Stable 64-bit FNV-1a digest of the token table, stored in checkpoints.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for e in &self.entries {
            for b in e.text.bytes().chain(std::iter::once(0xff)) {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Eos => f.write_str("eos"),
            TokenKind::Newline => f.write_str("newline"),
            TokenKind::Keyword => f.write_str("keyword"),
            TokenKind::Operator => f.write_str("operator"),
            TokenKind::Ident => f.write_str("identifier"),
            TokenKind::Int(_) => f.write_str("integer"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_is_small_and_unique() {
        let v = Vocab::new();
        assert!(v.len() <= 64);
        for id in 0..v.len() {
            if id >= 2 {
                assert_eq!(v.lookup(v.text(id)), Some(id));
            }
        }
        assert_eq!(v.lookup("\n"), Some(Vocab::NEWLINE));
        // the terminator has no surface form
        assert_eq!(v.lookup("<eos>"), None);
    }

    #[test]
    fn fingerprint_is_stable() {
        assert_eq!(Vocab::new().fingerprint(), Vocab::new().fingerprint());
    }
}
