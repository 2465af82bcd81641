//! Recursive-descent parser.
//!
//! ```text
//! program := { NEWLINE | stmt }
//! stmt    := IDENT "=" expr NEWLINE
//!          | "return" expr NEWLINE
//!          | "if" expr NEWLINE block [ "else" NEWLINE block ] "end" NEWLINE
//!          | "while" expr NEWLINE block "end" NEWLINE
//! expr    := sum [ cmp sum ]
//! sum     := term { ("+" | "-") term }
//! term    := unary { ("*" | "/" | "%") unary }
//! unary   := "-" unary | INT | IDENT | "(" expr ")"
//! ```
//!
//! The input variable `n` is read-only.

use std::fmt;

use super::ast::{Ast, BinOp, Expr, Stmt, StmtKind};
use super::lexer::{lex, LexKind, Lexeme};
use super::source::SourceProgram;
use super::vocab::INPUT_VAR;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: u32,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error on line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for SyntaxError {}

/// Parses a program; on failure reports the first offending line.
pub fn parse(source: &SourceProgram) -> Result<Ast, SyntaxError> {
    let lexemes = lex(source)
        .map_err(|e| SyntaxError { line: e.line, message: format!("unexpected character {:?}", e.lexeme) })?;
    let mut p = Parser { toks: &lexemes, pos: 0, eof_line: source.line_count().max(1) };
    let statements = p.block(&[])?;
    Ok(Ast { statements })
}

struct Parser<'a> {
    toks: &'a [Lexeme],
    pos: usize,
    eof_line: u32,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Lexeme> {
        self.toks.get(self.pos)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError { line: self.peek().map_or(self.eof_line, |t| t.line), message: message.into() })
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.text == text)
    }

    fn expect(&mut self, text: &str) -> Result<&'a Lexeme, SyntaxError> {
        match self.peek() {
            Some(t) if t.text == text => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => self.err(format!("expected {:?}, found {:?}", text, t.text)),
            None => self.err(format!("expected {:?}, found end of input", text)),
        }
    }

    fn expect_newline(&mut self) -> Result<(), SyntaxError> {
        match self.peek() {
            Some(t) if t.kind == LexKind::Newline => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => self.err(format!("expected end of line, found {:?}", t.text)),
            None => self.err("expected end of line"),
        }
    }

    /// Parses statements until one of `terminators` (a keyword) or end of
    /// input. The terminator itself is not consumed.
    fn block(&mut self, terminators: &[&str]) -> Result<Vec<Stmt>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            let Some(t) = self.peek() else {
                if terminators.is_empty() {
                    return Ok(out);
                }
                return self.err(format!("expected {:?} before end of input", terminators[0]));
            };
            match t.kind {
                LexKind::Newline => self.pos += 1,
                LexKind::Keyword if terminators.contains(&t.text.as_str()) => return Ok(out),
                _ => out.push(self.statement()?),
            }
        }
    }

    fn statement(&mut self) -> Result<Stmt, SyntaxError> {
        let head = self.peek().expect("statement called at end of input");
        let line = head.line;
        let kind = match (head.kind, head.text.as_str()) {
            (LexKind::Keyword, "return") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_newline()?;
                StmtKind::Return(e)
            }
            (LexKind::Keyword, "if") => {
                self.pos += 1;
                let cond = self.expr()?;
                self.expect_newline()?;
                let then_branch = self.block(&["else", "end"])?;
                let mut else_branch = Vec::new();
                if self.at("else") {
                    self.pos += 1;
                    self.expect_newline()?;
                    else_branch = self.block(&["end"])?;
                }
                self.expect("end")?;
                self.expect_newline()?;
                StmtKind::If { cond, then_branch, else_branch }
            }
            (LexKind::Keyword, "while") => {
                self.pos += 1;
                let cond = self.expr()?;
                self.expect_newline()?;
                let body = self.block(&["end"])?;
                self.expect("end")?;
                self.expect_newline()?;
                StmtKind::While { cond, body }
            }
            (LexKind::Ident, name) => {
                if name == INPUT_VAR {
                    return self.err("the input variable is read-only");
                }
                self.pos += 1;
                self.expect("=")?;
                let value = self.expr()?;
                self.expect_newline()?;
                StmtKind::Assign { name: name.to_string(), value }
            }
            (_, text) => return self.err(format!("unexpected {:?} at start of statement", text)),
        };
        Ok(Stmt { line, kind })
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.sum()?;
        if let Some(op) = self.peek_op(|op| op.is_comparison()) {
            self.pos += 1;
            let rhs = self.sum()?;
            if self.peek_op(|op| op.is_comparison()).is_some() {
                return self.err("comparisons cannot be chained");
            }
            return Ok(Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) });
        }
        Ok(lhs)
    }

    fn sum(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.peek_op(|op| matches!(op, BinOp::Add | BinOp::Sub)) {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_op(|op| matches!(op, BinOp::Mul | BinOp::Div | BinOp::Rem)) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        let Some(t) = self.peek() else {
            return self.err("expected an expression");
        };
        match t.kind {
            LexKind::Int(v) => {
                self.pos += 1;
                Ok(Expr::Int(v))
            }
            LexKind::Ident => {
                self.pos += 1;
                if t.text == INPUT_VAR {
                    Ok(Expr::Input)
                } else {
                    Ok(Expr::Var(t.text.clone()))
                }
            }
            LexKind::Operator if t.text == "-" => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            LexKind::Operator if t.text == "(" => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => self.err(format!("expected an expression, found {:?}", t.text)),
        }
    }

    fn peek_op(&self, accept: impl Fn(BinOp) -> bool) -> Option<BinOp> {
        let t = self.peek()?;
        if t.kind != LexKind::Operator {
            return None;
        }
        BinOp::from_lexeme(&t.text).filter(|&op| accept(op))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_line(text: &str) -> u32 {
        parse(&SourceProgram::new(text)).unwrap_err().line
    }

    #[test]
    fn minimal_program() {
        let ast = parse(&SourceProgram::new("x = 1\nreturn x")).unwrap();
        assert_eq!(ast.statements.len(), 2);
        assert_eq!(ast.statements[1].line, 2);
    }

    #[test]
    fn incomplete_assignment() {
        assert_eq!(err_line("x = "), 1);
    }

    #[test]
    fn nested_blocks_and_precedence() {
        let src = "acc = 0\nwhile n > 0\n    if n % 2 == 0\n        acc = acc + n * 2\n    else\n        acc = acc - 1\n    end\n    n2 = 0\nend\nreturn acc";
        // `n2` is a fresh identifier, `n` itself is never assigned
        let ast = parse(&SourceProgram::new(src)).unwrap();
        assert_eq!(ast.statements.len(), 3);
        assert_eq!(ast.statement_count(), 7);
        let StmtKind::Assign { value, .. } = &ast.statements[0].kind else { panic!() };
        assert_eq!(value, &Expr::Int(0));
    }

    #[test]
    fn malformed_lines_attribute_to_first_offender() {
        // (program, expected line) pairs checked by hand against the grammar
        let corpus = [
            ("if x >\nreturn 1", 1),
            ("x = 1\ny = (2\nreturn y", 2),
            ("x = 1\n\nend", 3),
            ("while 1 > 0\nx = 1", 2),
            ("return 1 < 2 < 3", 1),
            ("n = 3", 1),
            ("x = 1\nelse", 2),
            ("x = 1 2\nreturn +", 1),
            ("x = 1\ny = x $ 2", 2),
            ("return", 1),
        ];
        for (src, line) in corpus {
            assert_eq!(err_line(src), line, "{src:?}");
        }
    }

    #[test]
    fn empty_program_parses() {
        assert!(parse(&SourceProgram::new("")).unwrap().statements.is_empty());
    }
}
