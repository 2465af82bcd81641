use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    pub fn from_lexeme(s: &str) -> Option<Self> {
        Some(match s {
            "+" => Self::Add,
            "-" => Self::Sub,
            "*" => Self::Mul,
            "/" => Self::Div,
            "%" => Self::Rem,
            "<" => Self::Lt,
            ">" => Self::Gt,
            "<=" => Self::Le,
            ">=" => Self::Ge,
            "==" => Self::Eq,
            "!=" => Self::Ne,
            _ => return None,
        })
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, Self::Lt | Self::Gt | Self::Le | Self::Ge | Self::Eq | Self::Ne)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Int(i64),
    Var(String),
    /// Read of the test input.
    Input,
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StmtKind {
    Assign { name: String, value: Expr },
    If { cond: Expr, then_branch: Vec<Stmt>, else_branch: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Return(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stmt {
    /// Source line of the statement head (`if`/`while` lines for blocks).
    pub line: u32,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ast {
    pub statements: Vec<Stmt>,
}

impl Ast {
    /// Visits every statement depth-first together with its control nesting
    /// depth (top-level statements have depth 0).
    pub fn walk(&self, mut f: impl FnMut(&Stmt, usize)) {
        fn go(stmts: &[Stmt], depth: usize, f: &mut dyn FnMut(&Stmt, usize)) {
            for s in stmts {
                f(s, depth);
                match &s.kind {
                    StmtKind::If { then_branch, else_branch, .. } => {
                        go(then_branch, depth + 1, f);
                        go(else_branch, depth + 1, f);
                    }
                    StmtKind::While { body, .. } => go(body, depth + 1, f),
                    _ => {}
                }
            }
        }
        go(&self.statements, 0, &mut f);
    }

    pub fn statement_count(&self) -> usize {
        let mut n = 0;
        self.walk(|_, _| n += 1);
        n
    }
}
