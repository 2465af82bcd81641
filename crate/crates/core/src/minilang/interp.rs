//! Sandboxed tree-walking interpreter.
//!
//! Integers are 64-bit with wrapping arithmetic; division truncates toward
//! zero. Every executed statement and every loop-condition check costs one
//! step.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ast::{Ast, BinOp, Expr, Stmt, StmtKind};

pub const DEFAULT_STEP_BUDGET: u64 = 10_000;

/// Error categories recorded by the sandbox.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    DivisionByZero,
    UndefinedVariable,
    StepLimitExceeded,
    TypeMismatch,
    InvalidSyntax,
}

impl ErrorType {
    pub const ALL: [ErrorType; 5] = [
        ErrorType::DivisionByZero,
        ErrorType::UndefinedVariable,
        ErrorType::StepLimitExceeded,
        ErrorType::TypeMismatch,
        ErrorType::InvalidSyntax,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorType::DivisionByZero => "division_by_zero",
            ErrorType::UndefinedVariable => "undefined_variable",
            ErrorType::StepLimitExceeded => "step_limit_exceeded",
            ErrorType::TypeMismatch => "type_mismatch",
            ErrorType::InvalidSyntax => "invalid_syntax",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuntimeFault {
    pub error_type: ErrorType,
    pub line: u32,
}

/// Result of running a parsed program on one input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Returned(i64),
    /// Control reached the end of the program without a `return`.
    FellThrough,
    Fault(RuntimeFault),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    Int(i64),
    Bool(bool),
}

enum Flow {
    Next,
    Return(i64),
}

struct Machine {
    input: i64,
    env: HashMap<String, Value>,
    steps: u64,
    budget: u64,
}

/// Runs `ast` on `input`, stopping after `step_budget` steps.
pub fn execute(ast: &Ast, input: i64, step_budget: u64) -> Execution {
    let mut m = Machine { input, env: HashMap::new(), steps: 0, budget: step_budget };
    match m.run_block(&ast.statements) {
        Ok(Flow::Return(v)) => Execution::Returned(v),
        Ok(Flow::Next) => Execution::FellThrough,
        Err(f) => Execution::Fault(f),
    }
}

impl Machine {
    fn tick(&mut self, line: u32) -> Result<(), RuntimeFault> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(RuntimeFault { error_type: ErrorType::StepLimitExceeded, line });
        }
        Ok(())
    }

    fn run_block(&mut self, stmts: &[Stmt]) -> Result<Flow, RuntimeFault> {
        for s in stmts {
            if let Flow::Return(v) = self.run_stmt(s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn run_stmt(&mut self, s: &Stmt) -> Result<Flow, RuntimeFault> {
        self.tick(s.line)?;
        match &s.kind {
            StmtKind::Assign { name, value } => {
                let v = self.eval(value, s.line)?;
                self.env.insert(name.clone(), v);
                Ok(Flow::Next)
            }
            StmtKind::Return(e) => match self.eval(e, s.line)? {
                Value::Int(v) => Ok(Flow::Return(v)),
                Value::Bool(_) => Err(mismatch(s.line)),
            },
            StmtKind::If { cond, then_branch, else_branch } => {
                if self.truth(cond, s.line)? {
                    self.run_block(then_branch)
                } else {
                    self.run_block(else_branch)
                }
            }
            StmtKind::While { cond, body } => {
                // the first check is paid for by the statement tick
                let mut first = true;
                loop {
                    if !first {
                        self.tick(s.line)?;
                    }
                    first = false;
                    if !self.truth(cond, s.line)? {
                        return Ok(Flow::Next);
                    }
                    if let Flow::Return(v) = self.run_block(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
        }
    }

    fn truth(&mut self, cond: &Expr, line: u32) -> Result<bool, RuntimeFault> {
        match self.eval(cond, line)? {
            Value::Bool(b) => Ok(b),
            Value::Int(_) => Err(mismatch(line)),
        }
    }

    fn eval(&mut self, e: &Expr, line: u32) -> Result<Value, RuntimeFault> {
        Ok(match e {
            Expr::Int(v) => Value::Int(*v),
            Expr::Input => Value::Int(self.input),
            Expr::Var(name) => {
                *self.env.get(name).ok_or(RuntimeFault { error_type: ErrorType::UndefinedVariable, line })?
            }
            Expr::Neg(inner) => match self.eval(inner, line)? {
                Value::Int(v) => Value::Int(v.wrapping_neg()),
                Value::Bool(_) => return Err(mismatch(line)),
            },
            Expr::Binary { op, lhs, rhs } => {
                let (Value::Int(a), Value::Int(b)) = (self.eval(lhs, line)?, self.eval(rhs, line)?) else {
                    return Err(mismatch(line));
                };
                match op {
                    BinOp::Add => Value::Int(a.wrapping_add(b)),
                    BinOp::Sub => Value::Int(a.wrapping_sub(b)),
                    BinOp::Mul => Value::Int(a.wrapping_mul(b)),
                    BinOp::Div | BinOp::Rem if b == 0 => {
                        return Err(RuntimeFault { error_type: ErrorType::DivisionByZero, line })
                    }
                    BinOp::Div => Value::Int(a.wrapping_div(b)),
                    BinOp::Rem => Value::Int(a.wrapping_rem(b)),
                    BinOp::Lt => Value::Bool(a < b),
                    BinOp::Gt => Value::Bool(a > b),
                    BinOp::Le => Value::Bool(a <= b),
                    BinOp::Ge => Value::Bool(a >= b),
                    BinOp::Eq => Value::Bool(a == b),
                    BinOp::Ne => Value::Bool(a != b),
                }
            }
        })
    }
}

fn mismatch(line: u32) -> RuntimeFault {
    RuntimeFault { error_type: ErrorType::TypeMismatch, line }
}
