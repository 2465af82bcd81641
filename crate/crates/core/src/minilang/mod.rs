//! The toy target language: integer values, assignment, arithmetic,
//! comparison, `if`/`while` blocks, `return`, and one read-only input `n`.
//!
//! ```text
//! acc = 0
//! i = 1
//! while i <= n
//!     acc = acc + i
//!     i = i + 1
//! end
//! return acc
//! ```

mod ast;
mod interp;
mod judge;
mod lexer;
mod outcome;
mod parser;
mod source;
mod tokens;
mod vocab;

pub use ast::{Ast, BinOp, Expr, Stmt, StmtKind};
pub use interp::{execute, ErrorType, Execution, RuntimeFault, DEFAULT_STEP_BUDGET};
pub use judge::{
    complexity_score, complexity_score_source, control_metrics, style_score, ComplexityRubric, JudgeScore, StyleRubric,
    MAX_SCORE, MIN_SCORE, RULE_DEAD_CODE, RULE_OPERATOR_SPACING, RULE_SHORT_NAME_SPAN, RULE_UNPARSEABLE,
};
pub use outcome::{run_tests, ErrorEvent, ExecOutcome, OutcomeKind, TestCase, TestReport};
pub use parser::{parse, SyntaxError};
pub use source::{Line, SourceProgram};
pub use tokens::{detokenize, token_lines, tokenize, Program, TokenizeError};
pub use vocab::{TokenId, TokenKind, Vocab, IDENTIFIERS, INPUT_VAR, MAX_INT_LITERAL};
