use serde::{Deserialize, Serialize};

use super::interp::{execute, ErrorType, Execution};
use super::parser::parse;
use super::source::SourceProgram;

/// The four compile/run outcome categories used by the coarse reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Pass,
    Failure,
    RuntimeError,
    SyntaxError,
}

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 4] =
        [OutcomeKind::Pass, OutcomeKind::Failure, OutcomeKind::RuntimeError, OutcomeKind::SyntaxError];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Pass => "pass",
            OutcomeKind::Failure => "failure",
            OutcomeKind::RuntimeError => "runtime_error",
            OutcomeKind::SyntaxError => "syntax_error",
        }
    }

    pub fn is_error(self) -> bool {
        matches!(self, OutcomeKind::RuntimeError | OutcomeKind::SyntaxError)
    }
}

/// Outcome of one unit test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub kind: OutcomeKind,
    pub error_type: Option<ErrorType>,
    pub error_line: Option<u32>,
    pub output: Option<i64>,
}

impl ExecOutcome {
    fn error(kind: OutcomeKind, error_type: ErrorType, line: u32) -> Self {
        Self { kind, error_type: Some(error_type), error_line: Some(line), output: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: i64,
    pub expected: i64,
}

/// A runtime or syntax error observed while testing, with its line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub error_type: ErrorType,
    pub line: u32,
    pub kind: OutcomeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestReport {
    pub per_test: Vec<ExecOutcome>,
    pub n_pass: usize,
    pub n_fail: usize,
}

impl TestReport {
    fn from_outcomes(per_test: Vec<ExecOutcome>) -> Self {
        let n_pass = per_test.iter().filter(|o| o.kind == OutcomeKind::Pass).count();
        let n_fail = per_test.len() - n_pass;
        Self { per_test, n_pass, n_fail }
    }

    pub fn all_pass(&self) -> bool {
        !self.per_test.is_empty() && self.n_fail == 0
    }

    /// Program-level outcome: a syntax error dominates, then all-pass, then
    /// any runtime error, otherwise a plain failure.
    pub fn program_outcome(&self) -> OutcomeKind {
        let has = |k| self.per_test.iter().any(|o| o.kind == k);
        if has(OutcomeKind::SyntaxError) {
            OutcomeKind::SyntaxError
        } else if self.all_pass() {
            OutcomeKind::Pass
        } else if has(OutcomeKind::RuntimeError) {
            OutcomeKind::RuntimeError
        } else {
            OutcomeKind::Failure
        }
    }

    /// One event per errored test, in test order.
    pub fn error_events(&self) -> Vec<ErrorEvent> {
        self.per_test
            .iter()
            .filter_map(|o| Some(ErrorEvent { error_type: o.error_type?, line: o.error_line?, kind: o.kind }))
            .collect()
    }
}

/// Parses once and runs every test against a fresh interpreter.
pub fn run_tests(source: &SourceProgram, tests: &[TestCase], step_budget: u64) -> TestReport {
    let ast = match parse(source) {
        Ok(ast) => ast,
        Err(e) => {
            let o = ExecOutcome::error(OutcomeKind::SyntaxError, ErrorType::InvalidSyntax, e.line);
            return TestReport::from_outcomes(vec![o; tests.len()]);
        }
    };
    let per_test = tests
        .iter()
        .map(|t| match execute(&ast, t.input, step_budget) {
            Execution::Returned(v) => ExecOutcome {
                kind: if v == t.expected { OutcomeKind::Pass } else { OutcomeKind::Failure },
                error_type: None,
                error_line: None,
                output: Some(v),
            },
            Execution::FellThrough => {
                ExecOutcome { kind: OutcomeKind::Failure, error_type: None, error_line: None, output: None }
            }
            Execution::Fault(f) => ExecOutcome::error(OutcomeKind::RuntimeError, f.error_type, f.line),
        })
        .collect();
    TestReport::from_outcomes(per_test)
}
