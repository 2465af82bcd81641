use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::minilang::{run_tests, tokenize, OutcomeKind, Vocab, DEFAULT_STEP_BUDGET};
use crate::task::{Task, Tier};

/// The bundled 20-task corpus: seven straight-line, six single-loop and
/// seven nested-control tasks.
pub const STARTER_CORPUS: &str = include_str!("../../data/starter_corpus.jsonl");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corpus line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus is empty")]
    Empty,
    #[error("corpus line {line}: duplicate task id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("reference solution of task {task_id:?} fails its own tests: {detail}")]
    ReferenceFails { task_id: String, detail: String },
}

/// Parses line-delimited task records and checks every reference solution
/// against its tests.
pub fn parse_corpus(text: &str) -> Result<Vec<Task>, CorpusError> {
    let vocab = Vocab::new();
    let mut ids = BTreeSet::new();
    let mut tasks = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let task: Task = serde_json::from_str(raw).map_err(|e| CorpusError::Parse { line, message: e.to_string() })?;
        if task.tests.is_empty() {
            return Err(CorpusError::Parse { line, message: format!("task {:?} has no tests", task.id) });
        }
        if !ids.insert(task.id.clone()) {
            return Err(CorpusError::DuplicateId { line, id: task.id });
        }
        validate_reference(&task, &vocab)?;
        tasks.push(task);
    }
    if tasks.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(tasks)
}

fn validate_reference(task: &Task, vocab: &Vocab) -> Result<(), CorpusError> {
    let fail = |detail: String| CorpusError::ReferenceFails { task_id: task.id.clone(), detail };
    tokenize(&task.reference_solution, vocab).map_err(|e| fail(e.to_string()))?;
    let report = run_tests(&task.reference_solution, &task.tests, DEFAULT_STEP_BUDGET);
    if let Some((case, out)) = task.tests.iter().zip(&report.per_test).find(|(_, o)| o.kind != OutcomeKind::Pass) {
        return Err(fail(format!(
            "input {} expected {} got {} ({})",
            case.input,
            case.expected,
            out.output.map_or_else(|| "nothing".to_string(), |v| v.to_string()),
            out.kind.as_str()
        )));
    }
    Ok(())
}

pub fn load_corpus(path: &Path) -> Result<Vec<Task>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    parse_corpus(&text)
}

pub fn starter_corpus() -> Vec<Task> {
    parse_corpus(STARTER_CORPUS).expect("bundled corpus is valid")
}

/// Tasks of one tier, in corpus order.
pub fn tier_tasks(corpus: &[Task], tier: Tier) -> Vec<Task> {
    corpus.iter().filter(|t| t.tier == tier).cloned().collect()
}
