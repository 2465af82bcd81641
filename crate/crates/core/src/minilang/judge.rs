//! Deterministic rubric judges for coding style and complexity.
//!
//! Both produce an integer score in `[-1, 2]` together with the identifiers
//! of the rules that fired.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::{Ast, StmtKind};
use super::lexer::{lex_lenient, LexKind, Lexeme};
use super::parser::parse;
use super::source::SourceProgram;
use super::vocab::INPUT_VAR;

pub const MAX_SCORE: i8 = 2;
pub const MIN_SCORE: i8 = -1;

pub const RULE_OPERATOR_SPACING: &str = "operator-spacing";
pub const RULE_SHORT_NAME_SPAN: &str = "short-name-span";
pub const RULE_DEAD_CODE: &str = "dead-code";
pub const RULE_UNPARSEABLE: &str = "unparseable";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeScore {
    pub value: i8,
    pub rubric_hits: Vec<String>,
}

impl JudgeScore {
    fn from_hits(start: i8, hits: Vec<&str>) -> Self {
        let value = (start - hits.len() as i8).max(MIN_SCORE);
        Self { value, rubric_hits: hits.into_iter().map(String::from).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleRubric {
    /// Single-character variables may not stay live across more lines than this.
    pub max_short_name_lines: u32,
}

impl Default for StyleRubric {
    fn default() -> Self {
        Self { max_short_name_lines: 3 }
    }
}

/// Decision-count / nesting-depth thresholds for each complexity bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityRubric {
    pub top_max_decisions: usize,
    pub top_max_depth: usize,
    pub good_max_decisions: usize,
    pub good_max_depth: usize,
    pub fair_max_decisions: usize,
}

impl Default for ComplexityRubric {
    fn default() -> Self {
        Self { top_max_decisions: 2, top_max_depth: 1, good_max_decisions: 4, good_max_depth: 2, fair_max_decisions: 6 }
    }
}

/// Scores raw text, so unparseable programs are still judged.
pub fn style_score(source: &SourceProgram, rubric: &StyleRubric) -> JudgeScore {
    let lexemes = lex_lenient(source);
    let mut hits = Vec::new();
    if has_spacing_violation(source, &lexemes) {
        hits.push(RULE_OPERATOR_SPACING);
    }
    if has_long_lived_short_name(&lexemes, rubric.max_short_name_lines) {
        hits.push(RULE_SHORT_NAME_SPAN);
    }
    if has_dead_code(&lexemes) {
        hits.push(RULE_DEAD_CODE);
    }
    JudgeScore::from_hits(MAX_SCORE, hits)
}

fn has_spacing_violation(source: &SourceProgram, lexemes: &[Lexeme]) -> bool {
    let mut prev: Option<&Lexeme> = None;
    for l in lexemes {
        let binary =
            l.kind == LexKind::Operator && l.text != "(" && l.text != ")" && !(l.text == "-" && is_unary_context(prev));
        if binary {
            let text = source.line(l.line).unwrap_or_default().as_bytes();
            let before_ok = l.column >= 2 && text[l.column - 1] == b' ' && text[l.column - 2] != b' ';
            let end = l.column + l.text.len();
            let after_ok = end + 1 < text.len() && text[end] == b' ' && text[end + 1] != b' ';
            if !(before_ok && after_ok) {
                return true;
            }
        }
        prev = if l.kind == LexKind::Newline { None } else { Some(l) };
    }
    false
}

fn is_unary_context(prev: Option<&Lexeme>) -> bool {
    match prev {
        None => true,
        Some(p) => match p.kind {
            LexKind::Keyword => true,
            LexKind::Operator => p.text != ")",
            _ => false,
        },
    }
}

fn has_long_lived_short_name(lexemes: &[Lexeme], max_lines: u32) -> bool {
    let mut spans: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
    for l in lexemes {
        if l.kind == LexKind::Ident && l.text.len() == 1 && l.text != INPUT_VAR {
            let e = spans.entry(l.text.as_str()).or_insert((l.line, l.line));
            e.1 = l.line;
        }
    }
    spans.values().any(|&(first, last)| last - first + 1 > max_lines)
}

fn has_dead_code(lexemes: &[Lexeme]) -> bool {
    // one "after return" flag per open block
    let mut dead = vec![false];
    let mut at_line_start = true;
    for l in lexemes {
        if l.kind == LexKind::Newline {
            at_line_start = true;
            continue;
        }
        if !at_line_start {
            continue;
        }
        at_line_start = false;
        match l.text.as_str() {
            "end" => {
                if dead.len() > 1 {
                    dead.pop();
                }
            }
            "else" => {
                if let Some(top) = dead.last_mut() {
                    *top = false;
                }
            }
            head => {
                if *dead.last().unwrap_or(&false) {
                    return true;
                }
                match head {
                    "return" => *dead.last_mut().expect("block stack is never empty") = true,
                    "if" | "while" => dead.push(false),
                    _ => {}
                }
            }
        }
    }
    false
}

/// Decision-point count and maximum control nesting depth of a program.
pub fn control_metrics(ast: &Ast) -> (usize, usize) {
    let mut decisions = 0;
    let mut depth = 0;
    ast.walk(|s, d| {
        if matches!(s.kind, StmtKind::If { .. } | StmtKind::While { .. }) {
            decisions += 1;
            depth = depth.max(d + 1);
        }
    });
    (decisions, depth)
}

pub fn complexity_score(ast: &Ast, rubric: &ComplexityRubric) -> JudgeScore {
    let (d, n) = control_metrics(ast);
    let value = if d <= rubric.top_max_decisions && n <= rubric.top_max_depth {
        2
    } else if d <= rubric.good_max_decisions && n <= rubric.good_max_depth {
        1
    } else if d <= rubric.fair_max_decisions {
        0
    } else {
        -1
    };
    JudgeScore { value, rubric_hits: vec![format!("decisions={d}"), format!("depth={n}")] }
}

/// Complexity of raw text; unparseable programs score the minimum.
pub fn complexity_score_source(source: &SourceProgram, rubric: &ComplexityRubric) -> JudgeScore {
    match parse(source) {
        Ok(ast) => complexity_score(&ast, rubric),
        Err(_) => JudgeScore { value: MIN_SCORE, rubric_hits: vec![RULE_UNPARSEABLE.to_string()] },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn style(text: &str) -> JudgeScore {
        style_score(&SourceProgram::new(text), &StyleRubric::default())
    }

    fn complexity(text: &str) -> i8 {
        complexity_score_source(&SourceProgram::new(text), &ComplexityRubric::default()).value
    }

    #[test]
    fn canonical_program_scores_top() {
        let s = style("x = 1\nreturn x");
        assert_eq!(s.value, 2);
        assert!(s.rubric_hits.is_empty());
    }

    #[test]
    fn missing_operator_spacing() {
        let s = style("x=1\nreturn x");
        assert_eq!(s.value, 1);
        assert_eq!(s.rubric_hits, vec![RULE_OPERATOR_SPACING]);
        assert_eq!(style("x = 1 +  2\nreturn x").value, 1);
        assert_eq!(style("x = -1\nreturn (x - 1) * -x").value, 2);
    }

    #[test]
    fn short_name_span() {
        // `x` spans lines 1..=4: four lines > 3
        let s = style("x = 1\ny2 = 2\ny3 = 3\nreturn x");
        assert_eq!(s.rubric_hits, vec![RULE_SHORT_NAME_SPAN]);
        assert_eq!(style("x = 1\ny2 = 2\nreturn x").value, 2);
        // the input variable is exempt
        assert_eq!(style("acc = n\nb2 = 1\nc2 = 2\nreturn n").value, 2);
    }

    #[test]
    fn dead_code_after_return() {
        let s = style("return 1\ntotal = 2");
        assert_eq!(s.rubric_hits, vec![RULE_DEAD_CODE]);
        // code after a branch-local return is live
        assert_eq!(style("if n > 0\n    return 1\nelse\n    total = 2\nend\nreturn n").value, 2);
        assert_eq!(style("if n > 0\n    return 1\n    total = 2\nend\nreturn n").value, 1);
    }

    #[test]
    fn every_rule_floors_at_minus_one() {
        let s = style("x=1\ny2 = 1\ny3 = 1\nreturn x\nq = 2");
        assert_eq!(s.rubric_hits.len(), 3);
        assert_eq!(s.value, -1);
    }

    #[test]
    fn complexity_buckets() {
        assert_eq!(complexity("x = 1\nreturn x"), 2);
        // d = 3, n = 2
        let three = "acc = 0\nwhile acc < n\n    if acc > 2\n        acc = acc + 1\n    end\n    acc = acc + 1\nend\nif acc > 3\n    acc = 0\nend\nreturn acc";
        let ast = parse(&SourceProgram::new(three)).unwrap();
        assert_eq!(control_metrics(&ast), (3, 2));
        assert_eq!(complexity(three), 1);
        let seven = "acc = 0\n".to_string() + &"if n > 0\n    acc = 1\nend\n".repeat(7) + "return acc";
        assert_eq!(complexity(&seven), -1);
        let five = "acc = 0\n".to_string() + &"if n > 0\n    acc = 1\nend\n".repeat(5) + "return acc";
        assert_eq!(complexity(&five), 0);
        assert_eq!(complexity("x = "), -1);
    }

    proptest! {
        #[test]
        fn scores_stay_in_range(text in "[a-z0-9 =+*/()<>\n-]{0,60}") {
            let src = SourceProgram::new(text);
            let s = style_score(&src, &StyleRubric::default());
            let c = complexity_score_source(&src, &ComplexityRubric::default());
            prop_assert!((-1..=2).contains(&s.value));
            prop_assert!((-1..=2).contains(&c.value));
            prop_assert_eq!(s, style_score(&src, &StyleRubric::default()));
        }
    }
}
