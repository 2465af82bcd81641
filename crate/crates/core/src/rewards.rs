//! Feedback channels and their conversion into token-span rewards.
//!
//! | channel    | range          | source                                   |
//! |------------|----------------|------------------------------------------|
//! | coarse     | {1,-0.3,-0.6,-1} | program-level compile/run outcome     |
//! | adaptive   | [-0.3, 1]      | unit-test pass fraction                  |
//! | style      | [-1, 2]        | style rubric                             |
//! | complexity | [-1, 2]        | complexity rubric                        |
//! | negative   | (-inf, 0]      | current error counts x long-term shares  |
//!
//! The composite is `alpha*adaptive + beta*style + gamma*complexity +
//! delta*(coarse + negative)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{
    complexity_score_source, run_tests, style_score, ComplexityRubric, ErrorEvent, ErrorType, JudgeScore, OutcomeKind,
    Program, SourceProgram, StyleRubric, TestCase, TestReport, DEFAULT_STEP_BUDGET,
};
use crate::policy::RewardSpan;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error("adaptive reward needs at least one test result")]
    NoTests,
}

pub fn coarse_reward(kind: OutcomeKind) -> f64 {
    match kind {
        OutcomeKind::Pass => 1.0,
        OutcomeKind::Failure => -0.3,
        OutcomeKind::RuntimeError => -0.6,
        OutcomeKind::SyntaxError => -1.0,
    }
}

pub fn adaptive_reward(n_pass: usize, n_fail: usize) -> Result<f64, RewardError> {
    let total = n_pass + n_fail;
    if total == 0 {
        return Err(RewardError::NoTests);
    }
    Ok(-0.3 + 1.3 * n_pass as f64 / total as f64)
}

/// `-Σ count · share` over error types present in both maps.
pub fn negative_reward(short_counts: &BTreeMap<ErrorType, u64>, long_proportions: &BTreeMap<ErrorType, f64>) -> f64 {
    -short_counts.iter().filter_map(|(t, &n)| long_proportions.get(t).map(|&p| n as f64 * p)).sum::<f64>()
}

pub fn judge_reward(score: &JudgeScore) -> f64 {
    f64::from(score.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { alpha: 0.25, beta: 0.25, gamma: 0.25, delta: 0.25 }
    }
}

impl RewardWeights {
    pub fn is_valid(&self) -> bool {
        [self.alpha, self.beta, self.gamma, self.delta].iter().all(|w| w.is_finite() && *w >= 0.0)
    }
}

/// Raw channel values before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardParts {
    pub coarse: f64,
    pub adaptive: f64,
    pub style: f64,
    pub complexity: f64,
    pub negative: f64,
}

pub fn composite_reward(parts: &RewardParts, w: &RewardWeights) -> f64 {
    w.alpha * parts.adaptive
        + w.beta * parts.style
        + w.gamma * parts.complexity
        + w.delta * (parts.coarse + parts.negative)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub coarse: f64,
    pub adaptive: f64,
    pub style: f64,
    pub complexity: f64,
    pub negative: f64,
    pub composite: f64,
}

impl RewardBreakdown {
    pub fn new(parts: RewardParts, weights: &RewardWeights) -> Self {
        Self {
            coarse: parts.coarse,
            adaptive: parts.adaptive,
            style: parts.style,
            complexity: parts.complexity,
            negative: parts.negative,
            composite: composite_reward(&parts, weights),
        }
    }

    pub fn parts(&self) -> RewardParts {
        RewardParts {
            coarse: self.coarse,
            adaptive: self.adaptive,
            style: self.style,
            complexity: self.complexity,
            negative: self.negative,
        }
    }
}

/// Sandbox and judge settings used to produce feedback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackConfig {
    pub step_budget: u64,
    #[serde(default)]
    pub style: StyleRubric,
    #[serde(default)]
    pub complexity: ComplexityRubric,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            step_budget: DEFAULT_STEP_BUDGET,
            style: StyleRubric::default(),
            complexity: ComplexityRubric::default(),
        }
    }
}

/// Everything the sandbox and judges said about one program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub outcome: OutcomeKind,
    pub report: TestReport,
    pub style: JudgeScore,
    pub complexity: JudgeScore,
    pub errors: Vec<ErrorEvent>,
    /// Long-term error reward, fixed at the time the feedback was produced.
    pub negative: f64,
}

impl FeedbackBundle {
    /// Runs the tests and judges. `long_proportions` are the long-term error
    /// shares (empty when no long-term memory is in use).
    pub fn collect(
        source: &SourceProgram,
        tests: &[TestCase],
        config: &FeedbackConfig,
        long_proportions: &BTreeMap<ErrorType, f64>,
    ) -> Self {
        let report = run_tests(source, tests, config.step_budget);
        let errors = report.error_events();
        let negative = negative_reward(&error_counts(&errors), long_proportions);
        Self {
            outcome: report.program_outcome(),
            style: style_score(source, &config.style),
            complexity: complexity_score_source(source, &config.complexity),
            errors,
            negative,
            report,
        }
    }

    pub fn parts(&self) -> RewardParts {
        RewardParts {
            coarse: coarse_reward(self.outcome),
            adaptive: adaptive_reward(self.report.n_pass, self.report.n_fail).unwrap_or(-0.3),
            style: judge_reward(&self.style),
            complexity: judge_reward(&self.complexity),
            negative: self.negative,
        }
    }

    pub fn breakdown(&self, weights: &RewardWeights) -> RewardBreakdown {
        RewardBreakdown::new(self.parts(), weights)
    }

    /// Short text used when embedding this feedback for retrieval.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} pass {}/{} style {} complexity {}",
            self.outcome.as_str(),
            self.report.n_pass,
            self.report.n_pass + self.report.n_fail,
            self.style.value,
            self.complexity.value
        );
        for (t, n) in error_counts(&self.errors) {
            s.push_str(&format!(" {} x{}", t.as_str(), n));
        }
        s
    }
}

pub fn error_counts(events: &[ErrorEvent]) -> BTreeMap<ErrorType, u64> {
    let mut m = BTreeMap::new();
    for e in events {
        *m.entry(e.error_type).or_insert(0) += 1;
    }
    m
}

/// Error lines with the most negative coarse reward seen on each.
fn error_line_coefficients(bundle: &FeedbackBundle) -> BTreeMap<u32, f64> {
    let mut lines: BTreeMap<u32, f64> = BTreeMap::new();
    for e in &bundle.errors {
        let c = coarse_reward(e.kind);
        lines.entry(e.line).and_modify(|v| *v = v.min(c)).or_insert(c);
    }
    lines
}

/// Token interval covering exactly the tokens annotated with `line`.
fn line_span(token_lines: &[u32], line: u32) -> Option<(usize, usize)> {
    let start = token_lines.iter().position(|&l| l == line)?;
    let end = token_lines.iter().rposition(|&l| l == line)? + 1;
    Some((start, end))
}

fn line_spans(bundle: &FeedbackBundle, program: &Program) -> Vec<RewardSpan> {
    error_line_coefficients(bundle)
        .into_iter()
        .filter_map(|(line, coefficient)| {
            line_span(program.token_lines(), line).map(|(start, end)| RewardSpan { start, end, coefficient })
        })
        .collect()
}

/// One full-length span carrying the composite reward plus one span per
/// error line carrying that line's coarse reward.
pub fn assign_spans(bundle: &FeedbackBundle, program: &Program, weights: &RewardWeights) -> Vec<RewardSpan> {
    let mut spans = vec![RewardSpan { start: 0, end: program.len(), coefficient: bundle.breakdown(weights).composite }];
    spans.extend(line_spans(bundle, program));
    spans
}

/// The same spans split by channel, so each channel's loss can be reported
/// separately. Summing all channels' token weights reproduces
/// [`assign_spans`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelSpans {
    pub coarse: Vec<RewardSpan>,
    pub error: Vec<RewardSpan>,
    pub style: Vec<RewardSpan>,
    pub complexity: Vec<RewardSpan>,
    pub negative: Vec<RewardSpan>,
}

impl ChannelSpans {
    pub fn channels(&self) -> [&[RewardSpan]; 5] {
        [&self.coarse, &self.error, &self.complexity, &self.style, &self.negative]
    }
}

pub fn channel_spans(bundle: &FeedbackBundle, program: &Program, weights: &RewardWeights) -> ChannelSpans {
    let p = bundle.parts();
    let full = |coefficient: f64| vec![RewardSpan { start: 0, end: program.len(), coefficient }];
    let mut coarse = full(weights.delta * p.coarse);
    coarse.extend(line_spans(bundle, program));
    ChannelSpans {
        coarse,
        error: full(weights.alpha * p.adaptive),
        style: full(weights.beta * p.style),
        complexity: full(weights.gamma * p.complexity),
        negative: full(weights.delta * p.negative),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{tokenize, Vocab};
    use crate::policy::span_weights;

    fn cases(pairs: &[(i64, i64)]) -> Vec<TestCase> {
        pairs.iter().map(|&(input, expected)| TestCase { input, expected }).collect()
    }

    #[test]
    fn coarse_values() {
        assert_eq!(coarse_reward(OutcomeKind::Pass), 1.0);
        assert_eq!(coarse_reward(OutcomeKind::Failure), -0.3);
        assert_eq!(coarse_reward(OutcomeKind::RuntimeError), -0.6);
        assert_eq!(coarse_reward(OutcomeKind::SyntaxError), -1.0);
    }

    #[test]
    fn adaptive_values() {
        assert_eq!(adaptive_reward(0, 5).unwrap(), -0.3);
        assert!((adaptive_reward(5, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!((adaptive_reward(1, 1).unwrap() - 0.35).abs() < 1e-15);
        assert_eq!(adaptive_reward(0, 0), Err(RewardError::NoTests));
    }

    #[test]
    fn negative_values() {
        let mut long = BTreeMap::new();
        long.insert(ErrorType::DivisionByZero, 0.5);
        assert_eq!(negative_reward(&BTreeMap::new(), &long), 0.0);
        let mut short = BTreeMap::new();
        short.insert(ErrorType::DivisionByZero, 2);
        assert_eq!(negative_reward(&short, &long), -1.0);
        let mut disjoint = BTreeMap::new();
        disjoint.insert(ErrorType::TypeMismatch, 3);
        assert_eq!(negative_reward(&disjoint, &long), 0.0);
    }

    #[test]
    fn judge_values() {
        let s = |value| JudgeScore { value, rubric_hits: vec![] };
        assert_eq!(judge_reward(&s(2)), 2.0);
        assert_eq!(judge_reward(&s(-1)), -1.0);
        assert_eq!(judge_reward(&s(0)), 0.0);
    }

    #[test]
    fn composite_is_linear() {
        let parts = RewardParts { adaptive: 0.35, ..Default::default() };
        let proj = RewardWeights { alpha: 1.0, beta: 0.0, gamma: 0.0, delta: 0.0 };
        assert_eq!(composite_reward(&parts, &proj), 0.35);
        assert_eq!(composite_reward(&RewardParts::default(), &RewardWeights::default()), 0.0);
        let parts = RewardParts { coarse: -0.6, adaptive: 0.1, style: 2.0, complexity: -1.0, negative: -0.7 };
        let w = RewardWeights { alpha: 0.1, beta: 0.2, gamma: 0.3, delta: 0.4 };
        let w2 = RewardWeights { alpha: 0.2, beta: 0.4, gamma: 0.6, delta: 0.8 };
        assert!((composite_reward(&parts, &w2) - 2.0 * composite_reward(&parts, &w)).abs() < 1e-15);
    }

    fn bundle_for(src: &str, tests: &[(i64, i64)]) -> (FeedbackBundle, Program) {
        let vocab = Vocab::new();
        let source = SourceProgram::new(src);
        let program = tokenize(&source, &vocab).unwrap();
        let b = FeedbackBundle::collect(&source, &cases(tests), &FeedbackConfig::default(), &BTreeMap::new());
        (b, program)
    }

    #[test]
    fn all_pass_gets_single_span() {
        let (b, p) = bundle_for("return n + 1", &[(1, 2), (2, 3)]);
        let spans = assign_spans(&b, &p, &RewardWeights::default());
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].start, spans[0].end), (0, p.len()));
        assert_eq!(spans[0].coefficient, b.breakdown(&RewardWeights::default()).composite);
    }

    #[test]
    fn syntax_error_line_span() {
        // tokens: x = NL | return x NL | EOS  -> line 1 covers [0, 3)
        let (b, p) = bundle_for("x =\nreturn x", &[(1, 1), (2, 2)]);
        let spans = assign_spans(&b, &p, &RewardWeights::default());
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[1], RewardSpan { start: 0, end: 3, coefficient: -1.0 });
    }

    #[test]
    fn runtime_errors_on_two_lines() {
        let src = "if n > 0\n    return 1 / 0\nend\nreturn y";
        let (b, p) = bundle_for(src, &[(1, 0), (-1, 0), (2, 0)]);
        assert_eq!(b.outcome, OutcomeKind::RuntimeError);
        let spans = assign_spans(&b, &p, &RewardWeights::default());
        assert_eq!(spans.len(), 3);
        for s in &spans[1..] {
            assert_eq!(s.coefficient, -0.6);
            let lines = &p.token_lines()[s.start..s.end];
            assert!(lines.iter().all(|&l| l == lines[0]));
            assert_eq!(p.token_lines().iter().filter(|&&l| l == lines[0]).count(), s.end - s.start);
        }
        let covered: Vec<u32> = spans[1..].iter().map(|s| p.token_lines()[s.start]).collect();
        assert_eq!(covered, vec![2, 4]);
    }

    #[test]
    fn channels_sum_to_assigned_spans() {
        let mut long = BTreeMap::new();
        long.insert(ErrorType::DivisionByZero, 0.25);
        let vocab = Vocab::new();
        let source = SourceProgram::new("if n > 0\n    return 1 / 0\nend\nreturn n");
        let program = tokenize(&source, &vocab).unwrap();
        let b = FeedbackBundle::collect(&source, &cases(&[(1, 1), (0, 0)]), &FeedbackConfig::default(), &long);
        assert_eq!(b.negative, -0.25);
        let w = RewardWeights { alpha: 0.3, beta: 0.1, gamma: 0.2, delta: 0.4 };
        let total = span_weights(&assign_spans(&b, &program, &w), program.len());
        let mut by_channel = vec![0.0; program.len()];
        for ch in channel_spans(&b, &program, &w).channels() {
            for (acc, x) in by_channel.iter_mut().zip(span_weights(ch, program.len())) {
                *acc += x;
            }
        }
        for (a, b) in total.iter().zip(&by_channel) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
