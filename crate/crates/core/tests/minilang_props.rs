use coderl_core::minilang::{
    complexity_score_source, detokenize, execute, parse, run_tests, style_score, ComplexityRubric, ErrorType,
    Execution, OutcomeKind, SourceProgram, StyleRubric, TestCase, Vocab,
};
use proptest::prelude::*;

const VARS: [&str; 5] = ["n", "a", "b", "acc", "step"];
const OPS: [&str; 10] = ["+", "-", "*", "/", "%", "<", ">", "==", "!=", "<="];

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(VARS.to_vec()).prop_map(String::from),
        (0i64..=10).prop_map(|v| v.to_string()),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        (inner.clone(), prop::sample::select(OPS.to_vec()), inner).prop_map(|(l, op, r)| format!("( {l} {op} {r} )"))
    })
}

fn block(depth: u32) -> BoxedStrategy<Vec<String>> {
    let assign = (prop::sample::select(VARS[1..].to_vec()), expr()).prop_map(|(v, e)| vec![format!("{v} = {e}")]);
    let ret = expr().prop_map(|e| vec![format!("return {e}")]);
    let stmt = if depth == 0 {
        prop_oneof![4 => assign, 1 => ret].boxed()
    } else {
        let nested = (expr(), block(depth - 1), prop::option::of(block(depth - 1)), any::<bool>()).prop_map(
            |(cond, body, other, is_while)| {
                let mut lines = vec![format!("{} {cond}", if is_while { "while" } else { "if" })];
                lines.extend(body.iter().map(|l| format!("    {l}")));
                if let (Some(other), false) = (other, is_while) {
                    lines.push("else".into());
                    lines.extend(other.iter().map(|l| format!("    {l}")));
                }
                lines.push("end".into());
                lines
            },
        );
        prop_oneof![4 => assign, 1 => ret, 2 => nested].boxed()
    };
    prop::collection::vec(stmt, 1..5).prop_map(|v| v.concat()).boxed()
}

fn program() -> impl Strategy<Value = SourceProgram> {
    block(2).prop_map(|lines| SourceProgram::new(lines.join("\n")))
}

fn tests_for(inputs: &[i64]) -> Vec<TestCase> {
    inputs.iter().map(|&input| TestCase { input, expected: input }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn any_token_sequence_has_exactly_one_outcome(
        raw in prop::collection::vec(0usize..48, 0..60),
        inputs in prop::collection::vec(-20i64..20, 1..4),
    ) {
        let vocab = Vocab::new();
        let src = detokenize(&raw, &vocab);
        let tests = tests_for(&inputs);
        let report = run_tests(&src, &tests, 2_000);
        prop_assert_eq!(report.per_test.len(), tests.len());
        prop_assert_eq!(report.n_pass + report.n_fail, tests.len());
        for o in &report.per_test {
            prop_assert!(OutcomeKind::ALL.contains(&o.kind));
            prop_assert_eq!(o.kind.is_error(), o.error_type.is_some());
        }
        prop_assert_eq!(&report, &run_tests(&src, &tests, 2_000));
    }

    #[test]
    fn generated_programs_run_deterministically(p in program(), input in -50i64..50) {
        let ast = parse(&p).expect("generator emits well-formed programs");
        prop_assert_eq!(execute(&ast, input, 5_000), execute(&ast, input, 5_000));
    }

    #[test]
    fn finishing_within_budget_is_stable(p in program(), input in -50i64..50, extra in 1u64..5_000) {
        let ast = parse(&p).unwrap();
        let budget = 300;
        let first = execute(&ast, input, budget);
        let ran_out = matches!(first, Execution::Fault(f) if f.error_type == ErrorType::StepLimitExceeded);
        if !ran_out {
            prop_assert_eq!(execute(&ast, input, budget + extra), first);
        }
    }

    #[test]
    fn runtime_faults_name_a_plausible_line(p in program(), input in -50i64..50) {
        let ast = parse(&p).unwrap();
        if let Execution::Fault(f) = execute(&ast, input, 2_000) {
            let line = p.line(f.line).expect("fault line exists");
            match f.error_type {
                ErrorType::DivisionByZero => prop_assert!(line.contains('/') || line.contains('%'), "{line}"),
                ErrorType::UndefinedVariable => {
                    prop_assert!(VARS[1..].iter().any(|v| line.split_whitespace().any(|w| w == *v)), "{line}")
                }
                ErrorType::StepLimitExceeded => {}
                ErrorType::TypeMismatch => prop_assert!(!line.trim().is_empty()),
                ErrorType::InvalidSyntax => prop_assert!(false, "parsed program reported a syntax fault"),
            }
        }
    }

    #[test]
    fn judges_are_pure_and_bounded(raw in prop::collection::vec(0usize..48, 0..60), p in program()) {
        let vocab = Vocab::new();
        for src in [detokenize(&raw, &vocab), p] {
            let s = style_score(&src, &StyleRubric::default());
            let c = complexity_score_source(&src, &ComplexityRubric::default());
            prop_assert!((-1..=2).contains(&s.value));
            prop_assert!((-1..=2).contains(&c.value));
            prop_assert_eq!(&s, &style_score(&src, &StyleRubric::default()));
            prop_assert_eq!(&c, &complexity_score_source(&src, &ComplexityRubric::default()));
        }
    }
}
