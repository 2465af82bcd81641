//! The ten acceptance criteria, one PASS/FAIL line each.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use coderl_core::harness::{emit_report, evaluate_result, run_ablation, starter_corpus, tier_tasks, EvalConfig};
use coderl_core::memory::{embed_with_dim, LongTermMemory, MemoryEntry};
use coderl_core::minilang::{tokenize, ErrorType, OutcomeKind, Program, SourceProgram, TestCase, Vocab};
use coderl_core::mrlf::{
    evaluate, first_order_meta_gradient, pass_at_k, sample_tasks, train, MemoryAblation, Objective, TrainError,
    Trainer, TrainerConfig,
};
use coderl_core::policy::{
    rl_loss, sample, sl_loss, span_weights, weighted_nll, Conditioning, PolicyDims, PolicyParams, RewardSpan,
};
use coderl_core::rewards::{
    adaptive_reward, assign_spans, coarse_reward, negative_reward, FeedbackBundle, FeedbackConfig, RewardWeights,
};
use coderl_core::seed;
use coderl_core::task::Tier;
use rand::Rng;

const REWARD_TOL: f64 = 1e-12;
const REWARD_BUDGET: Duration = Duration::from_secs(1);
const FD_EPS: f64 = 1e-5;
const FD_FLOOR: f64 = 1e-8;
const GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const IDENTITY_TOL: f64 = 1e-10;
const RETRIEVAL_BUDGET: Duration = Duration::from_secs(10);
const DEGENERACY_TOL: f64 = 1e-10;
const META_TOL: f64 = 1e-3;
const LEARNING_GAIN: f64 = 0.15;
const LEARNING_BUDGET: Duration = Duration::from_secs(15 * 60);
const PASSK_TOL: f64 = 1e-12;

type Outcome = (bool, String);
type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("reward formulas", reward_formulas),
        ("gradient correctness", gradient_correctness),
        ("loss reduction identity", loss_reduction_identity),
        ("retrieval oracle", retrieval_oracle),
        ("meta-learning degeneracy", meta_degeneracy),
        ("first-order meta-gradient", first_order_meta),
        ("end-to-end learning signal", learning_signal),
        ("memory ablation ordering", ablation_ordering),
        ("determinism", determinism),
        ("pass@k estimator", passk_estimator),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check();
        failed += usize::from(!ok);
        println!(
            "{} criterion {:>2} {name}: {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn reward_formulas() -> Outcome {
    let start = Instant::now();
    let coarse: Vec<f64> = OutcomeKind::ALL.iter().map(|&k| coarse_reward(k)).collect();
    let coarse_ok = coarse == [1.0, -0.3, -0.6, -1.0];

    let mut adaptive_err: f64 = 0.0;
    for total in 1..=50usize {
        for n_pass in 0..=total {
            let direct = -0.3 + 1.3 * (n_pass as f64 / total as f64);
            adaptive_err = adaptive_err.max((adaptive_reward(n_pass, total - n_pass).unwrap() - direct).abs());
        }
    }

    let mut rng = seed::rng(1, &[]);
    let mut negative_err: f64 = 0.0;
    for _ in 0..1000 {
        let mut short = BTreeMap::new();
        let mut long = BTreeMap::new();
        for t in ErrorType::ALL {
            if rng.random_bool(0.6) {
                short.insert(t, rng.random_range(0..12u64));
            }
            if rng.random_bool(0.6) {
                long.insert(t, rng.random::<f64>());
            }
        }
        let mut brute = 0.0;
        for t in ErrorType::ALL {
            let n = short.get(&t).copied().unwrap_or(0) as f64;
            let p = long.get(&t).copied().unwrap_or(0.0);
            brute -= n * p;
        }
        negative_err = negative_err.max((negative_reward(&short, &long) - brute).abs());
    }
    let elapsed = start.elapsed();
    let ok = coarse_ok && adaptive_err <= REWARD_TOL && negative_err <= REWARD_TOL && elapsed < REWARD_BUDGET;
    (ok, format!("coarse exact {coarse_ok}, adaptive max err {adaptive_err:.1e}, negative max err {negative_err:.1e}"))
}

struct Instance {
    params: PolicyParams,
    cond: Conditioning,
    tokens: Vec<usize>,
    spans: Vec<RewardSpan>,
}

fn instance(dims: PolicyDims, i: u64) -> Instance {
    let mut rng = seed::rng(2024, &[i]);
    let params = PolicyParams::init(dims, i).perturbed(0.5, &mut rng);
    let cond = Conditioning::from_text(
        ["sum the digits", "double it", "count evens up to n"][i as usize % 3],
        dims.desc_buckets,
    );
    let len = rng.random_range(1..=12);
    let mut tokens: Vec<usize> = (0..len - 1).map(|_| rng.random_range(1..dims.vocab_size)).collect();
    tokens.push(0);
    let spans = (0..rng.random_range(1..4))
        .map(|_| {
            let start = rng.random_range(0..len);
            RewardSpan { start, end: rng.random_range(start + 1..=len), coefficient: rng.random_range(-1.5..1.5) }
        })
        .collect();
    Instance { params, cond, tokens, spans }
}

fn central_differences(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_EPS;
            let up = f(&probe);
            probe[i] = x[i] - FD_EPS;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * FD_EPS)
        })
        .collect()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(FD_FLOOR)).fold(0.0, f64::max)
}

fn norm_rel(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    diff / norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied())).max(FD_FLOOR)
}

/// Per instance, the whole gradient is compared in norm; the elementwise
/// worst case is reported alongside.
fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let dims = PolicyDims { vocab_size: Vocab::new().len(), hidden: 6, desc_buckets: 5 };
    let mut worst = [0.0f64; 4];
    for i in 0..50 {
        let inst = instance(dims, i);
        let at = |v: &[f64]| PolicyParams::from_values(dims, v.to_vec()).unwrap();
        let x = inst.params.values();
        let (_, g) = sl_loss(&inst.params, &inst.cond, &inst.tokens).unwrap();
        let fd = central_differences(|v| sl_loss(&at(v), &inst.cond, &inst.tokens).unwrap().0, x);
        worst[0] = worst[0].max(norm_rel(&g, &fd));
        worst[2] = worst[2].max(max_rel(&g, &fd));
        let (_, g) = rl_loss(&inst.params, &inst.cond, &inst.tokens, &inst.spans).unwrap();
        let fd = central_differences(|v| rl_loss(&at(v), &inst.cond, &inst.tokens, &inst.spans).unwrap().0, x);
        worst[1] = worst[1].max(norm_rel(&g, &fd));
        worst[3] = worst[3].max(max_rel(&g, &fd));
    }
    let elapsed = start.elapsed();
    let ok = worst[0] < GRAD_TOL && worst[1] < GRAD_TOL && elapsed < GRAD_BUDGET;
    (
        ok,
        format!(
            "50 instances, max relative error sl {:.2e} rl {:.2e} (elementwise sl {:.2e} rl {:.2e})",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn loss_reduction_identity() -> Outcome {
    let dims = PolicyDims { vocab_size: Vocab::new().len(), hidden: 16, desc_buckets: 8 };
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let inst = instance(dims, 1000 + i);
        let unit = [RewardSpan { start: 0, end: inst.tokens.len(), coefficient: 1.0 }];
        let (a, ga) = rl_loss(&inst.params, &inst.cond, &inst.tokens, &unit).unwrap();
        let (b, gb) = sl_loss(&inst.params, &inst.cond, &inst.tokens).unwrap();
        worst = worst.max((a - b).abs());
        worst = ga.iter().zip(&gb).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    (worst <= IDENTITY_TOL, format!("100 instances, max loss/gradient difference {worst:.1e}"))
}

fn retrieval_oracle() -> Outcome {
    let start = Instant::now();
    const WORDS: [&str; 12] =
        ["sum", "digits", "double", "count", "even", "prime", "square", "input", "steps", "max", "of", "the"];
    let mut rng = seed::rng(4, &[]);
    let text = |rng: &mut rand_chacha::ChaCha8Rng| {
        (0..rng.random_range(1..5)).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
    };
    let task = coderl_core::task::Task {
        id: "t".into(),
        tier: Tier::Intro,
        description: String::new(),
        reference_solution: SourceProgram::new("return n"),
        tests: vec![TestCase { input: 1, expected: 1 }],
    };
    let vocab = Vocab::new();
    let program = tokenize(&task.reference_solution, &vocab).unwrap();
    let bundle =
        FeedbackBundle::collect(&task.reference_solution, &task.tests, &FeedbackConfig::default(), &BTreeMap::new());
    let dim = 64;
    let mut lmb = LongTermMemory::new(dim, None);
    let mut vectors = Vec::new();
    for i in 0..1000 {
        // Short descriptions repeat often, so equal scores are common.
        let t = coderl_core::task::Task { description: text(&mut rng), ..task.clone() };
        vectors.push(embed_with_dim(&t.description, &bundle.summary(), dim).components);
        lmb.insert(MemoryEntry::new(&t, program.clone(), bundle.clone(), &RewardWeights::default(), i));
    }
    let mut mismatches = 0;
    for _ in 0..100 {
        let q = embed_with_dim(&text(&mut rng), "", dim).components;
        let k = rng.random_range(1..40);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut all: Vec<(usize, f64)> = vectors
            .iter()
            .enumerate()
            .map(|(id, v)| {
                let dot: f64 = q.iter().zip(v).map(|(a, b)| a * b).sum();
                let d = norm(&q) * norm(v);
                (id, if d == 0.0 { 0.0 } else { dot / d })
            })
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(k);
        let got = lmb.query_topk(&coderl_core::memory::EmbeddingVector { components: q }, k);
        mismatches += usize::from(got != all);
    }
    let elapsed = start.elapsed();
    (mismatches == 0 && elapsed < RETRIEVAL_BUDGET, format!("1000 vectors x 100 queries, {mismatches} mismatches"))
}

/// Plain policy gradient plus supervised training on one task per step,
/// written out directly.
fn direct_loop(corpus: &[coderl_core::task::Task], cfg: &TrainerConfig, iterations: usize) -> Vec<PolicyParams> {
    let vocab = Vocab::new();
    let dims = PolicyDims { vocab_size: vocab.len(), hidden: cfg.hidden, desc_buckets: cfg.desc_buckets };
    let mut theta = PolicyParams::init(dims, cfg.seed);
    let mut trajectory = Vec::new();
    for t in 0..iterations as u64 {
        let ti = sample_tasks(corpus.len(), 1, &mut seed::rng(cfg.seed, &[seed::STREAM_TASKS, t]))[0];
        let task = &corpus[ti];
        let cond = Conditioning::from_text(&task.description, cfg.desc_buckets);
        let reference = tokenize(&task.reference_solution, &vocab).unwrap();
        let (_, mut grad) = sl_loss(&theta, &cond, reference.tokens()).unwrap();
        let rollouts: Vec<(Program, FeedbackBundle)> = (0..cfg.samples_per_task as u64)
            .map(|j| {
                let s = seed::derive(cfg.seed, &[seed::STREAM_ROLLOUTS, t, 0, j]);
                let program =
                    Program::from_tokens(&sample(&theta, &cond, cfg.max_len, cfg.temperature, s).tokens, &vocab);
                let bundle = FeedbackBundle::collect(program.source(), &task.tests, &cfg.feedback, &BTreeMap::new());
                (program, bundle)
            })
            .collect();
        let mean_composite =
            rollouts.iter().map(|(_, b)| b.breakdown(&cfg.weights).composite).sum::<f64>() / rollouts.len() as f64;
        for (program, bundle) in &rollouts {
            let n = program.len();
            let scale = cfg.rl_weight / n as f64;
            let weights: Vec<f64> = span_weights(&assign_spans(bundle, program, &cfg.weights), n)
                .iter()
                .map(|w| (w - mean_composite) * scale)
                .collect();
            let (_, g) = weighted_nll(&theta, &cond, program.tokens(), &weights).unwrap();
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        let norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        let s = if cfg.clip_norm > 0.0 && norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
        let next: Vec<f64> = theta.values().iter().zip(&grad).map(|(p, g)| p - cfg.meta_rate * s * g).collect();
        theta = PolicyParams::from_values(dims, next).unwrap();
        trajectory.push(theta.clone());
    }
    trajectory
}

fn meta_degeneracy() -> Outcome {
    let corpus = starter_corpus();
    let cfg = TrainerConfig {
        task_batch_size: 1,
        inner_steps: 0,
        memory: MemoryAblation { use_lmb: false, use_smb: false },
        max_iterations: 20,
        hidden: 24,
        desc_buckets: 16,
        eval_samples: 1,
        ..TrainerConfig::default()
    };
    let mut trainer = Trainer::new(&corpus, cfg.clone()).unwrap();
    trainer.populate_buffers();
    let direct = direct_loop(&corpus, &cfg, 20);
    let mut worst: f64 = 0.0;
    for expected in &direct {
        trainer.step().unwrap();
        let got = trainer.params().values();
        worst = got.iter().zip(expected.values()).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    (worst <= DEGENERACY_TOL, format!("20 iterations, max parameter difference {worst:.1e}"))
}

/// Softmax policy over three actions with linear logits of two features:
/// nine parameters.
struct ToyTask {
    samples: Vec<([f64; 2], usize, f64)>,
}

impl ToyTask {
    fn loss(&self, theta: &[f64]) -> f64 {
        self.samples
            .iter()
            .map(|(x, a, w)| {
                let logits: Vec<f64> =
                    (0..3).map(|k| theta[3 * k] * x[0] + theta[3 * k + 1] * x[1] + theta[3 * k + 2]).collect();
                let lse = logits.iter().map(|l| l.exp()).sum::<f64>().ln();
                -w * (logits[*a] - lse)
            })
            .sum()
    }
}

impl Objective for ToyTask {
    type Report = ();

    fn loss_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>, ()), TrainError> {
        let mut g = vec![0.0; 9];
        for (x, a, w) in &self.samples {
            let logits: Vec<f64> =
                (0..3).map(|k| theta[3 * k] * x[0] + theta[3 * k + 1] * x[1] + theta[3 * k + 2]).collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            for k in 0..3 {
                let d = w * (logits[k].exp() / z - f64::from(u8::from(k == *a)));
                g[3 * k] += d * x[0];
                g[3 * k + 1] += d * x[1];
                g[3 * k + 2] += d;
            }
        }
        Ok((self.loss(theta), g, ()))
    }
}

fn first_order_meta() -> Outcome {
    let mut rng = seed::rng(6, &[]);
    let tasks: Vec<ToyTask> = (0..4)
        .map(|_| ToyTask {
            samples: (0..5)
                .map(|_| {
                    (
                        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                        rng.random_range(0..3),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect(),
        })
        .collect();
    let theta0: Vec<f64> = (0..9).map(|_| rng.random_range(-0.5..0.5)).collect();
    let alpha = 0.3;
    let direction = first_order_meta_gradient(&theta0, &tasks, alpha, 1, 0.0).unwrap();
    // Inner gradients frozen at θ0.
    let frozen: Vec<Vec<f64>> = tasks.iter().map(|t| t.loss_grad(&theta0).unwrap().1).collect();
    let outer = |theta: &[f64]| {
        tasks
            .iter()
            .zip(&frozen)
            .map(|(t, g)| t.loss(&theta.iter().zip(g).map(|(p, d)| p - alpha * d).collect::<Vec<_>>()))
            .sum::<f64>()
    };
    let fd = central_differences(outer, &theta0);
    let err = max_rel(&direction, &fd);
    (err < META_TOL, format!("9-parameter toy policy, 4 tasks, max relative error {err:.2e}"))
}

fn intro_gain(result: &coderl_core::mrlf::TrainResult, cfg: &TrainerConfig) -> (f64, f64) {
    let corpus = starter_corpus();
    let eval = EvalConfig::default();
    let trained = evaluate_result(result, &corpus, cfg, &eval).unwrap().mean(1, Some(Tier::Intro));
    let mut fresh = Trainer::new(&corpus, cfg.clone()).unwrap();
    fresh.populate_buffers();
    let settings = coderl_core::harness::eval_settings(cfg, &eval, cfg.seed);
    let untrained =
        evaluate(fresh.params(), &corpus, &settings, &fresh.conditioner()).unwrap().mean(1, Some(Tier::Intro));
    (untrained, trained)
}

fn learning_signal() -> Outcome {
    let start = Instant::now();
    let corpus = starter_corpus();
    let cfg = TrainerConfig::default();
    let result = train(&corpus, cfg.clone()).unwrap();
    let elapsed = start.elapsed();
    let (untrained, trained) = intro_gain(&result, &cfg);
    let gain = trained - untrained;
    let ok = gain >= LEARNING_GAIN && elapsed < LEARNING_BUDGET && result.history.records.len() <= 500;
    (
        ok,
        format!(
            "intro pass@1 {untrained:.3} -> {trained:.3} (gain {gain:.3}) on {} tasks after {} iterations",
            tier_tasks(&corpus, Tier::Intro).len(),
            result.history.records.len()
        ),
    )
}

fn ablation_ordering() -> Outcome {
    let corpus = starter_corpus();
    let report = run_ablation(&corpus, &TrainerConfig::default(), &EvalConfig::default(), &[0, 1, 2]).unwrap();
    for line in report.table().lines() {
        println!("    {line}");
    }
    let means: Vec<String> = report.rows.iter().map(|r| format!("{} {:.4}", r.label, r.pass_at_1)).collect();
    (report.ordering_holds(), format!("mean pass@1 {}", means.join(", ")))
}

fn determinism() -> Outcome {
    let corpus = starter_corpus();
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let result = train(&corpus, TrainerConfig::default()).unwrap();
            let path = dir.path().join(format!("run{i}.jsonl"));
            emit_report(&result.history, &path).unwrap();
            std::fs::read(&path).unwrap()
        })
        .collect();
    let same = files[0] == files[1];
    (same, format!("two default runs, {} metric bytes each, identical {same}", files[0].len()))
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn passk_estimator() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut triples = 0;
    for n in 1..=10u32 {
        for c in 0..=n {
            for k in 1..=n {
                // Samples 0..c are the correct ones.
                let hits = (0u32..1 << n).filter(|m| m.count_ones() == k && (m & ((1u32 << c) - 1)) != 0).count();
                let exact = hits as f64 / binomial(u64::from(n), u64::from(k));
                worst = worst.max((pass_at_k(n as usize, c as usize, k as usize) - exact).abs());
                triples += 1;
            }
        }
    }
    (worst <= PASSK_TOL, format!("{triples} (n, c, k) triples, max error {worst:.1e}"))
}
