use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batch::{InnerLossReport, RlItem, SlTarget, SupportBatch};
use super::config::TrainerConfig;
use super::meta::{accumulate, adapt, l2_norm, meta_step, Adapted};
use super::passk::pass_at_k;
use super::{sample_tasks, Conditioner, TrainError};
use crate::memory::{LongTermMemory, MemoryEntry, ShortTermMemory};
use crate::minilang::{tokenize, ErrorType, OutcomeKind, Program, Vocab};
use crate::policy::{sample, Conditioning, PolicyDims, PolicyParams};
use crate::rewards::{error_counts, FeedbackBundle, RewardBreakdown, RewardWeights};
use crate::seed;
use crate::task::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    /// Inner loss at the adapted parameters.
    pub losses: InnerLossReport,
    pub sl_targets: usize,
    pub rl_items: usize,
    pub eval_passes: usize,
    pub eval_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub task_ids: Vec<String>,
    /// Meta-loss components: the per-task inner losses summed.
    pub losses: InnerLossReport,
    pub tasks: Vec<TaskRecord>,
    /// Fraction of fresh rollouts that passed every test.
    pub rollout_pass_rate: f64,
    /// Mean over the batch of pass@1 from the adapted parameters.
    pub pass_at_1: f64,
    /// As `pass_at_1`, present when at least five assessment samples are drawn.
    pub pass_at_5: Option<f64>,
    /// Channel means over the fresh rollouts.
    pub rewards: RewardBreakdown,
    pub errors: BTreeMap<ErrorType, u64>,
    pub meta_grad_norm: f64,
    pub theta_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    Plateau,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<IterationRecord>,
    pub stop: Option<StopReason>,
}

#[derive(Debug)]
pub struct TrainResult {
    pub params: PolicyParams,
    pub history: TrainHistory,
    pub lmb: LongTermMemory,
    pub smb: ShortTermMemory,
}

/// Tracks the windowed mean pass rate. Converged once the best windowed
/// mean is positive and has not risen by more than `epsilon` for `patience`
/// iterations.
#[derive(Debug, Clone)]
struct Plateau {
    window: usize,
    epsilon: f64,
    patience: usize,
    rates: Vec<f64>,
    best: Option<f64>,
    last_improvement: usize,
}

impl Plateau {
    fn new(window: usize, epsilon: f64, patience: usize) -> Self {
        Self { window, epsilon, patience, rates: Vec::new(), best: None, last_improvement: 0 }
    }

    fn observe(&mut self, rate: f64) -> bool {
        self.rates.push(rate);
        let t = self.rates.len();
        if t < self.window {
            return false;
        }
        let mean = self.rates[t - self.window..].iter().sum::<f64>() / self.window as f64;
        if self.best.is_none_or(|b| mean > b + self.epsilon) {
            self.best = Some(mean);
            self.last_improvement = t;
        }
        self.best.is_some_and(|b| b > 0.0) && t - self.last_improvement >= self.patience
    }
}

#[derive(Debug, Clone)]
struct Scored {
    program: Program,
    bundle: FeedbackBundle,
}

struct Prepared {
    reference: Program,
    reference_bundle: FeedbackBundle,
    reference_score: f64,
}

struct SlotOutcome {
    adapted: Adapted<InnerLossReport>,
    sl_targets: usize,
    rl_items: usize,
    assessed: Vec<Scored>,
}

/// One inner adaptation on a fixed support batch.
pub fn inner_adapt(
    params: &PolicyParams,
    batch: &SupportBatch,
    config: &TrainerConfig,
) -> Result<(PolicyParams, InnerLossReport), TrainError> {
    let a = adapt(params.values(), batch, config.inner_rate, config.inner_steps, config.clip_norm)?;
    Ok((PolicyParams::from_values(params.dims(), a.theta)?, a.report))
}

/// `θ - β · clip(Σ gradients)`.
pub fn meta_update(
    params: &PolicyParams,
    gradients: &[Vec<f64>],
    config: &TrainerConfig,
) -> Result<PolicyParams, TrainError> {
    let mut total = vec![0.0; params.len()];
    for g in gradients {
        accumulate(&mut total, g);
    }
    let next = meta_step(params.values(), &total, config.meta_rate, config.clip_norm);
    Ok(PolicyParams::from_values(params.dims(), next)?)
}

/// Full training state; [`train`] drives it to completion.
pub struct Trainer<'c> {
    corpus: &'c [Task],
    prepared: Vec<Prepared>,
    config: TrainerConfig,
    vocab: Vocab,
    params: PolicyParams,
    lmb: LongTermMemory,
    smb: ShortTermMemory,
    history: TrainHistory,
    plateau: Plateau,
}

impl<'c> Trainer<'c> {
    pub fn new(corpus: &'c [Task], config: TrainerConfig) -> Result<Self, TrainError> {
        config.validate().map_err(TrainError::InvalidConfig)?;
        if corpus.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        if config.task_batch_size > corpus.len() {
            return Err(TrainError::BatchTooLarge { requested: config.task_batch_size, available: corpus.len() });
        }
        let vocab = Vocab::new();
        let prepared = corpus
            .iter()
            .map(|task| {
                let reference = tokenize(&task.reference_solution, &vocab)
                    .map_err(|source| TrainError::Reference { task_id: task.id.clone(), source })?;
                let reference_bundle =
                    FeedbackBundle::collect(&task.reference_solution, &task.tests, &config.feedback, &BTreeMap::new());
                let reference_score = reference_bundle.breakdown(&config.weights).composite;
                Ok(Prepared { reference, reference_bundle, reference_score })
            })
            .collect::<Result<Vec<_>, TrainError>>()?;
        let dims = PolicyDims { vocab_size: vocab.len(), hidden: config.hidden, desc_buckets: config.desc_buckets };
        Ok(Self {
            corpus,
            prepared,
            params: PolicyParams::init(dims, config.seed),
            lmb: LongTermMemory::new(config.embed_dim, config.error_window),
            smb: ShortTermMemory::new(config.smb_capacity),
            history: TrainHistory::default(),
            plateau: Plateau::new(config.plateau_window, config.plateau_epsilon, config.plateau_patience),
            vocab,
            config,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn lmb(&self) -> &LongTermMemory {
        &self.lmb
    }

    pub fn smb(&self) -> &ShortTermMemory {
        &self.smb
    }

    /// Conditioning as used by this run: with retrieval when long-term
    /// memory is enabled.
    pub fn conditioner(&self) -> Conditioner<'_> {
        conditioner_for(&self.config, &self.lmb)
    }

    fn p_error(&self) -> BTreeMap<ErrorType, f64> {
        if self.config.memory.use_lmb {
            self.lmb.error_proportions()
        } else {
            BTreeMap::new()
        }
    }

    fn score(
        &self,
        params: &PolicyParams,
        task: &Task,
        cond: &Conditioning,
        temperature: f64,
        rng_seed: u64,
        p_error: &BTreeMap<ErrorType, f64>,
    ) -> Scored {
        let r = sample(params, cond, self.config.max_len, temperature, rng_seed);
        self.score_tokens(task, &r.tokens, p_error)
    }

    fn score_tokens(&self, task: &Task, tokens: &[usize], p_error: &BTreeMap<ErrorType, f64>) -> Scored {
        let program = Program::from_tokens(tokens, &self.vocab);
        let bundle = FeedbackBundle::collect(program.source(), &task.tests, &self.config.feedback, p_error);
        Scored { program, bundle }
    }

    fn record(&mut self, task: &Task, s: &Scored, iteration: u64, to_smb: bool) {
        let entry = MemoryEntry::new(task, s.program.clone(), s.bundle.clone(), &self.config.weights, iteration);
        if to_smb && self.config.memory.use_smb {
            self.smb.push(entry.clone());
        }
        if self.config.memory.use_lmb {
            self.lmb.insert(entry);
        }
    }

    /// Stores every reference solution, plus `demos_per_task` samples from
    /// the current policy, in the enabled buffers.
    pub fn populate_buffers(&mut self) {
        let cfg = &self.config;
        if !cfg.memory.use_lmb && !cfg.memory.use_smb {
            return;
        }
        let plain = Conditioner::plain(cfg.desc_buckets);
        let mut scored = Vec::new();
        for (ti, task) in self.corpus.iter().enumerate() {
            let p = &self.prepared[ti];
            scored.push((ti, Scored { program: p.reference.clone(), bundle: p.reference_bundle.clone() }));
            let cond = plain.condition(&task.description);
            for j in 0..cfg.demos_per_task {
                let s = seed::derive(cfg.seed, &[seed::STREAM_DEMOS, ti as u64, j as u64]);
                scored.push((ti, self.score(&self.params, task, &cond, cfg.temperature, s, &BTreeMap::new())));
            }
        }
        for (ti, s) in scored {
            self.record(&self.corpus[ti], &s, 0, true);
        }
    }

    fn build_batch(
        &self,
        iteration: u64,
        slot: usize,
        ti: usize,
        cond: &Conditioning,
        fresh: &[Scored],
    ) -> SupportBatch {
        let cfg = &self.config;
        let task = &self.corpus[ti];
        let prepared = &self.prepared[ti];
        let mut sl = vec![SlTarget { cond: cond.clone(), tokens: prepared.reference.tokens().to_vec() }];
        if cfg.memory.use_lmb && cfg.minibatch_size > 0 {
            let threshold = cfg.sl_score_ratio * prepared.reference_score;
            let mut seen = BTreeSet::new();
            seen.insert(prepared.reference.tokens().to_vec());
            let pool: Vec<&MemoryEntry> = self
                .lmb
                .entries_for_task(&task.id)
                .filter(|e| e.eval_score >= threshold && seen.insert(e.program.tokens().to_vec()))
                .collect();
            let mut rng = seed::rng(cfg.seed, &[seed::STREAM_MINIBATCH, iteration, slot as u64, 0]);
            for i in pick(&mut rng, pool.len(), cfg.minibatch_size) {
                sl.push(SlTarget { cond: cond.clone(), tokens: pool[i].program.tokens().to_vec() });
            }
        }
        let mut rl: Vec<RlItem> =
            fresh.iter().map(|s| RlItem::new(cond.clone(), &s.program, &s.bundle, &cfg.weights)).collect();
        if cfg.baseline {
            subtract_mean(&mut rl, fresh.iter().map(|s| &s.bundle), &cfg.weights);
        }
        if cfg.memory.use_smb && cfg.minibatch_size > 0 {
            let pool = self.smb.recent(self.smb.capacity());
            let conditioner = self.conditioner();
            let mut rng = seed::rng(cfg.seed, &[seed::STREAM_MINIBATCH, iteration, slot as u64, 1]);
            let picked: Vec<&MemoryEntry> =
                pick(&mut rng, pool.len(), cfg.minibatch_size).into_iter().map(|i| pool[i]).collect();
            let mut replay: Vec<RlItem> = picked
                .iter()
                .map(|e| RlItem::new(conditioner.condition(&e.description), &e.program, &e.bundle, &cfg.weights))
                .collect();
            if cfg.baseline {
                subtract_mean(&mut replay, picked.iter().map(|e| &e.bundle), &cfg.weights);
            }
            rl.extend(replay);
        }
        for item in rl.iter_mut() {
            let f = if cfg.length_normalize { cfg.rl_weight / item.tokens.len() as f64 } else { cfg.rl_weight };
            item.scale(f);
        }
        SupportBatch { dims: self.params.dims(), sl, rl }
    }

    /// One meta-iteration: sample tasks, generate and score rollouts,
    /// adapt per task, assess, and apply the meta-update.
    pub fn step(&mut self) -> Result<&IterationRecord, TrainError> {
        let t = self.history.records.len() as u64;
        let cfg = self.config.clone();
        let slots =
            sample_tasks(self.corpus.len(), cfg.task_batch_size, &mut seed::rng(cfg.seed, &[seed::STREAM_TASKS, t]));
        let p_error = self.p_error();
        let conds: Vec<Conditioning> = {
            let c = self.conditioner();
            slots.iter().map(|&ti| c.condition(&self.corpus[ti].description)).collect()
        };

        let fresh: Vec<Vec<Scored>> = slots
            .par_iter()
            .enumerate()
            .map(|(i, &ti)| {
                (0..cfg.samples_per_task)
                    .map(|j| {
                        let s = seed::derive(cfg.seed, &[seed::STREAM_ROLLOUTS, t, i as u64, j as u64]);
                        self.score(&self.params, &self.corpus[ti], &conds[i], cfg.temperature, s, &p_error)
                    })
                    .collect()
            })
            .collect();
        for (i, &ti) in slots.iter().enumerate() {
            for s in &fresh[i] {
                self.record(&self.corpus[ti], s, t + 1, true);
            }
        }

        let outcomes: Vec<SlotOutcome> = slots
            .par_iter()
            .enumerate()
            .map(|(i, &ti)| {
                let task = &self.corpus[ti];
                let at_task =
                    |e: TrainError| TrainError::AtTask { iteration: t, task_id: task.id.clone(), source: Box::new(e) };
                let batch = self.build_batch(t, i, ti, &conds[i], &fresh[i]);
                let adapted = adapt(self.params.values(), &batch, cfg.inner_rate, cfg.inner_steps, cfg.clip_norm)
                    .map_err(at_task)?;
                let adapted_params = PolicyParams::from_values(self.params.dims(), adapted.theta.clone())
                    .map_err(|e| at_task(e.into()))?;
                let assessed = (0..cfg.eval_samples)
                    .map(|j| {
                        let s = seed::derive(cfg.seed, &[seed::STREAM_ASSESS, t, i as u64, j as u64]);
                        self.score(&adapted_params, task, &conds[i], cfg.eval_temperature, s, &p_error)
                    })
                    .collect();
                Ok(SlotOutcome { adapted, sl_targets: batch.sl.len(), rl_items: batch.rl.len(), assessed })
            })
            .collect::<Result<_, TrainError>>()?;

        for (i, &ti) in slots.iter().enumerate() {
            for s in &outcomes[i].assessed {
                self.record(&self.corpus[ti], s, t + 1, false);
            }
        }
        let mut total = vec![0.0; self.params.len()];
        for o in &outcomes {
            accumulate(&mut total, &o.adapted.meta_gradient);
        }
        let meta_grad_norm = l2_norm(&total);
        self.params = PolicyParams::from_values(
            self.params.dims(),
            meta_step(self.params.values(), &total, cfg.meta_rate, cfg.clip_norm),
        )?;

        let record = self.summarize(t, &slots, &fresh, &outcomes, meta_grad_norm);
        self.history.records.push(record);
        Ok(self.history.records.last().expect("just pushed"))
    }

    fn summarize(
        &self,
        t: u64,
        slots: &[usize],
        fresh: &[Vec<Scored>],
        outcomes: &[SlotOutcome],
        meta_grad_norm: f64,
    ) -> IterationRecord {
        let cfg = &self.config;
        let tasks: Vec<TaskRecord> = slots
            .iter()
            .zip(outcomes)
            .map(|(&ti, o)| TaskRecord {
                task_id: self.corpus[ti].id.clone(),
                losses: o.adapted.report,
                sl_targets: o.sl_targets,
                rl_items: o.rl_items,
                eval_passes: o.assessed.iter().filter(|s| s.bundle.outcome == OutcomeKind::Pass).count(),
                eval_samples: o.assessed.len(),
            })
            .collect();
        let losses = tasks.iter().fold(InnerLossReport::default(), |acc, r| acc.add(&r.losses));
        let all: Vec<&Scored> = fresh.iter().flatten().collect();
        let n = all.len() as f64;
        let mut mean = [0.0; 6];
        let mut errors = BTreeMap::new();
        for s in &all {
            let b = s.bundle.breakdown(&cfg.weights);
            for (m, v) in mean.iter_mut().zip([b.coarse, b.adaptive, b.style, b.complexity, b.negative, b.composite]) {
                *m += v / n;
            }
            for (k, c) in error_counts(&s.bundle.errors) {
                *errors.entry(k).or_insert(0) += c;
            }
        }
        let batch_mean = |k: usize| {
            tasks.iter().map(|r| pass_at_k(r.eval_samples, r.eval_passes, k)).sum::<f64>() / tasks.len() as f64
        };
        IterationRecord {
            iteration: t,
            task_ids: tasks.iter().map(|r| r.task_id.clone()).collect(),
            losses,
            rollout_pass_rate: all.iter().filter(|s| s.bundle.outcome == OutcomeKind::Pass).count() as f64 / n,
            pass_at_1: if cfg.eval_samples >= 1 { batch_mean(1) } else { 0.0 },
            pass_at_5: (cfg.eval_samples >= 5).then(|| batch_mean(5)),
            rewards: RewardBreakdown {
                coarse: mean[0],
                adaptive: mean[1],
                style: mean[2],
                complexity: mean[3],
                negative: mean[4],
                composite: mean[5],
            },
            errors,
            meta_grad_norm,
            theta_norm: l2_norm(self.params.values()),
            tasks,
        }
    }

    /// Runs until `max_iterations` or a pass-rate plateau.
    pub fn run(&mut self) -> Result<(), TrainError> {
        self.run_with(|_, _| {})
    }

    /// Like [`Trainer::run`], calling `on_step` with each iteration's record
    /// and the updated parameters.
    pub fn run_with(&mut self, mut on_step: impl FnMut(&IterationRecord, &PolicyParams)) -> Result<(), TrainError> {
        while self.history.records.len() < self.config.max_iterations {
            let use_eval = self.config.eval_samples > 0;
            self.step()?;
            let r = self.history.records.last().expect("step pushes a record");
            on_step(r, &self.params);
            let rate = if use_eval { r.pass_at_1 } else { r.rollout_pass_rate };
            if self.plateau.observe(rate) {
                self.history.stop = Some(StopReason::Plateau);
                return Ok(());
            }
        }
        self.history.stop = Some(StopReason::MaxIterations);
        Ok(())
    }

    pub fn into_result(self) -> TrainResult {
        TrainResult { params: self.params, history: self.history, lmb: self.lmb, smb: self.smb }
    }
}

pub(crate) fn conditioner_for<'a>(config: &TrainerConfig, lmb: &'a LongTermMemory) -> Conditioner<'a> {
    Conditioner {
        buckets: config.desc_buckets,
        lmb: config.memory.use_lmb.then_some(lmb),
        top_k: config.top_k,
        words: config.context_words,
    }
}

/// Up to `amount` distinct indices below `len`, ascending.
fn pick(rng: &mut impl rand::Rng, len: usize, amount: usize) -> Vec<usize> {
    let mut v = index::sample(rng, len, amount.min(len)).into_vec();
    v.sort_unstable();
    v
}

/// Populates the buffers and trains to completion.
pub fn train(corpus: &[Task], config: TrainerConfig) -> Result<TrainResult, TrainError> {
    let mut trainer = Trainer::new(corpus, config)?;
    trainer.populate_buffers();
    trainer.run()?;
    Ok(trainer.into_result())
}

/// Centres each channel's full-span coefficient on its mean over `bundles`.
fn subtract_mean<'a>(items: &mut [RlItem], bundles: impl Iterator<Item = &'a FeedbackBundle>, weights: &RewardWeights) {
    let mut mean = [0.0; 5];
    let mut n = 0.0;
    for b in bundles {
        for (m, c) in mean.iter_mut().zip(RlItem::full_coefficients(b, weights)) {
            *m += c;
        }
        n += 1.0;
    }
    if n > 0.0 {
        mean.iter_mut().for_each(|m| *m /= n);
        items.iter_mut().for_each(|item| item.shift(&mean));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_waits_for_positive_rate() {
        let mut p = Plateau::new(3, 0.001, 3);
        for _ in 0..50 {
            assert!(!p.observe(0.0));
        }
        let mut p = Plateau::new(3, 0.001, 3);
        let mut stopped = None;
        for (t, r) in [0.0, 0.2, 0.4, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5].iter().enumerate() {
            if p.observe(*r) {
                stopped = Some(t);
                break;
            }
        }
        // windowed means: .2 .367 .467 .5 .5 .5 .5 .5 -> last rise at t=5
        assert_eq!(stopped, Some(8));
    }
}
