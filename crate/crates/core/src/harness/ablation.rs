use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::EvalConfig;
use super::metrics::{render_table, sig4, to_json_line};
use crate::mrlf::{
    evaluate, train, Conditioner, EvalReport, EvalSettings, MemoryAblation, TrainError, TrainResult, TrainerConfig,
};
use crate::task::{Task, Tier};

/// Evaluation settings matching a trainer config.
pub fn eval_settings(trainer: &TrainerConfig, eval: &EvalConfig, seed: u64) -> EvalSettings {
    EvalSettings {
        n_samples: eval.n_samples,
        k_list: eval.k_list.clone(),
        temperature: trainer.eval_temperature,
        max_len: trainer.max_len,
        step_budget: trainer.feedback.step_budget,
        seed,
    }
}

/// Evaluates trained parameters with the same conditioning the run used.
pub fn evaluate_result(
    result: &TrainResult,
    corpus: &[Task],
    trainer: &TrainerConfig,
    eval: &EvalConfig,
) -> Result<EvalReport, TrainError> {
    let conditioner = Conditioner {
        buckets: trainer.desc_buckets,
        lmb: trainer.memory.use_lmb.then_some(&result.lmb),
        top_k: trainer.top_k,
        words: trainer.context_words,
    };
    evaluate(&result.params, corpus, &eval_settings(trainer, eval, trainer.seed), &conditioner)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub use_lmb: bool,
    pub use_smb: bool,
    pub seeds: Vec<u64>,
    pub per_seed_pass_at_1: Vec<f64>,
    pub pass_at_1: f64,
    pub pass_at_5: Option<f64>,
    pub tier_pass_at_1: BTreeMap<Tier, f64>,
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, m: MemoryAblation) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.use_lmb == m.use_lmb && r.use_smb == m.use_smb)
    }

    /// Both buffers >= short only >= long only >= neither, on mean pass@1.
    pub fn ordering_holds(&self) -> bool {
        let p = |i: usize| self.row(MemoryAblation::GRID[i]).map_or(f64::NAN, |r| r.pass_at_1);
        p(3) >= p(2) && p(2) >= p(1) && p(1) >= p(0)
    }

    pub fn to_jsonl(&self) -> String {
        self.rows.iter().map(|r| to_json_line(r) + "\n").collect()
    }

    pub fn table(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![r.label.clone(), sig4(r.pass_at_1), r.pass_at_5.map_or("-".into(), sig4)];
                for t in Tier::ALL {
                    v.push(r.tier_pass_at_1.get(&t).map_or("-".into(), |&x| sig4(x)));
                }
                v
            })
            .collect();
        render_table(&["memory", "pass@1", "pass@5", "intro", "inter", "comp"], &rows)
    }
}

/// Trains and evaluates every memory variant for every seed. Rows come out
/// in the order of [`MemoryAblation::GRID`].
pub fn run_ablation(
    corpus: &[Task],
    base: &TrainerConfig,
    eval: &EvalConfig,
    seeds: &[u64],
) -> Result<AblationReport, TrainError> {
    let jobs: Vec<(MemoryAblation, u64)> =
        MemoryAblation::GRID.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let results: Vec<(EvalReport, usize)> = jobs
        .par_iter()
        .map(|&(memory, seed)| {
            let config = TrainerConfig { memory, seed, ..base.clone() };
            let result = train(corpus, config.clone())?;
            Ok((evaluate_result(&result, corpus, &config, eval)?, result.history.records.len()))
        })
        .collect::<Result<_, TrainError>>()?;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let rows = MemoryAblation::GRID
        .iter()
        .enumerate()
        .map(|(g, &m)| {
            let runs = &results[g * seeds.len()..(g + 1) * seeds.len()];
            let per_seed: Vec<f64> = runs.iter().map(|(r, _)| r.mean(1, None)).collect();
            let tier_pass_at_1 = Tier::ALL
                .iter()
                .filter(|&&t| corpus.iter().any(|x| x.tier == t))
                .map(|&t| (t, mean(&runs.iter().map(|(r, _)| r.mean(1, Some(t))).collect::<Vec<_>>())))
                .collect();
            AblationRow {
                label: m.label().to_string(),
                use_lmb: m.use_lmb,
                use_smb: m.use_smb,
                seeds: seeds.to_vec(),
                pass_at_1: mean(&per_seed),
                per_seed_pass_at_1: per_seed,
                pass_at_5: eval
                    .k_list
                    .contains(&5)
                    .then(|| mean(&runs.iter().map(|(r, _)| r.mean(5, None)).collect::<Vec<_>>())),
                tier_pass_at_1,
                iterations: runs.iter().map(|(_, n)| *n).collect(),
            }
        })
        .collect();
    Ok(AblationReport { rows })
}
