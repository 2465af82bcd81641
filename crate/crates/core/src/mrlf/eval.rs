use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::passk::pass_at_k;
use super::{Conditioner, TrainError};
use crate::minilang::{run_tests, Program, Vocab};
use crate::policy::{sample, PolicyParams};
use crate::seed;
use crate::task::{Task, Tier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub n_samples: usize,
    pub k_list: Vec<usize>,
    pub temperature: f64,
    pub max_len: usize,
    pub step_budget: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub task_id: String,
    pub tier: Tier,
    pub n: usize,
    pub c: usize,
    pub pass_at_k: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k_list: Vec<usize>,
    pub tasks: Vec<TaskEval>,
}

impl EvalReport {
    /// Mean pass@k over all tasks, or over one tier. NaN when no task
    /// matches.
    pub fn mean(&self, k: usize, tier: Option<Tier>) -> f64 {
        let vals: Vec<f64> = self
            .tasks
            .iter()
            .filter(|t| tier.is_none_or(|x| t.tier == x))
            .filter_map(|t| t.pass_at_k.get(&k).copied())
            .collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }
}

/// Samples `n_samples` programs per task and reports pass@k for each `k`.
pub fn evaluate(
    params: &PolicyParams,
    corpus: &[Task],
    settings: &EvalSettings,
    conditioner: &Conditioner<'_>,
) -> Result<EvalReport, TrainError> {
    if let Some(&k) = settings.k_list.iter().find(|&&k| k > settings.n_samples) {
        return Err(TrainError::TooFewSamples { n: settings.n_samples, k });
    }
    let vocab = Vocab::new();
    let tasks = corpus
        .par_iter()
        .enumerate()
        .map(|(ti, task)| {
            let cond = conditioner.condition(&task.description);
            let c = (0..settings.n_samples)
                .filter(|&j| {
                    let seed = seed::derive(settings.seed, &[seed::STREAM_EVAL, ti as u64, j as u64]);
                    let r = sample(params, &cond, settings.max_len, settings.temperature, seed);
                    let program = Program::from_tokens(&r.tokens, &vocab);
                    run_tests(program.source(), &task.tests, settings.step_budget).all_pass()
                })
                .count();
            TaskEval {
                task_id: task.id.clone(),
                tier: task.tier,
                n: settings.n_samples,
                c,
                pass_at_k: settings.k_list.iter().map(|&k| (k, pass_at_k(settings.n_samples, c, k))).collect(),
            }
        })
        .collect();
    Ok(EvalReport { k_list: settings.k_list.clone(), tasks })
}
