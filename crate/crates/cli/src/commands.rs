use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use coderl_core::harness::{
    emit_report, eval_settings, load_checkpoint, load_corpus, render_table, run_ablation, save_checkpoint, sig4,
    starter_corpus, summary_table, to_json_line, RunConfig,
};
use coderl_core::memory::LongTermMemory;
use coderl_core::minilang::{OutcomeKind, Program, Vocab};
use coderl_core::mrlf::{evaluate as evaluate_policy, Conditioner, Trainer};
use coderl_core::policy::gradcheck::{run_suite, RELATIVE_FLOOR};
use coderl_core::policy::{greedy, sample, PolicyDims, PolicyParams};
use coderl_core::rewards::FeedbackBundle;
use coderl_core::seed;
use coderl_core::task::{Task, Tier};

use crate::error::CliError;

const GRAD_TOLERANCE: f64 = 1e-4;

fn corpus(config: &RunConfig) -> Result<Vec<Task>, CliError> {
    Ok(match &config.corpus {
        Some(p) => load_corpus(p)?,
        None => starter_corpus(),
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_output_dir(config: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&config.output_dir).map_err(|e| CliError::io(&config.output_dir, e))
}

fn save(path: &Path, params: &PolicyParams, seed: u64) -> Result<(), CliError> {
    save_checkpoint(path, params, seed).map_err(|e| CliError::checkpoint(path, e))
}

/// `policy.ckpt` at iteration 40 becomes `policy-000040.ckpt`.
fn intermediate_path(path: &Path, iteration: u64) -> PathBuf {
    let stem = path.file_stem().map_or("policy".into(), |s| s.to_string_lossy());
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{iteration:06}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{iteration:06}"),
    };
    path.with_file_name(name)
}

pub fn train(config: &RunConfig) -> Result<(), CliError> {
    let tasks = corpus(config)?;
    create_output_dir(config)?;
    write(&config.output_dir.join("config.toml"), config.to_toml())?;
    let checkpoint = config.resolve(&config.persistence.checkpoint);
    let every = config.persistence.checkpoint_every;
    let seed = config.trainer.seed;

    let mut trainer = Trainer::new(&tasks, config.trainer.clone())?;
    trainer.populate_buffers();
    let mut failure = None;
    trainer.run_with(|record, params| {
        let done = record.iteration + 1;
        if every > 0 && done % every as u64 == 0 && failure.is_none() {
            failure = save(&intermediate_path(&checkpoint, done), params, seed).err();
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let result = trainer.into_result();

    save(&checkpoint, &result.params, seed)?;
    let lmb_path = config.resolve(&config.persistence.lmb);
    result.lmb.persist(&lmb_path).map_err(|e| CliError::memory(&lmb_path, e))?;
    let metrics = config.resolve(&config.persistence.metrics);
    if result.history.records.is_empty() {
        write(&metrics, "")?;
        println!("no iterations run; saved the initial policy to {}", checkpoint.display());
    } else {
        emit_report(&result.history, &metrics).map_err(|e| CliError::io(&metrics, e))?;
        print!("{}", summary_table(&result.history));
    }
    Ok(())
}

fn load_params(config: &RunConfig, checkpoint: Option<PathBuf>) -> Result<PolicyParams, CliError> {
    let path = checkpoint.unwrap_or_else(|| config.resolve(&config.persistence.checkpoint));
    Ok(load_checkpoint(&path).map_err(|e| CliError::checkpoint(&path, e))?.params)
}

fn load_lmb(path: &Path) -> Result<LongTermMemory, CliError> {
    LongTermMemory::load(path).map_err(|e| CliError::memory(path, e))
}

/// The run's long-term memory when retrieval is in use.
fn retrieval_memory(config: &RunConfig, no_memory: bool) -> Result<Option<LongTermMemory>, CliError> {
    if no_memory || !config.trainer.memory.use_lmb {
        return Ok(None);
    }
    load_lmb(&config.resolve(&config.persistence.lmb)).map(Some)
}

fn conditioner<'a>(config: &RunConfig, params: &PolicyParams, lmb: Option<&'a LongTermMemory>) -> Conditioner<'a> {
    Conditioner {
        buckets: params.dims().desc_buckets,
        lmb,
        top_k: config.trainer.top_k,
        words: config.trainer.context_words,
    }
}

pub fn evaluate(config: &RunConfig, checkpoint: Option<PathBuf>, no_memory: bool) -> Result<(), CliError> {
    let tasks = corpus(config)?;
    let params = load_params(config, checkpoint)?;
    let lmb = retrieval_memory(config, no_memory)?;
    let settings = eval_settings(&config.trainer, &config.eval, config.trainer.seed);
    let report = evaluate_policy(&params, &tasks, &settings, &conditioner(config, &params, lmb.as_ref()))?;

    let tiers: Vec<Option<Tier>> = Tier::ALL.iter().copied().map(Some).chain([None]).collect();
    let rows: Vec<Vec<String>> = tiers
        .iter()
        .filter(|t| t.is_none_or(|tier| report.tasks.iter().any(|x| x.tier == tier)))
        .map(|&t| {
            let mut row = vec![t.map_or("all", Tier::as_str).to_string()];
            row.extend(config.eval.k_list.iter().map(|&k| sig4(report.mean(k, t))));
            row
        })
        .collect();
    let headers: Vec<String> = config.eval.k_list.iter().map(|k| format!("pass@{k}")).collect();
    let header: Vec<&str> = ["tier"].into_iter().chain(headers.iter().map(String::as_str)).collect();
    print!("{}", render_table(&header, &rows));

    create_output_dir(config)?;
    write(&config.output_dir.join("evaluation.json"), to_json_line(&report) + "\n")
}

pub fn generate(
    config: &RunConfig,
    task_id: &str,
    checkpoint: Option<PathBuf>,
    samples: usize,
    temperature: Option<f64>,
    no_memory: bool,
) -> Result<(), CliError> {
    let tasks = corpus(config)?;
    let (ti, task) =
        tasks.iter().enumerate().find(|(_, t)| t.id == task_id).ok_or_else(|| CliError::UnknownTask(task_id.into()))?;
    let params = load_params(config, checkpoint)?;
    let lmb = retrieval_memory(config, no_memory)?;
    let cond = conditioner(config, &params, lmb.as_ref()).condition(&task.description);
    let temperature = temperature.unwrap_or(config.trainer.eval_temperature);
    let vocab = Vocab::new();
    let p_error = lmb.as_ref().map(LongTermMemory::error_proportions).unwrap_or_default();
    let max_len = config.trainer.max_len;

    println!("task {} ({}): {}", task.id, task.tier.as_str(), task.description);
    for j in 0..samples {
        let rollout = if temperature == 0.0 {
            greedy(&params, &cond, max_len)
        } else {
            let s = seed::derive(config.trainer.seed, &[seed::STREAM_EVAL, ti as u64, j as u64]);
            sample(&params, &cond, max_len, temperature, s)
        };
        let program = Program::from_tokens(&rollout.tokens, &vocab);
        let bundle = FeedbackBundle::collect(program.source(), &task.tests, &config.trainer.feedback, &p_error);
        let b = bundle.breakdown(&config.trainer.weights);
        println!(
            "\n# sample {j}: {} ({}/{} tests), composite {}",
            bundle.outcome.as_str(),
            bundle.report.n_pass,
            task.tests.len(),
            sig4(b.composite)
        );
        println!("{}", program.source().text());
    }
    Ok(())
}

pub fn grad_check(
    config: &RunConfig,
    instances: usize,
    hidden: usize,
    buckets: usize,
    max_len: usize,
) -> Result<(), CliError> {
    let dims = PolicyDims { vocab_size: Vocab::new().len(), hidden, desc_buckets: buckets };
    let s = run_suite(dims, instances, config.trainer.seed, max_len.max(1));
    println!("instances {}  fd floor {RELATIVE_FLOOR:.0e}", s.instances);
    println!("sl max relative error {:.3e}  elementwise {:.3e}", s.sl_max_relative_error, s.sl_max_elementwise_error);
    println!("rl max relative error {:.3e}  elementwise {:.3e}", s.rl_max_relative_error, s.rl_max_elementwise_error);
    let worst = s.sl_max_relative_error.max(s.rl_max_relative_error);
    if worst < GRAD_TOLERANCE {
        Ok(())
    } else {
        Err(CliError::GradientMismatch { worst, tolerance: GRAD_TOLERANCE })
    }
}

pub fn inspect_memory(
    config: &RunConfig,
    lmb: Option<PathBuf>,
    query: Option<String>,
    k: Option<usize>,
) -> Result<(), CliError> {
    let path = lmb.unwrap_or_else(|| config.resolve(&config.persistence.lmb));
    let memory = load_lmb(&path)?;
    println!("entries {}  dim {}", memory.len(), memory.dim());

    let mut outcomes: BTreeMap<&str, usize> = OutcomeKind::ALL.iter().map(|o| (o.as_str(), 0)).collect();
    let mut tasks: BTreeMap<&str, usize> = BTreeMap::new();
    for e in memory.entries() {
        *outcomes.entry(e.bundle.outcome.as_str()).or_default() += 1;
        *tasks.entry(&e.task_id).or_default() += 1;
    }
    let rows: Vec<Vec<String>> = outcomes.iter().map(|(o, n)| vec![o.to_string(), n.to_string()]).collect();
    print!("{}", render_table(&["outcome", "entries"], &rows));
    println!("tasks with entries {}", tasks.len());
    let rows: Vec<Vec<String>> =
        memory.error_proportions().iter().map(|(t, p)| vec![t.as_str().to_string(), sig4(*p)]).collect();
    print!("{}", render_table(&["error", "proportion"], &rows));

    if let Some(q) = query {
        let block = memory.context_for(&q, k.unwrap_or(config.trainer.top_k));
        let rows: Vec<Vec<String>> = block
            .items
            .iter()
            .map(|it| {
                vec![
                    it.id.to_string(),
                    sig4(it.similarity),
                    it.task_id.clone(),
                    it.outcome.as_str().to_string(),
                    sig4(it.eval_score),
                ]
            })
            .collect();
        println!("neighbours of {q:?}");
        print!("{}", render_table(&["id", "similarity", "task", "outcome", "score"], &rows));
    }
    Ok(())
}

pub fn ablate(config: &RunConfig, seeds: &[u64]) -> Result<(), CliError> {
    let tasks = corpus(config)?;
    let report = run_ablation(&tasks, &config.trainer, &config.eval, seeds)?;
    create_output_dir(config)?;
    write(&config.output_dir.join("ablation.jsonl"), report.to_jsonl())?;
    let table = report.table();
    write(&config.output_dir.join("ablation.txt"), &table)?;
    print!("{table}");
    println!("ordering holds: {}", report.ordering_holds());
    Ok(())
}
