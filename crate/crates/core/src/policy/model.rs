//! Forward pass, sampling and backpropagation through time for the
//! recurrent token policy.
//!
//! ```text
//! h_init = mean_j DescEmbedding[bucket_j]
//! a_t    = Recurrent · h_{t-1} + TokenEmbedding[x_t] + RecurrentBias
//! h_t    = tanh(a_t)
//! z_t    = OutputProjection · h_t + OutputBias
//! p(w_t | D, w_<t) = softmax(z_t)[w_t]
//! ```
//!
//! `x_0` is the start row of the token table, `x_t = w_{t-1}` afterwards.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::params::{PolicyParams, Slice};
use crate::minilang::{TokenId, Vocab};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("token id {token} at position {position} is outside the vocabulary of {vocab_size}")]
    UnknownToken { token: TokenId, position: usize, vocab_size: usize },
    #[error("token sequence is empty")]
    EmptySequence,
}

/// Bag of hashed description words; its mean embedding seeds the state.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Conditioning {
    pub buckets: Vec<usize>,
}

impl Conditioning {
    /// Lower-cases `text`, splits it on non-alphanumerics and hashes each word
    /// into one of `buckets` slots.
    pub fn from_text(text: &str, buckets: usize) -> Self {
        let mut c = Self::default();
        c.extend_text(text, buckets);
        c
    }

    pub fn extend_text(&mut self, text: &str, buckets: usize) {
        for word in text.split(|c: char| !c.is_alphanumeric() && c != '_').filter(|w| !w.is_empty()) {
            self.buckets.push(word_bucket(&word.to_lowercase(), buckets));
        }
    }
}

fn word_bucket(word: &str, buckets: usize) -> usize {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in word.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (h % buckets as u64) as usize
}

/// A sampled or scored token sequence with its log-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub task_id: String,
    pub tokens: Vec<TokenId>,
    pub per_token_logprob: Vec<f64>,
    pub total_logprob: f64,
}

impl Rollout {
    fn new(tokens: Vec<TokenId>, per_token_logprob: Vec<f64>) -> Self {
        let total_logprob = per_token_logprob.iter().sum();
        Self { task_id: String::new(), tokens, per_token_logprob, total_logprob }
    }

    pub fn with_task(mut self, task_id: impl Into<String>) -> Self {
        self.task_id = task_id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A token interval `[start, end)` weighted by a reward coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSpan {
    pub start: usize,
    pub end: usize,
    pub coefficient: f64,
}

impl RewardSpan {
    pub fn is_valid_for(&self, len: usize) -> bool {
        self.start < self.end && self.end <= len
    }
}

/// Per-token weights: overlapping spans add.
pub fn span_weights(spans: &[RewardSpan], len: usize) -> Vec<f64> {
    let mut w = vec![0.0; len];
    for s in spans {
        debug_assert!(s.is_valid_for(len), "span {s:?} invalid for length {len}");
        for x in &mut w[s.start..s.end.min(len)] {
            *x += s.coefficient;
        }
    }
    w
}

struct View<'a> {
    v: usize,
    h: usize,
    desc: &'a [f64],
    embed: &'a [f64],
    recur: &'a [f64],
    recur_bias: &'a [f64],
    out: &'a [f64],
    out_bias: &'a [f64],
}

impl<'a> View<'a> {
    fn new(p: &'a PolicyParams) -> Self {
        let d = p.dims();
        Self {
            v: d.vocab_size,
            h: d.hidden,
            desc: p.slice(Slice::DescEmbedding),
            embed: p.slice(Slice::TokenEmbedding),
            recur: p.slice(Slice::Recurrent),
            recur_bias: p.slice(Slice::RecurrentBias),
            out: p.slice(Slice::OutputProjection),
            out_bias: p.slice(Slice::OutputBias),
        }
    }

    fn initial_state(&self, cond: &Conditioning) -> Vec<f64> {
        let mut h0 = vec![0.0; self.h];
        if cond.buckets.is_empty() {
            return h0;
        }
        for &b in &cond.buckets {
            let row = &self.desc[b * self.h..(b + 1) * self.h];
            for (acc, x) in h0.iter_mut().zip(row) {
                *acc += x;
            }
        }
        let inv = 1.0 / cond.buckets.len() as f64;
        h0.iter_mut().for_each(|x| *x *= inv);
        h0
    }

    fn step(&self, prev: &[f64], input: usize, next: &mut [f64]) {
        let h = self.h;
        let emb = &self.embed[input * h..(input + 1) * h];
        for i in 0..h {
            let row = &self.recur[i * h..(i + 1) * h];
            let a: f64 = row.iter().zip(prev).map(|(w, x)| w * x).sum::<f64>() + emb[i] + self.recur_bias[i];
            next[i] = a.tanh();
        }
    }

    fn logits(&self, state: &[f64], z: &mut [f64]) {
        let h = self.h;
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &self.out[k * h..(k + 1) * h];
            *zk = row.iter().zip(state).map(|(w, x)| w * x).sum::<f64>() + self.out_bias[k];
        }
    }

    fn start_row(&self) -> usize {
        self.v
    }
}

/// In-place log-softmax; returns nothing, `z` becomes log-probabilities.
fn log_softmax(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    z.iter_mut().for_each(|x| *x -= lse);
}

fn check_tokens(tokens: &[TokenId], v: usize) -> Result<(), PolicyError> {
    if tokens.is_empty() {
        return Err(PolicyError::EmptySequence);
    }
    match tokens.iter().position(|&t| t >= v) {
        Some(position) => Err(PolicyError::UnknownToken { token: tokens[position], position, vocab_size: v }),
        None => Ok(()),
    }
}

/// Full next-token log-distribution at every step of `tokens` (including
/// the step that predicts the first token).
pub fn step_distributions(
    params: &PolicyParams,
    cond: &Conditioning,
    tokens: &[TokenId],
) -> Result<Vec<Vec<f64>>, PolicyError> {
    let m = View::new(params);
    check_tokens(tokens, m.v)?;
    let mut state = m.initial_state(cond);
    let mut next = vec![0.0; m.h];
    let mut out = Vec::with_capacity(tokens.len());
    for t in 0..tokens.len() {
        let input = if t == 0 { m.start_row() } else { tokens[t - 1] };
        m.step(&state, input, &mut next);
        std::mem::swap(&mut state, &mut next);
        let mut z = vec![0.0; m.v];
        m.logits(&state, &mut z);
        log_softmax(&mut z);
        out.push(z);
    }
    Ok(out)
}

/// Exact per-token log-probabilities of `tokens`.
pub fn logprob(params: &PolicyParams, cond: &Conditioning, tokens: &[TokenId]) -> Result<Rollout, PolicyError> {
    let dists = step_distributions(params, cond, tokens)?;
    let lp = dists.iter().zip(tokens).map(|(d, &w)| d[w]).collect();
    Ok(Rollout::new(tokens.to_vec(), lp))
}

/// Autoregressive sampling at `temperature`. At most `max_len` tokens are
/// drawn; if none of them is `EOS`, an `EOS` is appended. Log-probabilities
/// are always those of the untempered policy.
pub fn sample(params: &PolicyParams, cond: &Conditioning, max_len: usize, temperature: f64, rng_seed: u64) -> Rollout {
    assert!(max_len > 0 && temperature > 0.0);
    let mut rng = seed::rng(rng_seed, &[]);
    decode(params, cond, max_len, |logp| {
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logp.iter().map(|l| ((l - max) / temperature).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (k, w) in weights.iter().enumerate() {
            if u < *w {
                return k;
            }
            u -= w;
        }
        // rounding fallthrough: last token with nonzero weight
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    })
}

/// Argmax decoding; ties go to the lowest token id.
pub fn greedy(params: &PolicyParams, cond: &Conditioning, max_len: usize) -> Rollout {
    decode(params, cond, max_len, |logp| {
        let mut best = 0;
        for (k, &l) in logp.iter().enumerate() {
            if l > logp[best] {
                best = k;
            }
        }
        best
    })
}

fn decode(
    params: &PolicyParams,
    cond: &Conditioning,
    max_len: usize,
    mut choose: impl FnMut(&[f64]) -> TokenId,
) -> Rollout {
    let m = View::new(params);
    let mut state = m.initial_state(cond);
    let mut next = vec![0.0; m.h];
    let mut z = vec![0.0; m.v];
    let mut tokens = Vec::new();
    let mut lps = Vec::new();
    let mut input = m.start_row();
    loop {
        m.step(&state, input, &mut next);
        std::mem::swap(&mut state, &mut next);
        m.logits(&state, &mut z);
        log_softmax(&mut z);
        let w = if tokens.len() == max_len { Vocab::EOS } else { choose(&z) };
        tokens.push(w);
        lps.push(z[w]);
        if w == Vocab::EOS {
            return Rollout::new(tokens, lps);
        }
        input = w;
    }
}

/// Weighted negative log-likelihood `-Σ_t weight_t · log p(w_t | …)` and its
/// exact gradient, accumulated into `grad`. Returns the loss and the
/// per-token log-probabilities.
pub fn weighted_nll_into(
    params: &PolicyParams,
    cond: &Conditioning,
    tokens: &[TokenId],
    weights: &[f64],
    grad: &mut [f64],
) -> Result<(f64, Vec<f64>), PolicyError> {
    assert_eq!(tokens.len(), weights.len());
    assert_eq!(grad.len(), params.len());
    let m = View::new(params);
    check_tokens(tokens, m.v)?;
    let (v, h) = (m.v, m.h);
    let n = tokens.len();

    // states[0] is h_init, states[t + 1] is h_t
    let mut states = Vec::with_capacity(n + 1);
    states.push(m.initial_state(cond));
    let mut probs = Vec::with_capacity(n);
    let mut logps = Vec::with_capacity(n);
    let mut loss = 0.0;
    for t in 0..n {
        let input = if t == 0 { m.start_row() } else { tokens[t - 1] };
        let mut next = vec![0.0; h];
        m.step(&states[t], input, &mut next);
        let mut z = vec![0.0; v];
        m.logits(&next, &mut z);
        log_softmax(&mut z);
        let lp = z[tokens[t]];
        logps.push(lp);
        loss -= weights[t] * lp;
        probs.push(z);
        states.push(next);
    }

    let dims = params.dims();
    let r_desc = dims.range(Slice::DescEmbedding);
    let r_embed = dims.range(Slice::TokenEmbedding);
    let r_recur = dims.range(Slice::Recurrent);
    let r_rbias = dims.range(Slice::RecurrentBias);
    let r_out = dims.range(Slice::OutputProjection);
    let r_obias = dims.range(Slice::OutputBias);

    let mut dh_next = vec![0.0; h];
    let mut dh = vec![0.0; h];
    let mut dz = vec![0.0; v];
    let mut da = vec![0.0; h];
    for t in (0..n).rev() {
        let state = &states[t + 1];
        let prev = &states[t];
        dh.copy_from_slice(&dh_next);
        let wt = weights[t];
        if wt != 0.0 {
            for (k, dzk) in dz.iter_mut().enumerate() {
                *dzk = wt * probs[t][k].exp();
            }
            dz[tokens[t]] -= wt;
            for (k, &dzk) in dz.iter().enumerate() {
                grad[r_obias.start + k] += dzk;
                let row = &m.out[k * h..(k + 1) * h];
                let grow = &mut grad[r_out.start + k * h..r_out.start + (k + 1) * h];
                for i in 0..h {
                    grow[i] += dzk * state[i];
                    dh[i] += row[i] * dzk;
                }
            }
        }
        for i in 0..h {
            da[i] = dh[i] * (1.0 - state[i] * state[i]);
        }
        let input = if t == 0 { m.start_row() } else { tokens[t - 1] };
        for i in 0..h {
            grad[r_rbias.start + i] += da[i];
            grad[r_embed.start + input * h + i] += da[i];
            let grow = &mut grad[r_recur.start + i * h..r_recur.start + (i + 1) * h];
            for j in 0..h {
                grow[j] += da[i] * prev[j];
            }
        }
        dh_next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &d) in da.iter().enumerate() {
            let row = &m.recur[i * h..(i + 1) * h];
            for j in 0..h {
                dh_next[j] += row[j] * d;
            }
        }
    }
    if !cond.buckets.is_empty() {
        let inv = 1.0 / cond.buckets.len() as f64;
        for &b in &cond.buckets {
            let g = &mut grad[r_desc.start + b * h..r_desc.start + (b + 1) * h];
            for i in 0..h {
                g[i] += dh_next[i] * inv;
            }
        }
    }
    Ok((loss, logps))
}

pub fn weighted_nll(
    params: &PolicyParams,
    cond: &Conditioning,
    tokens: &[TokenId],
    weights: &[f64],
) -> Result<(f64, Vec<f64>), PolicyError> {
    let mut grad = vec![0.0; params.len()];
    let (loss, _) = weighted_nll_into(params, cond, tokens, weights, &mut grad)?;
    Ok((loss, grad))
}

/// Supervised cross-entropy on a reference sequence.
pub fn sl_loss(
    params: &PolicyParams,
    cond: &Conditioning,
    reference: &[TokenId],
) -> Result<(f64, Vec<f64>), PolicyError> {
    weighted_nll(params, cond, reference, &vec![1.0; reference.len()])
}

/// Span-weighted policy-gradient loss on a rollout.
pub fn rl_loss(
    params: &PolicyParams,
    cond: &Conditioning,
    tokens: &[TokenId],
    spans: &[RewardSpan],
) -> Result<(f64, Vec<f64>), PolicyError> {
    weighted_nll(params, cond, tokens, &span_weights(spans, tokens.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::params::PolicyDims;

    fn dims() -> PolicyDims {
        PolicyDims { vocab_size: 6, hidden: 4, desc_buckets: 5 }
    }

    fn cond() -> Conditioning {
        Conditioning::from_text("add one to the input", dims().desc_buckets)
    }

    #[test]
    fn fresh_policy_is_uniform() {
        let p = PolicyParams::init(dims(), 0);
        let v = dims().vocab_size as f64;
        let r = logprob(&p, &cond(), &[3, 2, 0]).unwrap();
        for lp in &r.per_token_logprob {
            assert!((lp + v.ln()).abs() < 1e-12);
        }
        let only_eos = logprob(&p, &Conditioning::default(), &[0]).unwrap();
        assert!((only_eos.total_logprob + v.ln()).abs() < 1e-12);
        let (l, _) = sl_loss(&p, &cond(), &[1, 4, 2, 0]).unwrap();
        assert!((l - 4.0 * v.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_vocabulary() {
        let p = PolicyParams::init(dims(), 0);
        assert!(matches!(logprob(&p, &cond(), &[1, 6]), Err(PolicyError::UnknownToken { token: 6, position: 1, .. })));
    }

    #[test]
    fn zero_weights_give_zero_loss_and_gradient() {
        let mut rng = seed::rng(9, &[]);
        let p = PolicyParams::init(dims(), 1).perturbed(0.5, &mut rng);
        let spans = [RewardSpan { start: 0, end: 3, coefficient: 0.0 }];
        let (l, g) = rl_loss(&p, &cond(), &[1, 2, 0], &spans).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sampling_is_reproducible_and_terminates() {
        let mut rng = seed::rng(2, &[]);
        let p = PolicyParams::init(dims(), 1).perturbed(0.5, &mut rng);
        let a = sample(&p, &cond(), 8, 1.0, 77);
        assert_eq!(a, sample(&p, &cond(), 8, 1.0, 77));
        assert_eq!(*a.tokens.last().unwrap(), Vocab::EOS);
        assert!(a.len() <= 9);
        let scored = logprob(&p, &cond(), &a.tokens).unwrap();
        for (x, y) in scored.per_token_logprob.iter().zip(&a.per_token_logprob) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cold_temperature_is_greedy() {
        let mut rng = seed::rng(5, &[]);
        let p = PolicyParams::init(dims(), 4).perturbed(1.0, &mut rng);
        let g = greedy(&p, &cond(), 10);
        for s in 0..20 {
            assert_eq!(sample(&p, &cond(), 10, 1e-9, s).tokens, g.tokens);
        }
    }

    #[test]
    fn overlapping_spans_add() {
        let w = span_weights(
            &[RewardSpan { start: 0, end: 4, coefficient: 1.0 }, RewardSpan { start: 1, end: 3, coefficient: -0.5 }],
            4,
        );
        assert_eq!(w, vec![1.0, 0.5, 0.5, 1.0]);
    }
}
