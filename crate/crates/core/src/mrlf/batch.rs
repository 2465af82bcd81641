use serde::{Deserialize, Serialize};

use super::meta::Objective;
use super::TrainError;
use crate::minilang::{Program, TokenId};
use crate::policy::{span_weights, weighted_nll_into, Conditioning, PolicyDims, PolicyParams};
use crate::rewards::{channel_spans, FeedbackBundle, RewardWeights};

/// The six inner-loss components and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InnerLossReport {
    pub l_sl: f64,
    pub l_coarse: f64,
    pub l_error: f64,
    pub l_complexity: f64,
    pub l_style: f64,
    pub l_negative: f64,
    pub l_inner: f64,
}

impl InnerLossReport {
    pub const COMPONENTS: [&'static str; 6] = ["sl", "coarse", "error", "complexity", "style", "negative"];

    pub fn from_components(c: [f64; 6]) -> Self {
        Self {
            l_sl: c[0],
            l_coarse: c[1],
            l_error: c[2],
            l_complexity: c[3],
            l_style: c[4],
            l_negative: c[5],
            l_inner: c.iter().sum(),
        }
    }

    pub fn components(&self) -> [f64; 6] {
        [self.l_sl, self.l_coarse, self.l_error, self.l_complexity, self.l_style, self.l_negative]
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b) = (self.components(), other.components());
        Self::from_components(std::array::from_fn(|i| a[i] + b[i]))
    }
}

/// A supervised target sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SlTarget {
    pub cond: Conditioning,
    pub tokens: Vec<TokenId>,
}

/// A scored program with per-token weights for each reward channel, in the
/// order coarse, error, complexity, style, negative.
#[derive(Debug, Clone, PartialEq)]
pub struct RlItem {
    pub cond: Conditioning,
    pub tokens: Vec<TokenId>,
    pub channels: [Vec<f64>; 5],
}

impl RlItem {
    pub fn new(cond: Conditioning, program: &Program, bundle: &FeedbackBundle, weights: &RewardWeights) -> Self {
        let spans = channel_spans(bundle, program, weights);
        let n = program.len();
        Self {
            cond,
            tokens: program.tokens().to_vec(),
            channels: [
                span_weights(&spans.coarse, n),
                span_weights(&spans.error, n),
                span_weights(&spans.complexity, n),
                span_weights(&spans.style, n),
                span_weights(&spans.negative, n),
            ],
        }
    }

    /// Full-span coefficient of each channel, in channel order.
    pub fn full_coefficients(bundle: &FeedbackBundle, weights: &RewardWeights) -> [f64; 5] {
        let p = bundle.parts();
        [
            weights.delta * p.coarse,
            weights.alpha * p.adaptive,
            weights.gamma * p.complexity,
            weights.beta * p.style,
            weights.delta * p.negative,
        ]
    }

    /// Subtracts `offsets[k]` from every token of channel `k`.
    pub fn shift(&mut self, offsets: &[f64; 5]) {
        for (c, o) in self.channels.iter_mut().zip(offsets) {
            c.iter_mut().for_each(|w| *w -= o);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.channels.iter_mut().flatten().for_each(|w| *w *= factor);
    }

    fn combined(&self) -> Vec<f64> {
        (0..self.tokens.len()).map(|t| self.channels.iter().map(|c| c[t]).sum()).collect()
    }
}

/// Everything one task's inner loss is computed over. Held fixed for all
/// inner steps and for the meta-gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBatch {
    pub dims: PolicyDims,
    pub sl: Vec<SlTarget>,
    pub rl: Vec<RlItem>,
}

impl SupportBatch {
    pub fn loss_and_grad(&self, params: &PolicyParams) -> Result<(InnerLossReport, Vec<f64>), TrainError> {
        let mut grad = vec![0.0; params.len()];
        let mut c = [0.0; 6];
        for s in &self.sl {
            let (loss, _) = weighted_nll_into(params, &s.cond, &s.tokens, &vec![1.0; s.tokens.len()], &mut grad)?;
            c[0] += loss;
        }
        for item in &self.rl {
            let (_, logps) = weighted_nll_into(params, &item.cond, &item.tokens, &item.combined(), &mut grad)?;
            for (k, w) in item.channels.iter().enumerate() {
                c[k + 1] -= w.iter().zip(&logps).map(|(w, l)| w * l).sum::<f64>();
            }
        }
        let report = InnerLossReport::from_components(c);
        if !report.l_inner.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::NonFiniteGradient { component: self.offending_component(params)? });
        }
        Ok((report, grad))
    }

    /// First component whose loss or gradient is non-finite on its own.
    fn offending_component(&self, params: &PolicyParams) -> Result<&'static str, TrainError> {
        let finite = |loss: f64, g: &[f64]| loss.is_finite() && g.iter().all(|x| x.is_finite());
        let mut g = vec![0.0; params.len()];
        let mut loss = 0.0;
        for s in &self.sl {
            loss += weighted_nll_into(params, &s.cond, &s.tokens, &vec![1.0; s.tokens.len()], &mut g)?.0;
        }
        if !finite(loss, &g) {
            return Ok(InnerLossReport::COMPONENTS[0]);
        }
        for k in 0..5 {
            g.iter_mut().for_each(|x| *x = 0.0);
            let mut loss = 0.0;
            for item in &self.rl {
                loss += weighted_nll_into(params, &item.cond, &item.tokens, &item.channels[k], &mut g)?.0;
            }
            if !finite(loss, &g) {
                return Ok(InnerLossReport::COMPONENTS[k + 1]);
            }
        }
        Ok("combined")
    }
}

impl Objective for SupportBatch {
    type Report = InnerLossReport;

    fn loss_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>, InnerLossReport), TrainError> {
        let params = PolicyParams::from_values(self.dims, theta.to_vec())?;
        let (report, grad) = self.loss_and_grad(&params)?;
        Ok((report.l_inner, grad, report))
    }
}
