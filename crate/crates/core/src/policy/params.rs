use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDims {
    /// Output vocabulary size; the input table has one extra start row.
    pub vocab_size: usize,
    pub hidden: usize,
    /// Number of hash buckets for description words.
    pub desc_buckets: usize,
}

/// Named slices of the flat parameter vector, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slice {
    DescEmbedding,
    TokenEmbedding,
    Recurrent,
    RecurrentBias,
    OutputProjection,
    OutputBias,
}

impl Slice {
    pub const ALL: [Slice; 6] = [
        Slice::DescEmbedding,
        Slice::TokenEmbedding,
        Slice::Recurrent,
        Slice::RecurrentBias,
        Slice::OutputProjection,
        Slice::OutputBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Slice::DescEmbedding => "desc_embedding",
            Slice::TokenEmbedding => "token_embedding",
            Slice::Recurrent => "recurrent",
            Slice::RecurrentBias => "recurrent_bias",
            Slice::OutputProjection => "output_projection",
            Slice::OutputBias => "output_bias",
        }
    }
}

impl PolicyDims {
    pub fn slice_len(&self, s: Slice) -> usize {
        let (v, h, b) = (self.vocab_size, self.hidden, self.desc_buckets);
        match s {
            Slice::DescEmbedding => b * h,
            Slice::TokenEmbedding => (v + 1) * h,
            Slice::Recurrent => h * h,
            Slice::RecurrentBias => h,
            Slice::OutputProjection => v * h,
            Slice::OutputBias => v,
        }
    }

    pub fn range(&self, s: Slice) -> Range<usize> {
        let start: usize = Slice::ALL.iter().take_while(|&&o| o != s).map(|&o| self.slice_len(o)).sum();
        start..start + self.slice_len(s)
    }

    pub fn param_count(&self) -> usize {
        Slice::ALL.iter().map(|&s| self.slice_len(s)).sum()
    }

    pub fn is_valid(&self) -> bool {
        self.vocab_size > 0 && self.hidden > 0 && self.desc_buckets > 0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("parameter vector has {got} values, dims require {want}")]
    ShapeMismatch { want: usize, got: usize },
    #[error("parameter {index} is not finite")]
    NonFinite { index: usize },
}

/// The policy's parameters as one flat vector plus its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    dims: PolicyDims,
    values: Vec<f64>,
}

const EMBED_STD: f64 = 0.3;
const RECURRENT_GAIN: f64 = 0.5;

impl PolicyParams {
    /// Random embeddings and recurrent weights; zero output projection, so
    /// the first-step distribution is uniform.
    pub fn init(dims: PolicyDims, seed: u64) -> Self {
        assert!(dims.is_valid(), "policy dims must be positive: {dims:?}");
        let mut rng = seed::rng(seed, &[seed::STREAM_INIT]);
        let mut values = vec![0.0; dims.param_count()];
        let embed = Normal::new(0.0, EMBED_STD).expect("valid std");
        let recur = Normal::new(0.0, RECURRENT_GAIN / (dims.hidden as f64).sqrt()).expect("valid std");
        for s in [Slice::DescEmbedding, Slice::TokenEmbedding] {
            for v in &mut values[dims.range(s)] {
                *v = embed.sample(&mut rng);
            }
        }
        for v in &mut values[dims.range(Slice::Recurrent)] {
            *v = recur.sample(&mut rng);
        }
        Self { dims, values }
    }

    pub fn from_values(dims: PolicyDims, values: Vec<f64>) -> Result<Self, ParamsError> {
        if values.len() != dims.param_count() {
            return Err(ParamsError::ShapeMismatch { want: dims.param_count(), got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ParamsError::NonFinite { index });
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> PolicyDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, s: Slice) -> &[f64] {
        &self.values[self.dims.range(s)]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Returns `self - rate * gradient`, leaving `self` untouched.
    pub fn apply_update(&self, gradient: &[f64], rate: f64) -> Result<Self, ParamsError> {
        if gradient.len() != self.values.len() {
            return Err(ParamsError::ShapeMismatch { want: self.values.len(), got: gradient.len() });
        }
        let values = self.values.iter().zip(gradient).map(|(p, g)| p - rate * g).collect();
        Ok(Self { dims: self.dims, values })
    }

    /// Adds gaussian noise of the given scale to every slot. Test helper for
    /// moving away from the zero-output initialization.
    pub fn perturbed(&self, std: f64, rng: &mut impl Rng) -> Self {
        let noise = Normal::new(0.0, std).expect("valid std");
        let values = self.values.iter().map(|v| v + noise.sample(rng)).collect();
        Self { dims: self.dims, values }
    }
}
