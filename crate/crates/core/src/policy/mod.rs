//! Small autoregressive token policy `p(w_t | D, θ, w_<t)` with exact
//! log-probabilities and hand-derived gradients.

pub mod gradcheck;
mod model;
mod params;

pub use model::{
    greedy, logprob, rl_loss, sample, sl_loss, span_weights, step_distributions, weighted_nll, weighted_nll_into,
    Conditioning, PolicyError, RewardSpan, Rollout,
};
pub use params::{ParamsError, PolicyDims, PolicyParams, Slice};

use crate::minilang::Vocab;

pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_DESC_BUCKETS: usize = 64;

/// Default dimensions for the mini-language vocabulary.
pub fn default_dims() -> PolicyDims {
    PolicyDims { vocab_size: Vocab::new().len(), hidden: DEFAULT_HIDDEN, desc_buckets: DEFAULT_DESC_BUCKETS }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_is_desk_sized() {
        assert!(default_dims().param_count() < 100_000);
    }
}
