//! Central finite-difference checks of the analytic policy gradients.

use rand::Rng;

use super::model::{rl_loss, sl_loss, Conditioning, RewardSpan};
use super::params::{PolicyDims, PolicyParams};
use crate::seed;

pub const FD_EPSILON: f64 = 1e-5;
pub const RELATIVE_FLOOR: f64 = 1e-8;

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + eps;
            let up = f(&probe);
            probe[i] = x[i] - eps;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Largest elementwise `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(0.0, f64::max)
}

/// `‖a - b‖ / max(‖a‖, ‖b‖, floor)` in the Euclidean norm.
pub fn norm_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    diff / norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied())).max(floor)
}

/// One randomized problem: perturbed parameters, a token sequence ending in
/// `EOS`, and a handful of reward spans.
#[derive(Debug, Clone)]
pub struct Instance {
    pub params: PolicyParams,
    pub cond: Conditioning,
    pub tokens: Vec<usize>,
    pub spans: Vec<RewardSpan>,
}

pub fn random_instance(dims: PolicyDims, seed_value: u64, max_len: usize) -> Instance {
    let mut rng = seed::rng(seed_value, &[0x6772_6164]);
    let params = PolicyParams::init(dims, seed_value).perturbed(0.4, &mut rng);
    let n_words = rng.random_range(0..5);
    let cond = Conditioning { buckets: (0..n_words).map(|_| rng.random_range(0..dims.desc_buckets)).collect() };
    let len = rng.random_range(1..=max_len);
    let mut tokens: Vec<usize> = (0..len - 1).map(|_| rng.random_range(1..dims.vocab_size)).collect();
    tokens.push(0);
    let n_spans = rng.random_range(1..4);
    let spans = (0..n_spans)
        .map(|_| {
            let start = rng.random_range(0..len);
            let end = rng.random_range(start + 1..=len);
            RewardSpan { start, end, coefficient: rng.random_range(-1.5..2.0) }
        })
        .collect();
    Instance { params, cond, tokens, spans }
}

/// Worst errors over a suite. The per-instance figure is the
/// norm-relative error of the whole gradient; the elementwise figure is
/// dominated by difference round-off on near-zero components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckSummary {
    pub instances: usize,
    pub sl_max_relative_error: f64,
    pub rl_max_relative_error: f64,
    pub sl_max_elementwise_error: f64,
    pub rl_max_elementwise_error: f64,
}

/// Runs both losses over `instances` random problems and reports the worst
/// relative errors of each.
pub fn run_suite(dims: PolicyDims, instances: usize, seed_value: u64, max_len: usize) -> GradCheckSummary {
    let mut worst = [0.0f64; 4];
    for i in 0..instances {
        let inst = random_instance(dims, seed::derive(seed_value, &[i as u64]), max_len);
        let x = inst.params.values().to_vec();
        let at = |v: &[f64]| PolicyParams::from_values(dims, v.to_vec()).expect("finite probe");

        let (_, g) = sl_loss(&inst.params, &inst.cond, &inst.tokens).expect("valid tokens");
        let fd =
            central_differences(|v| sl_loss(&at(v), &inst.cond, &inst.tokens).expect("valid tokens").0, &x, FD_EPSILON);
        worst[0] = worst[0].max(norm_relative_error(&g, &fd, RELATIVE_FLOOR));
        worst[2] = worst[2].max(max_relative_error(&g, &fd, RELATIVE_FLOOR));

        let (_, g) = rl_loss(&inst.params, &inst.cond, &inst.tokens, &inst.spans).expect("valid tokens");
        let fd = central_differences(
            |v| rl_loss(&at(v), &inst.cond, &inst.tokens, &inst.spans).expect("valid tokens").0,
            &x,
            FD_EPSILON,
        );
        worst[1] = worst[1].max(norm_relative_error(&g, &fd, RELATIVE_FLOOR));
        worst[3] = worst[3].max(max_relative_error(&g, &fd, RELATIVE_FLOOR));
    }
    GradCheckSummary {
        instances,
        sl_max_relative_error: worst[0],
        rl_max_relative_error: worst[1],
        sl_max_elementwise_error: worst[2],
        rl_max_elementwise_error: worst[3],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differences_of_a_quadratic() {
        let g = central_differences(|v| v[0] * v[0] + 3.0 * v[0] * v[1], &[1.0, 2.0], 1e-5);
        assert!((g[0] - 8.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn norm_error_ignores_scale() {
        assert_eq!(norm_relative_error(&[3.0, 4.0], &[3.0, 4.0], 1e-8), 0.0);
        assert!((norm_relative_error(&[3.0, 4.0], &[0.0, 0.0], 1e-8) - 1.0).abs() < 1e-15);
        assert!((norm_relative_error(&[2e-9], &[0.0], 1e-8) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn small_suite_passes() {
        let dims = PolicyDims { vocab_size: 9, hidden: 6, desc_buckets: 4 };
        let s = run_suite(dims, 5, 11, 7);
        assert!(s.sl_max_relative_error < 1e-4, "{s:?}");
        assert!(s.rl_max_relative_error < 1e-4, "{s:?}");
    }
}
