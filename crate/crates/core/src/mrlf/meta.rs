use super::TrainError;

/// A differentiable objective over a flat parameter vector.
pub trait Objective {
    /// Extra bookkeeping returned alongside the loss.
    type Report;

    fn loss_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>, Self::Report), TrainError>;
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescales `g` in place to norm at most `max_norm` (0 disables). Returns the
/// norm before clipping.
pub fn clip_by_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = l2_norm(g);
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        for x in g.iter_mut() {
            *x *= s;
        }
    }
    norm
}

/// Result of adapting to one task and differentiating at the adapted point.
#[derive(Debug, Clone)]
pub struct Adapted<R> {
    pub theta: Vec<f64>,
    pub loss: f64,
    /// Gradient of the task loss at the adapted parameters, unclipped.
    pub meta_gradient: Vec<f64>,
    pub report: R,
}

/// `steps` clipped gradient steps of size `rate` from `theta`, then the loss
/// and gradient at the result.
pub fn adapt<O: Objective>(
    theta: &[f64],
    objective: &O,
    rate: f64,
    steps: usize,
    clip_norm: f64,
) -> Result<Adapted<O::Report>, TrainError> {
    let mut current = theta.to_vec();
    for _ in 0..steps {
        let (_, mut g, _) = objective.loss_grad(&current)?;
        clip_by_norm(&mut g, clip_norm);
        for (p, d) in current.iter_mut().zip(&g) {
            *p -= rate * d;
        }
    }
    let (loss, meta_gradient, report) = objective.loss_grad(&current)?;
    Ok(Adapted { theta: current, loss, meta_gradient, report })
}

/// First-order meta-gradient: the sum over objectives of each loss gradient
/// taken at that objective's adapted parameters.
pub fn first_order_meta_gradient<O: Objective>(
    theta: &[f64],
    objectives: &[O],
    rate: f64,
    steps: usize,
    clip_norm: f64,
) -> Result<Vec<f64>, TrainError> {
    let mut total = vec![0.0; theta.len()];
    for o in objectives {
        let a = adapt(theta, o, rate, steps, clip_norm)?;
        accumulate(&mut total, &a.meta_gradient);
    }
    Ok(total)
}

pub(crate) fn accumulate(total: &mut [f64], g: &[f64]) {
    for (t, x) in total.iter_mut().zip(g) {
        *t += x;
    }
}

/// `theta - rate * clip(gradient)`.
pub fn meta_step(theta: &[f64], gradient: &[f64], rate: f64, clip_norm: f64) -> Vec<f64> {
    let mut g = gradient.to_vec();
    clip_by_norm(&mut g, clip_norm);
    theta.iter().zip(&g).map(|(p, d)| p - rate * d).collect()
}
