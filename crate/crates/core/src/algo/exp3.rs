//! Adversarial-context strategy: exponential weights over a finite grid
//! of slope vectors, with uniform mixing and an importance-weighted loss
//! built from the shifted reward.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Learner;
use crate::agent::LinearThresholdPolicy;
use crate::env::Feedback;
use crate::error::{Error, Result};
use crate::linalg::norm2;

/// Default cap on the expert grid size.
pub const DEFAULT_GRID_CAP: usize = 1_000_000;

/// Axis-aligned grid over [-1, 1]^d with spacing h = 2 * epsilon /
/// sqrt(d), coordinates -1 + h/2 + k * h. Any point of the cube is within
/// l2 distance epsilon of some grid point.
pub fn build_policy_grid(d: usize, epsilon: f64, cap: usize) -> Result<Vec<Vec<f64>>> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!(
            "grid resolution epsilon must be positive, got {epsilon}"
        )));
    }
    let h = 2.0 * epsilon / (d as f64).sqrt();
    let per_axis = (2.0 / h).ceil().max(1.0) as usize;
    let size = per_axis.checked_pow(d as u32);
    match size {
        Some(s) if s <= cap => {}
        _ => {
            let shown = size
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("{per_axis}^{d} (overflow)"));
            return Err(Error::Config(format!(
                "expert grid would have {shown} points, above the cap of {cap}; \
                 raise the cap or coarsen epsilon"
            )));
        }
    }
    let coords: Vec<f64> = (0..per_axis)
        .map(|k| -1.0 + h / 2.0 + k as f64 * h)
        .collect();
    let mut grid = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::with_capacity(grid.len() * per_axis);
        for prefix in &grid {
            for &c in &coords {
                let mut e = prefix.clone();
                e.push(c);
                next.push(e);
            }
        }
        grid = next;
    }
    Ok(grid)
}

/// Tuned parameters, each overridable from configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exp3Params {
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
    pub grid_cap: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Exp3Sae {
    d: usize,
    delta: f64,
    r0: f64,
    feedback: Feedback,
    grid: Vec<Vec<f64>>,
    weights: Vec<f64>,
    eta: f64,
    gamma_mix: f64,
    lambda: f64,
    epsilon: f64,
    /// Chosen expert index and its sampling probability, pending update.
    chosen: Option<(usize, f64)>,
}

impl Exp3Sae {
    pub fn new(
        d: usize,
        delta: f64,
        r0: f64,
        feedback: Feedback,
        horizon: usize,
        sigma: f64,
        params: Exp3Params,
    ) -> Result<Self> {
        if horizon < 2 {
            return Err(Error::Config("horizon must be at least 2".into()));
        }
        let t_f = horizon as f64;
        let log_t = t_f.ln();
        let epsilon = match params.epsilon {
            Some(e) => e,
            None => (d as f64 * sigma * log_t / t_f).powf(1.0 / (d as f64 + 2.0)),
        };
        let grid = build_policy_grid(d, epsilon, params.grid_cap.unwrap_or(DEFAULT_GRID_CAP))?;
        let n = grid.len() as f64;
        let lambda = params.lambda.unwrap_or(sigma * (2.0 * log_t).sqrt());
        // Floor keeps eta finite when lambda is 0 (noiseless runs).
        let lambda_eff = lambda.max(1e-6);
        let eta = (n.ln() / (t_f * lambda_eff * lambda_eff * n)).sqrt();
        let gamma_mix = (2.0 * eta * lambda_eff * n).min(1.0);
        let len = grid.len();
        Ok(Exp3Sae {
            d,
            delta,
            r0,
            feedback,
            grid,
            weights: vec![1.0 / len as f64; len],
            eta,
            gamma_mix,
            lambda,
            epsilon,
            chosen: None,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.grid.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma_mix(&self) -> f64 {
        self.gamma_mix
    }

    /// Normalized exponential weights p.
    pub fn expert_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sampling distribution q = (1 - gamma) p + gamma / |E|.
    pub fn sampling_distribution(&self) -> Vec<f64> {
        let n = self.grid.len() as f64;
        self.weights
            .iter()
            .map(|p| (1.0 - self.gamma_mix) * p + self.gamma_mix / n)
            .collect()
    }
}

impl Learner for Exp3Sae {
    fn choose_policy(&mut self, _t: usize, rng: &mut ChaCha8Rng) -> LinearThresholdPolicy {
        let q = self.sampling_distribution();
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut idx = q.len() - 1;
        for (i, qi) in q.iter().enumerate() {
            cum += qi;
            if u < cum {
                idx = i;
                break;
            }
        }
        self.chosen = Some((idx, q[idx]));
        let e = self.grid[idx].clone();
        let enorm = norm2(&e);
        if enorm == 0.0 {
            // A zero grid point cannot form a threshold; accept outright.
            return LinearThresholdPolicy::always_one(self.d);
        }
        LinearThresholdPolicy::threshold(e, self.delta * enorm)
    }

    fn observe(
        &mut self,
        _policy: &LinearThresholdPolicy,
        _x_prime: &[f64],
        action: u8,
        reward: Option<f64>,
    ) -> Result<()> {
        let (idx, q) = self
            .chosen
            .take()
            .ok_or_else(|| Error::Protocol("observe called before choose_policy".into()))?;
        let r = match (self.feedback, action, reward) {
            (_, 1, Some(r)) => r,
            (Feedback::Bandit, 0, Some(r)) => r,
            // Rejection under apple tasting pays the known default reward.
            (Feedback::AppleTasting, 0, None) => self.r0,
            (_, a @ (0 | 1), _) => {
                return Err(Error::Protocol(format!(
                    "reward presence inconsistent with action {a}"
                )))
            }
            (_, a, _) => return Err(Error::Protocol(format!("invalid action {a}"))),
        };
        let loss = (1.0 + self.lambda - r) / q;
        self.weights[idx] *= (-self.eta * loss).exp();
        let total: f64 = self.weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            for w in &mut self.weights {
                *w /= total;
            }
        } else {
            // Degenerate collapse; restart from uniform.
            let n = self.weights.len() as f64;
            self.weights.iter_mut().for_each(|w| *w = 1.0 / n);
        }
        Ok(())
    }
}
