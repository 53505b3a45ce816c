//! Explore-then-commit: accept everyone for a horizon-tuned exploration
//! window (accept/reject halves under bandit feedback), fit OLS once, and
//! commit to the shifted threshold policy for the rest of the horizon.

use rand_chacha::ChaCha8Rng;

use super::{Learner, OlsAccumulator};
use crate::agent::LinearThresholdPolicy;
use crate::env::Feedback;
use crate::error::{Error, Result};
use crate::linalg::{norm2, sub};

/// Exploration length ceil(4 * 63^(1/3) * sigma^(2/3) * d * T^(2/3)
/// * ln^(1/3)(4d / gamma_fail)), clamped to [2d, T].
pub fn etc_exploration_length(d: usize, horizon: usize, sigma: f64, gamma_fail: f64) -> usize {
    let d_f = d as f64;
    let t_f = horizon as f64;
    let raw = 4.0
        * 63.0f64.powf(1.0 / 3.0)
        * sigma.powf(2.0 / 3.0)
        * d_f
        * t_f.powf(2.0 / 3.0)
        * (4.0 * d_f / gamma_fail).ln().powf(1.0 / 3.0);
    let t0 = raw.ceil().max(0.0) as usize;
    t0.clamp((2 * d).min(horizon), horizon)
}

#[derive(Debug, Clone)]
pub struct Etc {
    d: usize,
    delta: f64,
    r0: f64,
    feedback: Feedback,
    t0: usize,
    acc1: OlsAccumulator,
    acc0: OlsAccumulator,
    theta1: Vec<f64>,
    theta0: Vec<f64>,
    committed: Option<LinearThresholdPolicy>,
    exploring: bool,
}

impl Etc {
    pub fn new(
        d: usize,
        delta: f64,
        r0: f64,
        feedback: Feedback,
        horizon: usize,
        sigma: f64,
        gamma_fail: f64,
    ) -> Self {
        Etc::with_exploration(
            d,
            delta,
            r0,
            feedback,
            etc_exploration_length(d, horizon, sigma, gamma_fail),
        )
    }

    /// Same as `new` but with the exploration length given directly.
    pub fn with_exploration(
        d: usize,
        delta: f64,
        r0: f64,
        feedback: Feedback,
        t0: usize,
    ) -> Self {
        Etc {
            d,
            delta,
            r0,
            feedback,
            t0,
            acc1: OlsAccumulator::new(d),
            acc0: OlsAccumulator::new(d),
            theta1: vec![0.0; d],
            theta0: vec![0.0; d],
            committed: None,
            exploring: true,
        }
    }

    pub fn exploration_length(&self) -> usize {
        self.t0
    }

    fn explore_rounds(&self) -> usize {
        match self.feedback {
            Feedback::AppleTasting => self.t0,
            Feedback::Bandit => 2 * self.t0,
        }
    }

    fn commit(&mut self) -> LinearThresholdPolicy {
        self.theta1 = self.acc1.solve();
        let beta = match self.feedback {
            Feedback::AppleTasting => self.theta1.clone(),
            Feedback::Bandit => {
                self.theta0 = self.acc0.solve();
                sub(&self.theta1, &self.theta0)
            }
        };
        let bnorm = norm2(&beta);
        if bnorm == 0.0 {
            // Degenerate fit: keep accepting rather than run an
            // undirected threshold.
            return LinearThresholdPolicy::always_one(self.d);
        }
        let tau = match self.feedback {
            Feedback::AppleTasting => self.delta * bnorm + self.r0,
            Feedback::Bandit => self.delta * bnorm,
        };
        LinearThresholdPolicy::threshold(beta, tau)
    }
}

impl Learner for Etc {
    fn choose_policy(&mut self, t: usize, _rng: &mut ChaCha8Rng) -> LinearThresholdPolicy {
        if t <= self.explore_rounds() {
            self.exploring = true;
            if self.feedback == Feedback::Bandit && t > self.t0 {
                return LinearThresholdPolicy::always_zero(self.d);
            }
            return LinearThresholdPolicy::always_one(self.d);
        }
        self.exploring = false;
        if self.committed.is_none() {
            self.committed = Some(self.commit());
        }
        self.committed.clone().unwrap()
    }

    fn observe(
        &mut self,
        _policy: &LinearThresholdPolicy,
        x_prime: &[f64],
        action: u8,
        reward: Option<f64>,
    ) -> Result<()> {
        if !self.exploring {
            return Ok(());
        }
        match (self.feedback, action) {
            (_, 1) => {
                let r = reward.ok_or_else(|| {
                    Error::Protocol("reward missing on an action-1 round".into())
                })?;
                self.acc1.insert(x_prime, r);
            }
            (Feedback::Bandit, 0) => {
                let r = reward.ok_or_else(|| {
                    Error::Protocol("reward missing on a bandit action-0 round".into())
                })?;
                self.acc0.insert(x_prime, r);
            }
            (Feedback::AppleTasting, 0) => {}
            (_, a) => return Err(Error::Protocol(format!("invalid action {a}"))),
        }
        Ok(())
    }

    fn theta1_hat(&self) -> Option<&[f64]> {
        Some(&self.theta1)
    }

    fn theta0_hat(&self) -> Option<&[f64]> {
        match self.feedback {
            Feedback::AppleTasting => None,
            Feedback::Bandit => Some(&self.theta0),
        }
    }
}
