//! Strategy-aware OLS: shift the decision boundary by the agents' effort
//! budget, keep only contexts whose scores prove they were not gamed, and
//! refit OLS on that clean data every round.

use rand_chacha::ChaCha8Rng;

use super::{Learner, OlsAccumulator};
use crate::agent::{is_clean, LinearThresholdPolicy, PolicyMode};
use crate::env::Feedback;
use crate::error::{Error, Result};
use crate::linalg::{norm2, sub, SymMat};

#[derive(Debug, Clone)]
pub struct SaOls {
    d: usize,
    delta: f64,
    r0: f64,
    feedback: Feedback,
    /// Extra clean margin for trembling-hand agents; 0 for lazy agents.
    gamma_th: f64,
    acc1: OlsAccumulator,
    acc0: OlsAccumulator,
    data1: Vec<(Vec<f64>, f64)>,
    theta1: Vec<f64>,
    theta0: Vec<f64>,
    beta: Vec<f64>,
}

impl SaOls {
    pub fn new(d: usize, delta: f64, r0: f64, feedback: Feedback, gamma_th: f64) -> Self {
        SaOls {
            d,
            delta,
            r0,
            feedback,
            gamma_th,
            acc1: OlsAccumulator::new(d),
            acc0: OlsAccumulator::new(d),
            data1: Vec::new(),
            theta1: vec![0.0; d],
            theta0: vec![0.0; d],
            beta: vec![0.0; d],
        }
    }

    fn bootstrap_len(&self) -> usize {
        match self.feedback {
            Feedback::AppleTasting => self.d,
            Feedback::Bandit => 2 * self.d,
        }
    }

    /// Clean action-1 observations accumulated so far (reported context
    /// and realized reward).
    pub fn clean_data(&self) -> &[(Vec<f64>, f64)] {
        &self.data1
    }

    /// Gram matrix of the clean action-1 dataset.
    pub fn clean_gram(&self) -> &SymMat {
        &self.acc1.gram
    }

    fn refresh_beta(&mut self) {
        self.beta = match self.feedback {
            Feedback::AppleTasting => self.theta1.clone(),
            Feedback::Bandit => sub(&self.theta1, &self.theta0),
        };
    }
}

impl Learner for SaOls {
    fn choose_policy(&mut self, t: usize, _rng: &mut ChaCha8Rng) -> LinearThresholdPolicy {
        if t <= self.bootstrap_len() {
            if self.feedback == Feedback::Bandit && t > self.d {
                return LinearThresholdPolicy::always_zero(self.d);
            }
            return LinearThresholdPolicy::always_one(self.d);
        }
        let bnorm = norm2(&self.beta);
        if bnorm == 0.0 {
            // Degenerate estimate; keep collecting clean data.
            return LinearThresholdPolicy::always_one(self.d);
        }
        let tau = match self.feedback {
            Feedback::AppleTasting => self.delta * bnorm + self.r0,
            Feedback::Bandit => self.delta * bnorm,
        };
        LinearThresholdPolicy::threshold(self.beta.clone(), tau)
    }

    fn observe(
        &mut self,
        policy: &LinearThresholdPolicy,
        x_prime: &[f64],
        action: u8,
        reward: Option<f64>,
    ) -> Result<()> {
        let r0_shift = match self.feedback {
            Feedback::AppleTasting => self.r0,
            Feedback::Bandit => 0.0,
        };
        match action {
            1 => {
                let r = reward.ok_or_else(|| {
                    Error::Protocol("reward missing on an action-1 round".into())
                })?;
                if is_clean(policy, x_prime, self.delta, self.gamma_th, r0_shift) {
                    self.acc1.insert(x_prime, r);
                    self.data1.push((x_prime.to_vec(), r));
                    self.theta1 = self.acc1.solve();
                    self.refresh_beta();
                }
            }
            0 => {
                if self.feedback == Feedback::Bandit {
                    let r = reward.ok_or_else(|| {
                        Error::Protocol("reward missing on a bandit action-0 round".into())
                    })?;
                    // Rejected agents within budget would have moved, so an
                    // action-0 report is its true context.
                    self.acc0.insert(x_prime, r);
                    self.theta0 = self.acc0.solve();
                    self.refresh_beta();
                } else if policy.mode == PolicyMode::Threshold && reward.is_some() {
                    return Err(Error::Protocol(
                        "reward reported on an apple-tasting action-0 round".into(),
                    ));
                }
            }
            a => return Err(Error::Protocol(format!("invalid action {a}"))),
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn bootstrap_is_always_one_for_d_rounds() {
        let mut a = SaOls::new(3, 0.2, 0.0, Feedback::AppleTasting, 0.0);
        let mut r = rng();
        for t in 1..=3 {
            assert_eq!(a.choose_policy(t, &mut r).mode, PolicyMode::AlwaysOne);
        }
    }

    #[test]
    fn bandit_bootstrap_splits_ones_then_zeros() {
        let mut a = SaOls::new(2, 0.2, 0.0, Feedback::Bandit, 0.0);
        let mut r = rng();
        assert_eq!(a.choose_policy(1, &mut r).mode, PolicyMode::AlwaysOne);
        assert_eq!(a.choose_policy(2, &mut r).mode, PolicyMode::AlwaysOne);
        assert_eq!(a.choose_policy(3, &mut r).mode, PolicyMode::AlwaysZero);
        assert_eq!(a.choose_policy(4, &mut r).mode, PolicyMode::AlwaysZero);
    }

    #[test]
    fn recovers_theta_from_noiseless_clean_data() {
        let theta = vec![0.6, -0.3];
        let mut a = SaOls::new(2, 0.2, 0.1, Feedback::AppleTasting, 0.0);
        let mut r = rng();
        let xs = [vec![0.9, 0.1], vec![0.2, 0.8], vec![0.5, -0.5]];
        for (t, x) in xs.iter().enumerate() {
            let p = a.choose_policy(t + 1, &mut r);
            a.observe(&p, x, 1, Some(dot(&theta, x))).unwrap();
        }
        let est = a.theta1_hat().unwrap();
        assert!((est[0] - 0.6).abs() <= 1e-9 && (est[1] + 0.3).abs() <= 1e-9);
    }

    #[test]
    fn shifted_policy_after_bootstrap() {
        let theta = vec![1.0, 0.0];
        let mut a = SaOls::new(2, 0.2, 0.1, Feedback::AppleTasting, 0.0);
        let mut r = rng();
        for (t, x) in [vec![0.9, 0.1], vec![0.2, 0.8]].iter().enumerate() {
            let p = a.choose_policy(t + 1, &mut r);
            a.observe(&p, x, 1, Some(dot(&theta, x))).unwrap();
        }
        let p = a.choose_policy(3, &mut r);
        assert_eq!(p.mode, PolicyMode::Threshold);
        // tau = delta * ||theta|| + r0 = 0.2 + 0.1
        assert!((p.tau - 0.3).abs() <= 1e-9);
    }

    #[test]
    fn gamed_context_is_filtered() {
        let mut a = SaOls::new(2, 0.2, 0.0, Feedback::AppleTasting, 0.0);
        let p = LinearThresholdPolicy::threshold(vec![1.0, 0.0], 0.2);
        // Score 0.2 sits exactly on the shifted boundary: not provably clean.
        a.observe(&p, &[0.2, 0.0], 1, Some(1.0)).unwrap();
        assert!(a.clean_data().is_empty());
        a.observe(&p, &[0.5, 0.0], 1, Some(1.0)).unwrap();
        assert_eq!(a.clean_data().len(), 1);
    }

    #[test]
    fn missing_reward_is_protocol_error() {
        let mut a = SaOls::new(2, 0.2, 0.0, Feedback::AppleTasting, 0.0);
        let p = LinearThresholdPolicy::always_one(2);
        assert!(a.observe(&p, &[0.1, 0.0], 1, None).is_err());
    }
}
