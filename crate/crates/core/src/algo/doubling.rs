//! Horizon-doubling wrapper: run explore-then-commit over epochs of
//! length 1, 2, 4, ... until the planned budget reaches a dimension- and
//! budget-dependent crossover, then hand over to strategy-aware OLS.

use rand_chacha::ChaCha8Rng;

use super::{Etc, Learner, SaOls};
use crate::agent::LinearThresholdPolicy;
use crate::env::Feedback;
use crate::error::Result;

/// Crossover time min(T, ceil(d^9 * (1 - delta)^(-3d))), saturating at T
/// on overflow.
pub fn doubling_switch_time(d: usize, delta: f64, horizon: usize) -> usize {
    let raw = (d as f64).powi(9) * (1.0 - delta).powi(-(3 * d as i32));
    if !raw.is_finite() || raw >= horizon as f64 {
        return horizon;
    }
    (raw.ceil() as usize).clamp(1, horizon)
}

#[derive(Debug, Clone)]
enum Inner {
    Etc(Etc),
    SaOls(SaOls),
}

#[derive(Debug, Clone)]
pub struct Doubling {
    d: usize,
    delta: f64,
    r0: f64,
    feedback: Feedback,
    sigma: f64,
    gamma_th: f64,
    tau_star: usize,
    epoch_len: usize,
    epoch_used: usize,
    cum_planned: usize,
    switched: bool,
    inner: Inner,
}

impl Doubling {
    pub fn new(
        d: usize,
        delta: f64,
        r0: f64,
        feedback: Feedback,
        horizon: usize,
        sigma: f64,
        gamma_th: f64,
    ) -> Self {
        let tau_star = doubling_switch_time(d, delta, horizon);
        Doubling::with_switch_time(d, delta, r0, feedback, sigma, gamma_th, tau_star)
    }

    /// Same as `new` but with the crossover time given directly.
    pub fn with_switch_time(
        d: usize,
        delta: f64,
        r0: f64,
        feedback: Feedback,
        sigma: f64,
        gamma_th: f64,
        tau_star: usize,
    ) -> Self {
        let mut alg = Doubling {
            d,
            delta,
            r0,
            feedback,
            sigma,
            gamma_th,
            tau_star,
            epoch_len: 1,
            epoch_used: 0,
            cum_planned: 1,
            switched: false,
            inner: Inner::Etc(Etc::new(d, delta, r0, feedback, 1, sigma, 0.5)),
        };
        if alg.cum_planned >= tau_star {
            alg.switch_to_sa_ols();
        }
        alg
    }

    pub fn switch_time(&self) -> usize {
        self.tau_star
    }

    pub fn has_switched(&self) -> bool {
        self.switched
    }

    fn switch_to_sa_ols(&mut self) {
        self.switched = true;
        self.inner = Inner::SaOls(SaOls::new(
            self.d,
            self.delta,
            self.r0,
            self.feedback,
            self.gamma_th,
        ));
    }

    fn start_next_epoch(&mut self) {
        self.epoch_len *= 2;
        self.epoch_used = 0;
        self.cum_planned += self.epoch_len;
        if self.cum_planned >= self.tau_star {
            self.switch_to_sa_ols();
        } else {
            // Per-epoch failure probability 1 / tau_i^2, capped below 1.
            let tau_i = self.epoch_len as f64;
            let gamma_fail = (1.0 / (tau_i * tau_i)).min(0.5);
            self.inner = Inner::Etc(Etc::new(
                self.d,
                self.delta,
                self.r0,
                self.feedback,
                self.epoch_len,
                self.sigma,
                gamma_fail,
            ));
        }
    }
}

impl Learner for Doubling {
    fn choose_policy(&mut self, _t: usize, rng: &mut ChaCha8Rng) -> LinearThresholdPolicy {
        if !self.switched && self.epoch_used == self.epoch_len {
            self.start_next_epoch();
        }
        let inner_t = self.epoch_used + 1;
        match &mut self.inner {
            Inner::Etc(e) => e.choose_policy(inner_t, rng),
            Inner::SaOls(s) => s.choose_policy(inner_t, rng),
        }
    }

    fn observe(
        &mut self,
        policy: &LinearThresholdPolicy,
        x_prime: &[f64],
        action: u8,
        reward: Option<f64>,
    ) -> Result<()> {
        let out = match &mut self.inner {
            Inner::Etc(e) => e.observe(policy, x_prime, action, reward),
            Inner::SaOls(s) => s.observe(policy, x_prime, action, reward),
        };
        self.epoch_used += 1;
        out
    }

    fn theta1_hat(&self) -> Option<&[f64]> {
        match &self.inner {
            Inner::Etc(e) => e.theta1_hat(),
            Inner::SaOls(s) => s.theta1_hat(),
        }
    }

    fn theta0_hat(&self) -> Option<&[f64]> {
        match &self.inner {
            Inner::Etc(e) => e.theta0_hat(),
            Inner::SaOls(s) => s.theta0_hat(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::PolicyMode;
    use rand::SeedableRng;

    #[test]
    fn switch_time_examples() {
        // d = 1, delta = 0: 1^9 * 1 = 1.
        assert_eq!(doubling_switch_time(1, 0.0, 1 << 20), 1);
        // d = 2, delta = 0.5: 2^9 * 2^6 = 32768.
        assert_eq!(doubling_switch_time(2, 0.5, 1 << 20), 32768);
        // Huge crossover saturates at the horizon.
        assert_eq!(doubling_switch_time(8, 0.9, 1 << 20), 1 << 20);
    }

    #[test]
    fn switches_immediately_when_crossover_is_one() {
        let a = Doubling::new(1, 0.0, 0.0, Feedback::AppleTasting, 1 << 10, 1.0, 0.0);
        assert!(a.has_switched());
    }

    #[test]
    fn epoch_lengths_double_until_crossover() {
        // tau_star = 32768: epochs 1..16384 run ETC (cum 32767), then the
        // 32768 epoch plan crosses the budget and SA-OLS takes over.
        let mut a = Doubling::new(2, 0.5, 0.0, Feedback::AppleTasting, 1 << 17, 1.0, 0.0);
        assert!(!a.has_switched());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in 1..=32_767usize {
            let p = a.choose_policy(t, &mut rng);
            let reward = (p.assign(&[0.5, 0.0]) == 1).then_some(0.0);
            a.observe(&p, &[0.5, 0.0], p.assign(&[0.5, 0.0]), reward)
                .unwrap();
            assert!(!a.has_switched(), "switched early at t = {t}");
        }
        let p = a.choose_policy(32_768, &mut rng);
        assert!(a.has_switched());
        // SA-OLS restarts with its bootstrap.
        assert_eq!(p.mode, PolicyMode::AlwaysOne);
    }
}
