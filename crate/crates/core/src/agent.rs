//! Strategic agent best response to a committed linear threshold policy
//! under an l2 effort budget, with lazy and trembling-hand tiebreaking.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, scale};

/// Linear threshold policy: action 1 iff <beta, x'> >= tau, with forced
/// variants for bootstrap/exploration rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearThresholdPolicy {
    pub beta: Vec<f64>,
    pub tau: f64,
    pub mode: PolicyMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    Threshold,
    AlwaysOne,
    AlwaysZero,
}

impl LinearThresholdPolicy {
    pub fn threshold(beta: Vec<f64>, tau: f64) -> Self {
        LinearThresholdPolicy {
            beta,
            tau,
            mode: PolicyMode::Threshold,
        }
    }

    pub fn always_one(d: usize) -> Self {
        LinearThresholdPolicy {
            beta: vec![0.0; d],
            tau: 0.0,
            mode: PolicyMode::AlwaysOne,
        }
    }

    pub fn always_zero(d: usize) -> Self {
        LinearThresholdPolicy {
            beta: vec![0.0; d],
            tau: 0.0,
            mode: PolicyMode::AlwaysZero,
        }
    }

    pub fn assign(&self, x_prime: &[f64]) -> u8 {
        match self.mode {
            PolicyMode::AlwaysOne => 1,
            PolicyMode::AlwaysZero => 0,
            PolicyMode::Threshold => u8::from(dot(&self.beta, x_prime) >= self.tau),
        }
    }
}

/// How a manipulating agent picks its overshoot past the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaRule {
    Fixed,
    UniformRandom,
    AdversarialMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreaking {
    Lazy,
    Trembling,
}

#[derive(Debug, Clone, Copy)]
pub struct AgentBehavior {
    /// l2 effort budget.
    pub delta: f64,
    pub mode: TieBreaking,
    /// Trembling overshoot cap; 0 for lazy agents.
    pub gamma_th: f64,
    pub alpha_rule: AlphaRule,
    /// Renormalize a response that leaves the unit ball (sensitivity
    /// studies only; off by default).
    pub clip_to_ball: bool,
}

impl AgentBehavior {
    pub fn lazy(delta: f64) -> Self {
        AgentBehavior {
            delta,
            mode: TieBreaking::Lazy,
            gamma_th: 0.0,
            alpha_rule: AlphaRule::UniformRandom,
            clip_to_ball: false,
        }
    }

    pub fn trembling(delta: f64, gamma_th: f64, alpha_rule: AlphaRule) -> Self {
        AgentBehavior {
            delta,
            mode: TieBreaking::Trembling,
            gamma_th,
            alpha_rule,
            clip_to_ball: false,
        }
    }
}

/// Best response of an agent with true context `x` to a committed policy.
///
/// The agent moves along beta/||beta|| exactly far enough to cross the
/// boundary (plus a bounded overshoot for trembling hands), and only when
/// the move actually changes the assigned action within budget.
pub fn best_respond(
    policy: &LinearThresholdPolicy,
    x: &[f64],
    behavior: &AgentBehavior,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    match policy.mode {
        PolicyMode::AlwaysOne | PolicyMode::AlwaysZero => return Ok(x.to_vec()),
        PolicyMode::Threshold => {}
    }
    let bnorm = norm2(&policy.beta);
    if bnorm == 0.0 {
        return Err(Error::Policy(
            "zero-slope threshold policy has no movement direction".into(),
        ));
    }
    let score = dot(&policy.beta, x);
    if score >= policy.tau {
        return Ok(x.to_vec()); // already accepted; lazy agents spend nothing
    }
    let gap = (policy.tau - score) / bnorm;
    if gap > behavior.delta {
        return Ok(x.to_vec()); // budget insufficient
    }
    let alpha = match behavior.mode {
        TieBreaking::Lazy => 0.0,
        TieBreaking::Trembling => {
            let cap = (behavior.delta - gap).min(behavior.gamma_th).max(0.0);
            match behavior.alpha_rule {
                AlphaRule::Fixed => 0.0f64.min(cap),
                AlphaRule::AdversarialMax => cap,
                AlphaRule::UniformRandom => rng.gen::<f64>() * cap,
            }
        }
    };
    let dir = scale(&policy.beta, 1.0 / bnorm);
    let mut moved = axpy(x, gap + alpha, &dir);
    // Rounding can land the response a hair below the boundary; top up
    // with a vanishing step so the move actually flips the action.
    for _ in 0..8 {
        let s = dot(&policy.beta, &moved);
        if s >= policy.tau {
            break;
        }
        let deficit = (policy.tau - s) / bnorm;
        moved = axpy(&moved, (2.0 * deficit).max(1e-14 / bnorm), &dir);
    }
    if behavior.clip_to_ball {
        let n = norm2(&moved);
        if n > 1.0 {
            moved = scale(&moved, 1.0 / n);
        }
    }
    Ok(moved)
}

/// Sufficient condition for a reported context to be provably unmodified:
/// its score must lie *strictly* above the shifted boundary plus the
/// trembling cap. A movement to the boundary lands at the shift only up
/// to rounding, so the comparison carries a small scaled margin to keep
/// such points out.
pub fn is_clean(
    policy: &LinearThresholdPolicy,
    x_prime: &[f64],
    delta: f64,
    gamma_th: f64,
    r0_shift: f64,
) -> bool {
    match policy.mode {
        // Forced-action rounds give agents no incentive to move.
        PolicyMode::AlwaysOne | PolicyMode::AlwaysZero => true,
        PolicyMode::Threshold => {
            let bnorm = norm2(&policy.beta);
            let margin = 1e-9 * (bnorm + r0_shift.abs()).max(1.0);
            dot(&policy.beta, x_prime) > (delta + gamma_th) * bnorm + r0_shift + margin
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn moves_to_boundary_within_budget() {
        let p = LinearThresholdPolicy::threshold(vec![1.0, 0.0], 0.3);
        let b = AgentBehavior::lazy(0.3);
        let xp = best_respond(&p, &[0.1, 0.0], &b, &mut rng()).unwrap();
        assert!((xp[0] - 0.3).abs() <= 1e-12 && xp[1].abs() <= 1e-12);
    }

    #[test]
    fn stays_put_when_budget_insufficient() {
        let p = LinearThresholdPolicy::threshold(vec![1.0, 0.0], 0.3);
        let b = AgentBehavior::lazy(0.3);
        let xp = best_respond(&p, &[-0.1, 0.0], &b, &mut rng()).unwrap();
        assert_eq!(xp, vec![-0.1, 0.0]);
    }

    #[test]
    fn stays_put_when_already_accepted() {
        let p = LinearThresholdPolicy::threshold(vec![1.0, 0.0], 0.3);
        let b = AgentBehavior::lazy(0.3);
        let xp = best_respond(&p, &[0.5, 0.2], &b, &mut rng()).unwrap();
        assert_eq!(xp, vec![0.5, 0.2]);
    }

    #[test]
    fn zero_slope_rejected() {
        let p = LinearThresholdPolicy::threshold(vec![0.0, 0.0], 0.3);
        let b = AgentBehavior::lazy(0.3);
        assert!(best_respond(&p, &[0.1, 0.0], &b, &mut rng()).is_err());
    }

    #[test]
    fn clean_condition_is_strict() {
        let p = LinearThresholdPolicy::threshold(vec![1.0, 0.0], 0.3);
        assert!(is_clean(&p, &[0.5, 0.0], 0.2, 0.0, 0.1)); // 0.5 > 0.3
        assert!(!is_clean(&p, &[0.3, 0.0], 0.2, 0.0, 0.1)); // boundary
        assert!(!is_clean(&p, &[0.35, 0.0], 0.2, 0.1, 0.1)); // 0.35 <= 0.4
    }

    #[test]
    fn trembling_overshoot_bounded() {
        let p = LinearThresholdPolicy::threshold(vec![1.0, 0.0], 0.3);
        let b = AgentBehavior::trembling(0.3, 0.05, AlphaRule::AdversarialMax);
        let xp = best_respond(&p, &[0.1, 0.0], &b, &mut rng()).unwrap();
        // gap 0.2, cap min(0.1, 0.05) = 0.05
        assert!((xp[0] - 0.35).abs() <= 1e-12);
    }
}
