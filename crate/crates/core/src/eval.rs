//! Ground-truth accounting: strategic regret, the brute-force fixed-policy
//! oracle, clean-data statistics, geometric constants of the uniform ball,
//! and scaling-exponent fits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::agent::{best_respond, AgentBehavior, LinearThresholdPolicy};
use crate::algo::{Learner, SaOls};
use crate::env::{
    expected_reward, realize_reward, sample_unit_ball, Feedback, NoiseModel, RewardModel,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, ols_fit, sub, SymMat};

/// Everything recorded about one interaction round.
#[derive(Debug, Clone)]
pub struct RoundLog {
    pub t: usize,
    pub x: Vec<f64>,
    pub x_prime: Vec<f64>,
    pub policy: LinearThresholdPolicy,
    pub action: u8,
    pub optimal_action: u8,
    pub clean: bool,
    pub observed_reward: Option<f64>,
    /// Expected-reward gap to the optimal action on the true context.
    pub inst_regret: f64,
}

/// Best action against the *unmodified* context; ties go to action 1.
pub fn optimal_action(model: &RewardModel, x: &[f64]) -> u8 {
    match model.feedback {
        Feedback::AppleTasting => u8::from(dot(&model.theta1, x) >= model.r0),
        Feedback::Bandit => {
            let t0 = model.theta0.as_ref().expect("bandit model carries theta0");
            u8::from(dot(&sub(&model.theta1, t0), x) >= 0.0)
        }
    }
}

/// Expected-reward gap of the action actually taken; never negative.
pub fn instantaneous_regret(model: &RewardModel, x: &[f64], action: u8) -> f64 {
    let a_star = optimal_action(model, x);
    expected_reward(model, a_star, x) - expected_reward(model, action, x)
}

pub fn cumulative_strategic_regret(logs: &[RoundLog]) -> f64 {
    logs.iter().map(|l| l.inst_regret).sum()
}

/// Slope-direction count times intercept count for the brute-force oracle.
#[derive(Debug, Clone, Copy)]
pub struct GridResolution {
    pub slopes: usize,
    pub intercepts: usize,
}

impl Default for GridResolution {
    fn default() -> Self {
        GridResolution {
            slopes: 720,
            intercepts: 64,
        }
    }
}

fn unit_directions(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci sphere: near-even coverage with n points.
            let phi = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = phi * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => unreachable!("oracle scale guard admits d <= 3 only"),
    }
}

/// Best cumulative *expected* reward of any fixed policy from a grid of
/// shifted linear thresholds (plus accept-all and reject-all), when every
/// context best-responds to that fixed policy.
pub fn stackelberg_oracle(
    model: &RewardModel,
    behavior: &AgentBehavior,
    contexts: &[Vec<f64>],
    grid: GridResolution,
) -> Result<f64> {
    let d = model.dim();
    if d > 3 {
        return Err(Error::ScaleGuard(format!(
            "oracle supports d <= 3, got d = {d}"
        )));
    }
    if contexts.len() > 10_000 {
        return Err(Error::ScaleGuard(format!(
            "oracle supports at most 10000 contexts, got {}",
            contexts.len()
        )));
    }
    let mut candidates = vec![
        LinearThresholdPolicy::always_one(d),
        LinearThresholdPolicy::always_zero(d),
    ];
    let tau_lo = -1.0 - behavior.delta;
    let tau_hi = 1.0 + behavior.delta;
    for u in unit_directions(d, grid.slopes) {
        for j in 0..grid.intercepts {
            let frac = if grid.intercepts == 1 {
                0.5
            } else {
                j as f64 / (grid.intercepts - 1) as f64
            };
            let tau = tau_lo + frac * (tau_hi - tau_lo);
            candidates.push(LinearThresholdPolicy::threshold(u.clone(), tau));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut best = f64::NEG_INFINITY;
    for policy in &candidates {
        let mut total = 0.0;
        for x in contexts {
            let x_prime = best_respond(policy, x, behavior, &mut rng)?;
            let action = policy.assign(&x_prime);
            total += expected_reward(model, action, x);
        }
        best = best.max(total);
    }
    Ok(best)
}

/// Monte-Carlo estimate of P(x[1] >= delta) under the uniform ball.
pub fn estimate_c1(
    d: usize,
    delta: f64,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    if n_samples < 1000 {
        return Err(Error::Argument("need at least 1000 samples".into()));
    }
    let mut hits = 0usize;
    for _ in 0..n_samples {
        if sample_unit_ball(d, rng)[0] >= delta {
            hits += 1;
        }
    }
    let p = hits as f64 / n_samples as f64;
    let se = (p * (1.0 - p) / n_samples as f64).sqrt();
    Ok((p, se))
}

/// Closed-form lower bound on c1: (1-delta)^((d+1)/2) / (sqrt(pi) (d+1))
/// * Gamma(d/2 + 1) / Gamma(d/2 + 1/2), via log-gamma.
pub fn c1_lower_bound(d: usize, delta: f64) -> f64 {
    let d_f = d as f64;
    let log_ratio = ln_gamma(d_f / 2.0 + 1.0) - ln_gamma(d_f / 2.0 + 0.5);
    (1.0 - delta).powf((d_f + 1.0) / 2.0) / (std::f64::consts::PI.sqrt() * (d_f + 1.0))
        * log_ratio.exp()
}

/// Monte-Carlo estimate of E[x[2]^2 | x[1] >= delta] under the uniform
/// ball.
pub fn estimate_c2(
    d: usize,
    delta: f64,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    if d < 2 {
        return Err(Error::Argument("c2 needs d >= 2".into()));
    }
    let mut vals = Vec::new();
    for _ in 0..n_samples {
        let x = sample_unit_ball(d, rng);
        if x[0] >= delta {
            vals.push(x[1] * x[1]);
        }
    }
    if vals.len() < 1000 {
        return Err(Error::InsufficientSamples(format!(
            "only {} of {} samples satisfied the conditioning event",
            vals.len(),
            n_samples
        )));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Closed-form lower bound on c2: (1 / 3d)(3/4 - delta/2 - delta^2/4)^3.
pub fn c2_lower_bound(d: usize, delta: f64) -> f64 {
    let inner = 0.75 - delta / 2.0 - delta * delta / 4.0;
    inner.powi(3) / (3.0 * d as f64)
}

/// Normalized minimum eigenvalue of the clean-data Gram matrix at each
/// checkpoint: (t, lambda_min(sum of clean x x^T up to t) / t).
pub fn min_eigen_track(logs: &[RoundLog], checkpoints: &[usize]) -> Vec<(usize, f64)> {
    if logs.is_empty() {
        return Vec::new();
    }
    let d = logs[0].x.len();
    let mut gram = SymMat::zeros(d);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut cp = checkpoints.iter().peekable();
    for log in logs {
        if log.clean && log.action == 1 {
            gram.add_outer(&log.x_prime);
        }
        while let Some(&&c) = cp.peek() {
            if c == log.t {
                let lam = crate::linalg::min_eigenvalue(&gram).unwrap_or(0.0);
                out.push((c, lam / c as f64));
                cp.next();
            } else {
                break;
            }
        }
    }
    out
}

/// Fraction of rounds flagged clean; 0 on an empty log.
pub fn clean_fraction(logs: &[RoundLog]) -> f64 {
    if logs.is_empty() {
        return 0.0;
    }
    logs.iter().filter(|l| l.clean).count() as f64 / logs.len() as f64
}

/// Least-squares slope of log(regret) against log(T). Nonpositive points
/// are dropped; fewer than 4 usable points is an error.
pub fn fit_scaling_exponent(points: &[(f64, f64)]) -> Result<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, r)| *t > 0.0 && *r > 0.0)
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    if usable.len() < 4 {
        return Err(Error::Argument(format!(
            "need at least 4 positive points for a slope fit, have {}",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("all horizons identical".into()));
    }
    Ok(sxy / sxx)
}

/// Run one apple-tasting stream and fit theta two ways: on provably clean
/// data only, and naively on every accepted report. Returns the two final
/// estimation errors (clean-only, all-data).
pub fn ols_inconsistency_demo(
    model: &RewardModel,
    delta: f64,
    horizon: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let d = model.dim();
    let behavior = AgentBehavior::lazy(delta);
    let noise = NoiseModel::gaussian(model.sigma);
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut algo_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut learner = SaOls::new(d, delta, model.r0, model.feedback, 0.0);
    let mut all_data: Vec<(Vec<f64>, f64)> = Vec::new();
    for t in 1..=horizon {
        let x = sample_unit_ball(d, &mut env_rng);
        let policy = learner.choose_policy(t, &mut algo_rng);
        let x_prime = best_respond(&policy, &x, &behavior, &mut algo_rng)?;
        let action = policy.assign(&x_prime);
        let reward = (action == 1).then(|| realize_reward(model, 1, &x, &noise, &mut env_rng));
        if action == 1 {
            all_data.push((x_prime.clone(), reward.unwrap()));
        }
        learner.observe(&policy, &x_prime, action, reward)?;
    }
    let theta_clean = learner.theta1_hat().expect("sa-ols exposes theta1");
    let err_clean = norm2(&sub(theta_clean, &model.theta1));
    let theta_all = ols_fit(&all_data)?;
    let err_all = norm2(&sub(&theta_all, &model.theta1));
    Ok((err_clean, err_all))
}
