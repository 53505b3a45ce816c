//! Environment: context generation, ground-truth reward model, noise.
//!
//! Rewards are always a function of the agent's *unmodified* context; the
//! reward operations never see the reported context, so that invariant
//! holds by construction.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, scale};

const NORM_TOL: f64 = 1e-12;

/// Which feedback the principal receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    /// Reward observed only when action 1 is played; action 0 pays a known
    /// constant.
    AppleTasting,
    /// Reward of the chosen action observed every round; both actions have
    /// linear reward means.
    Bandit,
}

/// Ground-truth linear reward model.
#[derive(Debug, Clone)]
pub struct RewardModel {
    pub theta1: Vec<f64>,
    /// Present iff bandit feedback.
    pub theta0: Option<Vec<f64>>,
    /// Constant reward of action 0 under apple-tasting feedback.
    pub r0: f64,
    pub sigma: f64,
    pub feedback: Feedback,
}

impl RewardModel {
    pub fn new(
        theta1: Vec<f64>,
        theta0: Option<Vec<f64>>,
        r0: f64,
        sigma: f64,
        feedback: Feedback,
    ) -> Result<Self> {
        if sigma < 0.0 {
            return Err(Error::Argument("sigma must be >= 0".into()));
        }
        if norm2(&theta1) > 1.0 + NORM_TOL {
            return Err(Error::Argument("||theta1|| must be <= 1".into()));
        }
        match (feedback, &theta0) {
            (Feedback::Bandit, Some(t0)) => {
                if t0.len() != theta1.len() {
                    return Err(Error::Argument("theta0 dimension mismatch".into()));
                }
                if norm2(t0) > 1.0 + NORM_TOL {
                    return Err(Error::Argument("||theta0|| must be <= 1".into()));
                }
            }
            (Feedback::Bandit, None) => {
                return Err(Error::Argument("bandit mode requires theta0".into()))
            }
            (Feedback::AppleTasting, Some(_)) => {
                return Err(Error::Argument(
                    "apple-tasting mode must not carry theta0".into(),
                ))
            }
            (Feedback::AppleTasting, None) => {}
        }
        Ok(RewardModel {
            theta1,
            theta0,
            r0,
            sigma,
            feedback,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta1.len()
    }
}

/// Noise distribution; zero-mean, sub-Gaussian parameter <= sigma.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    /// Uniform on [-sigma*sqrt(3), sigma*sqrt(3)] (variance sigma^2).
    BoundedUniform,
}

#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    pub sigma: f64,
    pub kind: NoiseKind,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        NoiseModel {
            sigma,
            kind: NoiseKind::Gaussian,
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        // Always consumes the same number of draws so parallel reward
        // streams stay aligned across algorithms.
        match self.kind {
            NoiseKind::Gaussian => {
                let g: f64 = rng.sample(StandardNormal);
                g * self.sigma
            }
            NoiseKind::BoundedUniform => {
                let u: f64 = rng.gen::<f64>() * 2.0 - 1.0;
                u * self.sigma * 3.0f64.sqrt()
            }
        }
    }
}

/// Non-uniform mixture component for the tilted source: uniform ball
/// conditioned on the first coordinate lying above `cap_height`.
#[derive(Debug, Clone, Copy)]
pub struct CapComponent {
    pub cap_height: f64,
}

impl Default for CapComponent {
    fn default() -> Self {
        CapComponent { cap_height: 0.7 }
    }
}

/// Source of (unmodified) agent contexts.
#[derive(Debug, Clone)]
pub enum ContextSource {
    /// Uniform over the solid unit ball.
    UniformBall { d: usize },
    /// Uniform over the unit sphere surface.
    UniformSphere { d: usize },
    /// c0-weighted mixture of the uniform ball and a cap-concentrated
    /// component; density ratio against the uniform ball is >= c0 by
    /// construction.
    MixtureTilted {
        d: usize,
        c0: f64,
        alt: CapComponent,
    },
    /// Fixed adversarial sequence (from a file or a generator), replayed
    /// in order.
    Adversarial { d: usize, contexts: Vec<Vec<f64>> },
}

impl ContextSource {
    pub fn dim(&self) -> usize {
        match self {
            ContextSource::UniformBall { d }
            | ContextSource::UniformSphere { d }
            | ContextSource::MixtureTilted { d, .. }
            | ContextSource::Adversarial { d, .. } => *d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ContextSource::MixtureTilted { c0, .. } => {
                if !(*c0 > 0.0 && *c0 <= 1.0) {
                    return Err(Error::Argument("mixture weight c0 must be in (0,1]".into()));
                }
                Ok(())
            }
            ContextSource::Adversarial { d, contexts } => {
                for (i, x) in contexts.iter().enumerate() {
                    if x.len() != *d {
                        return Err(Error::Argument(format!(
                            "adversarial context {} has dimension {}, expected {d}",
                            i + 1,
                            x.len()
                        )));
                    }
                    if norm2(x) > 1.0 + NORM_TOL {
                        return Err(Error::Argument(format!(
                            "adversarial context {} leaves the unit ball",
                            i + 1
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            ContextSource::Adversarial { contexts, .. } => Some(contexts.len()),
            _ => None,
        }
    }
}

/// Uniform sample from the solid unit ball: Gaussian direction times
/// radius U^(1/d).
pub fn sample_unit_ball(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dir = sample_unit_sphere(d, rng);
    let r: f64 = rng.gen::<f64>().powf(1.0 / d as f64);
    scale(&dir, r)
}

/// Uniform sample from the unit sphere surface.
pub fn sample_unit_sphere(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm2(&g);
        if n > 1e-12 {
            return scale(&g, 1.0 / n);
        }
    }
}

/// Draw the context for round `t` (1-based; used only by replayed
/// adversarial sequences).
pub fn sample_context(source: &ContextSource, t: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    match source {
        ContextSource::UniformBall { d } => Ok(sample_unit_ball(*d, rng)),
        ContextSource::UniformSphere { d } => Ok(sample_unit_sphere(*d, rng)),
        ContextSource::MixtureTilted { d, c0, alt } => {
            let coin: f64 = rng.gen();
            if coin < *c0 {
                Ok(sample_unit_ball(*d, rng))
            } else {
                // Rejection-sample the cap component.
                loop {
                    let x = sample_unit_ball(*d, rng);
                    if x[0] >= alt.cap_height {
                        return Ok(x);
                    }
                }
            }
        }
        ContextSource::Adversarial { contexts, .. } => contexts
            .get(t - 1)
            .cloned()
            .ok_or(Error::EndOfSequence(t)),
    }
}

/// Noise-free mean reward of an action on the *unmodified* context.
pub fn expected_reward(model: &RewardModel, action: u8, x: &[f64]) -> f64 {
    match action {
        1 => dot(&model.theta1, x),
        _ => match &model.theta0 {
            Some(t0) => dot(t0, x),
            None => model.r0,
        },
    }
}

/// Expected reward plus one noise draw. Takes the original context only.
pub fn realize_reward(
    model: &RewardModel,
    action: u8,
    x_original: &[f64],
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> f64 {
    expected_reward(model, action, x_original) + noise.draw(rng)
}

/// Parse an adversarial context file: one line per round, d comma-separated
/// decimal floats.
pub fn parse_adversarial_file(path: &std::path::Path, d: usize) -> Result<ContextSource> {
    let text = std::fs::read_to_string(path)?;
    let mut contexts = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            Error::Argument(format!("adversarial file line {}: {e}", lineno + 1))
        })?;
        contexts.push(row);
    }
    let src = ContextSource::Adversarial { d, contexts };
    src.validate()?;
    Ok(src)
}
