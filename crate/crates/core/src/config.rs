//! Experiment configuration: TOML parsing with strict unknown-key
//! rejection, defaults, and validation.

use serde::Deserialize;

use crate::algo::{build_policy_grid, DEFAULT_GRID_CAP};
use crate::env::{CapComponent, ContextSource, Feedback, NoiseKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SaOls,
    Etc,
    Doubling,
    Exp3Sae,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::SaOls => "sa_ols",
            Algorithm::Etc => "etc",
            Algorithm::Doubling => "doubling",
            Algorithm::Exp3Sae => "exp3_sae",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSpec {
    Apple,
    Bandit,
}

impl FeedbackSpec {
    pub fn to_feedback(self) -> Feedback {
        match self {
            FeedbackSpec::Apple => Feedback::AppleTasting,
            FeedbackSpec::Bandit => Feedback::Bandit,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeedbackSpec::Apple => "apple",
            FeedbackSpec::Bandit => "bandit",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default = "default_source_kind")]
    pub kind: String,
    pub c0: Option<f64>,
    pub cap_height: Option<f64>,
    pub file: Option<String>,
}

fn default_source_kind() -> String {
    "uniform_ball".into()
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            kind: default_source_kind(),
            c0: None,
            cap_height: None,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    #[serde(default = "default_agent_mode")]
    pub mode: String,
    #[serde(default)]
    pub gamma_th: f64,
    #[serde(default = "default_alpha_rule")]
    pub alpha_rule: String,
    #[serde(default)]
    pub clip_to_ball: bool,
}

fn default_agent_mode() -> String {
    "lazy".into()
}

fn default_alpha_rule() -> String {
    "uniform_random".into()
}

impl Default for AgentSpec {
    fn default() -> Self {
        AgentSpec {
            mode: default_agent_mode(),
            gamma_th: 0.0,
            alpha_rule: default_alpha_rule(),
            clip_to_ball: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ThetaSpec {
    /// Explicit ground-truth vectors; absent means seeded random unit.
    pub theta1: Option<Vec<f64>>,
    pub theta0: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub t0: Option<usize>,
    pub tau_star: Option<usize>,
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
    pub grid_cap: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    #[serde(default = "default_feedback")]
    pub feedback: FeedbackSpec,
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub delta: f64,
    pub sigma: f64,
    #[serde(default)]
    pub r0: f64,
    #[serde(default = "default_noise")]
    pub noise: String,
    pub seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Defaults to the powers of two up to T, plus T itself.
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub agent: AgentSpec,
    #[serde(default)]
    pub theta: ThetaSpec,
    #[serde(default)]
    pub overrides: Overrides,
}

fn default_feedback() -> FeedbackSpec {
    FeedbackSpec::Apple
}

fn default_noise() -> String {
    "gaussian".into()
}

impl ExperimentConfig {
    pub fn noise_kind(&self) -> Result<NoiseKind> {
        match self.noise.as_str() {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "bounded_uniform" => Ok(NoiseKind::BoundedUniform),
            other => Err(Error::Config(format!("unknown noise kind '{other}'"))),
        }
    }

    pub fn effective_checkpoints(&self) -> Vec<usize> {
        let mut cps = match &self.checkpoints {
            Some(c) => c.clone(),
            None => {
                let mut v = Vec::new();
                let mut p = 1usize;
                while p <= self.horizon {
                    v.push(p);
                    match p.checked_mul(2) {
                        Some(n) => p = n,
                        None => break,
                    }
                }
                v
            }
        };
        if !cps.contains(&self.horizon) {
            cps.push(self.horizon);
        }
        cps.sort_unstable();
        cps.dedup();
        cps
    }

    /// Build the context source from the spec (adversarial files are read
    /// relative to the working directory).
    pub fn context_source(&self) -> Result<ContextSource> {
        let src = match self.source.kind.as_str() {
            "uniform_ball" => ContextSource::UniformBall { d: self.d },
            "uniform_sphere" => ContextSource::UniformSphere { d: self.d },
            "mixture_tilted" => ContextSource::MixtureTilted {
                d: self.d,
                c0: self.source.c0.unwrap_or(0.5),
                alt: CapComponent {
                    cap_height: self.source.cap_height.unwrap_or(0.7),
                },
            },
            "adversarial" => {
                let path = self.source.file.as_ref().ok_or_else(|| {
                    Error::Config("adversarial source requires a file path".into())
                })?;
                crate::env::parse_adversarial_file(std::path::Path::new(path), self.d)
                    .map_err(|e| Error::Config(e.to_string()))?
            }
            other => return Err(Error::Config(format!("unknown source kind '{other}'"))),
        };
        src.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(src)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Config("delta must lie in [0,1)".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::Config("sigma must be >= 0".into()));
        }
        if self.d == 0 {
            return Err(Error::Config("d must be >= 1".into()));
        }
        if self.horizon < 2 * self.d {
            return Err(Error::Config(format!(
                "T must be >= 2d = {}, got {}",
                2 * self.d,
                self.horizon
            )));
        }
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be >= 1".into()));
        }
        match self.agent.mode.as_str() {
            "lazy" | "trembling" => {}
            other => return Err(Error::Config(format!("unknown agent mode '{other}'"))),
        }
        match self.agent.alpha_rule.as_str() {
            "fixed" | "uniform_random" | "adversarial_max" => {}
            other => return Err(Error::Config(format!("unknown alpha rule '{other}'"))),
        }
        self.noise_kind()?;
        if let Some(t1) = &self.theta.theta1 {
            if t1.len() != self.d {
                return Err(Error::Config("theta1 dimension mismatch".into()));
            }
        }
        if let Some(t0) = &self.theta.theta0 {
            if t0.len() != self.d {
                return Err(Error::Config("theta0 dimension mismatch".into()));
            }
            if self.feedback == FeedbackSpec::Apple {
                return Err(Error::Config(
                    "theta0 is only meaningful under bandit feedback".into(),
                ));
            }
        }
        if self.algorithm == Algorithm::Exp3Sae {
            let t_f = self.horizon as f64;
            let epsilon = self.overrides.epsilon.unwrap_or_else(|| {
                (self.d as f64 * self.sigma * t_f.ln() / t_f).powf(1.0 / (self.d as f64 + 2.0))
            });
            let cap = self.overrides.grid_cap.unwrap_or(DEFAULT_GRID_CAP);
            build_policy_grid(self.d, epsilon, cap)?;
        }
        for &c in self.effective_checkpoints().iter() {
            if c == 0 || c > self.horizon {
                return Err(Error::Config(format!(
                    "checkpoint {c} outside 1..=T"
                )));
            }
        }
        Ok(())
    }
}

/// Parse and validate a TOML experiment configuration file.
pub fn parse_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig =
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
