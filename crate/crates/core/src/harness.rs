//! Experiment execution: seeded simulation of the commit / best-respond /
//! act / feedback loop, checkpoint artifacts, sweeps, and summaries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agent::{best_respond, AgentBehavior, AlphaRule, TieBreaking};
use crate::algo::{Doubling, Etc, Exp3Params, Exp3Sae, Learner, SaOls};
use crate::config::{Algorithm, ExperimentConfig, FeedbackSpec};
use crate::env::{
    expected_reward, sample_context, sample_unit_sphere, ContextSource, Feedback, NoiseModel,
    RewardModel,
};
use crate::error::{Error, Result};
use crate::eval::{instantaneous_regret, RoundLog};
use crate::linalg::{min_eigenvalue, norm2, sub, SymMat};

/// One emitted checkpoint record (one CSV row).
#[derive(Debug, Clone)]
pub struct CheckpointRow {
    pub seed: u64,
    pub t: usize,
    pub cum_regret_expected: f64,
    pub cum_reward_realized: f64,
    pub theta1_err: Option<f64>,
    pub theta0_err: Option<f64>,
    pub clean_count: usize,
    pub lambda_min_ratio: f64,
}

/// Results of one experiment (all seeds).
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub run_id: String,
    pub rows: Vec<CheckpointRow>,
    /// Per-seed full round logs; populated only when tracing is on.
    pub traces: Vec<Vec<RoundLog>>,
}

pub const CSV_HEADER: &str = "run_id,algorithm,feedback,d,T,delta,sigma,r0,source,seed,t,\
cum_regret_expected,cum_reward_realized,theta1_err,theta0_err,clean_count,lambda_min_ratio";

pub fn run_id(cfg: &ExperimentConfig) -> String {
    format!(
        "{}_{}_d{}_T{}_b{}",
        cfg.algorithm.name(),
        cfg.feedback.name(),
        cfg.d,
        cfg.horizon,
        cfg.base_seed
    )
}

fn behavior_from(cfg: &ExperimentConfig) -> AgentBehavior {
    let alpha_rule = match cfg.agent.alpha_rule.as_str() {
        "fixed" => AlphaRule::Fixed,
        "adversarial_max" => AlphaRule::AdversarialMax,
        _ => AlphaRule::UniformRandom,
    };
    AgentBehavior {
        delta: cfg.delta,
        mode: if cfg.agent.mode == "trembling" {
            TieBreaking::Trembling
        } else {
            TieBreaking::Lazy
        },
        gamma_th: cfg.agent.gamma_th,
        alpha_rule,
        clip_to_ball: cfg.agent.clip_to_ball,
    }
}

/// Resolve ground truth: explicit vectors, or seeded random unit vectors.
pub fn resolve_model(cfg: &ExperimentConfig) -> Result<RewardModel> {
    let mut theta_rng = ChaCha8Rng::seed_from_u64(cfg.theta.seed);
    let theta1 = match &cfg.theta.theta1 {
        Some(v) => v.clone(),
        None => sample_unit_sphere(cfg.d, &mut theta_rng),
    };
    let theta0 = match cfg.feedback {
        FeedbackSpec::Apple => None,
        FeedbackSpec::Bandit => Some(match &cfg.theta.theta0 {
            Some(v) => v.clone(),
            None => sample_unit_sphere(cfg.d, &mut theta_rng),
        }),
    };
    RewardModel::new(
        theta1,
        theta0,
        cfg.r0,
        cfg.sigma,
        cfg.feedback.to_feedback(),
    )
    .map_err(|e| Error::Config(e.to_string()))
}

fn make_learner(cfg: &ExperimentConfig) -> Result<Box<dyn Learner>> {
    let fb = cfg.feedback.to_feedback();
    let gamma_th = if cfg.agent.mode == "trembling" {
        cfg.agent.gamma_th
    } else {
        0.0
    };
    Ok(match cfg.algorithm {
        Algorithm::SaOls => Box::new(SaOls::new(cfg.d, cfg.delta, cfg.r0, fb, gamma_th)),
        Algorithm::Etc => Box::new(match cfg.overrides.t0 {
            Some(t0) => Etc::with_exploration(cfg.d, cfg.delta, cfg.r0, fb, t0),
            None => Etc::new(cfg.d, cfg.delta, cfg.r0, fb, cfg.horizon, cfg.sigma, 0.05),
        }),
        Algorithm::Doubling => Box::new(match cfg.overrides.tau_star {
            Some(tau) => {
                Doubling::with_switch_time(cfg.d, cfg.delta, cfg.r0, fb, cfg.sigma, gamma_th, tau)
            }
            None => Doubling::new(
                cfg.d,
                cfg.delta,
                cfg.r0,
                fb,
                cfg.horizon,
                cfg.sigma,
                gamma_th,
            ),
        }),
        Algorithm::Exp3Sae => Box::new(Exp3Sae::new(
            cfg.d,
            cfg.delta,
            cfg.r0,
            fb,
            cfg.horizon,
            cfg.sigma,
            Exp3Params {
                epsilon: cfg.overrides.epsilon,
                lambda: cfg.overrides.lambda,
                grid_cap: cfg.overrides.grid_cap,
            },
        )?),
    })
}

/// Simulate one seed. Environment randomness (contexts, noise, agent
/// overshoot) and algorithm randomness use separate streams, so the
/// environment a seed produces is identical across algorithms.
pub fn run_seed(
    cfg: &ExperimentConfig,
    model: &RewardModel,
    source: &ContextSource,
    seed: u64,
    keep_logs: bool,
) -> Result<(Vec<CheckpointRow>, Vec<RoundLog>)> {
    let behavior = behavior_from(cfg);
    let noise = NoiseModel {
        sigma: cfg.sigma,
        kind: cfg.noise_kind()?,
    };
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut algo_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut learner = make_learner(cfg)?;
    let checkpoints = cfg.effective_checkpoints();
    let mut cp_iter = checkpoints.iter().peekable();
    let r0_shift = match model.feedback {
        Feedback::AppleTasting => cfg.r0,
        Feedback::Bandit => 0.0,
    };
    let mut cum_regret = 0.0;
    let mut cum_realized = 0.0;
    let mut clean_count = 0usize;
    let mut clean_gram = SymMat::zeros(cfg.d);
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut logs = Vec::new();
    for t in 1..=cfg.horizon {
        let x = sample_context(source, t, &mut env_rng)?;
        let policy = learner.choose_policy(t, &mut algo_rng);
        let x_prime = best_respond(&policy, &x, &behavior, &mut env_rng)?;
        let action = policy.assign(&x_prime);
        // One draw per round keeps noise streams aligned across policies.
        let eps = noise.draw(&mut env_rng);
        let (realized, observed) = match (model.feedback, action) {
            (Feedback::AppleTasting, 1) => {
                let r = expected_reward(model, 1, &x) + eps;
                (r, Some(r))
            }
            (Feedback::AppleTasting, _) => (model.r0, None),
            (Feedback::Bandit, a) => {
                let r = expected_reward(model, a, &x) + eps;
                (r, Some(r))
            }
        };
        let clean = crate::agent::is_clean(&policy, &x_prime, cfg.delta, behavior.gamma_th, r0_shift);
        if clean {
            clean_count += 1;
            if action == 1 {
                clean_gram.add_outer(&x_prime);
            }
        }
        let inst = instantaneous_regret(model, &x, action);
        cum_regret += inst;
        cum_realized += realized;
        learner.observe(&policy, &x_prime, action, observed)?;
        if keep_logs {
            logs.push(RoundLog {
                t,
                x: x.clone(),
                x_prime: x_prime.clone(),
                policy: policy.clone(),
                action,
                optimal_action: crate::eval::optimal_action(model, &x),
                clean,
                observed_reward: observed,
                inst_regret: inst,
            });
        }
        if cp_iter.peek() == Some(&&t) {
            cp_iter.next();
            let theta1_err = learner
                .theta1_hat()
                .map(|th| norm2(&sub(th, &model.theta1)));
            let theta0_err = match (learner.theta0_hat(), &model.theta0) {
                (Some(th), Some(t0)) => Some(norm2(&sub(th, t0))),
                _ => None,
            };
            let lam = min_eigenvalue(&clean_gram).unwrap_or(0.0) / t as f64;
            rows.push(CheckpointRow {
                seed,
                t,
                cum_regret_expected: cum_regret,
                cum_reward_realized: cum_realized,
                theta1_err,
                theta0_err,
                clean_count,
                lambda_min_ratio: lam,
            });
        }
    }
    Ok((rows, logs))
}

/// Run all seeds of a config, in parallel, with deterministic ordering.
pub fn run_experiment(cfg: &ExperimentConfig, keep_logs: bool) -> Result<RunArtifacts> {
    cfg.validate()?;
    let model = resolve_model(cfg)?;
    let source = cfg.context_source()?;
    if let Some(n) = source.len() {
        if n < cfg.horizon {
            return Err(Error::Config(format!(
                "adversarial sequence has {n} contexts but T = {}",
                cfg.horizon
            )));
        }
    }
    let results: Vec<Result<(Vec<CheckpointRow>, Vec<RoundLog>)>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|i| {
            run_seed(
                cfg,
                &model,
                &source,
                cfg.base_seed + i as u64,
                keep_logs,
            )
        })
        .collect();
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for r in results {
        let (seed_rows, logs) = r?;
        rows.extend(seed_rows);
        if keep_logs {
            traces.push(logs);
        }
    }
    Ok(RunArtifacts {
        run_id: run_id(cfg),
        rows,
        traces,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Render artifacts as CSV (header plus one row per checkpoint record).
pub fn to_csv(cfg: &ExperimentConfig, artifacts: &RunArtifacts) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &artifacts.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            artifacts.run_id,
            cfg.algorithm.name(),
            cfg.feedback.name(),
            cfg.d,
            cfg.horizon,
            cfg.delta,
            cfg.sigma,
            cfg.r0,
            cfg.source.kind,
            r.seed,
            r.t,
            r.cum_regret_expected,
            r.cum_reward_realized,
            fmt_opt(r.theta1_err),
            fmt_opt(r.theta0_err),
            r.clean_count,
            r.lambda_min_ratio,
        ));
    }
    out
}

/// Mean and sample standard deviation.
pub fn mean_std(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Final-regret summary of one run: per-seed final cumulative expected
/// regret, aggregated.
pub fn final_regrets(artifacts: &RunArtifacts, horizon: usize) -> Vec<f64> {
    artifacts
        .rows
        .iter()
        .filter(|r| r.t == horizon)
        .map(|r| r.cum_regret_expected)
        .collect()
}

/// One sweep point: horizon, per-seed final regrets.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub horizon: usize,
    pub regrets: Vec<f64>,
}

/// Run the same config across horizons; returns per-point artifacts and
/// summary stats.
pub fn run_sweep(
    base: &ExperimentConfig,
    horizons: &[usize],
    keep_logs: bool,
) -> Result<(Vec<(ExperimentConfig, RunArtifacts)>, Vec<SweepPoint>)> {
    let mut runs = Vec::new();
    let mut points = Vec::new();
    for &t in horizons {
        let mut cfg = base.clone();
        cfg.horizon = t;
        cfg.checkpoints = None;
        let artifacts = run_experiment(&cfg, keep_logs)?;
        points.push(SweepPoint {
            horizon: t,
            regrets: final_regrets(&artifacts, t),
        });
        runs.push((cfg, artifacts));
    }
    Ok((runs, points))
}

/// Summary CSV for a sweep: per-horizon mean and standard deviation.
pub fn sweep_summary_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("T,mean_regret,std_regret,seeds\n");
    for p in points {
        let (m, s) = mean_std(&p.regrets);
        out.push_str(&format!("{},{},{},{}\n", p.horizon, m, s, p.regrets.len()));
    }
    out
}

/// Minimal self-contained SVG line chart of mean regret vs horizon on
/// log-log axes.
pub fn sweep_plot_svg(points: &[SweepPoint]) -> String {
    let (w, h, margin) = (640.0, 480.0, 60.0);
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !p.regrets.is_empty())
        .map(|p| {
            let (m, _) = mean_std(&p.regrets);
            (p.horizon as f64, m.max(1e-12))
        })
        .collect();
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        xmin = xmin.min(x.ln());
        xmax = xmax.max(x.ln());
        ymin = ymin.min(y.ln());
        ymax = ymax.max(y.ln());
    }
    if !xmin.is_finite() || xmax - xmin < 1e-12 {
        xmax = xmin + 1.0;
    }
    if !ymin.is_finite() || ymax - ymin < 1e-12 {
        ymax = ymin + 1.0;
    }
    let sx = |x: f64| margin + (x.ln() - xmin) / (xmax - xmin) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y.ln() - ymin) / (ymax - ymin) * (h - 2.0 * margin);
    let path: Vec<String> = pts
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            format!("{}{:.2},{:.2}", if i == 0 { "M" } else { "L" }, sx(x), sy(y))
        })
        .collect();
    let dots: String = pts
        .iter()
        .map(|&(x, y)| {
            format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f6fb2\"/>",
                sx(x),
                sy(y)
            )
        })
        .collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
viewBox=\"0 0 {w} {h}\">\
<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\
<line x1=\"{m}\" y1=\"{ybase}\" x2=\"{xend}\" y2=\"{ybase}\" stroke=\"black\"/>\
<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{ybase}\" stroke=\"black\"/>\
<text x=\"{xmid}\" y=\"{h}\" dy=\"-10\" text-anchor=\"middle\" font-size=\"14\">T (log)</text>\
<text x=\"15\" y=\"{ymid}\" text-anchor=\"middle\" font-size=\"14\" \
transform=\"rotate(-90 15 {ymid})\">mean cumulative regret (log)</text>\
<path d=\"{path}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\"/>{dots}</svg>\n",
        m = margin,
        ybase = h - margin,
        xend = w - margin,
        xmid = w / 2.0,
        ymid = h / 2.0,
        path = path.join(" "),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::PolicyMode;
    use crate::config::parse_config;
    use std::io::Write;

    fn cfg(text: &str) -> ExperimentConfig {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        parse_config(f.path()).unwrap()
    }

    const BASE: &str = "algorithm = \"sa_ols\"\nd = 2\nT = 512\ndelta = 0.2\nsigma = 0.1\nseeds = 3\n";

    #[test]
    fn rerun_is_byte_identical() {
        let c = cfg(BASE);
        let a1 = run_experiment(&c, false).unwrap();
        let a2 = run_experiment(&c, false).unwrap();
        assert_eq!(to_csv(&c, &a1), to_csv(&c, &a2));
    }

    #[test]
    fn rows_sorted_by_seed_then_t() {
        let c = cfg(BASE);
        let a = run_experiment(&c, false).unwrap();
        let keys: Vec<(u64, usize)> = a.rows.iter().map(|r| (r.seed, r.t)).collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn apple_censorship_in_logs() {
        let c = cfg(BASE);
        let a = run_experiment(&c, true).unwrap();
        for logs in &a.traces {
            for l in logs {
                assert_eq!(l.observed_reward.is_some(), l.action == 1);
                assert!(l.inst_regret >= -1e-12);
            }
        }
    }

    #[test]
    fn etc_phase_boundary_matches_formula() {
        let c = cfg(
            "algorithm = \"etc\"\nd = 2\nT = 4096\ndelta = 0.2\nsigma = 0.1\nseeds = 1\n",
        );
        let t0 = crate::algo::etc_exploration_length(2, 4096, 0.1, 0.05);
        let a = run_experiment(&c, true).unwrap();
        let logs = &a.traces[0];
        for l in &logs[..t0] {
            assert_eq!(l.policy.mode, PolicyMode::AlwaysOne);
        }
        assert_ne!(logs[t0].policy.mode, PolicyMode::AlwaysOne);
    }

    #[test]
    fn zero_noise_sa_ols_flat_tail() {
        let c = cfg("algorithm = \"sa_ols\"\nd = 2\nT = 4096\ndelta = 0.2\nsigma = 0.0\nseeds = 1\n");
        let a = run_experiment(&c, true).unwrap();
        let final_row = a.rows.last().unwrap();
        assert!(final_row.theta1_err.unwrap() <= 1e-8);
        // No regret accrues once the estimate is exact.
        let logs = &a.traces[0];
        let tail: f64 = logs[logs.len() / 2..].iter().map(|l| l.inst_regret).sum();
        assert!(tail <= 1e-9, "tail regret {tail}");
    }

    #[test]
    fn adversarial_shorter_than_horizon_rejected() {
        let mut ctx = tempfile::NamedTempFile::new().unwrap();
        ctx.write_all(b"0.1,0.2\n0.3,0.1\n").unwrap();
        let text = format!(
            "algorithm = \"sa_ols\"\nd = 2\nT = 512\ndelta = 0.2\nsigma = 0.1\nseeds = 1\n\
[source]\nkind = \"adversarial\"\nfile = \"{}\"\n",
            ctx.path().display()
        );
        let c = cfg(&text);
        assert!(matches!(run_experiment(&c, false), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_produces_summary_and_plot() {
        let c = cfg(BASE);
        let (_, points) = run_sweep(&c, &[256, 512, 1024, 2048], false).unwrap();
        let csv = sweep_summary_csv(&points);
        assert!(csv.lines().count() == 5);
        let svg = sweep_plot_svg(&points);
        assert!(svg.starts_with("<svg"));
    }
}
