//! Randomized invariant checks for the agent geometry, the exponential
//! weights distribution, the OLS estimator, and regret accounting.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stratlab::agent::{
    best_respond, is_clean, AgentBehavior, AlphaRule, LinearThresholdPolicy,
};
use stratlab::algo::{Exp3Params, Exp3Sae, Learner};
use stratlab::env::{sample_unit_ball, Feedback};
use stratlab::eval::instantaneous_regret;
use stratlab::linalg::{axpy, dot, norm2, ols_fit, scale, sub};

fn vec_in_ball(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d).prop_map(move |v| {
        let n = norm2(&v);
        if n > 1.0 {
            scale(&v, 1.0 / n)
        } else {
            v
        }
    })
}

fn nonzero_beta(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d)
        .prop_filter("nonzero slope", |v| norm2(v) > 1e-6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2500))]

    // 2500 cases x 4 contexts = 10^4 policy/context pairs per property.
    #[test]
    fn budget_direction_and_exactness(
        beta in nonzero_beta(3),
        tau_frac in -1.0f64..1.0,
        delta in 0.0f64..0.9,
        xs in prop::collection::vec(vec_in_ball(3), 4),
        seed in any::<u64>(),
    ) {
        let bnorm = norm2(&beta);
        let tau = tau_frac * (bnorm + 1.0);
        let policy = LinearThresholdPolicy::threshold(beta.clone(), tau);
        let behavior = AgentBehavior::lazy(delta);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in &xs {
            let xp = best_respond(&policy, x, &behavior, &mut rng).unwrap();
            let diff = sub(&xp, x);
            // Effort budget.
            prop_assert!(norm2(&diff) <= delta + 1e-12);
            // Movement along beta only.
            let along = dot(&diff, &beta) / bnorm;
            let ortho = sub(&diff, &scale(&beta, along / bnorm));
            prop_assert!(norm2(&ortho) <= 1e-12);
            // Lazy exactness: any actual move lands on the boundary.
            if diff.iter().any(|&v| v != 0.0) {
                prop_assert!((dot(&beta, &xp) - tau).abs() <= 1e-9);
            }
            // Indifference laziness: accepted agents do not move at all.
            if dot(&beta, x) >= tau {
                prop_assert_eq!(&xp, x);
            }
        }
    }

    #[test]
    fn clean_inference_is_sound(
        beta in nonzero_beta(2),
        delta in 0.0f64..0.9,
        r0 in 0.0f64..0.5,
        xs in prop::collection::vec(vec_in_ball(2), 4),
        seed in any::<u64>(),
    ) {
        // Deployed shifted policy: tau = delta * ||beta|| + r0.
        let tau = delta * norm2(&beta) + r0;
        let policy = LinearThresholdPolicy::threshold(beta, tau);
        let behavior = AgentBehavior::lazy(delta);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in &xs {
            let xp = best_respond(&policy, x, &behavior, &mut rng).unwrap();
            if is_clean(&policy, &xp, delta, 0.0, r0) {
                // A clean classification must imply a truthful report.
                prop_assert_eq!(&xp, x);
            }
        }
    }

    #[test]
    fn trembling_overshoot_within_cap(
        beta in nonzero_beta(2),
        delta in 0.05f64..0.9,
        gamma_th in 0.0f64..0.2,
        x in vec_in_ball(2),
        seed in any::<u64>(),
    ) {
        let tau = delta * norm2(&beta);
        let policy = LinearThresholdPolicy::threshold(beta, tau);
        let behavior = AgentBehavior::trembling(delta, gamma_th, AlphaRule::UniformRandom);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xp = best_respond(&policy, &x, &behavior, &mut rng).unwrap();
        prop_assert!(norm2(&sub(&xp, &x)) <= delta + 1e-12);
    }

    #[test]
    fn regret_is_scale_invariant(
        beta in nonzero_beta(2),
        tau_frac in -0.5f64..0.5,
        c in 0.01f64..100.0,
        x in vec_in_ball(2),
        seed in any::<u64>(),
    ) {
        let model = stratlab::env::RewardModel::new(
            vec![0.6, -0.5], None, 0.1, 0.0, Feedback::AppleTasting).unwrap();
        let tau = tau_frac * norm2(&beta);
        let p1 = LinearThresholdPolicy::threshold(beta.clone(), tau);
        let p2 = LinearThresholdPolicy::threshold(scale(&beta, c), c * tau);
        let behavior = AgentBehavior::lazy(0.2);
        let mut r1 = ChaCha8Rng::seed_from_u64(seed);
        let mut r2 = ChaCha8Rng::seed_from_u64(seed);
        let x1 = best_respond(&p1, &x, &behavior, &mut r1).unwrap();
        let x2 = best_respond(&p2, &x, &behavior, &mut r2).unwrap();
        let a1 = p1.assign(&x1);
        let a2 = p2.assign(&x2);
        prop_assert_eq!(a1, a2);
        let g1 = instantaneous_regret(&model, &x, a1);
        let g2 = instantaneous_regret(&model, &x, a2);
        prop_assert!((g1 - g2).abs() <= 1e-12);
    }
}

#[test]
fn exp3_distribution_invariants() {
    let mut alg = Exp3Sae::new(
        2,
        0.2,
        0.0,
        Feedback::AppleTasting,
        1 << 12,
        0.1,
        Exp3Params::default(),
    )
    .unwrap();
    let n = alg.grid_size() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut env = ChaCha8Rng::seed_from_u64(10);
    for t in 1..=2000 {
        let q = alg.sampling_distribution();
        let qsum: f64 = q.iter().sum();
        assert!((qsum - 1.0).abs() <= 1e-9, "q does not sum to 1 at t = {t}");
        let floor = alg.gamma_mix() / n;
        assert!(
            q.iter().all(|&qi| qi >= floor - 1e-12),
            "q dips below the mixing floor at t = {t}"
        );
        let psum: f64 = alg.expert_weights().iter().sum();
        assert!((psum - 1.0).abs() <= 1e-9, "p drifts from 1 at t = {t}");
        let policy = alg.choose_policy(t, &mut rng);
        let x = sample_unit_ball(2, &mut env);
        let action = policy.assign(&x);
        let reward = (action == 1).then(|| dot(&[0.6, -0.5], &x));
        alg.observe(&policy, &x, action, reward).unwrap();
    }
}

#[test]
fn ols_is_unbiased_on_noisy_fixed_design() {
    // Fixed design, fresh Gaussian noise per replication; the mean
    // estimate must approach theta at the Monte-Carlo rate.
    let theta = [0.3, -0.7];
    let design: Vec<Vec<f64>> = {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        (0..40).map(|_| sample_unit_ball(2, &mut rng)).collect()
    };
    let mut noise_rng = ChaCha8Rng::seed_from_u64(22);
    let reps = 2000;
    let mut mean = vec![0.0; 2];
    for _ in 0..reps {
        let data: Vec<(Vec<f64>, f64)> = design
            .iter()
            .map(|x| {
                let eps: f64 = rand::Rng::sample(&mut noise_rng, rand_distr::StandardNormal);
                (x.clone(), dot(&theta, x) + 0.3 * eps)
            })
            .collect();
        let est = ols_fit(&data).unwrap();
        mean = axpy(&mean, 1.0 / reps as f64, &est);
    }
    let err = norm2(&sub(&mean, &theta.to_vec()));
    assert!(err <= 0.01, "mean estimate off by {err}");
}

#[test]
fn determinism_byte_equality() {
    let toml = "algorithm = \"doubling\"\nd = 2\nT = 1024\ndelta = 0.3\nsigma = 0.1\nseeds = 4\n";
    let cfg: stratlab::config::ExperimentConfig = toml::from_str(toml).unwrap();
    cfg.validate().unwrap();
    let a = stratlab::harness::run_experiment(&cfg, false).unwrap();
    let b = stratlab::harness::run_experiment(&cfg, false).unwrap();
    assert_eq!(
        stratlab::harness::to_csv(&cfg, &a),
        stratlab::harness::to_csv(&cfg, &b)
    );
}
