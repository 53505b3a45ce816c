//! The principal's strategies as interchangeable online learners: commit
//! to a policy, observe the round's outcome, update state.

mod doubling;
mod etc;
mod exp3;
mod sa_ols;

pub use doubling::{doubling_switch_time, Doubling};
pub use etc::{etc_exploration_length, Etc};
pub use exp3::{build_policy_grid, Exp3Params, Exp3Sae, DEFAULT_GRID_CAP};
pub use sa_ols::SaOls;

use rand_chacha::ChaCha8Rng;

use crate::agent::LinearThresholdPolicy;
use crate::error::Result;
use crate::linalg::SymMat;

/// One online learner interface shared by all principal strategies.
pub trait Learner {
    /// Commit to the policy for round `t` (1-based).
    fn choose_policy(&mut self, t: usize, rng: &mut ChaCha8Rng) -> LinearThresholdPolicy;

    /// Feed back the observed context, the action taken, and the reward
    /// (present iff observed under the feedback model).
    fn observe(
        &mut self,
        policy: &LinearThresholdPolicy,
        x_prime: &[f64],
        action: u8,
        reward: Option<f64>,
    ) -> Result<()>;

    /// Current estimate of theta^(1), when the strategy maintains one.
    fn theta1_hat(&self) -> Option<&[f64]> {
        None
    }

    /// Current estimate of theta^(0), when the strategy maintains one.
    fn theta0_hat(&self) -> Option<&[f64]> {
        None
    }
}

/// Incremental OLS sufficient statistics: Gram matrix and moment vector.
/// Solving after each insertion is identical to refitting on the full
/// dataset.
#[derive(Debug, Clone)]
pub(crate) struct OlsAccumulator {
    pub gram: SymMat,
    pub moment: Vec<f64>,
    pub n: usize,
}

impl OlsAccumulator {
    pub fn new(d: usize) -> Self {
        OlsAccumulator {
            gram: SymMat::zeros(d),
            moment: vec![0.0; d],
            n: 0,
        }
    }

    pub fn insert(&mut self, x: &[f64], r: f64) {
        self.gram.add_outer(x);
        for (m, xi) in self.moment.iter_mut().zip(x) {
            *m += r * xi;
        }
        self.n += 1;
    }

    pub fn solve(&self) -> Vec<f64> {
        if self.n == 0 {
            return vec![0.0; self.moment.len()];
        }
        self.gram.pinv_solve(&self.moment)
    }
}
