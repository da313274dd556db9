//! Off-policy actor-critic learners with a behavior-cloning term on planner
//! demonstrations.
//!
//! Two algorithms are provided: a deterministic policy with Gaussian
//! exploration noise ([`Algo::Ddpg`]) and a squashed-Gaussian maximum-entropy
//! policy with twin critics ([`Algo::Sac`]). Either can run in one of three
//! [`Mode`]s that differ only in how planner demonstrations reach the
//! learner.

pub mod agent;
pub mod bc;
pub mod returns;
pub mod train;

pub use agent::{Agent, ActorPolicy, Batch, UpdateStats};
pub use returns::{one_step_return, q_filter, reward_filter, strict_mask};
pub use train::{train, EpochMetrics, TrainConfig, Trainer};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Ddpg,
    Sac,
}

/// How planner demonstrations are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// No planning; interaction data only.
    Plain,
    /// Demonstrations are pushed into the interaction buffer, no BC term.
    Demon,
    /// Separate demonstration buffer plus the filtered BC term.
    SilpPlus,
}

/// Per-sample gate on the BC term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    /// Compare model-evaluated one-step returns.
    Reward,
    /// Compare critic values.
    Q,
    /// No BC term; demonstrations reach the learner through the interaction
    /// buffer only.
    None,
}

macro_rules! parse_enum {
    ($t:ty, $($s:literal => $v:expr),+ $(,)?) => {
        impl std::str::FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)+
                    _ => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($t), " `{}` (expected one of: ", $($s, " ",)+ ")"),
                        s
                    ))),
                }
            }
        }
    };
}

parse_enum!(Algo, "ddpg" => Algo::Ddpg, "sac" => Algo::Sac);
parse_enum!(Mode, "plain" => Mode::Plain, "demon" => Mode::Demon, "silp_plus" => Mode::SilpPlus);
parse_enum!(Filter, "reward" => Filter::Reward, "q" => Filter::Q, "none" => Filter::None);

/// Learner hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub gamma: f64,
    /// Weight of the RL objective in the actor update.
    pub lambda1: f64,
    /// Weight of the BC term in the actor update.
    pub lambda2: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    /// Target-network smoothing coefficient.
    pub tau: f64,
    pub batch_pi: usize,
    pub batch_demo: usize,
    /// Return horizon of the filter; only 1 is supported.
    pub k: usize,
    pub filter: Filter,
    pub hidden: Vec<usize>,
    pub replay_capacity: usize,
    pub demo_capacity: usize,
    /// Exploration noise std of the deterministic policy.
    pub ddpg_noise: f64,
    pub init_alpha: f64,
    /// Entropy target; `None` means `-n_joints`.
    pub target_entropy: Option<f64>,
    /// Divide the BC sum by the demo batch size.
    pub normalize_bc: bool,
    /// Stop the one-step lookahead at terminal transitions.
    pub truncate_on_done: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            gamma: 0.99,
            lambda1: 1.0,
            lambda2: 1.0,
            actor_lr: 2e-3,
            critic_lr: 2e-3,
            alpha_lr: 3e-4,
            tau: 0.005,
            batch_pi: 128,
            batch_demo: 128,
            k: 1,
            filter: Filter::Reward,
            hidden: vec![256, 256],
            replay_capacity: 1_000_000,
            demo_capacity: crate::demo::DEMO_CAPACITY,
            ddpg_noise: 0.1,
            init_alpha: 0.1,
            target_entropy: None,
            normalize_bc: false,
            truncate_on_done: false,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return bad("lambda1 and lambda2 must be non-negative");
        }
        if self.k != 1 {
            return bad("only the one-step return (k = 1) is supported");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        for (name, lr) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr), ("alpha_lr", self.alpha_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.batch_pi == 0 || self.batch_demo == 0 {
            return bad("batch sizes must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be non-empty and positive");
        }
        if self.replay_capacity == 0 || self.demo_capacity == 0 {
            return bad("buffer capacities must be positive");
        }
        if !(self.ddpg_noise >= 0.0 && self.init_alpha > 0.0) {
            return bad("ddpg_noise must be >= 0 and init_alpha > 0");
        }
        Ok(())
    }
}
