//! Supervised behavior cloning from a demonstration dataset.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::agent::{bc_loss, bc_loss_grad, ActorPolicy, Batch};
use super::Algo;
use crate::env::Transition;
use crate::error::{Error, Result};
use crate::nn::Adam;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub algo: Algo,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch: usize,
    pub steps: usize,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            algo: Algo::Sac,
            hidden: vec![256, 256],
            lr: 1e-3,
            batch: 128,
            steps: 20_000,
        }
    }
}

/// Regresses a fresh policy's deterministic action onto the dataset actions
/// by mean squared error. Returns the policy and the final full-dataset loss.
pub fn bc_train<R: Rng + ?Sized>(data: &[Transition], cfg: &BcConfig, rng: &mut R) -> Result<(ActorPolicy, f64)> {
    let first = data.first().ok_or(Error::EmptyDataset("behavior cloning"))?;
    if cfg.batch == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config("bc batch and lr must be positive".into()));
    }
    let n = first.a.values().len();
    let sd = first.s.features().len();
    let mut policy = ActorPolicy::new(cfg.algo, sd, n, &cfg.hidden, rng);
    let mut opt = Adam::new(&policy.net, cfg.lr);
    let batch = cfg.batch.min(data.len());
    let mask = vec![true; batch];
    for _ in 0..cfg.steps {
        let picks: Vec<&Transition> = (0..batch).map(|_| &data[rng.random_range(0..data.len())]).collect();
        let b = Batch::from_transitions(&picks);
        let (_, g) = bc_loss_grad(&policy.net, policy.algo, b.s.view(), b.a.view(), &mask, true);
        opt.step(&mut policy.net, &g);
    }
    let all: Vec<&Transition> = data.iter().collect();
    let b = Batch::from_transitions(&all);
    let loss = bc_loss(&policy.net, policy.algo, b.s.view(), b.a.view(), &vec![true; data.len()], true);
    if !loss.is_finite() {
        return Err(Error::Training(format!("behavior cloning diverged (loss {loss})")));
    }
    Ok((policy, loss))
}
