//! Epoch loop: collect episodes, plan over visited states, generate
//! demonstrations, then run gradient updates.

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, Algo, Filter, LearnerConfig, Mode};
use crate::buffer::TransitionBuffer;
use crate::demo;
use crate::env::{ArmEnv, CollisionMode, EnvConfig, EnvState};
use crate::error::{Error, Result};
use crate::gp::GpHyper;
use crate::prm::{self, EdgeChecker, PairMode, Roadmap};

/// Random-number streams derived from one seed, kept apart so that
/// evaluation tasks never depend on training randomness.
pub mod stream {
    pub const TASKS: u64 = 0;
    pub const AGENT: u64 = 1;
    pub const EVAL: u64 = 2;
    pub const INIT: u64 = 3;
}

pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algo: Algo,
    pub mode: Mode,
    pub collision_mode: CollisionMode,
    /// Draw replacement actions after a collision from the reward-landscape
    /// GP instead of uniformly.
    pub gp_enabled: bool,
    pub gp: GpHyper,
    /// Roadmap neighbor distance in meters.
    pub neighbor_distance: f64,
    pub pair_mode: PairMode,
    pub n_pairs: usize,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub updates_per_epoch: usize,
    pub learner: LearnerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algo: Algo::Sac,
            mode: Mode::SilpPlus,
            collision_mode: CollisionMode::Learn,
            gp_enabled: false,
            gp: GpHyper::default(),
            neighbor_distance: prm::DEFAULT_NEIGHBOR_DISTANCE,
            pair_mode: PairMode::Anchored,
            n_pairs: 1,
            epochs: 300,
            episodes_per_epoch: 10,
            updates_per_epoch: 50,
            learner: LearnerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        self.gp.validate()?;
        if !(self.neighbor_distance > 0.0 && self.neighbor_distance.is_finite()) {
            return Err(Error::Config("neighbor_distance must be positive".into()));
        }
        if self.episodes_per_epoch == 0 {
            return Err(Error::Config("episodes_per_epoch must be at least 1".into()));
        }
        if self.n_pairs == 0 {
            return Err(Error::Config("n_pairs must be at least 1".into()));
        }
        Ok(())
    }

    /// Where planner demonstrations go: `Some(true)` for the separate
    /// demonstration buffer, `Some(false)` for the interaction buffer, `None`
    /// when planning is off.
    pub fn demo_routing(&self) -> Option<bool> {
        match self.mode {
            Mode::Plain => None,
            Mode::Demon => Some(false),
            Mode::SilpPlus => Some(self.learner.filter != Filter::None),
        }
    }
}

/// One row of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Fraction of this epoch's training episodes that reached the goal.
    pub success_rate: f64,
    pub collisions: usize,
    pub cumulative_collisions: usize,
    /// Environment steps since the start of training.
    pub steps: usize,
    /// Demo samples that passed the BC filter, summed over the epoch.
    pub filter_pass: usize,
    pub demos: usize,
    pub plans: usize,
    pub plans_reached: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub bc_loss: f64,
    pub alpha: f64,
}

/// Training state for one seed.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub env: ArmEnv,
    pub agent: Agent,
    pub replay: TransitionBuffer,
    pub demos: TransitionBuffer,
    task_rng: ChaCha8Rng,
    agent_rng: ChaCha8Rng,
    epoch: usize,
    steps: usize,
    collisions: usize,
}

impl Trainer {
    pub fn new(env_cfg: EnvConfig, cfg: TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let env = ArmEnv::new(env_cfg)?;
        let n = env.config().n_joints();
        let agent = Agent::new(cfg.algo, n, cfg.learner.clone(), &mut seeded(seed, stream::INIT))?;
        Ok(Trainer {
            replay: TransitionBuffer::new(cfg.learner.replay_capacity),
            demos: TransitionBuffer::new(cfg.learner.demo_capacity),
            env,
            agent,
            task_rng: seeded(seed, stream::TASKS),
            agent_rng: seeded(seed, stream::AGENT),
            epoch: 0,
            steps: 0,
            collisions: 0,
            cfg,
        })
    }

    /// Plans over one episode's visited states and returns demonstrations.
    fn plan_episode(&mut self, nodes: &[EnvState], goal: [f64; 2], obstacle: &crate::geom::Aabb) -> (Vec<crate::env::Transition>, usize, usize) {
        let model = self.env.model();
        let checker = EdgeChecker {
            arm: &model.arm,
            inflate: model.inflate,
            step_size: model.step_size,
        };
        let graph = Roadmap::build(nodes, self.cfg.neighbor_distance, obstacle, &checker);
        let pairs = prm::select_start_goal(&graph.nodes, goal, self.cfg.n_pairs, self.cfg.pair_mode, &mut self.task_rng);
        let mut out = Vec::new();
        let mut reached = 0;
        for &(start, end) in &pairs {
            let plan = graph.plan(start, end, graph.len());
            if plan.reached_goal && plan.path.len() >= 2 {
                reached += 1;
                out.extend(demo::demonstrations(model, &graph.path_states(&plan)));
            }
        }
        (out, pairs.len(), reached)
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn run_epoch(&mut self) -> Result<EpochMetrics> {
        self.epoch += 1;
        let mut m = EpochMetrics {
            epoch: self.epoch,
            success_rate: 0.0,
            collisions: 0,
            cumulative_collisions: 0,
            steps: 0,
            filter_pass: 0,
            demos: 0,
            plans: 0,
            plans_reached: 0,
            critic_loss: 0.0,
            actor_loss: 0.0,
            bc_loss: 0.0,
            alpha: self.agent.alpha(),
        };
        let routing = self.cfg.demo_routing();
        let gp = self.cfg.gp_enabled.then_some(self.cfg.gp);
        let mut successes = 0;
        for _ in 0..self.cfg.episodes_per_epoch {
            let task = self.env.sample_task(&mut self.task_rng)?;
            let (goal, obstacle) = (task.goal, task.obstacle);
            let s0 = self.env.reset(task)?;
            let agent = &self.agent;
            let rng = &mut self.agent_rng;
            let mut policy = |s: &EnvState| agent.explore(s, rng);
            let ep = prm::collect_episode(&mut policy, &mut self.env, self.cfg.collision_mode, gp.as_ref(), &mut self.task_rng)?;
            successes += usize::from(ep.success);
            m.collisions += ep.collisions;
            self.steps += ep.steps;
            self.replay.extend(ep.transitions);
            if let Some(separate) = routing {
                // the reset state is collision-free too and anchors the roadmap
                let mut nodes = Vec::with_capacity(ep.free_nodes.len() + 1);
                nodes.push(s0);
                nodes.extend(ep.free_nodes);
                let (demos, plans, reached) = self.plan_episode(&nodes, goal, &obstacle);
                m.plans += plans;
                m.plans_reached += reached;
                m.demos += demos.len();
                if separate {
                    self.demos.extend(demos);
                } else {
                    self.replay.extend(demos);
                }
            }
        }
        self.collisions += m.collisions;
        m.success_rate = successes as f64 / self.cfg.episodes_per_epoch as f64;
        m.cumulative_collisions = self.collisions;
        m.steps = self.steps;

        let lc = &self.cfg.learner;
        let mut done_updates = 0;
        if self.replay.len() >= lc.batch_pi {
            for _ in 0..self.cfg.updates_per_epoch {
                let pi = self.replay.sample(lc.batch_pi, &mut self.agent_rng);
                let demos = if routing == Some(true) {
                    self.demos.sample(lc.batch_demo, &mut self.agent_rng)
                } else {
                    Vec::new()
                };
                let st = self.agent.update(&pi, &demos, self.env.model(), &mut self.agent_rng)?;
                m.critic_loss += st.critic_loss;
                m.actor_loss += st.actor_loss;
                m.bc_loss += st.bc_loss;
                m.filter_pass += st.filter_pass;
                m.alpha = st.alpha;
                done_updates += 1;
            }
        }
        if done_updates > 0 {
            let k = done_updates as f64;
            m.critic_loss /= k;
            m.actor_loss /= k;
            m.bc_loss /= k;
        }
        debug!(
            "epoch {} success {:.2} collisions {} demos {} filter_pass {}",
            m.epoch, m.success_rate, m.collisions, m.demos, m.filter_pass
        );
        Ok(m)
    }
}

/// Trains one seed for `cfg.epochs` epochs, calling `on_epoch` after each.
pub fn train<F: FnMut(&EpochMetrics)>(
    env_cfg: EnvConfig,
    cfg: TrainConfig,
    seed: u64,
    mut on_epoch: F,
) -> Result<(Trainer, Vec<EpochMetrics>)> {
    let mut t = Trainer::new(env_cfg, cfg, seed)?;
    let mut rows = Vec::with_capacity(t.cfg.epochs);
    for _ in 0..t.cfg.epochs {
        let m = t.run_epoch()?;
        on_epoch(&m);
        rows.push(m);
    }
    Ok((t, rows))
}
