//! Networks, losses with analytic gradients, and the update step.

use std::f64::consts::LN_2;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::returns::{q_filter, reward_filter};
use super::{Algo, Filter, LearnerConfig};
use crate::env::{Action, EnvModel, EnvState, Transition};
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Cache, Grads, Mlp};

const LOG_STD_MIN: f64 = -20.0;
const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Row-major arrays for one minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub s: Array2<f64>,
    pub a: Array2<f64>,
    pub r: Array1<f64>,
    pub s_next: Array2<f64>,
    pub done: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Self {
        let sd = ts.first().map_or(0, |t| t.s.angles.len() + 8);
        let n = ts.first().map_or(0, |t| t.a.values().len());
        let mut s = Vec::with_capacity(ts.len() * sd);
        let mut s_next = Vec::with_capacity(ts.len() * sd);
        let mut a = Vec::with_capacity(ts.len() * n);
        for t in ts {
            t.s.write_features(&mut s);
            t.s_next.write_features(&mut s_next);
            a.extend_from_slice(t.a.values());
        }
        let b = ts.len();
        Batch {
            s: Array2::from_shape_vec((b, sd), s).expect("feature width"),
            a: Array2::from_shape_vec((b, n), a).expect("action width"),
            r: ts.iter().map(|t| t.r).collect(),
            s_next: Array2::from_shape_vec((b, sd), s_next).expect("feature width"),
            done: ts.iter().map(|t| f64::from(u8::from(t.done))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn concat(&self, other: &Batch) -> Batch {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        let c2 = |a: &Array2<f64>, b: &Array2<f64>| concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
        let c1 = |a: &Array1<f64>, b: &Array1<f64>| concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
        Batch {
            s: c2(&self.s, &other.s),
            a: c2(&self.a, &other.a),
            r: c1(&self.r, &other.r),
            s_next: c2(&self.s_next, &other.s_next),
            done: c1(&self.done, &other.done),
        }
    }
}

fn state_action(s: ArrayView2<f64>, a: ArrayView2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[s, a]).expect("matching rows")
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 - tanh(u)^2)` without cancellation.
fn ln_one_minus_tanh2(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

/// Reparameterized sample of the squashed Gaussian policy.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    pub a: Array2<f64>,
    pub logp: Array1<f64>,
    std: Array2<f64>,
    /// Whether the raw log-std was inside the clamp range (gradient flows).
    raw_free: Array2<bool>,
}

/// `out` holds the mean in its first `n` columns and the raw log-std in the
/// rest; `eps` is standard normal noise.
pub fn squash(out: &Array2<f64>, eps: ArrayView2<f64>) -> SquashedSample {
    let n = eps.ncols();
    let rows = out.nrows();
    let mut a = Array2::zeros((rows, n));
    let mut std = Array2::zeros((rows, n));
    let mut raw_free = Array2::from_elem((rows, n), true);
    let mut logp = Array1::zeros(rows);
    for i in 0..rows {
        for j in 0..n {
            let raw = out[[i, n + j]];
            let log_std = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            raw_free[[i, j]] = raw > LOG_STD_MIN && raw < LOG_STD_MAX;
            let sd = log_std.exp();
            let e = eps[[i, j]];
            let u = out[[i, j]] + sd * e;
            a[[i, j]] = u.tanh();
            std[[i, j]] = sd;
            logp[i] += -0.5 * e * e - log_std - HALF_LN_2PI - ln_one_minus_tanh2(u);
        }
    }
    SquashedSample { a, logp, std, raw_free }
}

/// Deterministic actions for a batch of states.
pub fn deterministic_actions(actor: &Mlp, algo: Algo, s: ArrayView2<f64>) -> Array2<f64> {
    let out = actor.forward(s);
    match algo {
        Algo::Ddpg => out,
        Algo::Sac => {
            let n = out.ncols() / 2;
            out.slice(s![.., ..n]).mapv(f64::tanh)
        }
    }
}

/// Mean squared TD error `(1/B) sum (Q(s,a) - y)^2` and its gradient.
pub fn critic_loss_grad(critic: &Mlp, s: ArrayView2<f64>, a: ArrayView2<f64>, y: &Array1<f64>) -> (f64, Grads) {
    let b = s.nrows() as f64;
    let cache = critic.forward_cached(state_action(s, a).view());
    let diff = &cache.output().column(0) - y;
    let loss = diff.mapv(|d| d * d).sum() / b;
    let g = (diff * (2.0 / b)).insert_axis(Axis(1));
    (loss, critic.backward(&cache, &g).0)
}

/// Per-row minimum over critics (ties resolved to the first critic), with
/// caches for backpropagation.
fn min_q(critics: &[Mlp], x: ArrayView2<f64>) -> (Vec<Cache>, Array1<f64>, Vec<usize>) {
    let caches: Vec<Cache> = critics.iter().map(|c| c.forward_cached(x)).collect();
    let rows = x.nrows();
    let mut q = Array1::from_elem(rows, f64::INFINITY);
    let mut arg = vec![0; rows];
    for (k, c) in caches.iter().enumerate() {
        for i in 0..rows {
            let v = c.output()[[i, 0]];
            if v < q[i] {
                q[i] = v;
                arg[i] = k;
            }
        }
    }
    (caches, q, arg)
}

/// `dL/da` for `L = sum_i w_i * min_k Q_k(s_i, a_i)`.
fn min_q_action_grad(critics: &[Mlp], caches: &[Cache], arg: &[usize], w: f64, state_dim: usize) -> Array2<f64> {
    let rows = arg.len();
    let n = critics[0].input_dim() - state_dim;
    let mut out = Array2::zeros((rows, n));
    for (k, critic) in critics.iter().enumerate() {
        let mut g = Array2::zeros((rows, 1));
        let mut any = false;
        for i in 0..rows {
            if arg[i] == k {
                g[[i, 0]] = w;
                any = true;
            }
        }
        if any {
            let (_, gin) = critic.backward(&caches[k], &g);
            out += &gin.slice(s![.., state_dim..]);
        }
    }
    out
}

/// Deterministic policy objective `-(1/B) sum Q(s, mu(s))` and its gradient
/// with respect to the actor.
pub fn ddpg_actor_loss_grad(actor: &Mlp, critic: &Mlp, s: ArrayView2<f64>) -> (f64, Grads) {
    let b = s.nrows() as f64;
    let cache = actor.forward_cached(s);
    let x = state_action(s, cache.output().view());
    let (qc, q, arg) = min_q(std::slice::from_ref(critic), x.view());
    let loss = -q.sum() / b;
    let g = min_q_action_grad(std::slice::from_ref(critic), &qc, &arg, -1.0 / b, s.ncols());
    (loss, actor.backward(&cache, &g).0)
}

/// Entropy-regularized objective `(1/B) sum (alpha log pi(a|s) - min Q(s,a))`
/// with `a` reparameterized by the noise `eps`. Also returns `log pi`.
pub fn sac_actor_loss_grad(
    actor: &Mlp,
    critics: &[Mlp],
    s: ArrayView2<f64>,
    eps: ArrayView2<f64>,
    alpha: f64,
) -> (f64, Grads, Array1<f64>) {
    let b = s.nrows() as f64;
    let n = eps.ncols();
    let cache = actor.forward_cached(s);
    let smp = squash(cache.output(), eps);
    let x = state_action(s, smp.a.view());
    let (qc, q, arg) = min_q(critics, x.view());
    let loss = (alpha * &smp.logp - &q).sum() / b;
    let dq = min_q_action_grad(critics, &qc, &arg, -1.0 / b, s.ncols());
    let mut gout = Array2::zeros((s.nrows(), 2 * n));
    for i in 0..s.nrows() {
        for j in 0..n {
            let a = smp.a[[i, j]];
            // d/du of -ln(1 - tanh(u)^2) is 2 tanh(u)
            let gu = dq[[i, j]] * (1.0 - a * a) + alpha / b * 2.0 * a;
            gout[[i, j]] = gu;
            if smp.raw_free[[i, j]] {
                gout[[i, n + j]] = gu * smp.std[[i, j]] * eps[[i, j]] - alpha / b;
            }
        }
    }
    let grads = actor.backward(&cache, &gout).0;
    (loss, grads, smp.logp)
}

/// Behavior-cloning loss `c * sum_i mask_i * |pi(s_i) - a_i|^2` where `c` is
/// 1, or `1/B` when `normalize` is set.
pub fn bc_loss_grad(
    actor: &Mlp,
    algo: Algo,
    s: ArrayView2<f64>,
    a: ArrayView2<f64>,
    mask: &[bool],
    normalize: bool,
) -> (f64, Grads) {
    let c = if normalize { 1.0 / s.nrows().max(1) as f64 } else { 1.0 };
    let n = a.ncols();
    let cache = actor.forward_cached(s);
    let out = cache.output();
    let mut gout = Array2::zeros(out.raw_dim());
    let mut loss = 0.0;
    for i in 0..s.nrows() {
        if !mask[i] {
            continue;
        }
        for j in 0..n {
            let (pi, dpi_dout) = match algo {
                Algo::Ddpg => (out[[i, j]], 1.0),
                Algo::Sac => {
                    let t = out[[i, j]].tanh();
                    (t, 1.0 - t * t)
                }
            };
            let d = pi - a[[i, j]];
            loss += c * d * d;
            gout[[i, j]] = 2.0 * c * d * dpi_dout;
        }
    }
    (loss, actor.backward(&cache, &gout).0)
}

pub fn bc_loss(actor: &Mlp, algo: Algo, s: ArrayView2<f64>, a: ArrayView2<f64>, mask: &[bool], normalize: bool) -> f64 {
    let pi = deterministic_actions(actor, algo, s);
    let c = if normalize { 1.0 / s.nrows().max(1) as f64 } else { 1.0 };
    pi.outer_iter()
        .zip(a.outer_iter())
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|((p, a), _)| c * p.iter().zip(a).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum()
}

/// The actor network together with how to read its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorPolicy {
    pub net: Mlp,
    pub algo: Algo,
}

impl ActorPolicy {
    pub fn new<R: Rng + ?Sized>(algo: Algo, state_dim: usize, n_joints: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        let net = match algo {
            Algo::Ddpg => {
                sizes.push(n_joints);
                Mlp::new(&sizes, Activation::Relu, Activation::Tanh, rng)
            }
            Algo::Sac => {
                sizes.push(2 * n_joints);
                Mlp::new(&sizes, Activation::Relu, Activation::Identity, rng)
            }
        };
        ActorPolicy { net, algo }
    }

    /// Recovers the reading of a stored actor from its output width.
    pub fn from_net(net: Mlp, n_joints: usize) -> Result<Self> {
        let algo = if net.output_dim() == n_joints {
            Algo::Ddpg
        } else if net.output_dim() == 2 * n_joints {
            Algo::Sac
        } else {
            return Err(Error::Dimension {
                expected: n_joints,
                got: net.output_dim(),
            });
        };
        if net.input_dim() != EnvState::feature_len(n_joints) {
            return Err(Error::Dimension {
                expected: EnvState::feature_len(n_joints),
                got: net.input_dim(),
            });
        }
        Ok(ActorPolicy { net, algo })
    }

    pub fn n_joints(&self) -> usize {
        match self.algo {
            Algo::Ddpg => self.net.output_dim(),
            Algo::Sac => self.net.output_dim() / 2,
        }
    }

    pub fn act_batch(&self, s: ArrayView2<f64>) -> Array2<f64> {
        deterministic_actions(&self.net, self.algo, s)
    }

    pub fn act_states(&self, states: &[EnvState]) -> Vec<Action> {
        if states.is_empty() {
            return Vec::new();
        }
        let width = states[0].angles.len() + 8;
        let mut flat = Vec::with_capacity(states.len() * width);
        for st in states {
            st.write_features(&mut flat);
        }
        let x = Array2::from_shape_vec((states.len(), width), flat).expect("feature width");
        self.act_batch(x.view())
            .outer_iter()
            .map(|r| Action::new(r.iter().map(|v| v.clamp(-1.0, 1.0)).collect()))
            .collect()
    }

    /// Greedy (mean) action.
    pub fn act(&self, s: &EnvState) -> Action {
        self.act_states(std::slice::from_ref(s)).pop().expect("one row")
    }

    /// Exploratory action: Gaussian noise on the deterministic action, or a
    /// sample from the squashed Gaussian.
    pub fn explore<R: Rng + ?Sized>(&self, s: &EnvState, noise_std: f64, rng: &mut R) -> Action {
        let x = Array2::from_shape_vec((1, s.angles.len() + 8), s.features()).expect("feature width");
        let n = self.n_joints();
        match self.algo {
            Algo::Ddpg => {
                let out = self.net.forward(x.view());
                Action::new(
                    out.row(0)
                        .iter()
                        .map(|v| (v + noise_std * rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0))
                        .collect(),
                )
            }
            Algo::Sac => {
                let eps = Array2::from_shape_fn((1, n), |_| rng.sample(StandardNormal));
                let smp = squash(&self.net.forward(x.view()), eps.view());
                Action::new(smp.a.row(0).to_vec())
            }
        }
    }
}

/// Adam for a single scalar parameter.
#[derive(Debug, Clone)]
struct ScalarAdam {
    lr: f64,
    m: f64,
    v: f64,
    t: i32,
}

impl ScalarAdam {
    fn new(lr: f64) -> Self {
        ScalarAdam { lr, m: 0.0, v: 0.0, t: 0 }
    }

    fn step(&mut self, x: &mut f64, g: f64) {
        self.t += 1;
        self.m = 0.9 * self.m + 0.1 * g;
        self.v = 0.999 * self.v + 0.001 * g * g;
        let mh = self.m / (1.0 - 0.9f64.powi(self.t));
        let vh = self.v / (1.0 - 0.999f64.powi(self.t));
        *x -= self.lr * mh / (vh.sqrt() + 1e-8);
    }
}

/// Losses and counters from one update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub bc_loss: f64,
    /// Demo samples whose BC term was enabled by the filter.
    pub filter_pass: usize,
    pub alpha: f64,
}

/// Actor, critics, their targets and optimizers.
#[derive(Debug, Clone)]
pub struct Agent {
    pub cfg: LearnerConfig,
    pub policy: ActorPolicy,
    actor_target: Option<Mlp>,
    actor_opt: Adam,
    pub critics: Vec<Mlp>,
    critic_targets: Vec<Mlp>,
    critic_opts: Vec<Adam>,
    log_alpha: f64,
    alpha_opt: ScalarAdam,
    target_entropy: f64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(algo: Algo, n_joints: usize, cfg: LearnerConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let state_dim = EnvState::feature_len(n_joints);
        let policy = ActorPolicy::new(algo, state_dim, n_joints, &cfg.hidden, rng);
        let n_critics = match algo {
            Algo::Ddpg => 1,
            Algo::Sac => 2,
        };
        let mut sizes = vec![state_dim + n_joints];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(1);
        let critics: Vec<Mlp> = (0..n_critics)
            .map(|_| Mlp::new(&sizes, Activation::Relu, Activation::Identity, rng))
            .collect();
        Ok(Agent {
            actor_target: (algo == Algo::Ddpg).then(|| policy.net.clone()),
            actor_opt: Adam::new(&policy.net, cfg.actor_lr),
            critic_targets: critics.clone(),
            critic_opts: critics.iter().map(|c| Adam::new(c, cfg.critic_lr)).collect(),
            critics,
            log_alpha: cfg.init_alpha.ln(),
            alpha_opt: ScalarAdam::new(cfg.alpha_lr),
            target_entropy: cfg.target_entropy.unwrap_or(-(n_joints as f64)),
            policy,
            cfg,
        })
    }

    pub fn algo(&self) -> Algo {
        self.policy.algo
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn explore<R: Rng + ?Sized>(&self, s: &EnvState, rng: &mut R) -> Action {
        self.policy.explore(s, self.cfg.ddpg_noise, rng)
    }

    /// Minimum critic value of `(s, a)`.
    pub fn q_value(&self, s: &EnvState, a: &Action) -> f64 {
        let mut x = s.features();
        x.extend_from_slice(a.values());
        let x = Array2::from_shape_vec((1, x.len()), x).expect("row");
        self.critics
            .iter()
            .map(|c| c.forward(x.view())[[0, 0]])
            .fold(f64::INFINITY, f64::min)
    }

    fn critic_targets_for(&self, b: &Batch, rng: &mut (impl Rng + ?Sized)) -> Array1<f64> {
        let gamma = self.cfg.gamma;
        let next_q = match self.algo() {
            Algo::Ddpg => {
                let a = self.actor_target.as_ref().expect("ddpg target actor").forward(b.s_next.view());
                self.critic_targets[0]
                    .forward(state_action(b.s_next.view(), a.view()).view())
                    .column(0)
                    .to_owned()
            }
            Algo::Sac => {
                let n = self.policy.n_joints();
                let eps = Array2::from_shape_fn((b.len(), n), |_| rng.sample(StandardNormal));
                let smp = squash(&self.policy.net.forward(b.s_next.view()), eps.view());
                let x = state_action(b.s_next.view(), smp.a.view());
                let (_, q, _) = min_q(&self.critic_targets, x.view());
                q - self.alpha() * &smp.logp
            }
        };
        &b.r + &(gamma * (1.0 - &b.done) * next_q)
    }

    /// One gradient step on critics, actor, entropy coefficient and targets.
    ///
    /// `pi` is sampled from the interaction buffer, `demos` from the
    /// demonstration buffer (empty when there is none). The critics train on
    /// both; the RL objective uses `pi`; the BC term uses `demos` gated by
    /// the configured filter.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        pi: &[&Transition],
        demos: &[&Transition],
        model: &EnvModel,
        rng: &mut R,
    ) -> Result<UpdateStats> {
        if pi.is_empty() {
            return Err(Error::Training("update called with an empty policy batch".into()));
        }
        let mut stats = UpdateStats::default();
        let pb = Batch::from_transitions(pi);
        let db = Batch::from_transitions(demos);
        let cb = pb.concat(&db);

        // critics
        let y = self.critic_targets_for(&cb, rng);
        for (k, critic) in self.critics.iter_mut().enumerate() {
            let (loss, g) = critic_loss_grad(critic, cb.s.view(), cb.a.view(), &y);
            check("critic", loss, &g)?;
            self.critic_opts[k].step(critic, &g);
            stats.critic_loss += loss / self.critic_targets.len() as f64;
        }

        // actor: RL term
        let (actor_loss, mut grads, logp) = match self.algo() {
            Algo::Ddpg => {
                let (l, g) = ddpg_actor_loss_grad(&self.policy.net, &self.critics[0], pb.s.view());
                (l, g, None)
            }
            Algo::Sac => {
                let eps = Array2::from_shape_fn((pb.len(), self.policy.n_joints()), |_| rng.sample(StandardNormal));
                let (l, g, lp) = sac_actor_loss_grad(&self.policy.net, &self.critics, pb.s.view(), eps.view(), self.alpha());
                (l, g, Some(lp))
            }
        };
        check("actor", actor_loss, &grads)?;
        stats.actor_loss = actor_loss;
        if self.cfg.lambda1 != 1.0 {
            grads.scale(self.cfg.lambda1);
        }

        // actor: filtered BC term
        if !demos.is_empty() && self.cfg.filter != Filter::None {
            let mask = match self.cfg.filter {
                Filter::Reward => {
                    reward_filter(demos, |ss: &[EnvState]| self.policy.act_states(ss), model, self.cfg.gamma, self.cfg.truncate_on_done).0
                }
                Filter::Q => {
                    let acts = self.policy.act_states(&demos.iter().map(|t| t.s.clone()).collect::<Vec<_>>());
                    q_filter(demos, &acts, |s, a| self.q_value(s, a))
                }
                Filter::None => unreachable!(),
            };
            stats.filter_pass = mask.iter().filter(|&&m| m).count();
            if stats.filter_pass > 0 && self.cfg.lambda2 > 0.0 {
                let (bl, mut bg) = bc_loss_grad(&self.policy.net, self.algo(), db.s.view(), db.a.view(), &mask, self.cfg.normalize_bc);
                check("bc", bl, &bg)?;
                stats.bc_loss = bl;
                bg.scale(self.cfg.lambda2);
                grads.add_assign(&bg);
            }
        }
        self.actor_opt.step(&mut self.policy.net, &grads);

        // entropy coefficient
        if let Some(lp) = logp {
            let g = -(lp.mean().unwrap_or(0.0) + self.target_entropy);
            self.alpha_opt.step(&mut self.log_alpha, g);
        }
        stats.alpha = self.alpha();

        let tau = self.cfg.tau;
        for (t, c) in self.critic_targets.iter_mut().zip(&self.critics) {
            t.soft_update_from(c, tau);
        }
        if let Some(t) = &mut self.actor_target {
            t.soft_update_from(&self.policy.net, tau);
        }
        Ok(stats)
    }
}

fn check(what: &str, loss: f64, g: &Grads) -> Result<()> {
    if loss.is_finite() && g.is_finite() {
        Ok(())
    } else {
        Err(Error::Training(format!(
            "non-finite {what} update: loss = {loss}, gradient norm = {}",
            g.flatten().iter().map(|v| v * v).sum::<f64>().sqrt()
        )))
    }
}
